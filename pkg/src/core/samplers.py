"""
Metropolis-Hastings convencional, CGMC solo en el nivel grueso y el muestreador
de dos niveles con sus tres estrategias, para los ensambles canónico y microcanónico
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from typing_extensions import Self

from src.core.energy import (
    CoarseHamiltonian, Hamiltonian, delta_coarse, delta_exchange, delta_flip, delta_flip_parts, energy_coarse,
    energy_micro,
)
from src.core.errors import ConfigurationError, StatisticsError
from src.core.lattice import CoarseGeometry, LatticeGeometry, project
from src.core.potentials import CorrectionPotential, correction_potential
from src.models.results import AcceptanceStats

logger = logging.getLogger(__name__)

METHODS = ('mh', 'cgmc', 'two_level')
STRATEGIES = ('corrections', 'splitting', 'approximate_cg')
ENSEMBLES = ('canonical', 'microcanonical')
POLICIES = ('stay', 'retry')
KERNELS = ('uniform_flip', 'uniform_exchange', 'coarse_adsorb_desorb', 'coarse_particle_move')

STREAM_COLUMNS = ('step', 'h', 'coverage', 'energy', 'coarse_acc_rate', 'fine_acc_rate', 'ops_long', 'ops_short',
                  'ops_coarse')


@dataclass(frozen=True)
class SamplerConfig:
    method: str = 'mh'
    strategy: str = 'corrections'
    ensemble: str = 'canonical'
    iterations: int = 10_000
    burn_in: int = 0
    seed: int | None = None
    coarse_rejection_policy: str = 'stay'
    stride: int = 1
    coverage: float = 0.5
    correction_cutoff: float | None = None
    max_retries: int = 10_000
    debug: bool = False

    def __post_init__(self):
        checks = (
            ('method', METHODS), ('strategy', STRATEGIES), ('ensemble', ENSEMBLES),
            ('coarse_rejection_policy', POLICIES),
        )
        for name, allowed in checks:
            value = getattr(self, name)
            if value not in allowed:
                raise ConfigurationError(f"Valor inválido '{value}' (permitidos: {', '.join(allowed)})", key=name)
        if self.iterations < 0 or self.burn_in < 0:
            raise ConfigurationError("Las iteraciones y el burn-in no pueden ser negativos")
        if self.stride < 1:
            raise ConfigurationError("El stride de emisión debe ser al menos 1", key='stride')
        if not 0.0 <= self.coverage <= 1.0:
            raise ConfigurationError("La cobertura debe estar en [0, 1]", key='coverage')
        if self.coarse_rejection_policy == 'retry' and self.method != 'two_level':
            raise ConfigurationError("La política 'retry' solo aplica al método two_level")


@dataclass
class ChainState:
    """
    Estado de una cadena: σ, η = T(σ) en caché, generador y contadores
    """
    sigma: np.ndarray
    rng: np.random.Generator
    eta: np.ndarray | None = None
    stats: AcceptanceStats = field(default_factory=AcceptanceStats)
    step: int = 0

    @classmethod
    def initial(cls, geom: LatticeGeometry, rng: np.random.Generator, cg: CoarseGeometry | None = None,
                coverage: float | None = None, sigma: np.ndarray | None = None) -> Self:
        """
        Configuración inicial: dada, con cobertura exacta (microcanónico) o Bernoulli(1/2)
        """
        if sigma is not None:
            sigma = np.array(sigma, dtype=np.int8, copy=True)
        elif coverage is not None:
            sigma = np.zeros(geom.N, dtype=np.int8)
            sigma[rng.permutation(geom.N)[:int(round(coverage * geom.N))]] = 1
        else:
            sigma = (rng.random(geom.N) < 0.5).astype(np.int8)
        eta = project(cg, sigma) if cg is not None else None
        return cls(sigma=sigma, rng=rng, eta=eta)


@dataclass
class CoarseChainState:
    eta: np.ndarray
    rng: np.random.Generator
    stats: AcceptanceStats = field(default_factory=AcceptanceStats)
    step: int = 0


@dataclass
class ChainResult:
    rows: list[dict]
    stats: AcceptanceStats
    state: object
    elapsed: float = 0.0


def _accept(rng: np.random.Generator, log_ratio: float) -> tuple[bool, float]:
    """
    Regla de Metropolis en escala logarítmica; devuelve (aceptado, probabilidad)
    """
    if log_ratio >= 0.0:
        return True, 1.0
    probability = math.exp(log_ratio)
    return bool(rng.random() < probability), probability


def log_prior_ratio(Q: int, eta_k: int, direction: int) -> float:
    """
    log P̄(η')/P̄(η) para η(k) → η(k) ± 1 con P̄ producto de binomiales
    """
    if direction > 0:
        return math.log((Q - eta_k) / (eta_k + 1))
    return math.log(eta_k / (Q - eta_k + 1))


def log_proposal_ratio(Q: int, eta_k: int, direction: int) -> float:
    """
    log ρ̄(η',η)/ρ̄(η,η') para la propuesta de adsorción/desorción
    """
    if direction > 0:
        return math.log((eta_k + 1) / (Q - eta_k))
    return math.log((Q - eta_k + 1) / eta_k)


def log_reconstruction_ratio(Q: int, eta_k: int, direction: int) -> float:
    """
    log r(σ|σ',η)/r(σ'|σ,η') para la reconstrucción de un solo sitio
    """
    if direction > 0:
        return math.log((Q - eta_k) / (eta_k + 1))
    return math.log(eta_k / (Q - eta_k + 1))


def _record_trivial_coarse(stats: AcceptanceStats):
    stats.n_coarse_proposed += 1
    stats.m_coarse_accepted += 1
    stats.n_fine_proposed += 1


def _check_invariant(state: ChainState, cg: CoarseGeometry | None):
    if cg is not None and state.eta is not None and not np.array_equal(state.eta, project(cg, state.sigma)):
        raise AssertionError(f"η en caché difiere de T(σ) en el paso {state.step}")


def mh_step(state: ChainState, H: Hamiltonian, kernel: str = 'uniform_flip', cg: CoarseGeometry | None = None
            ) -> ChainState:
    """
    Un paso de Metropolis-Hastings con propuesta simétrica (volteo o intercambio con un vecino)
    """
    rng, stats, sigma = state.rng, state.stats, state.sigma
    geom = H.geometry
    x = int(rng.integers(geom.N))
    _record_trivial_coarse(stats)
    if kernel == 'uniform_flip':
        delta = delta_flip(H, sigma, x, stats)
        accepted, probability = _accept(rng, -H.beta * delta)
        if accepted:
            sigma[x] = 1 - sigma[x]
            if state.eta is not None and cg is not None:
                state.eta[cg.cell_of[x]] += 1 if sigma[x] else -1
    elif kernel == 'uniform_exchange':
        neighbors = geom.neighbors(x)
        y = neighbors[int(rng.integers(len(neighbors)))]
        delta = delta_exchange(H, sigma, x, y, stats)
        accepted, probability = _accept(rng, -H.beta * delta)
        if accepted and sigma[x] != sigma[y]:
            _swap(state, x, y, cg)
    else:
        raise ConfigurationError(f"Kernel no simétrico o desconocido para MH: '{kernel}'")
    stats.fine_probability_sum += probability
    stats.n_fine_accepted += int(accepted)
    state.step += 1
    return state


def _swap(state: ChainState, x: int, y: int, cg: CoarseGeometry | None):
    sigma = state.sigma
    if state.eta is not None and cg is not None:
        state.eta[cg.cell_of[x]] += int(sigma[y]) - int(sigma[x])
        state.eta[cg.cell_of[y]] += int(sigma[x]) - int(sigma[y])
    sigma[x], sigma[y] = sigma[y], sigma[x]


def _propose_adsorb_desorb(rng: np.random.Generator, eta: np.ndarray, Q: int) -> tuple[int, int]:
    """
    ρ̄: celda uniforme, adsorción con probabilidad (Q−η(k))/Q, si no desorción
    """
    k = int(rng.integers(len(eta)))
    direction = 1 if rng.random() < (Q - int(eta[k])) / Q else -1
    return k, direction


def _coarse_log_ratio(Hbar: CoarseHamiltonian, eta: np.ndarray, k: int, direction: int, stats) -> tuple[float, float]:
    Q = Hbar.cg.Q
    eta_k = int(eta[k])
    delta = delta_coarse(Hbar, eta, k, direction, stats)
    log_ratio = -Hbar.beta * delta + log_prior_ratio(Q, eta_k, direction) + log_proposal_ratio(Q, eta_k, direction)
    return log_ratio, delta


def cgmc_step(state: CoarseChainState, Hbar: CoarseHamiltonian) -> CoarseChainState:
    """
    Paso MH en el nivel grueso con objetivo μ̄(0) ∝ e^{−βH̄(0)} P̄_M
    """
    rng, stats = state.rng, state.stats
    k, direction = _propose_adsorb_desorb(rng, state.eta, Hbar.cg.Q)
    stats.n_coarse_proposed += 1
    log_ratio, _ = _coarse_log_ratio(Hbar, state.eta, k, direction, stats)
    accepted, _ = _accept(rng, log_ratio)
    if accepted:
        state.eta[k] += direction
        stats.m_coarse_accepted += 1
        stats.n_fine_proposed += 1
        stats.n_fine_accepted += 1
        stats.fine_probability_sum += 1.0
    state.step += 1
    return state


def _coarse_neighbor(rng: np.random.Generator, cg: CoarseGeometry, k: int) -> int:
    neighbors = cg.coarse_lattice.neighbors(k)
    return neighbors[int(rng.integers(len(neighbors)))]


def _coarse_move_delta(Hbar: CoarseHamiltonian, eta: np.ndarray, k: int, l: int, stats) -> float:
    """
    ΔH̄(0) al mover una partícula de la celda k a la celda l
    """
    first = delta_coarse(Hbar, eta, k, -1, stats)
    eta[k] -= 1
    try:
        second = delta_coarse(Hbar, eta, l, 1, stats)
    finally:
        eta[k] += 1
    return first + second


def _particle_move_log_terms(Q: int, eta_k: int, eta_l: int) -> tuple[float, float, float]:
    """
    (prior, propuesta, reconstrucción) en escala logarítmica para mover una partícula de k a l
    """
    prior = log_prior_ratio(Q, eta_k, -1) + log_prior_ratio(Q, eta_l, 1)
    proposal = math.log((eta_l + 1) * (Q - eta_k + 1) / (eta_k * (Q - eta_l)))
    reconstruction = math.log(eta_k * (Q - eta_l) / ((eta_l + 1) * (Q - eta_k + 1)))
    return prior, proposal, reconstruction


def _propose_particle_move(rng: np.random.Generator, cg: CoarseGeometry, eta: np.ndarray) -> tuple[int, int] | None:
    """
    Par ordenado de celdas adyacentes con peso η(k)(Q−η(l))/Q²; None si la propuesta es nula
    """
    Q = cg.Q
    k = int(rng.integers(cg.M))
    l = _coarse_neighbor(rng, cg, k)
    if l == k:
        return None
    weight = int(eta[k]) * (Q - int(eta[l])) / (Q * Q)
    if rng.random() >= weight:
        return None
    return k, l


def cgmc_exchange_step(state: CoarseChainState, Hbar: CoarseHamiltonian) -> CoarseChainState:
    """
    CGMC microcanónico: una partícula salta entre celdas vecinas
    """
    rng, stats, eta = state.rng, state.stats, state.eta
    stats.n_coarse_proposed += 1
    move = _propose_particle_move(rng, Hbar.cg, eta)
    if move is not None:
        k, l = move
        prior, proposal, _ = _particle_move_log_terms(Hbar.cg.Q, int(eta[k]), int(eta[l]))
        delta = _coarse_move_delta(Hbar, eta, k, l, stats)
        accepted, _ = _accept(rng, -Hbar.beta * delta + prior + proposal)
        if accepted:
            eta[k] -= 1
            eta[l] += 1
            stats.m_coarse_accepted += 1
            stats.n_fine_proposed += 1
            stats.n_fine_accepted += 1
            stats.fine_probability_sum += 1.0
    state.step += 1
    return state


def _check_strategy(H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str):
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"Estrategia desconocida: '{strategy}'", key='strategy')
    if not H.is_split:
        return
    expected = 'full' if strategy == 'corrections' else 'long'
    if Hbar.part != expected:
        raise ConfigurationError(
            f"La estrategia '{strategy}' requiere el hamiltoniano grueso de la parte '{expected}' "
            f"(recibido '{Hbar.part}')"
        )


def _fine_flip_energy(H: Hamiltonian, sigma: np.ndarray, x: int, coarse_delta: float, strategy: str,
                      correction: CorrectionPotential | None, Hbar: CoarseHamiltonian, stats) -> float:
    """
    Exponente de la prueba fina: ΔH_N − ΔH̄(0) (correcciones y separación) o ΔH_s (aproximada)
    """
    if strategy == 'approximate_cg':
        if H.short_table is None:
            return 0.0
        stats.ops_short += H.short_ops
        return -(1 - 2 * int(sigma[x])) * H.short_table.local_field(sigma, x)
    if correction is not None:
        k = int(Hbar.cg.cell_of[x])
        s = 1 - 2 * int(sigma[x])
        stats.ops_long += correction.box_size
        energy = s * (-correction.local_correction(sigma, x) + float(H.h[x]) - float(Hbar.hbar[k]))
        if strategy == 'splitting' and H.short_table is not None:
            stats.ops_short += H.short_ops
            energy -= s * H.short_table.local_field(sigma, x)
        return energy
    short, long, field_term = delta_flip_parts(H, sigma, x, stats)
    return short + long + field_term - coarse_delta


def two_level_step(state: ChainState, H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str = 'corrections',
                   policy: str = 'stay', correction: CorrectionPotential | None = None,
                   max_retries: int = 10_000) -> ChainState:
    """
    Paso de dos niveles: propuesta y prueba gruesa, reconstrucción de un solo sitio
    y prueba fina según la estrategia
    """
    _check_strategy(H, Hbar, strategy)
    if policy not in POLICIES:
        raise ConfigurationError(f"Política de rechazo desconocida: '{policy}'")
    rng, stats, sigma, eta = state.rng, state.stats, state.sigma, state.eta
    cg = Hbar.cg
    Q = cg.Q
    retries = 0
    while True:
        k, direction = _propose_adsorb_desorb(rng, eta, Q)
        stats.n_coarse_proposed += 1
        log_ratio, coarse_delta = _coarse_log_ratio(Hbar, eta, k, direction, stats)
        accepted, _ = _accept(rng, log_ratio)
        if accepted:
            break
        if policy == 'stay':
            state.step += 1
            return state
        retries += 1
        if retries >= max_retries:
            logger.warning("Se agotaron %d reintentos gruesos; la cadena permanece en su estado", max_retries)
            state.step += 1
            return state

    stats.m_coarse_accepted += 1
    stats.n_fine_proposed += 1
    eta_k = int(eta[k])
    cell = cg.cell_sites[k]
    candidates = cell[sigma[cell] == (0 if direction > 0 else 1)]
    x = int(candidates[int(rng.integers(len(candidates)))])

    fine_energy = _fine_flip_energy(H, sigma, x, coarse_delta, strategy, correction, Hbar, stats)
    log_ratio = (-H.beta * fine_energy - log_prior_ratio(Q, eta_k, direction)
                 + log_reconstruction_ratio(Q, eta_k, direction))
    accepted, probability = _accept(rng, log_ratio)
    stats.fine_probability_sum += probability
    if accepted:
        sigma[x] = 1 - sigma[x]
        eta[k] += direction
        stats.n_fine_accepted += 1
    state.step += 1
    return state


def _exchange_fine_energy(H: Hamiltonian, sigma: np.ndarray, x: int, y: int, strategy: str, stats) -> float:
    if strategy != 'approximate_cg':
        return delta_exchange(H, sigma, x, y, stats)
    if H.short_table is None or sigma[x] == sigma[y]:
        return 0.0
    stats.ops_short += 2 * H.short_ops
    sx = 1 - 2 * int(sigma[x])
    table = H.short_table
    geom = H.geometry
    disp = tuple((b - a) % geom.n for a, b in zip(geom.coords(x), geom.coords(y)))
    jxy = float(table.values[disp])
    return -sx * table.local_field(sigma, x) + sx * (table.local_field(sigma, y) + jxy * sx)


def two_level_exchange_step(state: ChainState, H: Hamiltonian, Hbar: CoarseHamiltonian,
                            strategy: str = 'corrections') -> ChainState:
    """
    Paso microcanónico de dos niveles: con probabilidad 1/2 un intercambio fino
    entre vecinos, si no el salto de una partícula entre celdas vecinas
    """
    _check_strategy(H, Hbar, strategy)
    rng, stats, sigma, eta = state.rng, state.stats, state.sigma, state.eta
    cg = Hbar.cg
    if rng.random() < 0.5:
        _fine_exchange_branch(state, H, Hbar, strategy)
    else:
        stats.n_coarse_proposed += 1
        move = _propose_particle_move(rng, cg, eta)
        if move is not None:
            k, l = move
            eta_k, eta_l = int(eta[k]), int(eta[l])
            prior, proposal, reconstruction = _particle_move_log_terms(cg.Q, eta_k, eta_l)
            coarse_delta = _coarse_move_delta(Hbar, eta, k, l, stats)
            accepted, _ = _accept(rng, -Hbar.beta * coarse_delta + prior + proposal)
            if accepted:
                stats.m_coarse_accepted += 1
                stats.n_fine_proposed += 1
                source = cg.cell_sites[k][sigma[cg.cell_sites[k]] == 1]
                target = cg.cell_sites[l][sigma[cg.cell_sites[l]] == 0]
                x = int(source[int(rng.integers(len(source)))])
                y = int(target[int(rng.integers(len(target)))])
                fine_energy = _exchange_fine_energy(H, sigma, x, y, strategy, stats)
                if strategy != 'approximate_cg':
                    fine_energy -= coarse_delta
                accepted, probability = _accept(rng, -H.beta * fine_energy - prior + reconstruction)
                stats.fine_probability_sum += probability
                if accepted:
                    _swap(state, x, y, cg)
                    stats.n_fine_accepted += 1
    state.step += 1
    return state


def _fine_exchange_branch(state: ChainState, H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str):
    rng, stats, sigma, eta = state.rng, state.stats, state.sigma, state.eta
    cg = Hbar.cg
    geom = H.geometry
    x = int(rng.integers(geom.N))
    neighbors = geom.neighbors(x)
    y = neighbors[int(rng.integers(len(neighbors)))]
    stats.n_coarse_proposed += 1
    kx, ky = int(cg.cell_of[x]), int(cg.cell_of[y])
    if sigma[x] == sigma[y] or kx == ky:
        # η no cambia: se omite la prueba gruesa
        stats.m_coarse_accepted += 1
        stats.n_fine_proposed += 1
        fine_energy = _exchange_fine_energy(H, sigma, x, y, strategy, stats)
        accepted, probability = _accept(rng, -H.beta * fine_energy)
    else:
        source, target = (x, y) if sigma[x] == 1 else (y, x)
        k, l = int(cg.cell_of[source]), int(cg.cell_of[target])
        coarse_delta = _coarse_move_delta(Hbar, eta, k, l, stats)
        coarse_ok, _ = _accept(rng, -Hbar.beta * coarse_delta)
        if not coarse_ok:
            return
        stats.m_coarse_accepted += 1
        stats.n_fine_proposed += 1
        fine_energy = _exchange_fine_energy(H, sigma, x, y, strategy, stats)
        if strategy != 'approximate_cg':
            fine_energy -= coarse_delta
        accepted, probability = _accept(rng, -H.beta * fine_energy)
    stats.fine_probability_sum += probability
    if accepted and sigma[x] != sigma[y]:
        _swap(state, x, y, cg)
    if accepted:
        stats.n_fine_accepted += 1


def average_acceptance(stats: AcceptanceStats) -> tuple[float, float, float]:
    """
    Tasas (gruesa, fina, total); total = aceptaciones finas / propuestas gruesas
    """
    if stats.n_coarse_proposed == 0:
        raise StatisticsError("Sin propuestas: las tasas de aceptación no están definidas")
    coarse = stats.m_coarse_accepted / stats.n_coarse_proposed
    fine = stats.n_fine_accepted / stats.n_fine_proposed if stats.n_fine_proposed else 0.0
    total = stats.n_fine_accepted / stats.n_coarse_proposed
    return coarse, fine, total


def make_rng(seed: int | None) -> np.random.Generator:
    """
    Generador con nombre y semilla; los flujos hijos se obtienen con spawn_rngs
    """
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_rngs(seed: int | None, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def _observe(state, H: Hamiltonian, Hbar: CoarseHamiltonian | None, coarse_only: bool) -> dict:
    stats = state.stats
    coarse_rate, fine_rate, _ = average_acceptance(stats)
    if coarse_only:
        coverage = float(np.sum(state.eta)) / Hbar.cg.lattice.N
        energy = energy_coarse(Hbar, state.eta)
    else:
        coverage = float(np.sum(state.sigma)) / H.geometry.N
        energy = energy_micro(H, state.sigma)
    return {
        'step': state.step,
        'h': float(np.mean(H.h)),
        'coverage': coverage,
        'energy': energy,
        'coarse_acc_rate': coarse_rate,
        'fine_acc_rate': fine_rate,
        'ops_long': stats.ops_long,
        'ops_short': stats.ops_short,
        'ops_coarse': stats.ops_coarse,
    }


def run_chain(config: SamplerConfig, H: Hamiltonian, Hbar: CoarseHamiltonian | None = None,
              state=None, rng: np.random.Generator | None = None, emit: bool = True) -> ChainResult:
    """
    Ejecuta burn_in + iterations pasos y emite observables cada stride pasos tras el burn-in
    """
    if config.method in ('cgmc', 'two_level') and Hbar is None:
        raise ConfigurationError(f"El método '{config.method}' requiere un hamiltoniano grueso")
    cg = Hbar.cg if Hbar is not None else None
    micro = config.ensemble == 'microcanonical'
    if rng is None:
        rng = make_rng(config.seed)
    coarse_only = config.method == 'cgmc'

    if state is None:
        coverage = config.coverage if micro else None
        micro_state = ChainState.initial(H.geometry, rng, cg, coverage=coverage)
        state = CoarseChainState(micro_state.eta, rng) if coarse_only else micro_state
    elif isinstance(state, ChainState) and cg is not None and state.eta is None:
        state.eta = project(cg, state.sigma)

    correction = None
    if config.method == 'two_level' and config.correction_cutoff is not None and config.strategy != 'approximate_cg':
        source = H.table if config.strategy == 'corrections' else H.long_table
        correction = correction_potential(source, cg, config.correction_cutoff)

    if config.method == 'mh':
        kernel = 'uniform_exchange' if micro else 'uniform_flip'
        step = lambda: mh_step(state, H, kernel, cg)
    elif config.method == 'cgmc':
        step = (lambda: cgmc_exchange_step(state, Hbar)) if micro else (lambda: cgmc_step(state, Hbar))
    elif micro:
        step = lambda: two_level_exchange_step(state, H, Hbar, config.strategy)
    else:
        step = lambda: two_level_step(state, H, Hbar, config.strategy, config.coarse_rejection_policy, correction,
                                      config.max_retries)

    logger.info("Cadena %s/%s (%s): %d pasos de burn-in, %d pasos de muestreo", config.method, config.strategy,
                config.ensemble, config.burn_in, config.iterations)
    rows = []
    started = time.perf_counter()
    for t in range(1, config.burn_in + config.iterations + 1):
        step()
        if config.debug and not coarse_only:
            _check_invariant(state, cg)
        if emit and t > config.burn_in and (t - config.burn_in) % config.stride == 0:
            rows.append(_observe(state, H, Hbar, coarse_only))
    elapsed = time.perf_counter() - started
    logger.debug("Cadena terminada en %.3f s; contadores: %s", elapsed, state.stats.as_dict())
    return ChainResult(rows, state.stats, state, elapsed)
