"""
Verificación exacta sobre espacios de estados enumerables: kernels densos K_c y K_CG,
balance detallado, brechas espectrales, descomposición A/B, cotas de comparación,
entropía relativa y tiempos de mezcla
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import gammaln, logsumexp

from src.core.energy import CoarseHamiltonian, Hamiltonian
from src.core.errors import ConfigurationError, StateSpaceError, StatisticsError, VerificationError
from src.core.lattice import CoarseGeometry, LatticeGeometry, enumerate_configs
from src.models.results import GapReport

logger = logging.getLogger(__name__)

MAX_KERNEL_SITES = 14
MAX_COARSE_STATES = 2 ** 20
ROW_TOLERANCE = 1e-12
# Tolerancia logarítmica para decidir si una aceptación vale 1
CLASS_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class MeasureVector:
    """
    Probabilidades indexadas por la enumeración canónica de states
    """
    states: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if np.any(self.p < 0) or abs(float(np.sum(self.p)) - 1.0) > ROW_TOLERANCE:
            raise StatisticsError("El vector no es una medida de probabilidad normalizada")

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(self.p, values))


@dataclass(frozen=True, eq=False)
class DenseKernel:
    """
    Matriz estocástica por filas sobre los estados enumerados
    """
    states: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        if np.any(self.matrix < -ROW_TOLERANCE):
            raise VerificationError("El kernel tiene entradas negativas")
        deviation = float(np.max(np.abs(self.matrix.sum(axis=1) - 1.0)))
        if deviation > ROW_TOLERANCE:
            raise VerificationError(f"Las filas del kernel no suman 1 (desvío {deviation:.3e})")


@dataclass(frozen=True, eq=False)
class PairTable:
    """
    Pares (σ, σ') del soporte con sus constantes A y B y la clase C1..C4
    """
    source: np.ndarray
    target: np.ndarray
    A: np.ndarray
    B: np.ndarray
    classes: np.ndarray


def _guard_micro(geom: LatticeGeometry, limit: int = MAX_KERNEL_SITES):
    if geom.N > limit:
        raise StateSpaceError(f"Kernel denso rechazado: N={geom.N} excede {limit} sitios")


def micro_energies(H: Hamiltonian, configs: np.ndarray) -> np.ndarray:
    """
    H_N para cada fila de configs usando la matriz densa de acoplamientos
    """
    C = configs.astype(float)
    couplings = H.table.matrix()
    return -0.5 * np.einsum('si,ij,sj->s', C, couplings, C) + C @ H.h


def split_energies(H: Hamiltonian, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not H.is_split:
        raise ConfigurationError("Se requiere un potencial separado")
    C = configs.astype(float)
    short = -0.5 * np.einsum('si,ij,sj->s', C, H.short_table.matrix(), C)
    long = -0.5 * np.einsum('si,ij,sj->s', C, H.long_table.matrix(), C)
    return short, long


def project_all(cg: CoarseGeometry, configs: np.ndarray) -> np.ndarray:
    indicator = np.zeros((cg.lattice.N, cg.M), dtype=np.int64)
    indicator[np.arange(cg.lattice.N), cg.cell_of] = 1
    return configs.astype(np.int64) @ indicator


def coarse_states(cg: CoarseGeometry) -> np.ndarray:
    """
    Todos los η ∈ {0..Q}^M en orden producto (la primera celda es la más significativa)
    """
    total = (cg.Q + 1) ** cg.M
    if total > MAX_COARSE_STATES:
        raise StateSpaceError(f"Enumeración gruesa rechazada: (Q+1)^M = {total}")
    index = np.arange(total)
    powers = (cg.Q + 1) ** np.arange(cg.M - 1, -1, -1)
    return (index[:, None] // powers) % (cg.Q + 1)


def coarse_index(cg: CoarseGeometry, etas: np.ndarray) -> np.ndarray:
    powers = (cg.Q + 1) ** np.arange(cg.M - 1, -1, -1)
    return etas @ powers


def coarse_energies(Hbar: CoarseHamiltonian, etas: np.ndarray) -> np.ndarray:
    E = etas.astype(float)
    couplings = Hbar.cpot.table.matrix()
    np.fill_diagonal(couplings, 0.0)
    pairs = -0.5 * np.einsum('si,ij,sj->s', E, couplings, E) - 0.5 * Hbar.cpot.diag * np.sum(E * (E - 1.0), axis=1)
    return pairs + E @ Hbar.hbar


def log_binomial_prior(Q: int, etas: np.ndarray) -> np.ndarray:
    """
    log P̄_M(η) para el producto de binomiales Bin(Q, 1/2)
    """
    log_comb = gammaln(Q + 1) - gammaln(etas + 1) - gammaln(Q - etas + 1)
    return np.sum(log_comb, axis=1) - etas.shape[1] * Q * math.log(2.0)


def _normalize(log_weights: np.ndarray) -> np.ndarray:
    return np.exp(log_weights - logsumexp(log_weights))


def _acceptance(log_ratio: np.ndarray) -> np.ndarray:
    return np.exp(np.minimum(0.0, log_ratio))


def exact_gibbs(H: Hamiltonian, configs: np.ndarray | None = None) -> MeasureVector:
    """
    μ_{N,β} ∝ e^{−βH_N} sobre todas las configuraciones (o sobre configs dadas)
    """
    if configs is None:
        configs = enumerate_configs(H.geometry)
    return MeasureVector(configs, _normalize(-H.beta * micro_energies(H, configs)))


def exact_marginal(mu: MeasureVector, cg: CoarseGeometry) -> MeasureVector:
    """
    μ̄ = μ∘T^{-1} por suma exacta sobre las fibras de la proyección
    """
    states = coarse_states(cg)
    index = coarse_index(cg, project_all(cg, mu.states))
    p = np.bincount(index, weights=mu.p, minlength=len(states))
    return MeasureVector(states, p / p.sum())


def exact_coarse_gibbs(Hbar: CoarseHamiltonian) -> MeasureVector:
    """
    μ̄(0) ∝ e^{−βH̄(0)} P̄_M
    """
    states = coarse_states(Hbar.cg)
    log_w = -Hbar.beta * coarse_energies(Hbar, states) + log_binomial_prior(Hbar.cg.Q, states)
    return MeasureVector(states, _normalize(log_w))


def approximate_measure(H: Hamiltonian, Hbar: CoarseHamiltonian, configs: np.ndarray | None = None) -> MeasureVector:
    """
    μ(0)(σ) ∝ exp(−β[H_s(σ) + H̄_l(0)(Tσ)]) con prior uniforme en σ
    """
    if configs is None:
        configs = enumerate_configs(H.geometry)
    short = split_energies(H, configs)[0] if H.is_split else np.zeros(len(configs))
    coarse = coarse_energies(Hbar, project_all(Hbar.cg, configs))
    return MeasureVector(configs, _normalize(-H.beta * (short + coarse)))


def shell_configs(geom: LatticeGeometry, coverage: float) -> np.ndarray:
    """
    Configuraciones con exactamente round(c·N) partículas
    """
    configs = enumerate_configs(geom)
    return configs[configs.sum(axis=1) == int(round(coverage * geom.N))]


def _state_codes(configs: np.ndarray) -> np.ndarray:
    N = configs.shape[1]
    return configs.astype(np.int64) @ (1 << np.arange(N - 1, -1, -1, dtype=np.int64))


def _finalize(states: np.ndarray, off_diagonal: np.ndarray) -> DenseKernel:
    np.fill_diagonal(off_diagonal, 0.0)
    np.fill_diagonal(off_diagonal, 1.0 - off_diagonal.sum(axis=1))
    return DenseKernel(states, off_diagonal)


@dataclass(frozen=True, eq=False)
class FlipTerms:
    """
    Términos de cada par (σ, σ^x) de los kernels de volteo: propuesta compuesta q,
    razones logarítmicas global (R), gruesa (a) y fina (b)
    """
    source: np.ndarray
    target: np.ndarray
    q: np.ndarray
    log_R: np.ndarray
    log_a: np.ndarray
    log_b: np.ndarray


def flip_terms(H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str = 'corrections') -> FlipTerms:
    """
    Recorre todos los pares de volteo con la propuesta de adsorción/desorción
    y la reconstrucción de un solo sitio
    """
    geom = H.geometry
    _guard_micro(geom)
    if strategy not in ('corrections', 'splitting', 'approximate_cg'):
        raise ConfigurationError(f"Estrategia desconocida: '{strategy}'")
    cg = Hbar.cg
    N, M, Q, beta = geom.N, cg.M, cg.Q, H.beta
    configs = enumerate_configs(geom)
    energies = micro_energies(H, configs)
    etas = project_all(cg, configs)
    coarse = coarse_energies(Hbar, etas)
    if strategy == 'approximate_cg':
        fine_energy = split_energies(H, configs)[0] if H.is_split else np.zeros(len(configs))
    else:
        fine_energy = energies - coarse
    index = np.arange(len(configs))
    sources, targets, qs, log_R, log_a, log_b = [], [], [], [], [], []
    for x in range(N):
        target = index ^ (1 << (N - 1 - x))
        k = cg.cell_of[x]
        eta_k = etas[:, k].astype(float)
        up = configs[:, x] == 0
        free = np.where(up, Q - eta_k, eta_k)
        rho_bar = free / (M * Q)
        reconstruction = 1.0 / free
        # razones log de prior, propuesta y reconstrucción (ver samplers)
        with np.errstate(divide='ignore'):
            prior = np.where(up, np.log((Q - eta_k) / (eta_k + 1)), np.log(eta_k / (Q - eta_k + 1)))
        proposal = -prior
        recon = prior
        sources.append(index)
        targets.append(target)
        qs.append(rho_bar * reconstruction)
        log_R.append(-beta * (energies[target] - energies))
        log_a.append(-beta * (coarse[target] - coarse) + prior + proposal)
        log_b.append(-beta * (fine_energy[target] - fine_energy) - prior + recon)
    cat = np.concatenate
    return FlipTerms(cat(sources), cat(targets), cat(qs), cat(log_R), cat(log_a), cat(log_b))


def build_mh_kernel(H: Hamiltonian, moves: str = 'flip', coverage: float | None = None) -> DenseKernel:
    """
    K_c: propuesta simétrica por volteo uniforme o intercambio con vecino (en la capa
    de cobertura) y aceptación min{1, e^{−βΔH}}
    """
    geom = H.geometry
    _guard_micro(geom)
    if moves == 'flip':
        configs = enumerate_configs(geom)
        energies = micro_energies(H, configs)
        K = np.zeros((len(configs), len(configs)))
        index = np.arange(len(configs))
        for x in range(geom.N):
            target = index ^ (1 << (geom.N - 1 - x))
            K[index, target] += _acceptance(-H.beta * (energies[target] - energies)) / geom.N
        return _finalize(configs, K)
    if moves != 'exchange' or coverage is None:
        raise ConfigurationError("Los intercambios requieren moves='exchange' y una cobertura")
    configs = shell_configs(geom, coverage)
    energies = micro_energies(H, configs)
    position = {int(code): i for i, code in enumerate(_state_codes(configs))}
    K = np.zeros((len(configs), len(configs)))
    for i, sigma in enumerate(configs):
        for x in range(geom.N):
            neighbors = geom.neighbors(x)
            for y in neighbors:
                if sigma[x] == sigma[y]:
                    continue
                j = position[int(_state_codes(_swapped(sigma, x, y)[None, :])[0])]
                K[i, j] += math.exp(min(0.0, -H.beta * (energies[j] - energies[i]))) / (geom.N * len(neighbors))
    return _finalize(configs, K)


def _swapped(sigma: np.ndarray, x: int, y: int) -> np.ndarray:
    result = sigma.copy()
    result[x], result[y] = sigma[y], sigma[x]
    return result


def build_two_level_kernel(H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str = 'corrections',
                           policy: str = 'stay') -> DenseKernel:
    """
    K_CG del muestreador de dos niveles con la masa rechazada en la diagonal
    """
    if policy != 'stay':
        raise ConfigurationError("El kernel denso solo describe la política 'stay'; 'retry' no tiene forma cerrada")
    terms = flip_terms(H, Hbar, strategy)
    size = 2 ** H.geometry.N
    K = np.zeros((size, size))
    K[terms.source, terms.target] = (terms.q * _acceptance(terms.log_a)
                                     * _acceptance(terms.log_b))
    return _finalize(enumerate_configs(H.geometry), K)


def build_two_level_exchange_kernel(H: Hamiltonian, Hbar: CoarseHamiltonian, coverage: float,
                                    strategy: str = 'corrections') -> DenseKernel:
    """
    Kernel microcanónico de dos niveles sobre la capa de cobertura: mezcla 1/2 de
    intercambios finos entre vecinos y 1/2 de saltos de partícula entre celdas vecinas
    """
    geom = H.geometry
    _guard_micro(geom)
    cg = Hbar.cg
    Q, M, beta = cg.Q, cg.M, H.beta
    configs = shell_configs(geom, coverage)
    energies = micro_energies(H, configs)
    etas = project_all(cg, configs)
    coarse = coarse_energies(Hbar, etas)
    if strategy == 'approximate_cg':
        fine_energy = split_energies(H, configs)[0] if H.is_split else np.zeros(len(configs))
    else:
        fine_energy = energies - coarse
    position = {int(code): i for i, code in enumerate(_state_codes(configs))}
    K = np.zeros((len(configs), len(configs)))

    def target_of(sigma, x, y):
        return position[int(_state_codes(_swapped(sigma, x, y)[None, :])[0])]

    for i, sigma in enumerate(configs):
        eta = etas[i]
        # rama fina
        for x in range(geom.N):
            neighbors = geom.neighbors(x)
            for y in neighbors:
                if sigma[x] == sigma[y]:
                    continue
                j = target_of(sigma, x, y)
                weight = 0.5 / (geom.N * len(neighbors))
                if cg.cell_of[x] == cg.cell_of[y]:
                    exponent = -beta * ((fine_energy[j] + coarse[j]) - (fine_energy[i] + coarse[i]))
                    K[i, j] += weight * math.exp(min(0.0, exponent))
                else:
                    a = -beta * (coarse[j] - coarse[i])
                    b = -beta * (fine_energy[j] - fine_energy[i])
                    K[i, j] += weight * math.exp(min(0.0, a)) * math.exp(min(0.0, b))
        # rama gruesa
        for k in range(M):
            cell_neighbors = cg.coarse_lattice.neighbors(k)
            for l in cell_neighbors:
                if l == k or eta[k] == 0 or eta[l] == Q:
                    continue
                eta_k, eta_l = int(eta[k]), int(eta[l])
                move = 0.5 / (M * len(cell_neighbors)) * eta_k * (Q - eta_l) / (Q * Q)
                prior = math.log(eta_k / (Q - eta_k + 1)) + math.log((Q - eta_l) / (eta_l + 1))
                proposal = math.log((eta_l + 1) * (Q - eta_k + 1) / (eta_k * (Q - eta_l)))
                sources = [s for s in cg.cell_sites[k] if sigma[s] == 1]
                vacancies = [s for s in cg.cell_sites[l] if sigma[s] == 0]
                for x in sources:
                    for y in vacancies:
                        j = target_of(sigma, int(x), int(y))
                        a = -beta * (coarse[j] - coarse[i]) + prior + proposal
                        b = -beta * (fine_energy[j] - fine_energy[i]) - prior - proposal
                        K[i, j] += move / (eta_k * (Q - eta_l)) * math.exp(min(0.0, a)) * math.exp(min(0.0, b))
    return _finalize(configs, K)


def check_detailed_balance(K: DenseKernel, mu: MeasureVector) -> float:
    """
    max |K(σ,σ')μ(σ) − K(σ',σ)μ(σ')|
    """
    flux = mu.p[:, None] * K.matrix
    return float(np.max(np.abs(flux - flux.T)))


def stationarity_residual(K: DenseKernel, mu: MeasureVector) -> float:
    return float(np.sum(np.abs(mu.p @ K.matrix - mu.p)))


def _symmetrized(K: DenseKernel, mu: MeasureVector) -> np.ndarray:
    root = np.sqrt(mu.p)
    S = root[:, None] * K.matrix / root[None, :]
    return 0.5 * (S + S.T)


def kernel_spectrum(K: DenseKernel, mu: MeasureVector, tol: float = 1e-10) -> np.ndarray:
    """
    Autovalores (ascendentes) del kernel simetrizado D^{1/2} K D^{-1/2}
    """
    violation = check_detailed_balance(K, mu)
    if violation > tol:
        raise VerificationError(f"El kernel no es reversible respecto de μ (violación {violation:.3e})")
    return linalg.eigh(_symmetrized(K, mu), eigvals_only=True)


def spectral_gap(K: DenseKernel, mu: MeasureVector, tol: float = 1e-10) -> float:
    """
    λ = 1 − (segundo mayor autovalor del kernel simetrizado)
    """
    eigenvalues = kernel_spectrum(K, mu, tol)
    return float(1.0 - eigenvalues[-2])


def dirichlet_form(K: DenseKernel, mu: MeasureVector, f: np.ndarray) -> float:
    diff = f[:, None] - f[None, :]
    return float(0.5 * np.sum(diff ** 2 * K.matrix * mu.p[:, None]))


def variance(mu: MeasureVector, f: np.ndarray) -> float:
    mean = np.dot(mu.p, f)
    return float(np.dot(mu.p, (f - mean) ** 2))


_CLASS_TABLE = {
    (True, True, True): 'C1', (False, False, False): 'C1',
    (True, False, True): 'C2', (False, True, False): 'C2',
    (True, True, False): 'C3', (False, False, True): 'C3',
    (False, True, True): 'C4', (True, False, False): 'C4',
}


def decompose_AB(log_R: float, log_a: float, log_b: float, q_composite: float, rho: float
                 ) -> tuple[float, float, str]:
    """
    Clasifica el patrón (α, α_CG, α_f) en C1..C4 y devuelve (A, B, clase)
    """
    pattern = (log_R >= -CLASS_TOLERANCE, log_a >= -CLASS_TOLERANCE, log_b >= -CLASS_TOLERANCE)
    cls = _CLASS_TABLE.get(pattern)
    if cls is None:
        raise VerificationError(f"Patrón de aceptación fuera de C1..C4: {pattern}")
    if cls == 'C1':
        A = 1.0
    elif cls == 'C2':
        A = math.exp(-abs(log_a))
    elif cls == 'C3':
        A = math.exp(-abs(log_b))
    else:
        A = math.exp(-abs(log_R))
    return A, q_composite / rho, cls


def decompose_kernel(H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str = 'corrections') -> PairTable:
    """
    Tabla A/B sobre todos los pares de volteo; requiere propuesta compuesta simétrica
    """
    terms = flip_terms(H, Hbar, strategy)
    rho = 1.0 / H.geometry.N
    size = 2 ** H.geometry.N
    composite = np.zeros((size, size))
    composite[terms.source, terms.target] = terms.q
    if np.max(np.abs(composite - composite.T)) > ROW_TOLERANCE:
        raise VerificationError("La propuesta compuesta no es simétrica: la descomposición A/B no aplica")
    results = [decompose_AB(r, a, b, q, rho) for r, a, b, q in zip(terms.log_R, terms.log_a, terms.log_b, terms.q)]
    A, B, classes = (np.array(column) for column in zip(*results))
    return PairTable(terms.source, terms.target, A, B, classes)


def verify_factorization(K_cg: DenseKernel, K_c: DenseKernel, table: PairTable) -> float:
    """
    max_{σ≠σ'} |K_CG(σ,σ') − A B K_c(σ,σ')|, incluyendo soporte fuera de la tabla
    """
    predicted = np.zeros_like(K_c.matrix)
    predicted[table.source, table.target] = table.A * table.B * K_c.matrix[table.source, table.target]
    difference = np.abs(K_cg.matrix - predicted)
    np.fill_diagonal(difference, 0.0)
    return float(np.max(difference))


def benchmark_a_bound(K: float, J: float, beta: float) -> float:
    """
    Cota inferior de A_inf para Ising de vecinos más cercanos + Curie-Weiss con separación
    """
    return min(math.exp(-beta * abs(J)), math.exp(-2.0 * beta * abs(K)))


def verify_gap_sandwich(report: GapReport, tol: float = 1e-10, strict: bool = True) -> bool:
    """
    A_inf γ_lo λ_c <= λ_CG <= γ_hi λ_c
    """
    lower = report.A_inf * report.gamma_lo * report.lambda_c
    upper = report.gamma_hi * report.lambda_c
    ok = lower <= report.lambda_cg + tol and report.lambda_cg <= upper + tol
    if not ok and strict:
        raise VerificationError(
            f"Cota espectral violada: {lower:.6e} <= λ_CG={report.lambda_cg:.6e} <= {upper:.6e} no se cumple"
        )
    return ok


def gap_report(H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str = 'corrections', K: float = float('nan'),
               J: float = float('nan'), label: str = '') -> GapReport:
    """
    Brechas de K_c y K_CG con las constantes de la descomposición A/B
    """
    mu = exact_gibbs(H)
    K_c = build_mh_kernel(H)
    K_cg = build_two_level_kernel(H, Hbar, strategy)
    table = decompose_kernel(H, Hbar, strategy)
    report = GapReport(
        N=H.geometry.N, q=Hbar.cg.q, beta=H.beta, K=K, J=J,
        lambda_c=spectral_gap(K_c, mu), lambda_cg=spectral_gap(K_cg, mu),
        A_inf=float(table.A.min()), gamma_lo=float(table.B.min()), gamma_hi=float(table.B.max()), label=label,
    )
    report.sandwich_ok = verify_gap_sandwich(report, strict=False)
    logger.info("Brechas %s: λ_c=%.6e λ_CG=%.6e A_inf=%.4f", label, report.lambda_c, report.lambda_cg, report.A_inf)
    return report


def relative_entropy_specific(mu0: MeasureVector, mu: MeasureVector, N: int) -> float:
    """
    R(μ0|μ) = N^{-1} Σ μ0 log(μ0/μ)
    """
    if np.any(mu0.p <= 0) or np.any(mu.p <= 0):
        raise StatisticsError("La entropía relativa requiere medidas estrictamente positivas")
    return float(np.sum(mu0.p * (np.log(mu0.p) - np.log(mu.p))) / N)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def tv_curve(K: DenseKernel, mu: MeasureVector, start: int, steps: int) -> list[float]:
    """
    Distancia en variación total de K^n(start, ·) a μ para n = 1..steps
    """
    row = np.zeros(len(mu.p))
    row[start] = 1.0
    curve = []
    for _ in range(steps):
        row = row @ K.matrix
        curve.append(total_variation(row, mu.p))
    return curve


def mixing_time_bound(K: DenseKernel, mu: MeasureVector, gap: float, max_steps: int = 100_000) -> tuple[int, int]:
    """
    Cota espectral n* (con el radio del espectro no unitario) y tiempo de mezcla
    exacto en variación total por potencias de la matriz
    """
    if gap <= 0:
        raise StatisticsError("La cota de mezcla requiere brecha espectral positiva")
    eigenvalues = kernel_spectrum(K, mu)
    radius = float(max(abs(eigenvalues[0]), abs(eigenvalues[-2])))
    floor = math.sqrt(float(mu.p.min())) / 2.0
    if radius == 0.0:
        bound = 1
    elif radius >= 1.0:
        raise StatisticsError("Espectro no unitario con radio 1: la cadena no mezcla")
    else:
        bound = max(1, math.ceil(math.log(floor) / math.log(radius) - 1e-12))

    power = np.eye(len(mu.p))
    exact = None
    for n in range(1, max_steps + 1):
        power = power @ K.matrix
        if 0.5 * np.max(np.sum(np.abs(power - mu.p[None, :]), axis=1)) <= 0.25:
            exact = n
            break
    if exact is None:
        raise StatisticsError(f"La cadena no alcanzó distancia 1/4 en {max_steps} pasos")
    return bound, exact


def stationary_fine_acceptance(H: Hamiltonian, Hbar: CoarseHamiltonian, strategy: str = 'corrections') -> float:
    """
    Probabilidad media de aceptación fina, condicionada a la aceptación gruesa, en estado estacionario
    """
    terms = flip_terms(H, Hbar, strategy)
    mu = exact_gibbs(H) if strategy != 'approximate_cg' else approximate_measure(H, Hbar)
    weight = mu.p[terms.source] * terms.q * _acceptance(terms.log_a)
    return float(np.sum(weight * _acceptance(terms.log_b)) / np.sum(weight))
