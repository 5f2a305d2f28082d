"""
Tests unitarios para los muestreadores MH, CGMC y de dos niveles.
"""

import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from src.core.energy import build_coarse_hamiltonian, build_hamiltonian
from src.core.errors import ConfigurationError, StatisticsError
from src.core.kernel_analysis import (
    approximate_measure, coarse_index, exact_coarse_gibbs, exact_gibbs, shell_configs,
)
from src.core.lattice import build_geometry, project
from src.core.observables import batch_means_ci
from src.core.potentials import Stencil, benchmark_potential, curie_weiss, kac_smooth, split
from src.core.samplers import (
    ChainState, CoarseChainState, SamplerConfig, average_acceptance, cgmc_step, log_prior_ratio,
    log_proposal_ratio, log_reconstruction_ratio, make_rng, mh_step, run_chain, spawn_rngs, two_level_exchange_step,
    two_level_step,
)
from src.models.results import AcceptanceStats
from src.operations import report_ops


@pytest.fixture
def kac_chain():
    """
    Fixture con un potencial de Kac separado (S=2) en una red 1D de 32 sitios y celdas de 4.
    """
    geom, cg = build_geometry(1, 32, 4)
    H = build_hamiltonian(geom, split(kac_smooth(2.0, 8.0), 2.0), -0.8, 1.0)
    return H, cg


def state_codes(samples: np.ndarray) -> np.ndarray:
    N = samples.shape[1]
    return samples.astype(np.int64) @ (1 << np.arange(N - 1, -1, -1, dtype=np.int64))


def chi_square_pvalue(codes: np.ndarray, p: np.ndarray, index: np.ndarray | None = None) -> float:
    """
    χ² entre frecuencias observadas y esperadas, agrupando las celdas con esperado < 5
    """
    if index is not None:
        lookup = {int(c): i for i, c in enumerate(index)}
        codes = np.array([lookup[int(c)] for c in codes])
    observed = np.bincount(codes, minlength=len(p)).astype(float)
    expected = p * len(codes)
    small = expected < 5.0
    observed = np.append(observed[~small], observed[small].sum())
    expected = np.append(expected[~small], expected[small].sum())
    if expected[-1] == 0.0:
        observed, expected = observed[:-1], expected[:-1]
    return float(scipy_stats.chisquare(observed, expected).pvalue)


class TestSamplerConfig:
    """
    Clase de tests para la validación de SamplerConfig.
    """

    @pytest.mark.parametrize("kwargs", [
        {'method': 'gibbs'},
        {'strategy': 'exact'},
        {'ensemble': 'grand'},
        {'coarse_rejection_policy': 'again', 'method': 'two_level'},
        {'iterations': -1},
        {'stride': 0},
        {'coverage': 1.5},
        {'coarse_rejection_policy': 'retry', 'method': 'mh'},
    ])
    def test_invalid_values(self, kwargs):
        """
        Test parametrizado que verifica el rechazo de valores fuera de dominio.
        """
        with pytest.raises(ConfigurationError):
            SamplerConfig(**kwargs)

    def test_defaults(self):
        config = SamplerConfig()
        assert config.method == 'mh'
        assert config.coarse_rejection_policy == 'stay'


class TestLogRatios:
    """
    Clase de tests para las razones de prior, propuesta y reconstrucción.
    """

    @pytest.mark.parametrize("Q,eta_k,direction", [(4, 0, 1), (4, 2, 1), (4, 3, 1), (4, 4, -1), (9, 5, -1)])
    def test_prior_and_proposal_cancel(self, Q, eta_k, direction):
        total = log_prior_ratio(Q, eta_k, direction) + log_proposal_ratio(Q, eta_k, direction)
        assert total == pytest.approx(0.0, abs=1e-14)
        assert log_reconstruction_ratio(Q, eta_k, direction) == log_prior_ratio(Q, eta_k, direction)

    def test_prior_ratio_is_binomial(self):
        assert log_prior_ratio(4, 1, 1) == pytest.approx(math.log(math.comb(4, 2) / math.comb(4, 1)))


class TestChains:
    """
    Clase de tests para run_chain y los pasos individuales.
    """

    @pytest.mark.parametrize("method,strategy", [
        ('mh', 'corrections'), ('cgmc', 'corrections'), ('two_level', 'corrections'),
        ('two_level', 'splitting'), ('two_level', 'approximate_cg'),
    ])
    def test_same_seed_same_stream(self, kac_chain, method, strategy):
        """
        Test que verifica que dos corridas con la misma semilla emiten filas idénticas.
        """
        H, cg = kac_chain
        part = 'full' if strategy == 'corrections' else 'long'
        Hbar = build_coarse_hamiltonian(H, cg, part) if method != 'mh' else None
        config = SamplerConfig(method=method, strategy=strategy, iterations=400, burn_in=50, seed=11, stride=20)
        first = run_chain(config, H, Hbar)
        second = run_chain(config, H, Hbar)
        assert len(first.rows) == 20
        assert first.rows == second.rows
        assert first.stats == second.stats

    def test_cgmc_requires_coarse_hamiltonian(self, kac_chain):
        H, _ = kac_chain
        with pytest.raises(ConfigurationError):
            run_chain(SamplerConfig(method='cgmc', seed=1), H)

    def test_strategy_must_match_coarse_part(self, kac_chain):
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg, 'full')
        config = SamplerConfig(method='two_level', strategy='splitting', iterations=5, seed=1)
        with pytest.raises(ConfigurationError):
            run_chain(config, H, Hbar)

    @pytest.mark.parametrize("method,strategy", [('mh', 'corrections'), ('two_level', 'corrections'),
                                                 ('two_level', 'splitting')])
    def test_cached_projection_stays_consistent(self, kac_chain, method, strategy):
        """
        Test que verifica η = T(σ) tras cada paso con el modo de depuración activo.
        """
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg, 'full' if strategy == 'corrections' else 'long')
        config = SamplerConfig(method=method, strategy=strategy, iterations=300, seed=5, debug=True)
        result = run_chain(config, H, Hbar)
        assert np.array_equal(result.state.eta, project(cg, result.state.sigma))

    def test_corrupted_projection_is_detected(self, kac_chain):
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg)
        rng = make_rng(3)
        state = ChainState.initial(H.geometry, rng, cg)
        state.eta[0] += 1
        with pytest.raises(AssertionError):
            run_chain(SamplerConfig(method='mh', iterations=3, debug=True), H, Hbar, state=state)

    def test_exact_coarse_model_accepts_every_fine_step(self):
        """
        Test que verifica que con Curie-Weiss la prueba fina siempre acepta.
        """
        geom, cg = build_geometry(1, 32, 4)
        H = build_hamiltonian(geom, curie_weiss(3.0, 32), 1.2, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        result = run_chain(SamplerConfig(method='two_level', iterations=2000, seed=9), H, Hbar)
        assert result.stats.n_fine_proposed > 0
        assert result.stats.n_fine_accepted == result.stats.n_fine_proposed

    def test_q1_reduces_to_single_level(self):
        geom, cg = build_geometry(1, 32, 1)
        H = build_hamiltonian(geom, kac_smooth(2.0, 8.0), -0.8, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        result = run_chain(SamplerConfig(method='two_level', iterations=1000, seed=2), H, Hbar)
        assert result.stats.n_fine_accepted == result.stats.n_fine_proposed

    def test_retry_policy_always_reaches_fine_level(self, kac_chain):
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg)
        config = SamplerConfig(method='two_level', coarse_rejection_policy='retry', iterations=500, seed=4)
        stats = run_chain(config, H, Hbar).stats
        assert stats.n_fine_proposed == 500
        assert stats.n_coarse_proposed >= 500

    def test_single_steps(self, kac_chain):
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg)
        rng = make_rng(8)
        state = ChainState.initial(H.geometry, rng, cg)
        for _ in range(50):
            two_level_step(state, H, Hbar)
        assert state.step == 50
        coarse = CoarseChainState(project(cg, state.sigma), rng)
        for _ in range(50):
            cgmc_step(coarse, Hbar)
        assert coarse.step == 50
        assert np.all((coarse.eta >= 0) & (coarse.eta <= cg.Q))

    def test_unknown_policy(self, kac_chain):
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg)
        state = ChainState.initial(H.geometry, make_rng(1), cg)
        with pytest.raises(ConfigurationError):
            two_level_step(state, H, Hbar, policy='forever')


class TestCountersAndOps:
    """
    Clase de tests para las tasas de aceptación y el conteo de operaciones.
    """

    def test_acceptance_without_proposals(self):
        with pytest.raises(StatisticsError):
            average_acceptance(AcceptanceStats())

    def test_acceptance_rates(self):
        stats = AcceptanceStats(n_coarse_proposed=10, m_coarse_accepted=5, n_fine_proposed=5, n_fine_accepted=2)
        assert average_acceptance(stats) == (0.5, 0.4, 0.2)

    @pytest.mark.parametrize("method,strategy,L_c", [
        ('mh', 'corrections', None),
        ('cgmc', 'corrections', None),
        ('two_level', 'corrections', None),
        ('two_level', 'splitting', None),
        ('two_level', 'approximate_cg', None),
        ('two_level', 'corrections', 3.0),
        ('two_level', 'splitting', 3.0),
    ])
    def test_measured_ops_match_prediction(self, kac_chain, method, strategy, L_c):
        """
        Test que verifica que el conteo medido coincide exactamente con el predicho por las cajas.
        """
        H, cg = kac_chain
        Hbar = None if method == 'mh' else build_coarse_hamiltonian(
            H, cg, 'full' if strategy == 'corrections' or method == 'cgmc' else 'long')
        config = SamplerConfig(method=method, strategy=strategy, iterations=3000, seed=21, correction_cutoff=L_c)
        stats = run_chain(config, H, Hbar, emit=False).stats
        box = None
        if L_c is not None:
            box = Stencil(H.geometry, int(math.ceil(L_c))).size
        ops = report_ops(stats, H, Hbar, method, strategy, box)
        assert ops['exact'] is True
        assert ops['m'] <= ops['n']

    def test_approximate_cg_is_cheaper(self, kac_chain):
        H, cg = kac_chain
        Hbar = build_coarse_hamiltonian(H, cg, 'long')
        costs = {}
        for strategy in ('splitting', 'approximate_cg'):
            config = SamplerConfig(method='two_level', strategy=strategy, iterations=2000, seed=6)
            costs[strategy] = run_chain(config, H, Hbar, emit=False).stats.ops_total
        assert costs['approximate_cg'] < costs['splitting']

    def test_spawned_streams_differ(self):
        first, second = spawn_rngs(5, 2)
        assert first.random() != second.random()
        assert make_rng(5).random() == make_rng(5).random()


class TestMicrocanonical:
    """
    Clase de tests para la conservación del número de partículas.
    """

    @pytest.mark.parametrize("method,strategy", [
        ('mh', 'corrections'), ('cgmc', 'corrections'), ('two_level', 'corrections'),
        ('two_level', 'approximate_cg'),
    ])
    def test_coverage_is_conserved(self, method, strategy):
        geom, cg = build_geometry(2, 8, 2)
        H = build_hamiltonian(geom, split(kac_smooth(1.5, 3.0, 2), 1.0), 0.0, 1.5)
        Hbar = None if method == 'mh' else build_coarse_hamiltonian(
            H, cg, 'long' if strategy == 'approximate_cg' else 'full')
        config = SamplerConfig(method=method, strategy=strategy, ensemble='microcanonical', coverage=0.25,
                               iterations=2000, seed=13, stride=100)
        result = run_chain(config, H, Hbar)
        assert {row['coverage'] for row in result.rows} == {0.25}
        assert result.stats.n_fine_accepted > 0

    def test_exchange_step_keeps_projection(self):
        geom, cg = build_geometry(1, 16, 4)
        H = build_hamiltonian(geom, kac_smooth(1.0, 4.0), 0.0, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        state = ChainState.initial(geom, make_rng(2), cg, coverage=0.5)
        for _ in range(400):
            two_level_exchange_step(state, H, Hbar)
            assert np.array_equal(state.eta, project(cg, state.sigma))
        assert int(state.sigma.sum()) == 8


def independent_samples(step, new_state, replicas: int, steps: int) -> np.ndarray:
    """
    Estado final de réplicas independientes tras steps pasos cada una
    """
    samples = []
    for _ in range(replicas):
        state = new_state()
        for _ in range(steps):
            step(state)
        samples.append(state.sigma.copy())
    return np.array(samples)


@pytest.mark.slow
class TestStationaryDistribution:
    """
    Tests estadísticos largos: la frecuencia empírica de estados coincide con la medida exacta.
    """

    @pytest.mark.parametrize("strategy", ['corrections', 'splitting'])
    def test_two_level_samples_gibbs(self, strategy):
        geom, cg = build_geometry(1, 6, 2)
        H = build_hamiltonian(geom, benchmark_potential(1.0, 2.0, 6), 0.5, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg, 'full' if strategy == 'corrections' else 'long')
        rng = make_rng(101)
        samples = independent_samples(lambda s: two_level_step(s, H, Hbar, strategy),
                                      lambda: ChainState.initial(geom, rng, cg), 3000, 90)
        assert chi_square_pvalue(state_codes(samples), exact_gibbs(H).p) > 1e-3

    def test_approximate_cg_samples_its_own_measure(self):
        geom, cg = build_geometry(1, 6, 2)
        H = build_hamiltonian(geom, benchmark_potential(1.0, 2.0, 6), 0.5, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg, 'long')
        rng = make_rng(202)
        samples = independent_samples(lambda s: two_level_step(s, H, Hbar, 'approximate_cg'),
                                      lambda: ChainState.initial(geom, rng, cg), 3000, 90)
        assert chi_square_pvalue(state_codes(samples), approximate_measure(H, Hbar).p) > 1e-3

    def test_mh_samples_gibbs(self):
        geom, _ = build_geometry(1, 6, 2)
        H = build_hamiltonian(geom, benchmark_potential(1.0, 2.0, 6), 0.5, 1.0)
        rng = make_rng(404)
        config = SamplerConfig(method='mh', iterations=60)
        samples = np.array([run_chain(config, H, rng=rng, emit=False).state.sigma for _ in range(3000)])
        assert chi_square_pvalue(state_codes(samples), exact_gibbs(H).p) > 1e-3

    def test_microcanonical_two_level_samples_shell(self):
        geom, cg = build_geometry(1, 8, 2)
        H = build_hamiltonian(geom, kac_smooth(2.0, 3.0), 0.0, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        rng = make_rng(303)
        samples = independent_samples(lambda s: two_level_exchange_step(s, H, Hbar),
                                      lambda: ChainState.initial(geom, rng, cg, coverage=0.5), 3000, 160)
        configs = shell_configs(geom, 0.5)
        mu = exact_gibbs(H, configs)
        assert chi_square_pvalue(state_codes(samples), mu.p, state_codes(configs)) > 1e-3


def thinned_chain(step, state: ChainState, steps: int, thin: int, burn_in: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Códigos de estado y coberturas de una sola cadena larga, uno cada thin pasos
    """
    for _ in range(burn_in):
        step(state)
    weights = 1 << np.arange(state.sigma.size - 1, -1, -1, dtype=np.int64)
    codes, coverages = [], []
    for t in range(1, steps + 1):
        step(state)
        if t % thin == 0:
            codes.append(int(state.sigma.astype(np.int64) @ weights))
            coverages.append(float(state.sigma.mean()))
    return np.array(codes), np.array(coverages)


def within_standard_errors(samples: np.ndarray, exact: float, width: float = 3.0, batches: int = 40) -> bool:
    mean, std, _ = batch_means_ci(samples, batches)
    return abs(mean - exact) <= width * std / math.sqrt(batches)


@pytest.mark.slow
class TestLongChainExactness:
    """
    Tests estadísticos de una sola cadena larga sobre el benchmark N=8 contra la enumeración.
    """

    @pytest.fixture
    def benchmark_8(self):
        geom, cg = build_geometry(1, 8, 2)
        H = build_hamiltonian(geom, benchmark_potential(1.0, 1.0, 8), 1.0, 0.5)
        return H, cg

    @pytest.mark.parametrize("method", ['mh', 'two_level'])
    def test_million_step_chain_matches_gibbs(self, benchmark_8, method):
        """
        Test que verifica ⟨c⟩ dentro de 3 errores estándar y χ² sobre los 256 estados con p > 0.01.
        """
        H, cg = benchmark_8
        Hbar = build_coarse_hamiltonian(H, cg)
        if method == 'mh':
            step = lambda s: mh_step(s, H)
        else:
            step = lambda s: two_level_step(s, H, Hbar, 'corrections', 'stay')
        state = ChainState.initial(H.geometry, make_rng(606), cg)
        codes, coverages = thinned_chain(step, state, 1_000_000, 125, 10_000)
        mu = exact_gibbs(H)
        exact_coverage = float(mu.p @ mu.states.mean(axis=1))
        assert within_standard_errors(coverages, exact_coverage)
        assert chi_square_pvalue(codes, mu.p) > 0.01

    def test_cgmc_matches_coarse_gibbs(self):
        """
        Test que verifica ⟨η(0)⟩ y el histograma grueso de CGMC contra μ̄(0) con M=4, Q=2.
        """
        geom, cg = build_geometry(1, 8, 2)
        H = build_hamiltonian(geom, kac_smooth(2.0, 4.0), 0.3, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        mu_bar = exact_coarse_gibbs(Hbar)
        state = CoarseChainState(eta=np.zeros(cg.M, dtype=np.int64), rng=make_rng(707))
        for _ in range(5_000):
            cgmc_step(state, Hbar)
        etas = []
        for t in range(1, 400_001):
            cgmc_step(state, Hbar)
            if t % 20 == 0:
                etas.append(state.eta.copy())
        etas = np.array(etas)
        assert within_standard_errors(etas[:, 0].astype(float), float(mu_bar.p @ mu_bar.states[:, 0]))
        codes = coarse_index(cg, etas)
        assert chi_square_pvalue(codes, mu_bar.p) > 0.01

    def test_cgmc_infinite_temperature_is_binomial(self):
        """
        Test que verifica que con β = 0 cada celda sigue Bin(Q, 1/2).
        """
        geom, cg = build_geometry(1, 16, 4)
        H = build_hamiltonian(geom, kac_smooth(2.0, 4.0), 0.0, 0.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        state = CoarseChainState(eta=np.zeros(cg.M, dtype=np.int64), rng=make_rng(808))
        for _ in range(1_000):
            cgmc_step(state, Hbar)
        counts = []
        for t in range(1, 200_001):
            cgmc_step(state, Hbar)
            if t % 20 == 0:
                counts.append(int(state.eta[0]))
        pmf = scipy_stats.binom.pmf(np.arange(cg.Q + 1), cg.Q, 0.5)
        assert chi_square_pvalue(np.array(counts), pmf) > 0.01
        assert within_standard_errors(np.array(counts, dtype=float), cg.Q / 2.0)


@pytest.mark.slow
class TestLongMicrocanonicalRun:
    """
    Conservación del número de partículas en una corrida microcanónica larga.
    """

    def test_ten_million_exchange_steps_conserve_coverage(self):
        """
        Test que verifica la conservación exacta de la cobertura en 10⁷ pasos de intercambio de dos niveles.
        """
        geom, cg = build_geometry(1, 64, 4)
        H = build_hamiltonian(geom, kac_smooth(1.5, 8.0), 0.0, 1.0)
        Hbar = build_coarse_hamiltonian(H, cg)
        config = SamplerConfig(method='two_level', strategy='corrections', ensemble='microcanonical', coverage=0.25,
                               iterations=10_000_000, seed=17, stride=100_000)
        result = run_chain(config, H, Hbar)
        assert len(result.rows) == 100
        assert {row['coverage'] for row in result.rows} == {0.25}
        assert int(result.state.sigma.sum()) == 16
        assert np.array_equal(result.state.eta, project(cg, result.state.sigma))
