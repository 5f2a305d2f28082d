"""
Tests unitarios para observables, barridos de histéresis y estadística de rasgos.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.energy import build_hamiltonian, energy_micro
from src.core.errors import ArgumentError, StatisticsError
from src.core.lattice import build_geometry
from src.core.observables import (
    batch_means_ci, coverage, energy_per_site, hysteresis_error, hysteresis_sweep, l2_error, pattern_stats,
    torus_components,
)
from src.core.potentials import benchmark_potential
from src.core.samplers import SamplerConfig
from src.models.config import parse_config
from src.models.results import AcceptanceStats, CurvePoint, HysteresisCurve
from src.operations import HamiltonianFactory, Variant


def curve(branch: str, hs, cs) -> HysteresisCurve:
    return HysteresisCurve(branch, [CurvePoint(h, c, 0.0) for h, c in zip(hs, cs)])


def mh_factory(beta: float):
    geom, _ = build_geometry(1, 16, 2)
    base = build_hamiltonian(geom, benchmark_potential(1.0, 2.0, 16), 0.0, beta)
    return lambda h: (base.with_field(h), None)


class TestBasicObservables:
    """
    Clase de tests para cobertura, energía por sitio y medias por lotes.
    """

    def test_coverage(self):
        assert coverage(np.array([1, 0, 1, 1])) == 0.75
        assert coverage(np.zeros((4, 4))) == 0.0

    def test_energy_per_site(self):
        geom, _ = build_geometry(1, 8, 2)
        H = build_hamiltonian(geom, benchmark_potential(1.0, 1.0, 8), 0.5)
        sigma = np.array([1, 1, 0, 0, 1, 0, 1, 0], dtype=np.int8)
        assert energy_per_site(H, sigma) == pytest.approx(energy_micro(H, sigma) / 8)

    def test_batch_means_constant_samples(self):
        mean, std, (low, high) = batch_means_ci(np.full(100, 0.3), batches=10)
        assert mean == pytest.approx(0.3)
        assert std == pytest.approx(0.0, abs=1e-15)
        assert low == pytest.approx(high)

    def test_batch_means_drops_remainder(self):
        mean, _, _ = batch_means_ci(np.arange(11, dtype=float), batches=2)
        assert mean == pytest.approx(4.5)

    @pytest.mark.parametrize("samples,batches", [(np.ones(10), 1), (np.ones(3), 5)])
    def test_batch_means_errors(self, samples, batches):
        with pytest.raises(StatisticsError):
            batch_means_ci(samples, batches)

    def test_batch_means_coverage_calibration(self, rng):
        """
        Test que verifica que el intervalo al 95% cubre la media verdadera en torno al 95% de las veces.
        """
        hits = 0
        repetitions = 400
        for _ in range(repetitions):
            _, _, (low, high) = batch_means_ci(rng.normal(1.0, 2.0, size=400), batches=20)
            hits += low <= 1.0 <= high
        assert 0.90 <= hits / repetitions <= 0.99


class TestHysteresis:
    """
    Clase de tests para los barridos de campo y el error l².
    """

    def test_branches_order_and_counters(self):
        config = SamplerConfig(method='mh', burn_in=20, stride=2, seed=3)
        total = AcceptanceStats()
        seen = []
        up, down = hysteresis_sweep(config, [1.0, -1.0, 0.0], 10, mh_factory(1.0), batches=5, total=total,
                                    on_point=lambda branch, point: seen.append((branch, point.h)))
        assert up.h_values == [-1.0, 0.0, 1.0]
        assert down.h_values == [1.0, 0.0, -1.0]
        assert [b for b, _ in seen] == ['up'] * 3 + ['down'] * 3
        assert total.n_coarse_proposed == 6 * (20 + 10 * 2)

    def test_point_stores_batch_standard_error(self, mocker):
        """
        Test que verifica que std_error es la desviación de las medias de lote sobre √lotes.
        """
        summary = mocker.patch('src.core.observables.batch_means_ci', return_value=(0.4, 0.2, (0.1, 0.7)))
        config = SamplerConfig(method='mh', burn_in=4, stride=1, seed=5)
        up, down = hysteresis_sweep(config, [0.0], 16, mh_factory(1.0), batches=4)
        assert summary.call_count == 2
        for point in up.points + down.points:
            assert point.coverage == 0.4
            assert point.std_error == pytest.approx(0.2 / 2.0)

    def test_same_seed_same_curves(self):
        config = SamplerConfig(method='mh', burn_in=10, stride=3, seed=8)
        first = hysteresis_sweep(config, [0.0, 0.5], 10, mh_factory(1.0), batches=5)
        second = hysteresis_sweep(config, [0.0, 0.5], 10, mh_factory(1.0), batches=5)
        assert first[0].coverages == second[0].coverages
        assert first[1].coverages == second[1].coverages

    def test_infinite_temperature_is_flat(self):
        """
        Test que verifica que con β = 0 la cobertura es 1/2 en todo el barrido.
        """
        config = SamplerConfig(method='mh', burn_in=64, stride=8, seed=1)
        up, down = hysteresis_sweep(config, np.linspace(-3.0, 3.0, 5), 200, mh_factory(0.0), batches=10)
        for c in up.coverages + down.coverages:
            assert abs(c - 0.5) < 0.08

    def test_adsorption_convention_fills_lattice(self, tiny_config_text):
        """
        Test que verifica que con la convención de adsorción un campo grande llena la red.
        """
        text = tiny_config_text.replace('h_points = 3', 'h_points = 3\nfield_convention = adsorption')
        config = parse_config(text)
        factory = HamiltonianFactory(config, Variant('mh', 2, 'corrections'))
        sampler = SamplerConfig(method='mh', burn_in=200, stride=4, seed=2)
        up, _ = hysteresis_sweep(sampler, [6.0, 8.0], 40, factory, batches=4)
        assert min(up.coverages) > 0.95

    def test_hamiltonian_convention_empties_lattice(self, tiny_config_text):
        factory = HamiltonianFactory(parse_config(tiny_config_text), Variant('mh', 2, 'corrections'))
        sampler = SamplerConfig(method='mh', burn_in=200, stride=4, seed=2)
        up, _ = hysteresis_sweep(sampler, [6.0, 8.0], 40, factory, batches=4)
        assert max(up.coverages) < 0.05

    @pytest.mark.parametrize("schedule", [[], [0.5, 0.5]])
    def test_invalid_schedule(self, schedule):
        with pytest.raises(ArgumentError):
            hysteresis_sweep(SamplerConfig(seed=1), schedule, 10, mh_factory(1.0), batches=2)

    def test_too_few_samples_per_point(self):
        with pytest.raises(StatisticsError):
            hysteresis_sweep(SamplerConfig(seed=1), [0.0], 5, mh_factory(1.0), batches=10)

    def test_l2_error(self):
        reference = curve('up', [0.0, 1.0, 2.0], [0.1, 0.5, 0.9])
        other = curve('up', [0.0, 1.0, 2.0], [0.2, 0.3, 0.7])
        assert l2_error(other, reference) == pytest.approx(0.3)
        assert l2_error(reference, reference) == 0.0

    def test_l2_error_requires_same_grid(self):
        with pytest.raises(ArgumentError):
            l2_error(curve('up', [0.0, 1.0], [0.1, 0.2]), curve('up', [0.0, 1.5], [0.1, 0.2]))

    def test_hysteresis_error_combines_branches(self):
        reference = (curve('up', [0.0], [0.0]), curve('down', [0.0], [0.0]))
        other = (curve('up', [0.0], [0.3]), curve('down', [0.0], [0.4]))
        assert hysteresis_error(other, reference) == pytest.approx(0.5)

    def test_invalid_branch(self):
        with pytest.raises(ValueError):
            HysteresisCurve('sideways')


class TestPatternStats:
    """
    Clase de tests para los rasgos de una fase sobre el toro.
    """

    def test_single_square(self):
        """
        Test que verifica el diámetro de círculo de igual área de un único rasgo.
        """
        grid = np.zeros((16, 16), dtype=np.int8)
        grid[4:6, 4:6] = 1
        stats = pattern_stats(grid)
        assert stats.feature_count == 1
        assert stats.mean_diameter == pytest.approx(4.0 / math.sqrt(math.pi))
        assert stats.ci_low == stats.ci_high == stats.mean_diameter

    def test_two_features(self):
        grid = np.zeros((16, 16), dtype=np.int8)
        grid[1:3, 1:3] = 1
        grid[8:11, 8:11] = 1
        stats = pattern_stats(grid, 'occupied')
        diameters = 2.0 * np.sqrt(np.array([4.0, 9.0]) / math.pi)
        assert stats.feature_count == 2
        assert stats.mean_diameter == pytest.approx(diameters.mean())
        assert stats.std == pytest.approx(diameters.std(ddof=1))
        assert stats.ci_low < stats.mean_diameter < stats.ci_high

    def test_feature_wrapping_the_border(self):
        grid = np.zeros((8, 8), dtype=np.int8)
        grid[3:5, 7] = 1
        grid[3:5, 0] = 1
        stats = pattern_stats(grid)
        assert stats.feature_count == 1
        assert stats.mean_diameter == pytest.approx(4.0 / math.sqrt(math.pi))

    def test_corners_form_one_feature(self):
        grid = np.zeros((8, 8), dtype=np.int8)
        grid[0, 0] = grid[0, 7] = grid[7, 0] = grid[7, 7] = 1
        _, count = torus_components(grid == 1)
        assert count == 1

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_checkerboard_gives_isolated_sites(self, n):
        """
        Test que verifica que un tablero de ajedrez da N/2 rasgos de área 1 en cada fase.
        """
        grid = (np.add.outer(np.arange(n), np.arange(n)) % 2).astype(np.int8)
        for phase in ('occupied', 'vacant', 'minority'):
            stats = pattern_stats(grid, phase)
            assert stats.feature_count == n * n // 2
            assert stats.mean_diameter == pytest.approx(2.0 / math.sqrt(math.pi))
            assert stats.std == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_contact_is_not_connected(self):
        grid = np.zeros((8, 8), dtype=np.int8)
        grid[2, 2] = grid[3, 3] = 1
        assert pattern_stats(grid).feature_count == 2

    def test_minority_phase_switches_to_vacancies(self):
        grid = np.ones((8, 8), dtype=np.int8)
        grid[2:4, 2:4] = 0
        grid[6, 6] = 0
        stats = pattern_stats(grid)
        assert stats.feature_count == 2
        assert pattern_stats(grid, 'vacant').feature_count == 2

    def test_no_features(self):
        stats = pattern_stats(np.zeros((8, 8), dtype=np.int8), 'occupied')
        assert stats.feature_count == 0
        assert math.isnan(stats.mean_diameter)
        with pytest.raises(StatisticsError):
            stats.require_features()

    @pytest.mark.parametrize("grid,phase", [(np.zeros(16), 'minority'), (np.zeros((4, 4)), 'liquid')])
    def test_invalid_arguments(self, grid, phase):
        with pytest.raises(ArgumentError):
            pattern_stats(grid, phase)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(0, 11), st.integers(0, 11))
    def test_translation_invariance(self, seed, dx, dy):
        """
        Test de propiedad: trasladar la configuración sobre el toro no cambia la estadística.
        """
        grid = (np.random.default_rng(seed).random((12, 12)) < 0.3).astype(np.int8)
        shifted = np.roll(grid, (dx, dy), axis=(0, 1))
        first, second = pattern_stats(grid), pattern_stats(shifted)
        assert first.feature_count == second.feature_count
        if first.feature_count:
            assert second.mean_diameter == pytest.approx(first.mean_diameter)
            assert second.ci_high == pytest.approx(first.ci_high)
