"""
Observables de cobertura y energía, barridos de histéresis, errores l² entre curvas
y estadística de rasgos en configuraciones 2D
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import replace

import numpy as np
from scipy import ndimage, sparse, stats
from scipy.sparse.csgraph import connected_components

from src.core.energy import CoarseHamiltonian, Hamiltonian, energy_micro
from src.core.errors import ArgumentError, StatisticsError
from src.core.samplers import SamplerConfig, make_rng, run_chain
from src.models.results import AcceptanceStats, CurvePoint, HysteresisCurve, PatternStats

logger = logging.getLogger(__name__)

PHASES = ('occupied', 'vacant', 'minority')
GRID_TOLERANCE = 1e-12


def coverage(sigma: np.ndarray) -> float:
    sigma = np.asarray(sigma)
    return float(np.count_nonzero(sigma)) / sigma.size


def energy_per_site(H: Hamiltonian, sigma: np.ndarray) -> float:
    return energy_micro(H, sigma) / H.geometry.N


def batch_means_ci(samples, batches: int = 20, confidence: float = 0.95) -> tuple[float, float, tuple[float, float]]:
    """
    Media por lotes: devuelve (media, desviación de las medias de lote, IC t de Student)
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if batches < 2:
        raise StatisticsError("Se requieren al menos 2 lotes")
    size = samples.size // batches
    if size < 1:
        raise StatisticsError(f"Muestras insuficientes: {samples.size} para {batches} lotes")
    means = samples[:size * batches].reshape(batches, size).mean(axis=1)
    mean = float(means.mean())
    std = float(means.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, batches - 1)) * std / math.sqrt(batches)
    return mean, std, (mean - half, mean + half)


def _schedule(h_schedule: Sequence[float]) -> list[float]:
    values = sorted(float(h) for h in h_schedule)
    if not values:
        raise ArgumentError("El calendario de campo está vacío")
    if any(b - a <= 0 for a, b in zip(values, values[1:])):
        raise ArgumentError("El calendario de campo debe tener valores distintos")
    return values


def hysteresis_sweep(config: SamplerConfig, h_schedule: Sequence[float], samples_per_point: int,
                     hamiltonians: Callable[[float], tuple[Hamiltonian, CoarseHamiltonian | None]],
                     batches: int = 10, total: AcceptanceStats | None = None,
                     on_point: Callable[[str, CurvePoint], None] | None = None
                     ) -> tuple[HysteresisCurve, HysteresisCurve]:
    """
    Rama ascendente y luego descendente en el campo; cada punto arranca del estado
    final del anterior, descarta config.burn_in pasos y promedia samples_per_point
    muestras de cobertura tomadas cada config.stride pasos
    """
    if samples_per_point < batches:
        raise StatisticsError(f"samples_per_point={samples_per_point} es menor que el número de lotes ({batches})")
    values = _schedule(h_schedule)
    point_config = replace(config, iterations=samples_per_point * config.stride)
    rng = make_rng(config.seed)
    state = None
    curves = []
    for branch, branch_values in (('up', values), ('down', values[::-1])):
        curve = HysteresisCurve(branch)
        for h in branch_values:
            H, Hbar = hamiltonians(h)
            if state is not None:
                state.stats = AcceptanceStats()
            result = run_chain(point_config, H, Hbar, state=state, rng=rng)
            state = result.state
            mean, std, _ = batch_means_ci([row['coverage'] for row in result.rows], batches)
            coarse_rate = result.stats.m_coarse_accepted / max(result.stats.n_coarse_proposed, 1)
            fine_rate = result.stats.n_fine_accepted / max(result.stats.n_fine_proposed, 1)
            point = CurvePoint(h, mean, std / math.sqrt(batches), coarse_rate, fine_rate)
            curve.points.append(point)
            if total is not None:
                for name, value in result.stats.as_dict().items():
                    setattr(total, name, getattr(total, name) + value)
            if on_point is not None:
                on_point(branch, point)
            logger.debug("Rama %s, h=%.4f: <c>=%.4f ± %.4f", branch, h, mean, point.std_error)
        curves.append(curve)
    return curves[0], curves[1]


def l2_error(curve: HysteresisCurve, reference: HysteresisCurve) -> float:
    """
    sqrt(Σ_h (<c> − <c>_ref)²) sobre la misma grilla de campo
    """
    grid, ref_grid = np.array(curve.h_values), np.array(reference.h_values)
    if grid.shape != ref_grid.shape or np.any(np.abs(grid - ref_grid) > GRID_TOLERANCE):
        raise ArgumentError("Las curvas no comparten la grilla de campo")
    return float(np.sqrt(np.sum((np.array(curve.coverages) - np.array(reference.coverages)) ** 2)))


def hysteresis_error(curves: tuple[HysteresisCurve, HysteresisCurve],
                     reference: tuple[HysteresisCurve, HysteresisCurve]) -> float:
    """
    Error l² combinando ambas ramas
    """
    return math.hypot(l2_error(curves[0], reference[0]), l2_error(curves[1], reference[1]))


def _phase_mask(grid: np.ndarray, phase: str) -> np.ndarray:
    if phase not in PHASES:
        raise ArgumentError(f"Fase desconocida: '{phase}' (permitidas: {', '.join(PHASES)})")
    if phase == 'minority':
        phase = 'occupied' if grid.mean() <= 0.5 else 'vacant'
    return grid == 1 if phase == 'occupied' else grid == 0


def torus_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """
    Componentes 4-conexas sobre el toro: etiquetado plano y unión de etiquetas
    que se tocan a través de los bordes periódicos
    """
    labels, count = ndimage.label(mask)
    if count == 0:
        return labels, 0
    pairs = [
        (labels[:, 0], labels[:, -1]),
        (labels[0, :], labels[-1, :]),
    ]
    rows, cols = [], []
    for first, last in pairs:
        touching = (first > 0) & (last > 0)
        rows.extend(first[touching] - 1)
        cols.extend(last[touching] - 1)
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(count, count))
    merged, component = connected_components(graph, directed=False)
    result = np.zeros_like(labels)
    result[labels > 0] = component[labels[labels > 0] - 1] + 1
    return result, int(merged)


def pattern_stats(sigma: np.ndarray, phase: str = 'minority', confidence: float = 0.95) -> PatternStats:
    """
    Rasgos de la fase elegida en una configuración 2D; diámetro del círculo de igual área
    """
    grid = np.asarray(sigma)
    if grid.ndim != 2:
        raise ArgumentError("pattern_stats requiere una configuración bidimensional")
    labels, count = torus_components(_phase_mask(grid, phase))
    if count == 0:
        logger.warning("No se encontraron rasgos de la fase '%s'", phase)
        return PatternStats(0, float('nan'), float('nan'), float('nan'), float('nan'))
    areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    diameters = 2.0 * np.sqrt(areas / math.pi)
    mean = float(diameters.mean())
    if count < 2:
        return PatternStats(count, mean, 0.0, mean, mean)
    std = float(diameters.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, count - 1)) * std / math.sqrt(count)
    return PatternStats(count, mean, std, mean - half, mean + half)
