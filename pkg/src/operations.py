"""
Operaciones de alto nivel: construcción de hamiltonianos desde la configuración,
ejecución de experimentos con escritura atómica de artefactos, matriz de verificación
exacta y resumen de conteo de operaciones
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy
from typing_extensions import Self

from src.core.energy import CoarseHamiltonian, Hamiltonian, build_coarse_hamiltonian, build_hamiltonian
from src.core.errors import CGMCError, ConfigurationError
from src.core.kernel_analysis import (
    approximate_measure, benchmark_a_bound, build_mh_kernel, build_two_level_exchange_kernel, build_two_level_kernel,
    check_detailed_balance, decompose_kernel, exact_gibbs, gap_report, shell_configs, stationarity_residual,
    verify_factorization,
)
from src.core.lattice import build_geometry, write_snapshot
from src.core.observables import hysteresis_error, hysteresis_sweep, pattern_stats
from src.core.potentials import (
    benchmark_potential, curie_weiss, cutoff_range, kac_algebraic, kac_smooth, morse_gaussian, nearest_neighbor,
    Stencil, normalize_kac, potential_profile_rows, split,
)
from src.core.samplers import STREAM_COLUMNS, ChainState, SamplerConfig, make_rng, run_chain
from src.models.config import ExperimentConfig, config_hash, serialize_config
from src.models.results import GAP_REPORT_COLUMNS, AcceptanceStats, PatternStats

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ('variant', 'branch', 'h', 'coverage', 'std_error', 'coarse_rate', 'fine_rate')
STATS_COLUMNS = ('variant', 'n_coarse_proposed', 'm_coarse_accepted', 'n_fine_proposed', 'n_fine_accepted',
                 'ops_long', 'ops_short', 'ops_coarse')
ERROR_COLUMNS = ('variant', 'reference', 'metric', 'value')
PATTERN_COLUMNS = ('variant', 'feature_count', 'mean_diameter', 'std', 'ci_low', 'ci_high')
CHECK_COLUMNS = ('instance', 'check', 'value', 'tolerance', 'ok')
OPS_COLUMNS = ('variant', 'cost_form', 'n', 'm', 'predicted', 'measured', 'nominal', 'exact')
COST_FORMS = {
    'mh_full': 'n·[(2L+1)^d + (2S+1)^d]',
    'cgmc_coarse': 'n·(2L+1)^d/Q',
    'coarse_plus_short': 'n·(2L+1)^d/Q + m·(2S+1)^d',
    'coarse_plus_correction_box': 'n·(2L+1)^d/Q + m·[(2L_c+1)^d + (2S+1)^d]',
    'coarse_plus_full_fine': 'n·(2L+1)^d/Q + m·[(2L+1)^d + (2S+1)^d]',
}
PROFILE_COLUMNS = ('r', 'J', 'J_bar', 'J_c')


@dataclass(frozen=True)
class Variant:
    """
    Muestreador a comparar: método, lado de celda y estrategia
    """
    method: str
    q: int
    strategy: str

    @property
    def label(self) -> str:
        return f'{self.method}_q{self.q}_{self.strategy}'

    @classmethod
    def parse(cls, text: str) -> Self:
        parts = [p.strip() for p in text.split(':')]
        if len(parts) != 3:
            raise ConfigurationError(f"Variante inválida '{text}' (formato método:q:estrategia)", key='variants')
        try:
            q = int(parts[1])
        except ValueError:
            raise ConfigurationError(f"Lado de celda inválido en la variante '{text}'", key='variants')
        return cls(parts[0], q, parts[2])


@dataclass
class RunSummary:
    out_dir: Path
    artifacts: dict[str, Path] = field(default_factory=dict)
    stats: dict[str, AcceptanceStats] = field(default_factory=dict)
    ok: bool = True
    messages: list[str] = field(default_factory=list)


def atomic_write_text(path: Path, text: str) -> Path:
    """
    Escribe en un temporal del mismo directorio y lo renombra
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    tmp.write_text(text, encoding='utf-8')
    os.replace(tmp, path)
    return path


def write_csv(path: Path, columns, rows) -> Path:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator='\n', extrasaction='ignore')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return atomic_write_text(path, buffer.getvalue())


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def variants_of(config: ExperimentConfig) -> list[Variant]:
    if config.compare.variants:
        return [Variant.parse(text) for text in config.compare.variants]
    return [Variant(config.sampler.method, config.lattice.q, config.sampler.strategy)]


def variant_seed(seed: int, index: int) -> int:
    """
    Semilla hija determinista para la variante index
    """
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def build_potential(config: ExperimentConfig, geom):
    """
    Potencial de pares (o par separado en corto y largo alcance) de la sección [potential]
    """
    pot = config.potential
    if pot.kind == 'ising_curie_weiss':
        return benchmark_potential(pot.K, pot.J, geom.N)
    if pot.kind == 'nearest_neighbor':
        result = nearest_neighbor(pot.K)
    elif pot.kind == 'curie_weiss':
        result = curie_weiss(pot.J, geom.N)
    elif pot.kind == 'kac_algebraic':
        result = kac_algebraic(normalize_kac(pot.J0, geom), geom.N)
    elif pot.kind == 'kac_smooth':
        result = kac_smooth(pot.J0, pot.L, geom.d)
    else:
        result = morse_gaussian(pot.J0, pot.r_a, pot.r_r, pot.chi)
        cutoff = pot.cutoff if pot.cutoff is not None else cutoff_range(result, pot.cutoff_tol)
        result = result.with_cutoff(cutoff)
    if pot.cutoff is not None and result.cutoff is None:
        result = result.with_cutoff(pot.cutoff)
    if pot.S is not None:
        result = split(result, pot.S)
    return result


def hamiltonian_field(config: ExperimentConfig, h: float) -> float:
    """
    Campo del hamiltoniano: h con la convención del hamiltoniano, −h con la de adsorción
    """
    return -h if config.ensemble.field_convention == 'adsorption' else h


def coarse_part(H: Hamiltonian, method: str, strategy: str) -> str:
    if method == 'two_level' and H.is_split and strategy != 'corrections':
        return 'long'
    return 'full'


class HamiltonianFactory:
    """
    Construye H y H̄(0) una sola vez y devuelve copias con el campo de cada punto del barrido
    """

    def __init__(self, config: ExperimentConfig, variant: Variant):
        lat = config.lattice
        geom, cg = build_geometry(lat.d, lat.n, variant.q)
        self.config = config
        field_value = hamiltonian_field(config, config.ensemble.h)
        self.H = build_hamiltonian(geom, build_potential(config, geom), field_value, config.ensemble.beta)
        self.Hbar = None
        if variant.method != 'mh':
            self.Hbar = build_coarse_hamiltonian(self.H, cg, coarse_part(self.H, variant.method, variant.strategy))
        self.cg = cg

    def __call__(self, h: float) -> tuple[Hamiltonian, CoarseHamiltonian | None]:
        field_value = hamiltonian_field(self.config, h)
        H = self.H.with_field(field_value)
        Hbar = self.Hbar.with_field(field_value) if self.Hbar is not None else None
        return H, Hbar


def sampler_config(config: ExperimentConfig, variant: Variant, seed: int | None) -> SamplerConfig:
    s = config.sampler
    return SamplerConfig(
        method=variant.method, strategy=variant.strategy, ensemble=config.ensemble.kind,
        iterations=s.iterations, burn_in=s.burn_in, seed=seed,
        coarse_rejection_policy=s.policy if variant.method == 'two_level' else 'stay',
        stride=s.stride, coverage=config.ensemble.c0, correction_cutoff=config.potential.L_c,
    )


def report_ops(stats: AcceptanceStats, H: Hamiltonian, Hbar: CoarseHamiltonian | None, method: str,
               strategy: str = 'corrections', correction_box: int | None = None) -> dict:
    """
    Conteo de operaciones de diferencias de energía: predicho por las cajas de
    vecinos visitadas, medido por los contadores y nominal con (2R+1)^d.
    cost_form nombra la fórmula nominal aplicada (ver COST_FORMS); la forma de tabla
    del dos niveles, n·(2L+1)^d/Q + m·(2S+1)^d, corresponde a approximate_cg, mientras
    que splitting y corrections pagan además el largo alcance en el nivel fino
    """
    n, m = stats.n_coarse_proposed, stats.n_fine_proposed
    d = H.geometry.d
    long_box, short_box = H.long_ops, H.short_ops
    nominal_long = (2 * H.long_table.radius + 1) ** d
    nominal_short = (2 * H.short_table.radius + 1) ** d if H.short_table is not None else 0
    if method == 'mh':
        form = 'mh_full'
        predicted = n * (long_box + short_box)
        nominal = n * (nominal_long + nominal_short)
    else:
        coarse_term = n * Hbar.coarse_ops
        nominal = n * nominal_long / Hbar.cg.Q
        if method == 'cgmc':
            form = 'cgmc_coarse'
            predicted = coarse_term
        elif strategy == 'approximate_cg':
            form = 'coarse_plus_short'
            predicted = coarse_term + m * short_box
            nominal += m * nominal_short
        elif correction_box is not None:
            form = 'coarse_plus_correction_box'
            predicted = coarse_term + m * (correction_box + (short_box if strategy == 'splitting' else 0))
            nominal += m * (correction_box + nominal_short)
        else:
            form = 'coarse_plus_full_fine'
            predicted = coarse_term + m * (long_box + short_box)
            nominal += m * (nominal_long + nominal_short)
    return {
        'cost_form': form, 'n': n, 'm': m, 'predicted': int(predicted), 'measured': stats.ops_total,
        'nominal': float(nominal), 'exact': int(predicted) == stats.ops_total,
    }


def format_ops_report(rows: list[dict]) -> list[str]:
    """
    Tabla de conteos con la forma de costo de cada fila y la leyenda de fórmulas al pie
    """
    lines = [f"{'variante':<32} {'forma':<28} {'n':>10} {'m':>10} {'predicho':>14} {'medido':>14} {'nominal':>14}"]
    for row in rows:
        form = row.get('cost_form') or '-'
        lines.append(f"{row['variant']:<32} {form:<28} {row['n']:>10} {row['m']:>10} {row['predicted']:>14} "
                     f"{row['measured']:>14} {row['nominal']:>14.1f}")
    for form in sorted({row.get('cost_form') for row in rows} & COST_FORMS.keys()):
        lines.append(f"  {form}: {COST_FORMS[form]}")
    return lines


def _stats_row(label: str, stats: AcceptanceStats) -> dict:
    row = {'variant': label}
    row.update({k: v for k, v in stats.as_dict().items() if k != 'fine_probability_sum'})
    return row


def _hysteresis_variant(task: tuple) -> dict:
    config, variant, seed = task
    factory = HamiltonianFactory(config, variant)
    cfg = sampler_config(config, variant, seed)
    total = AcceptanceStats()
    started = time.perf_counter()
    up, down = hysteresis_sweep(cfg, config.h_schedule, config.sampler.samples_per_point, factory,
                                batches=config.sampler.batches, total=total)
    ops = report_ops(total, factory.H, factory.Hbar, variant.method, variant.strategy, _correction_box(config, factory))
    return {'variant': variant, 'curves': (up, down), 'stats': total, 'elapsed': time.perf_counter() - started,
            'ops': ops}


def _correction_box(config: ExperimentConfig, factory: HamiltonianFactory) -> int | None:
    L_c = config.potential.L_c
    if L_c is None:
        return None
    return Stencil(factory.H.geometry, int(math.ceil(L_c - 1e-9))).size


def _chain_variant(task: tuple) -> dict:
    """
    Corre una cadena por tramos de snapshot_stride pasos; guarda instantáneas 2D o 1D
    """
    config, variant, seed, out_dir = task
    factory = HamiltonianFactory(config, variant)
    H, Hbar = factory(config.ensemble.h)
    cfg = sampler_config(config, variant, seed)
    snapshot_stride = config.output.snapshot_stride
    rows, snapshots = [], []
    started = time.perf_counter()
    if snapshot_stride and variant.method != 'cgmc':
        if snapshot_stride % cfg.stride:
            raise ConfigurationError("snapshot_stride debe ser múltiplo de stride", key='snapshot_stride')
        rng = make_rng(seed)
        state = ChainState.initial(H.geometry, rng, factory.cg,
                                   coverage=cfg.coverage if cfg.ensemble == 'microcanonical' else None)
        burn = replace(cfg, iterations=0)
        result = run_chain(burn, H, Hbar, state=state)
        done = 0
        while done < cfg.iterations:
            chunk = min(snapshot_stride, cfg.iterations - done)
            result = run_chain(replace(cfg, burn_in=0, iterations=chunk), H, Hbar, state=result.state)
            rows.extend(result.rows)
            done += chunk
            path = out_dir / 'snapshots' / f'{variant.label}_{result.state.step:010d}.pgm'
            snapshots.append(write_snapshot(H.geometry, result.state.sigma, path))
    else:
        result = run_chain(cfg, H, Hbar)
        rows = result.rows
    elapsed = time.perf_counter() - started
    final = result.state
    pattern = None
    if config.experiment.kind == 'pattern' and variant.method != 'cgmc' and H.geometry.d == 2:
        pattern = pattern_stats(final.sigma.reshape(H.geometry.shape), 'minority')
    ops = report_ops(result.stats, H, Hbar, variant.method, variant.strategy, _correction_box(config, factory))
    if cfg.ensemble == 'microcanonical':
        ops['exact'] = 'n/a'
    return {'variant': variant, 'rows': rows, 'stats': result.stats, 'elapsed': elapsed, 'ops': ops,
            'pattern': pattern, 'snapshots': snapshots, 'final': final}


def _fan_out(worker: Callable, tasks: list, workers: int, progress: Callable[[str], None] | None) -> list:
    """
    Reparte tareas independientes; los resultados se devuelven en el orden de las tareas
    """
    if workers <= 1 or len(tasks) <= 1:
        results = []
        for task in tasks:
            results.append(worker(task))
            if progress is not None:
                progress('.')
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, task) for task in tasks]
        results = []
        for future in futures:
            results.append(future.result())
            if progress is not None:
                progress('.')
        return results


def _log_speedups(results: list[dict]):
    reference = next((r for r in results if r['variant'].method == 'mh'), None)
    if reference is None or reference['elapsed'] <= 0:
        return
    for r in results:
        if r is not reference and r['elapsed'] > 0:
            logger.info("Aceleración de %s respecto de %s: %.2fx", r['variant'].label, reference['variant'].label,
                        reference['elapsed'] / r['elapsed'])


def run_experiment(config: ExperimentConfig, out_dir, workers: int = 1,
                   progress: Callable[[str], None] | None = None) -> RunSummary:
    """
    Ejecuta el experimento de la configuración y escribe CSV, instantáneas y manifiesto en out_dir
    """
    if config.sampler.seed is None and config.experiment.kind != 'verification':
        raise ConfigurationError("La semilla es obligatoria: defina sampler.seed o use --seed", key='seed')
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = RunSummary(out_dir)
    summary.artifacts['config.ini'] = atomic_write_text(out_dir / 'config.ini', serialize_config(config))
    kind = config.experiment.kind
    logger.info("Experimento '%s' (%s) con semilla %s", config.experiment.name, kind, config.sampler.seed)

    if kind == 'verification':
        result = run_verification_matrix(config, workers, progress)
        summary.artifacts['gap_reports.csv'] = write_csv(out_dir / 'gap_reports.csv', GAP_REPORT_COLUMNS,
                                                         [r.csv_row() for r in result['reports']])
        summary.artifacts['verification.csv'] = write_csv(out_dir / 'verification.csv', CHECK_COLUMNS,
                                                          result['checks'])
        summary.ok = result['ok']
        failed = [c for c in result['checks'] if not c['ok']]
        summary.messages.extend(f"{c['instance']}: {c['check']} = {c['value']:.3e}" for c in failed)
    else:
        variants = variants_of(config)
        ordering_pairs(variants[1:], config.compare.ordering)
        seeds = [variant_seed(config.sampler.seed, i) for i in range(len(variants))]
        if kind == 'hysteresis':
            tasks = [(config, v, s) for v, s in zip(variants, seeds)]
            results = _fan_out(_hysteresis_variant, tasks, workers, progress)
            _write_hysteresis(summary, config, results)
        else:
            tasks = [(config, v, s, out_dir) for v, s in zip(variants, seeds)]
            results = _fan_out(_chain_variant, tasks, workers, progress)
            _write_chains(summary, config, results)
        for r in results:
            summary.stats[r['variant'].label] = r['stats']
            logger.info("Variante %s terminada en %.3f s", r['variant'].label, r['elapsed'])
        _log_speedups(results)
        summary.artifacts['stats.csv'] = write_csv(out_dir / 'stats.csv', STATS_COLUMNS,
                                                   [_stats_row(r['variant'].label, r['stats']) for r in results])
        summary.artifacts['ops.csv'] = write_csv(out_dir / 'ops.csv', OPS_COLUMNS,
                                                 [{'variant': r['variant'].label, **r['ops']} for r in results])
        _write_potential_profile(summary, config, variants[0])

    summary.artifacts['manifest.json'] = write_manifest(out_dir, config, summary.artifacts)
    return summary


def ordering_pairs(variants: list[Variant], ordering: str) -> list[tuple[Variant, Variant]]:
    """
    Pares (dos niveles, CGMC) con el mismo q cuya relación de errores se exige
    """
    if ordering == 'none':
        return []
    cgmc = {v.q: v for v in variants if v.method == 'cgmc'}
    pairs = [(v, cgmc[v.q]) for v in variants if v.method == 'two_level' and v.q in cgmc]
    if not pairs:
        raise ConfigurationError("El orden de errores requiere variantes two_level y cgmc con el mismo q",
                                 key='ordering')
    return pairs


def ordering_checks(errors: dict[Variant, float], ordering: str) -> list[dict]:
    """
    error(dos niveles, q) < error(CGMC, q) para cada par del mismo q
    """
    checks = []
    for two_level, cgmc in ordering_pairs(list(errors), ordering):
        difference = errors[two_level] - errors[cgmc]
        checks.append(_check(f'{two_level.label} vs {cgmc.label}', ordering, difference, 0.0,
                             passed=difference < 0.0))
    return checks


def pattern_checks(patterns: list[tuple[Variant, PatternStats]], min_features: int,
                   diameter_tolerance: float | None) -> list[dict]:
    """
    Cantidad mínima de rasgos por variante y ⟨d⟩ de las variantes de dos niveles
    cerca de la de referencia (la primera)
    """
    checks = []
    if min_features > 0:
        for variant, p in patterns:
            checks.append(_check(variant.label, 'feature_count', float(min_features - p.feature_count), 0.0))
    if diameter_tolerance is not None and patterns:
        reference = patterns[0][1]
        for variant, p in patterns[1:]:
            if variant.method != 'two_level':
                continue
            value = abs(p.mean_diameter - reference.mean_diameter) / reference.mean_diameter \
                if reference.feature_count and p.feature_count else float('nan')
            checks.append(_check(variant.label, 'relative_diameter', value, diameter_tolerance,
                                 passed=bool(value <= diameter_tolerance)))
    return checks


def write_checks(summary: RunSummary, checks: list[dict]):
    if not checks:
        return
    summary.artifacts['checks.csv'] = write_csv(summary.out_dir / 'checks.csv', CHECK_COLUMNS, checks)
    failed = [c for c in checks if not c['ok']]
    if failed:
        summary.ok = False
        summary.messages.extend(f"{c['instance']}: {c['check']} = {c['value']:.4g}" for c in failed)


def _write_hysteresis(summary: RunSummary, config: ExperimentConfig, results: list[dict]):
    rows = []
    for r in results:
        for curve in r['curves']:
            for p in curve.points:
                rows.append({'variant': r['variant'].label, 'branch': curve.branch, 'h': p.h,
                             'coverage': p.coverage, 'std_error': p.std_error, 'coarse_rate': p.coarse_rate,
                             'fine_rate': p.fine_rate})
    summary.artifacts['curves.csv'] = write_csv(summary.out_dir / 'curves.csv', CURVE_COLUMNS, rows)
    reference = results[0]
    errors = [{'variant': r['variant'].label, 'reference': reference['variant'].label, 'metric': 'l2_coverage',
               'value': hysteresis_error(r['curves'], reference['curves'])} for r in results[1:]]
    summary.artifacts['errors.csv'] = write_csv(summary.out_dir / 'errors.csv', ERROR_COLUMNS, errors)
    by_variant = {r['variant']: e['value'] for r, e in zip(results[1:], errors)}
    write_checks(summary, ordering_checks(by_variant, config.compare.ordering))


def _write_chains(summary: RunSummary, config: ExperimentConfig, results: list[dict]):
    stream = []
    for r in results:
        stream.extend({'variant': r['variant'].label, **row} for row in r['rows'])
        for path in r['snapshots']:
            summary.artifacts[f'snapshots/{path.name}'] = path
    name = config.output.csv_path
    summary.artifacts[name] = write_csv(summary.out_dir / name, ('variant',) + STREAM_COLUMNS, stream)
    patterns = [(r['variant'].label, r['pattern']) for r in results if r['pattern'] is not None]
    if patterns:
        rows = [{'variant': label, 'feature_count': p.feature_count, 'mean_diameter': p.mean_diameter,
                 'std': p.std, 'ci_low': p.ci_low, 'ci_high': p.ci_high} for label, p in patterns]
        summary.artifacts['pattern.csv'] = write_csv(summary.out_dir / 'pattern.csv', PATTERN_COLUMNS, rows)
        reference_label, reference = patterns[0]
        errors = []
        for label, p in patterns[1:]:
            value = abs(p.mean_diameter - reference.mean_diameter) / reference.mean_diameter \
                if reference.feature_count else float('nan')
            errors.append({'variant': label, 'reference': reference_label, 'metric': 'relative_diameter',
                           'value': value})
        summary.artifacts['errors.csv'] = write_csv(summary.out_dir / 'errors.csv', ERROR_COLUMNS, errors)
        compare = config.compare
        observed = [(r['variant'], r['pattern']) for r in results if r['pattern'] is not None]
        write_checks(summary, pattern_checks(observed, compare.min_features, compare.diameter_tolerance))


def _write_potential_profile(summary: RunSummary, config: ExperimentConfig, variant: Variant):
    if config.potential.kind in ('ising_curie_weiss', 'curie_weiss', 'nearest_neighbor'):
        return
    geom, cg = build_geometry(config.lattice.d, config.lattice.n, variant.q)
    rows = potential_profile_rows(build_potential(config, geom), cg, config.potential.L_c)
    summary.artifacts['potential.csv'] = write_csv(summary.out_dir / 'potential.csv', PROFILE_COLUMNS, rows)


def write_manifest(out_dir: Path, config: ExperimentConfig, artifacts: dict[str, Path]) -> Path:
    """
    Manifiesto sin marcas de tiempo: hash de la configuración, semilla, versiones y hashes de artefactos
    """
    manifest = {
        'config_sha256': config_hash(config),
        'seed': config.sampler.seed,
        'versions': {'python': platform.python_version(), 'numpy': np.__version__, 'scipy': scipy.__version__},
        'artifacts': {
            name: {'sha256': file_sha256(path), 'bytes': Path(path).stat().st_size}
            for name, path in sorted(artifacts.items())
        },
    }
    return atomic_write_text(out_dir / 'manifest.json', json.dumps(manifest, indent=2, sort_keys=True) + '\n')


def _verification_potential(name: str, N: int, K: float, J: float):
    if name == 'benchmark':
        return benchmark_potential(K, J, N)
    if name == 'kac_smooth':
        return kac_smooth(J, max(2.0, N / 2.0), 1)
    raise ConfigurationError(f"Potencial de verificación desconocido: '{name}'", key='potentials')


def _check(instance: str, name: str, value: float, tolerance: float, passed: bool | None = None) -> dict:
    ok = value <= tolerance if passed is None else passed
    return {'instance': instance, 'check': name, 'value': float(value), 'tolerance': tolerance, 'ok': int(ok)}


def verify_instance(task: tuple) -> dict:
    """
    Balance detallado, estacionariedad, factorización A/B y cotas espectrales de una instancia diminuta
    """
    N, q, beta, name, K, J, tol, gap_tol = task
    geom, cg = build_geometry(1, N, q)
    pot = _verification_potential(name, N, K, J)
    H = build_hamiltonian(geom, pot, 0.0, beta)
    Hbar = build_coarse_hamiltonian(H, cg, 'full')
    label = f'{name}_N{N}_q{q}_b{beta:g}'
    checks = []
    mu = exact_gibbs(H)
    K_c = build_mh_kernel(H)
    K_cg = build_two_level_kernel(H, Hbar, 'corrections')
    checks.append(_check(label, 'db_mh', check_detailed_balance(K_c, mu), tol))
    checks.append(_check(label, 'db_two_level', check_detailed_balance(K_cg, mu), tol))
    checks.append(_check(label, 'stationarity_two_level', stationarity_residual(K_cg, mu), tol))

    Hbar_approx = build_coarse_hamiltonian(H, cg, 'long' if H.is_split else 'full')
    K_approx = build_two_level_kernel(H, Hbar_approx, 'approximate_cg')
    mu_approx = approximate_measure(H, Hbar_approx)
    checks.append(_check(label, 'db_approximate_cg', check_detailed_balance(K_approx, mu_approx), tol))

    table = decompose_kernel(H, Hbar, 'corrections')
    checks.append(_check(label, 'factorization', verify_factorization(K_cg, K_c, table), tol))
    if name == 'benchmark':
        checks.append(_check(label, 'no_c4', float(np.sum(table.classes == 'C4')), 0.0))
        checks.append(_check(label, 'b_equals_one', float(np.max(np.abs(table.B - 1.0))), tol))
        split_table = decompose_kernel(H, Hbar_approx, 'splitting')
        checks.append(_check(label, 'no_c4_splitting', float(np.sum(split_table.classes == 'C4')), 0.0))
        checks.append(_check(label, 'a_inf_bound', benchmark_a_bound(K, J, beta) - float(split_table.A.min()), tol))

    report = gap_report(H, Hbar, 'corrections', K=K if name == 'benchmark' else float('nan'), J=J, label=label)
    checks.append(_check(label, 'gap_sandwich', 0.0, gap_tol, passed=report.sandwich_ok))
    reports = [report]
    if name == 'benchmark':
        H0 = build_hamiltonian(geom, benchmark_potential(0.0, J, N), 0.0, beta)
        zero = gap_report(H0, build_coarse_hamiltonian(H0, cg, 'full'), 'corrections', K=0.0, J=J,
                          label=f'{label}_K0')
        checks.append(_check(label, 'gap_equality_K0', abs(zero.lambda_cg - zero.lambda_c), gap_tol))
        reports.append(zero)
    if N % 2 == 0 and N <= 8 and cg.M > 1:
        mu_shell = exact_gibbs(H, shell_configs(geom, 0.5))
        K_ex = build_two_level_exchange_kernel(H, Hbar, 0.5, 'corrections')
        checks.append(_check(label, 'db_two_level_exchange', check_detailed_balance(K_ex, mu_shell), tol))
    return {'reports': reports, 'checks': checks}


def verification_tasks(config: ExperimentConfig) -> list[tuple]:
    v = config.verification
    try:
        sizes = [int(s) for s in v.sizes]
        q_values = [int(s) for s in v.q_values]
        betas = [float(s) for s in v.betas]
    except ValueError as e:
        raise ConfigurationError(f"Lista de verificación inválida: {e}", key='verification')
    tasks = []
    for N in sizes:
        for q in q_values:
            if N % q:
                logger.warning("Instancia omitida: q=%d no divide N=%d", q, N)
                continue
            for beta in betas:
                for name in v.potentials:
                    tasks.append((N, q, beta, name, v.K, v.J, v.tolerance, v.gap_tolerance))
    return tasks


def run_verification_matrix(config: ExperimentConfig, workers: int = 1,
                            progress: Callable[[str], None] | None = None) -> dict:
    """
    Recorre la matriz de instancias diminutas; ok solo si todas las comprobaciones pasan
    """
    results = _fan_out(verify_instance, verification_tasks(config), workers, progress)
    reports = [r for result in results for r in result['reports']]
    checks = [c for result in results for c in result['checks']]
    ok = all(c['ok'] for c in checks)
    logger.info("Matriz de verificación: %d comprobaciones, %d fallidas", len(checks),
                sum(1 for c in checks if not c['ok']))
    return {'reports': reports, 'checks': checks, 'ok': ok}


def list_runs(out_dir) -> list[dict]:
    """
    Directorios de corrida bajo out_dir (los que tienen manifiesto) con el tamaño de sus artefactos
    """
    out_dir = Path(out_dir)
    if not out_dir.exists():
        return []
    runs = []
    for manifest in sorted(out_dir.glob('*/manifest.json')):
        run_dir = manifest.parent
        size = sum(p.stat().st_size for p in run_dir.rglob('*') if p.is_file())
        runs.append({'name': run_dir.name, 'size': size, 'path': run_dir})
    return runs


def read_ops_rows(run_dir) -> list[dict]:
    """
    Filas de ops.csv de una corrida terminada
    """
    path = Path(run_dir) / 'ops.csv'
    if not path.exists():
        raise CGMCError(f"La corrida no tiene ops.csv: {run_dir}")
    with path.open(encoding='utf-8', newline='') as f:
        rows = list(csv.DictReader(f))
    for row in rows:
        for key in ('n', 'm', 'predicted', 'measured'):
            row[key] = int(row[key])
        row['nominal'] = float(row['nominal'])
    return rows
