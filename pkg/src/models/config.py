"""
Configuración de experimentos en INI: esquema con valores por defecto, validación
con diagnóstico de línea y clave, serialización canónica y presets
"""

import configparser
import hashlib
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from typing_extensions import Self

from src.core.errors import ConfigurationError

PRESETS_DIR = Path(__file__).resolve().parent.parent / 'presets'
WORKERS_ENV = 'CGMC_WORKERS'

EXPERIMENT_KINDS = ('hysteresis', 'pattern', 'chain', 'verification')
POTENTIAL_KINDS = ('ising_curie_weiss', 'nearest_neighbor', 'curie_weiss', 'kac_algebraic', 'kac_smooth',
                   'morse_gaussian')
FIELD_CONVENTIONS = ('hamiltonian', 'adsorption')
SNAPSHOT_FORMATS = ('pgm',)
ORDERINGS = ('none', 'two_level_below_cgmc')


def _schema(kind: str, choices: tuple | None = None, minimum: float | None = None):
    return {'kind': kind, 'choices': choices, 'minimum': minimum}


@dataclass(frozen=True)
class ExperimentSection:
    name: str = field(default='experimento', metadata=_schema('str'))
    kind: str = field(default='chain', metadata=_schema('str', EXPERIMENT_KINDS))
    description: str = field(default='', metadata=_schema('str'))


@dataclass(frozen=True)
class LatticeSection:
    d: int = field(default=1, metadata=_schema('int', (1, 2)))
    n: int = field(default=8, metadata=_schema('int', minimum=2))
    q: int = field(default=2, metadata=_schema('int', minimum=1))


@dataclass(frozen=True)
class PotentialSection:
    kind: str = field(default='ising_curie_weiss', metadata=_schema('str', POTENTIAL_KINDS))
    K: float = field(default=1.0, metadata=_schema('float'))
    J: float = field(default=1.0, metadata=_schema('float'))
    J0: float = field(default=1.0, metadata=_schema('float'))
    L: float = field(default=8.0, metadata=_schema('float', minimum=1.0))
    r_a: float = field(default=4.47, metadata=_schema('float', minimum=0.0))
    r_r: float = field(default=10.0, metadata=_schema('float', minimum=0.0))
    chi: float = field(default=0.1, metadata=_schema('float'))
    cutoff: float | None = field(default=None, metadata=_schema('float?', minimum=1.0))
    cutoff_tol: float = field(default=1e-6, metadata=_schema('float', minimum=0.0))
    S: float | None = field(default=None, metadata=_schema('float?', minimum=1.0))
    L_c: float | None = field(default=None, metadata=_schema('float?', minimum=1.0))


@dataclass(frozen=True)
class EnsembleSection:
    kind: str = field(default='canonical', metadata=_schema('str', ('canonical', 'microcanonical')))
    beta: float = field(default=1.0, metadata=_schema('float', minimum=0.0))
    h: float = field(default=0.0, metadata=_schema('float'))
    h_min: float = field(default=0.0, metadata=_schema('float'))
    h_max: float = field(default=1.0, metadata=_schema('float'))
    h_points: int = field(default=11, metadata=_schema('int', minimum=1))
    field_convention: str = field(default='hamiltonian', metadata=_schema('str', FIELD_CONVENTIONS))
    c0: float = field(default=0.5, metadata=_schema('float', minimum=0.0))


@dataclass(frozen=True)
class SamplerSection:
    method: str = field(default='mh', metadata=_schema('str', ('mh', 'cgmc', 'two_level')))
    strategy: str = field(default='corrections', metadata=_schema('str', ('corrections', 'splitting',
                                                                        'approximate_cg')))
    iterations: int = field(default=10_000, metadata=_schema('int', minimum=0))
    burn_in: int = field(default=0, metadata=_schema('int', minimum=0))
    seed: int | None = field(default=None, metadata=_schema('int?', minimum=0))
    policy: str = field(default='stay', metadata=_schema('str', ('stay', 'retry')))
    samples_per_point: int = field(default=100, metadata=_schema('int', minimum=1))
    stride: int = field(default=1, metadata=_schema('int', minimum=1))
    batches: int = field(default=10, metadata=_schema('int', minimum=2))


@dataclass(frozen=True)
class OutputSection:
    csv_path: str = field(default='stream.csv', metadata=_schema('str'))
    snapshot_stride: int = field(default=0, metadata=_schema('int', minimum=0))
    format: str = field(default='pgm', metadata=_schema('str', SNAPSHOT_FORMATS))


@dataclass(frozen=True)
class CompareSection:
    variants: tuple[str, ...] = field(default=(), metadata=_schema('list'))
    ordering: str = field(default='none', metadata=_schema('str', ORDERINGS))
    diameter_tolerance: float | None = field(default=None, metadata=_schema('float?', minimum=0.0))
    min_features: int = field(default=0, metadata=_schema('int', minimum=0))


@dataclass(frozen=True)
class VerificationSection:
    sizes: tuple[str, ...] = field(default=('4', '6', '8'), metadata=_schema('list'))
    q_values: tuple[str, ...] = field(default=('1', '2'), metadata=_schema('list'))
    betas: tuple[str, ...] = field(default=('0.2', '1'), metadata=_schema('list'))
    potentials: tuple[str, ...] = field(default=('benchmark', 'kac_smooth'), metadata=_schema('list'))
    K: float = field(default=1.0, metadata=_schema('float'))
    J: float = field(default=1.0, metadata=_schema('float'))
    tolerance: float = field(default=1e-12, metadata=_schema('float', minimum=0.0))
    gap_tolerance: float = field(default=1e-10, metadata=_schema('float', minimum=0.0))


SECTIONS = {
    'experiment': ExperimentSection,
    'lattice': LatticeSection,
    'potential': PotentialSection,
    'ensemble': EnsembleSection,
    'sampler': SamplerSection,
    'output': OutputSection,
    'compare': CompareSection,
    'verification': VerificationSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    lattice: LatticeSection = field(default_factory=LatticeSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    output: OutputSection = field(default_factory=OutputSection)
    compare: CompareSection = field(default_factory=CompareSection)
    verification: VerificationSection = field(default_factory=VerificationSection)

    def with_seed(self, seed: int | None) -> Self:
        if seed is None:
            return self
        return replace(self, sampler=replace(self.sampler, seed=int(seed)))

    @property
    def h_schedule(self) -> list[float]:
        ens = self.ensemble
        if ens.h_points == 1:
            return [ens.h_min]
        step = (ens.h_max - ens.h_min) / (ens.h_points - 1)
        return [ens.h_min + i * step for i in range(ens.h_points)]


def _locate(text: str) -> dict[tuple[str, str | None], int]:
    """
    Número de línea de cada sección y de cada clave dentro de su sección
    """
    locations = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in '#;':
            continue
        header = re.match(r'^\[([^\]]+)\]', line)
        if header:
            section = header.group(1).strip()
            locations.setdefault((section, None), number)
        elif section is not None and not raw[:1].isspace():
            key = re.split(r'[=:]', line, maxsplit=1)[0].strip()
            locations.setdefault((section, key), number)
    return locations


def _convert(raw: str, schema: dict, line: int | None, key: str):
    kind = schema['kind']
    value = raw.strip()
    try:
        if kind.endswith('?') and value.lower() in ('', 'none'):
            return None
        if kind.startswith('int'):
            converted = int(value)
        elif kind.startswith('float'):
            converted = float(value)
        elif kind == 'list':
            return tuple(item.strip() for item in value.split(',') if item.strip())
        else:
            converted = value
    except ValueError:
        raise ConfigurationError(f"Tipo inválido: '{value}' no es {kind.rstrip('?')}", line=line, key=key)
    if schema['choices'] is not None and converted not in schema['choices']:
        allowed = ', '.join(str(c) for c in schema['choices'])
        raise ConfigurationError(f"Valor '{value}' no permitido (opciones: {allowed})", line=line, key=key)
    if schema['minimum'] is not None and converted < schema['minimum']:
        raise ConfigurationError(f"Valor {converted} menor que el mínimo {schema['minimum']}", line=line, key=key)
    return converted


def parse_config(text: str) -> ExperimentConfig:
    """
    Parsea y valida texto INI; los errores indican la línea y la clave
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigurationError(f"INI mal formado: {e.message.splitlines()[0]}", line=getattr(e, 'lineno', None))

    locations = _locate(text)
    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigurationError(f"Sección desconocida [{name}]", line=locations.get((name, None)))
        known = {f.name: f for f in fields(SECTIONS[name])}
        values = {}
        for key, raw in parser.items(name):
            line = locations.get((name, key))
            if key not in known:
                raise ConfigurationError(f"Clave desconocida en [{name}]", line=line, key=key)
            values[key] = _convert(raw, known[key].metadata, line, key)
        sections[name] = SECTIONS[name](**values)

    config = ExperimentConfig(**sections)
    lattice = config.lattice
    if lattice.n % lattice.q != 0:
        raise ConfigurationError(f"q={lattice.q} no divide n={lattice.n}", line=locations.get(('lattice', 'q')),
                                 key='q')
    if not config.ensemble.c0 <= 1.0:
        raise ConfigurationError("La cobertura c0 debe estar en [0, 1]", line=locations.get(('ensemble', 'c0')),
                                 key='c0')
    if config.sampler.policy == 'retry' and config.sampler.method != 'two_level':
        raise ConfigurationError("La política 'retry' solo aplica al método two_level",
                                 line=locations.get(('sampler', 'policy')), key='policy')
    return config


def _format(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, tuple):
        return ', '.join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    """
    INI canónico: todas las secciones y claves en el orden del esquema
    """
    lines = []
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append(f'[{name}]')
        for f in fields(section):
            value = getattr(section, f.name)
            if f.name == 'seed' and value is None:
                continue
            lines.append(f'{f.name} = {_format(value)}')
        lines.append('')
    return '\n'.join(lines)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode('utf-8')).hexdigest()


def list_presets() -> list[str]:
    return sorted(path.stem for path in PRESETS_DIR.glob('*.ini'))


def load_preset(name: str) -> ExperimentConfig:
    path = PRESETS_DIR / f'{name}.ini'
    if not path.exists():
        raise ConfigurationError(f"Preset desconocido '{name}' (disponibles: {', '.join(list_presets())})")
    return parse_config(path.read_text(encoding='utf-8'))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"No existe el archivo de configuración: {path}")
    return parse_config(path.read_text(encoding='utf-8'))


def workers_from_env(environ=None) -> int:
    """
    Número de procesos para el reparto de puntos de barrido (CGMC_WORKERS, por defecto 1)
    """
    environ = os.environ if environ is None else environ
    raw = environ.get(WORKERS_ENV, '1').strip()
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} debe ser un entero (recibido '{raw}')")
    if workers < 1:
        raise ConfigurationError(f"{WORKERS_ENV} debe ser al menos 1")
    return workers
