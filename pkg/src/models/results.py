"""
Tipos de valor con los resultados de cadenas, barridos y verificaciones
"""

from dataclasses import asdict, dataclass, field, fields

from typing_extensions import Self

from src.core.errors import StatisticsError


@dataclass
class AcceptanceStats:
    """
    Contadores de propuestas/aceptaciones por nivel y de visitas a vecinos
    en el cálculo de diferencias de energía
    """
    n_coarse_proposed: int = 0
    m_coarse_accepted: int = 0
    n_fine_proposed: int = 0
    n_fine_accepted: int = 0
    ops_long: int = 0
    ops_short: int = 0
    ops_coarse: int = 0
    fine_probability_sum: float = 0.0

    def merge(self, other: Self) -> Self:
        return AcceptanceStats(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def ops_total(self) -> int:
        return self.ops_long + self.ops_short + self.ops_coarse


@dataclass(frozen=True)
class CurvePoint:
    """
    Cobertura media en un valor de campo; std_error es el error estándar de las medias por lotes
    """
    h: float
    coverage: float
    std_error: float
    coarse_rate: float = 1.0
    fine_rate: float = 1.0


@dataclass
class HysteresisCurve:
    """
    Rama de histéresis: cobertura media en cada valor del campo
    """
    branch: str
    points: list[CurvePoint] = field(default_factory=list)

    def __post_init__(self):
        if self.branch not in ('up', 'down'):
            raise ValueError(f"Rama inválida: '{self.branch}'")

    @property
    def h_values(self) -> list[float]:
        return [p.h for p in self.points]

    @property
    def coverages(self) -> list[float]:
        return [p.coverage for p in self.points]


@dataclass(frozen=True)
class PatternStats:
    """
    Estadística de rasgos (componentes conexas) de una fase en una configuración 2D
    """
    feature_count: int
    mean_diameter: float
    std: float
    ci_low: float
    ci_high: float

    def require_features(self):
        if self.feature_count == 0:
            raise StatisticsError("No se encontraron rasgos: estadística indefinida")
        return self


GAP_REPORT_COLUMNS = ('N', 'q', 'beta', 'K', 'J', 'lambda_c', 'lambda_cg', 'A_inf', 'gamma_lo', 'gamma_hi',
                      'sandwich_ok')


@dataclass
class GapReport:
    """
    Brechas espectrales de K_c y K_CG con las constantes de comparación
    """
    N: int
    q: int
    beta: float
    K: float
    J: float
    lambda_c: float
    lambda_cg: float
    A_inf: float
    gamma_lo: float
    gamma_hi: float
    sandwich_ok: bool = False
    label: str = ''

    def csv_row(self) -> dict:
        row = {name: getattr(self, name) for name in GAP_REPORT_COLUMNS}
        row['sandwich_ok'] = int(bool(self.sandwich_ok))
        return row
