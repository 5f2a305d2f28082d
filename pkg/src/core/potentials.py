"""
Potenciales de pares, separación corto/largo alcance, escalamiento de Kac,
compresión promediada por celdas, potencial de corrección y rangos de corte
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from src.core.errors import ArgumentError, ConfigurationError
from src.core.lattice import CoarseGeometry, LatticeGeometry

logger = logging.getLogger(__name__)

POTENTIAL_KINDS = (
    'nearest_neighbor', 'curie_weiss', 'kac_algebraic', 'kac_smooth', 'morse_gaussian', 'tabulated',
)

# Tolerancia para comparar distancias de red
_R_EPS = 1e-9

# Tablas de índices de vecinos más grandes que esto se calculan al vuelo
_MAX_CACHED_INDICES = 4_000_000


@dataclass(frozen=True)
class PairPotential:
    """
    Acoplamiento isotrópico J(r). Vale 0 para r <= r_min y para r > cutoff
    (cutoff None significa toda la red)
    """
    kind: str
    params: tuple
    cutoff: float | None = None
    r_min: float = 0.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigurationError(f"Tipo de potencial desconocido: '{self.kind}'")

    def param(self, name: str):
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)

    def with_cutoff(self, cutoff: float | None) -> 'PairPotential':
        return replace(self, cutoff=cutoff)

    def eval(self, r: float) -> float:
        if r <= 0:
            raise ArgumentError("La autointeracción (r=0) está excluida")
        return float(self.profile(np.array([float(r)]))[0])

    def profile(self, r: np.ndarray) -> np.ndarray:
        """
        Evaluación vectorizada; devuelve 0 en r=0
        """
        r = np.asarray(r, dtype=float)
        positive = r > 0
        safe = np.where(positive, r, 1.0)
        values = np.where(positive, _PROFILES[self.kind](self, safe), 0.0)
        values = np.where(r <= self.r_min + _R_EPS, 0.0, values)
        if self.cutoff is not None:
            values = np.where(r > self.cutoff + _R_EPS, 0.0, values)
        return values


def _nearest_neighbor(pot, r):
    return np.where(np.abs(r - 1.0) < _R_EPS, pot.param('K'), 0.0)


def _curie_weiss(pot, r):
    return np.full_like(r, pot.param('J') / pot.param('N'))


def _kac_algebraic(pot, r):
    N = pot.param('N')
    return pot.param('v') / N * (r / N) ** -1.5


def _kac_smooth(pot, r):
    L, d = pot.param('L'), pot.param('d')
    norm = 15.0 / 16.0 if d == 1 else 3.0 / math.pi
    s = r / L
    return np.where(s < 1.0, pot.param('J0') * norm * L ** -d * (1.0 - s * s) ** 2, 0.0)


def _morse_gaussian(pot, r):
    J0, r_a, r_r, chi = (pot.param(k) for k in ('J0', 'r_a', 'r_r', 'chi'))
    return J0 * (np.exp(-(r / r_a) ** 2) - chi * np.exp(-(r / r_r) ** 2))


def _tabulated(pot, r):
    radii = np.asarray(pot.param('r'), dtype=float)
    couplings = np.asarray(pot.param('J'), dtype=float)
    idx = np.clip(np.searchsorted(radii, r), 0, len(radii) - 1)
    lower = np.clip(idx - 1, 0, len(radii) - 1)
    hit_upper = np.abs(radii[idx] - r) < _R_EPS
    hit_lower = np.abs(radii[lower] - r) < _R_EPS
    return np.where(hit_upper, couplings[idx], np.where(hit_lower, couplings[lower], 0.0))


_PROFILES = {
    'nearest_neighbor': _nearest_neighbor,
    'curie_weiss': _curie_weiss,
    'kac_algebraic': _kac_algebraic,
    'kac_smooth': _kac_smooth,
    'morse_gaussian': _morse_gaussian,
    'tabulated': _tabulated,
}


def nearest_neighbor(K: float) -> PairPotential:
    return PairPotential('nearest_neighbor', (('K', float(K)),), cutoff=1.0)


def curie_weiss(J: float, N: int) -> PairPotential:
    return PairPotential('curie_weiss', (('J', float(J)), ('N', int(N))))


def kac_algebraic(v: float, N: int) -> PairPotential:
    return PairPotential('kac_algebraic', (('v', float(v)), ('N', int(N))))


def kac_smooth(J0: float, L: float, d: int = 1) -> PairPotential:
    return PairPotential('kac_smooth', (('J0', float(J0)), ('L', float(L)), ('d', int(d))), cutoff=float(L))


def morse_gaussian(J0: float, r_a: float, r_r: float, chi: float, cutoff: float | None = None) -> PairPotential:
    params = (('J0', float(J0)), ('r_a', float(r_a)), ('r_r', float(r_r)), ('chi', float(chi)))
    return PairPotential('morse_gaussian', params, cutoff=cutoff)


def tabulated(radii, couplings, cutoff: float | None = None) -> PairPotential:
    order = np.argsort(radii)
    radii = tuple(float(radii[i]) for i in order)
    couplings = tuple(float(couplings[i]) for i in order)
    if cutoff is None and radii:
        cutoff = radii[-1]
    return PairPotential('tabulated', (('r', radii), ('J', couplings)), cutoff=cutoff)


@dataclass(frozen=True)
class SplitPotential:
    """
    Par (corto alcance, largo alcance) con soporte del corto en r <= S
    """
    short: PairPotential
    long: PairPotential
    S: float

    def eval(self, r: float) -> float:
        return self.short.eval(r) + self.long.eval(r)

    def profile(self, r: np.ndarray) -> np.ndarray:
        return self.short.profile(r) + self.long.profile(r)


def split(pot: PairPotential, S: float) -> SplitPotential:
    if S < 1:
        raise ArgumentError(f"El rango de separación debe ser al menos 1 (recibido {S})")
    short_cutoff = S if pot.cutoff is None else min(S, pot.cutoff)
    short = replace(pot, cutoff=short_cutoff)
    long = replace(pot, r_min=max(pot.r_min, float(S)))
    return SplitPotential(short, long, float(S))


def benchmark_potential(K: float, J: float, N: int) -> SplitPotential:
    """
    Ising de vecinos más cercanos (corto) más Curie-Weiss (largo), S=1
    """
    return SplitPotential(nearest_neighbor(K), curie_weiss(J, N), 1.0)


def normalize_kac(J0: float, geom: LatticeGeometry) -> float:
    """
    Amplitud v tal que la suma discreta de J sobre desplazamientos no nulos vale J0
    """
    if geom.N < 4:
        raise ArgumentError("La normalización de Kac requiere N >= 4")
    distances = geom.displacement_distances.ravel()[1:]
    N = geom.N
    base = np.sum(1.0 / N * (distances / N) ** -1.5)
    return float(J0 / base)


def cutoff_range(pot: PairPotential, tol: float, r_max: int = 512) -> int:
    """
    Menor L entero con |J(r)| < tol para toda distancia de red r > L
    """
    if pot.kind == 'curie_weiss':
        raise ConfigurationError("Curie-Weiss no decae: su alcance es toda la red")
    radii = np.sqrt(np.arange(1, r_max * r_max + 1, dtype=float))
    above = np.nonzero(np.abs(pot.profile(radii)) >= tol)[0]
    if above.size == 0:
        return 0
    largest = radii[above[-1]]
    if largest > r_max - 1:
        raise ConfigurationError(f"El potencial no decae por debajo de {tol} antes de r={r_max}")
    return int(math.ceil(largest - _R_EPS))


def epsilon_estimate(pot: PairPotential, q: int, L: float, beta: float, d: int = 1) -> float:
    """
    Estimación de ε = β‖∇V‖₁ q/L con V(s) = L^d J(sL) y la norma aproximada
    por la variación total sobre la grilla de tabulación
    """
    upper = pot.cutoff if pot.cutoff is not None else 4.0 * L
    grid = np.linspace(1.0, upper, max(64, int(upper * 8)))
    V = L ** d * pot.profile(grid)
    gradient_norm = float(np.sum(np.abs(np.diff(V))))
    return beta * gradient_norm * q / L


class Stencil:
    """
    Caja de desplazamientos [-R, R]^d sobre el toro, recortada a n valores por eje
    """

    def __init__(self, geometry: LatticeGeometry, radius: int):
        self.geometry = geometry
        n = geometry.n
        self.radius = int(radius)
        if 2 * self.radius + 1 >= n:
            self.offsets = np.arange(-(n // 2), n - n // 2)
        else:
            self.offsets = np.arange(-self.radius, self.radius + 1)
        self.width = len(self.offsets)
        self.size = self.width ** geometry.d
        self._table = None
        if geometry.N * self.size <= _MAX_CACHED_INDICES:
            self._table = np.stack([self._compute(x) for x in range(geometry.N)])

    def _compute(self, x: int) -> np.ndarray:
        n = self.geometry.n
        if self.geometry.d == 1:
            return (x + self.offsets) % n
        i, j = divmod(x, n)
        rows = (i + self.offsets) % n
        cols = (j + self.offsets) % n
        return (rows[:, None] * n + cols[None, :]).ravel()

    def indices(self, x: int) -> np.ndarray:
        if self._table is not None:
            return self._table[x]
        return self._compute(x)

    def gather(self, values: np.ndarray) -> np.ndarray:
        """
        Valores indexados por desplazamiento (forma (n,)*d) ordenados como la caja
        """
        wrapped = self.offsets % self.geometry.n
        if self.geometry.d == 1:
            return values[wrapped]
        return values[np.ix_(wrapped, wrapped)].ravel()


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """
    Potencial tabulado por desplazamiento de imagen mínima sobre una red concreta
    """
    geometry: LatticeGeometry
    values: np.ndarray
    radius: int

    def __post_init__(self):
        if self.values.shape != self.geometry.shape:
            raise ConfigurationError("La tabla no coincide con la geometría")
        cap = self.geometry.n // 2
        object.__setattr__(self, 'radius', int(min(self.radius, cap)))

    @cached_property
    def stencil(self) -> Stencil:
        return Stencil(self.geometry, self.radius)

    @cached_property
    def box_values(self) -> np.ndarray:
        return self.stencil.gather(self.values)

    @property
    def box_size(self) -> int:
        return self.stencil.size

    def local_field(self, sigma: np.ndarray, x: int) -> float:
        """
        Σ_{y≠x} J(x−y) σ(y) sobre la caja del sitio x
        """
        return float(self.box_values @ sigma[self.stencil.indices(x)])

    def field_all(self, sigma: np.ndarray) -> np.ndarray:
        """
        Campo local en todos los sitios por convolución circular (FFT)
        """
        grid = np.asarray(sigma, dtype=float).reshape(self.geometry.shape)
        conv = np.fft.ifftn(np.fft.fftn(grid) * np.fft.fftn(self.values)).real
        return conv.ravel()

    def matrix(self) -> np.ndarray:
        """
        Matriz densa J(x−y), N x N, para enumeración exacta
        """
        geom = self.geometry
        coords = np.array([geom.coords(x) for x in range(geom.N)])
        diff = (coords[None, :, :] - coords[:, None, :]) % geom.n
        if geom.d == 1:
            return self.values[diff[..., 0]]
        return self.values[diff[..., 0], diff[..., 1]]

    def __add__(self, other: 'PotentialTable') -> 'PotentialTable':
        if other.geometry != self.geometry:
            raise ConfigurationError("No se pueden sumar tablas de geometrías distintas")
        return PotentialTable(self.geometry, self.values + other.values, max(self.radius, other.radius))

    def __mul__(self, scale: float) -> 'PotentialTable':
        return PotentialTable(self.geometry, self.values * float(scale), self.radius)

    __rmul__ = __mul__


def tabulate(pot, geom: LatticeGeometry) -> PotentialTable:
    """
    Tabula un PairPotential o SplitPotential sobre la red
    """
    if isinstance(pot, PotentialTable):
        return pot
    if isinstance(pot, SplitPotential):
        return tabulate(pot.short, geom) + tabulate(pot.long, geom)
    if pot.kind in ('curie_weiss', 'kac_algebraic') and pot.param('N') != geom.N:
        raise ConfigurationError(
            f"El potencial '{pot.kind}' fue construido para N={pot.param('N')} y la red tiene N={geom.N}"
        )
    values = pot.profile(geom.displacement_distances)
    radius = geom.n // 2 if pot.cutoff is None else int(math.ceil(pot.cutoff - _R_EPS))
    return PotentialTable(geom, values, radius)


@dataclass(frozen=True, eq=False)
class CoarsePotential:
    """
    Acoplamientos promediados por celda: J̄(k,l) por desplazamiento grueso,
    autoacoplamiento J̄(0,0) y campo grueso h̄
    """
    cg: CoarseGeometry
    table: PotentialTable
    diag: float
    hbar: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.hbar is None:
            object.__setattr__(self, 'hbar', np.zeros(self.cg.M))

    def offdiag(self, k: int, l: int) -> float:
        geom = self.table.geometry
        ck, cl = geom.coords(k), geom.coords(l)
        disp = tuple((b - a) % geom.n for a, b in zip(ck, cl))
        return float(self.table.values[disp])

    def matrix(self) -> np.ndarray:
        """
        Matriz M x M con J̄(k,l) fuera de la diagonal y J̄(0,0) en la diagonal
        """
        dense = self.table.matrix()
        np.fill_diagonal(dense, self.diag)
        return dense

    def __add__(self, other: 'CoarsePotential') -> 'CoarsePotential':
        return CoarsePotential(self.cg, self.table + other.table, self.diag + other.diag, self.hbar + other.hbar)

    def __mul__(self, scale: float) -> 'CoarsePotential':
        return CoarsePotential(self.cg, self.table * scale, self.diag * scale, self.hbar * scale)

    __rmul__ = __mul__


def coarse_field(cg: CoarseGeometry, h) -> np.ndarray:
    """
    Campo grueso como promedio del campo en cada celda
    """
    h = np.broadcast_to(np.asarray(h, dtype=float), (cg.lattice.N,))
    return np.bincount(cg.cell_of, weights=h, minlength=cg.M) / cg.Q


def coarsen(pot, cg: CoarseGeometry, h=None) -> CoarsePotential:
    """
    Compresión promediada: J̄(k,l) = q^{-2d} ΣΣ J(x−y) y
    J̄(k,k) = [Q(Q−1)]^{-1} Σ_{y≠x} J(x−y) (0 si Q = 1)
    """
    table = tabulate(pot, cg.lattice)
    q, d, n, m = cg.q, cg.lattice.d, cg.lattice.n, cg.m
    t = np.arange(-(q - 1), q)
    weight = (q - np.abs(t)).astype(float)
    axis_idx = (q * np.arange(m)[:, None] + t[None, :]) % n
    if d == 1:
        raw = (table.values[axis_idx] * weight).sum(axis=1)
    else:
        block = table.values[axis_idx[:, None, :, None], axis_idx[None, :, None, :]]
        raw = (block * np.multiply.outer(weight, weight)).sum(axis=(2, 3))
    offdiag = raw / q ** (2 * d)
    Q = cg.Q
    diag = float(raw.flat[0] / (Q * (Q - 1))) if Q > 1 else 0.0
    offdiag.flat[0] = 0.0
    coarse_radius = int(math.ceil(table.radius / q))
    hbar = coarse_field(cg, 0.0 if h is None else h)
    logger.debug("Potencial grueso construido: q=%d, M=%d, radio grueso=%d", q, cg.M, coarse_radius)
    return CoarsePotential(cg, PotentialTable(cg.coarse_lattice, offdiag, coarse_radius), diag, hbar)


@dataclass(frozen=True, eq=False)
class CorrectionPotential:
    """
    J_c(x,y) = J(x−y) − J̄(celda(x), celda(y)), dependiente de la posición u de x
    dentro de su celda; values tiene forma (Q, tamaño de caja)
    """
    cg: CoarseGeometry
    stencil: Stencil
    values: np.ndarray
    cutoff: float | None

    def local_correction(self, sigma: np.ndarray, x: int) -> float:
        u = self.cg.offset_in_cell[x]
        return float(self.values[u] @ sigma[self.stencil.indices(x)])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def box_size(self) -> int:
        return self.stencil.size

    def radial_rows(self) -> list[tuple[float, float]]:
        """
        Promedio de J_c sobre posiciones en la celda y desplazamientos de igual r
        """
        geom = self.cg.lattice
        distances = self.stencil.gather(geom.displacement_distances)
        keys = np.round(distances, 9)
        rows = []
        for r in np.unique(keys):
            if r == 0:
                continue
            mask = keys == r
            rows.append((float(r), float(self.values[:, mask].mean())))
        return rows

    def to_tabulated(self) -> PairPotential:
        rows = self.radial_rows()
        return tabulated([r for r, _ in rows], [j for _, j in rows], cutoff=self.cutoff)


def correction_potential(pot, cg: CoarseGeometry, L_c: float | None = None) -> CorrectionPotential:
    """
    Tabula J_c para |x−y| <= L_c; sin L_c cubre todo el toro
    """
    table = tabulate(pot, cg.lattice)
    if L_c is not None and table.radius < cg.lattice.n // 2 and L_c > table.radius + _R_EPS:
        raise ArgumentError(f"L_c={L_c} excede el alcance del potencial ({table.radius})")
    cpot = coarsen(table, cg)
    geom = cg.lattice
    radius = geom.n // 2 if L_c is None else int(math.ceil(L_c - _R_EPS))
    stencil = Stencil(geom, radius)
    distances = stencil.gather(geom.displacement_distances)
    fine = stencil.gather(table.values)
    cell_coords = np.array([cg.coarse_lattice.coords(k) for k in range(cg.M)])
    values = np.zeros((cg.Q, stencil.size))
    for u, x in enumerate(cg.cell_sites[0]):
        neighbors = stencil.indices(int(x))
        cells = cg.cell_of[neighbors]
        home = cg.cell_of[x]
        disp = (cell_coords[cells] - cell_coords[home]) % cg.m
        coarse_values = cpot.table.values[tuple(disp.T)]
        coarse_values[cells == home] = cpot.diag
        values[u] = fine - coarse_values
        values[u][neighbors == x] = 0.0
    if L_c is not None:
        values[:, distances > L_c + _R_EPS] = 0.0
    return CorrectionPotential(cg, stencil, values, L_c)


def potential_profile_rows(pot, cg: CoarseGeometry, L_c: float | None = None) -> list[dict]:
    """
    Filas (r, J, J_c promedio) para exportar comparaciones de J y J_c
    """
    correction = correction_potential(pot, cg, L_c)
    rows = []
    for r, jc in correction.radial_rows():
        coupling = float(pot.profile(np.array([r]))[0])
        rows.append({'r': r, 'J': coupling, 'J_c': jc, 'J_bar': coupling - jc})
    return rows
