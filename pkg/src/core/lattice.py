"""
Geometría de la red periódica, configuraciones micro y gruesas, proyección T,
movimientos elementales y reconstrucción uniforme
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from src.core.errors import ArgumentError, ConfigurationError, StateSpaceError

logger = logging.getLogger(__name__)

# Límite de enumeración exhaustiva (2^N configuraciones)
MAX_ENUMERATION_SITES = 20

MicroConfig = np.ndarray
CoarseConfig = np.ndarray


@dataclass(frozen=True, eq=False)
class LatticeGeometry:
    """
    Red periódica d-dimensional de lado n con sitios indexados en orden row-major
    """
    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigurationError(f"Dimensión no soportada: {self.d} (se admite 1 o 2)")
        if self.n < 1:
            raise ConfigurationError(f"Lado de red inválido: {self.n}")

    def __eq__(self, other):
        return isinstance(other, LatticeGeometry) and (self.d, self.n) == (other.d, other.n)

    def __hash__(self):
        return hash((self.d, self.n))

    @property
    def N(self) -> int:
        return self.n ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def coords(self, site) -> tuple[int, ...]:
        """
        Convierte un índice de sitio (o una tupla ya formada) en coordenadas
        """
        if isinstance(site, tuple):
            if len(site) != self.d:
                raise ArgumentError(f"Coordenadas {site} incompatibles con d={self.d}")
            return tuple(int(c) % self.n for c in site)
        site = int(site)
        if not 0 <= site < self.N:
            raise ArgumentError(f"Sitio fuera de la red: {site}")
        if self.d == 1:
            return (site,)
        return divmod(site, self.n)

    def site(self, coords) -> int:
        if self.d == 1:
            return int(coords[0]) % self.n
        return (int(coords[0]) % self.n) * self.n + int(coords[1]) % self.n

    @cached_property
    def displacement_distances(self) -> np.ndarray:
        """
        Distancia euclídea de imagen mínima para cada desplazamiento módulo n,
        con forma (n,)*d
        """
        axis = np.arange(self.n)
        minimal = np.minimum(axis, self.n - axis).astype(float)
        if self.d == 1:
            return minimal
        return np.sqrt(minimal[:, None] ** 2 + minimal[None, :] ** 2)

    def neighbors(self, x: int) -> list[int]:
        """
        Vecinos más cercanos del sitio x (2d sitios, con repetición si n=2)
        """
        point = self.coords(x)
        result = []
        for axis in range(self.d):
            for step in (-1, 1):
                moved = list(point)
                moved[axis] += step
                result.append(self.site(moved))
        return result


@dataclass(frozen=True, eq=False)
class CoarseGeometry:
    """
    Partición de la red en M celdas cúbicas de lado q (Q = q^d sitios por celda)
    """
    lattice: LatticeGeometry
    q: int
    coarse_lattice: LatticeGeometry = field(init=False)

    def __post_init__(self):
        if self.q < 1 or self.lattice.n % self.q != 0:
            raise ConfigurationError(
                f"El lado de celda q={self.q} no divide el lado de red n={self.lattice.n}"
            )
        object.__setattr__(self, 'coarse_lattice', LatticeGeometry(self.lattice.d, self.lattice.n // self.q))

    @property
    def Q(self) -> int:
        return self.q ** self.lattice.d

    @property
    def M(self) -> int:
        return self.lattice.N // self.Q

    @property
    def m(self) -> int:
        """Lado de la red gruesa"""
        return self.coarse_lattice.n

    @cached_property
    def cell_of(self) -> np.ndarray:
        sites = np.arange(self.lattice.N)
        if self.lattice.d == 1:
            cells = sites // self.q
        else:
            rows, cols = np.divmod(sites, self.lattice.n)
            cells = (rows // self.q) * self.m + cols // self.q
        cells.setflags(write=False)
        return cells

    @cached_property
    def cell_sites(self) -> np.ndarray:
        """
        Sitios de cada celda, forma (M, Q), en orden row-major dentro de la celda
        """
        order = np.argsort(self.cell_of, kind='stable')
        table = order.reshape(self.M, self.Q)
        table.setflags(write=False)
        return table

    @cached_property
    def offset_in_cell(self) -> np.ndarray:
        """
        Posición de cada sitio dentro de su celda (0..Q-1)
        """
        offsets = np.empty(self.lattice.N, dtype=int)
        offsets[self.cell_sites.ravel()] = np.tile(np.arange(self.Q), self.M)
        return offsets


def build_geometry(d: int, n: int, q: int) -> tuple[LatticeGeometry, CoarseGeometry]:
    """
    Construye el par consistente (red fina, partición gruesa)
    """
    if d not in (1, 2):
        raise ConfigurationError(f"Dimensión no soportada: {d}")
    if n < 2:
        raise ConfigurationError(f"El lado de la red debe ser al menos 2 (recibido {n})")
    lattice = LatticeGeometry(d, n)
    return lattice, CoarseGeometry(lattice, q)


def torus_distance(geom: LatticeGeometry, x, y) -> float:
    """
    Distancia euclídea del desplazamiento de imagen mínima entre x e y
    """
    cx, cy = geom.coords(x), geom.coords(y)
    total = 0.0
    for a, b in zip(cx, cy):
        delta = abs(a - b) % geom.n
        delta = min(delta, geom.n - delta)
        total += delta * delta
    return float(np.sqrt(total))


def project(cg: CoarseGeometry, sigma: MicroConfig) -> CoarseConfig:
    """
    Proyección T: número de partículas en cada celda
    """
    sigma = np.asarray(sigma)
    if sigma.shape != (cg.lattice.N,):
        raise ArgumentError(f"Configuración de longitud {sigma.shape} incompatible con N={cg.lattice.N}")
    return np.bincount(cg.cell_of, weights=sigma, minlength=cg.M).astype(np.int64)


def spin_flip(sigma: MicroConfig, x: int) -> MicroConfig:
    flipped = np.array(sigma, dtype=np.int8, copy=True)
    flipped[x] = 1 - flipped[x]
    return flipped


def spin_exchange(sigma: MicroConfig, x: int, y: int) -> MicroConfig:
    if x == y:
        raise ArgumentError("El intercambio requiere dos sitios distintos")
    swapped = np.array(sigma, dtype=np.int8, copy=True)
    swapped[x], swapped[y] = swapped[y], swapped[x]
    return swapped


def reconstruct_uniform(cg: CoarseGeometry, eta: CoarseConfig, rng: np.random.Generator) -> MicroConfig:
    """
    Muestrea σ con proyección η, uniforme entre las C(Q, η(k)) colocaciones de cada celda
    """
    eta = np.asarray(eta)
    if eta.shape != (cg.M,) or eta.min(initial=0) < 0 or eta.max(initial=0) > cg.Q:
        raise ArgumentError("Configuración gruesa inválida para la geometría")
    keys = rng.random(cg.lattice.N)
    # orden aleatorio de sitios dentro de cada celda
    order = np.lexsort((keys, cg.cell_of))
    rank = np.arange(cg.lattice.N) % cg.Q
    sigma = np.zeros(cg.lattice.N, dtype=np.int8)
    sigma[order] = rank < eta[cg.cell_of[order]]
    return sigma


def enumerate_configs(geom: LatticeGeometry) -> np.ndarray:
    """
    Todas las configuraciones en orden canónico: la fila s tiene σ(x) igual al bit N-1-x de s
    """
    if geom.N > MAX_ENUMERATION_SITES:
        raise StateSpaceError(
            f"Enumeración rechazada: N={geom.N} excede el máximo de {MAX_ENUMERATION_SITES} sitios"
        )
    states = np.arange(2 ** geom.N, dtype=np.int64)
    shifts = geom.N - 1 - np.arange(geom.N)
    return ((states[:, None] >> shifts) & 1).astype(np.int8)


def write_snapshot(geom: LatticeGeometry, sigma: MicroConfig, path: Path) -> Path:
    """
    Guarda la configuración como PGM plano (2D) o una línea de 0/1 (1D)
    """
    path = Path(path)
    sigma = np.asarray(sigma, dtype=np.int8)
    if geom.d == 1:
        text = ' '.join(str(int(v)) for v in sigma) + '\n'
    else:
        rows = sigma.reshape(geom.n, geom.n)
        lines = ['P2', f'{geom.n} {geom.n}', '1']
        lines.extend(' '.join(str(int(v)) for v in row) for row in rows)
        text = '\n'.join(lines) + '\n'
    tmp = path.with_name(path.name + '.tmp')
    tmp.write_text(text, encoding='utf-8')
    tmp.replace(path)
    return path


def read_snapshot(path: Path) -> np.ndarray:
    tokens = Path(path).read_text(encoding='utf-8').split()
    if tokens and tokens[0] == 'P2':
        width, height = int(tokens[1]), int(tokens[2])
        return np.array(tokens[4:4 + width * height], dtype=np.int8)
    return np.array(tokens, dtype=np.int8)
