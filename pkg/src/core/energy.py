"""
Hamiltonianos microscópico y grueso, diferencias de energía para movimientos
simples y energías separadas por alcance
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from src.core.errors import ArgumentError, ConfigurationError
from src.core.lattice import CoarseGeometry, LatticeGeometry, project
from src.core.potentials import (
    CoarsePotential, CorrectionPotential, PotentialTable, SplitPotential, coarse_field, coarsen, tabulate,
)

logger = logging.getLogger(__name__)

COARSE_PARTS = ('full', 'long')


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """
    H_N(σ) = −½ Σ_x Σ_{y≠x} J(x−y)σ(x)σ(y) + Σ_x h(x)σ(x) a temperatura inversa β
    """
    geometry: LatticeGeometry
    potential: object
    h: np.ndarray
    beta: float = 1.0
    long_table: PotentialTable = field(init=False)
    short_table: PotentialTable | None = field(init=False)

    def __post_init__(self):
        h = np.broadcast_to(np.asarray(self.h, dtype=float), (self.geometry.N,)).copy()
        h.setflags(write=False)
        object.__setattr__(self, 'h', h)
        if isinstance(self.potential, SplitPotential):
            object.__setattr__(self, 'short_table', tabulate(self.potential.short, self.geometry))
            object.__setattr__(self, 'long_table', tabulate(self.potential.long, self.geometry))
        else:
            object.__setattr__(self, 'short_table', None)
            object.__setattr__(self, 'long_table', tabulate(self.potential, self.geometry))

    @property
    def is_split(self) -> bool:
        return self.short_table is not None

    @cached_property
    def table(self) -> PotentialTable:
        if self.short_table is None:
            return self.long_table
        return self.short_table + self.long_table

    @property
    def long_ops(self) -> int:
        return self.long_table.box_size

    @property
    def short_ops(self) -> int:
        return self.short_table.box_size if self.short_table is not None else 0

    def with_field(self, h) -> 'Hamiltonian':
        return replace(self, h=h)

    def with_beta(self, beta: float) -> 'Hamiltonian':
        return replace(self, beta=float(beta))


def build_hamiltonian(geom: LatticeGeometry, potential, h=0.0, beta: float = 1.0) -> Hamiltonian:
    return Hamiltonian(geom, potential, h, float(beta))


@dataclass(frozen=True, eq=False)
class CoarseHamiltonian:
    """
    H̄(0)(η) = −½ Σ_k Σ_{l≠k} J̄(k,l)η(k)η(l) − ½ J̄(0,0) Σ_k η(k)(η(k)−1) + Σ_k h̄(k)η(k)

    part indica si se comprimió el potencial completo o solo su parte de largo alcance
    """
    cpot: CoarsePotential
    beta: float = 1.0
    part: str = 'full'

    def __post_init__(self):
        if self.part not in COARSE_PARTS:
            raise ConfigurationError(f"Parte de potencial grueso desconocida: '{self.part}'")

    @property
    def cg(self) -> CoarseGeometry:
        return self.cpot.cg

    @property
    def hbar(self) -> np.ndarray:
        return self.cpot.hbar

    @property
    def coarse_ops(self) -> int:
        return self.cpot.table.box_size

    def with_field(self, h) -> 'CoarseHamiltonian':
        cpot = replace(self.cpot, hbar=coarse_field(self.cg, h))
        return replace(self, cpot=cpot)


def build_coarse_hamiltonian(H: Hamiltonian, cg: CoarseGeometry, part: str = 'full') -> CoarseHamiltonian:
    """
    Comprime el potencial completo ('full') o solo la parte de largo alcance ('long')
    """
    if cg.lattice != H.geometry:
        raise ConfigurationError("La geometría gruesa no corresponde a la red del hamiltoniano")
    if part == 'full':
        source = H.table
    elif part == 'long':
        source = H.long_table
    else:
        raise ConfigurationError(f"Parte de potencial grueso desconocida: '{part}'")
    return CoarseHamiltonian(coarsen(source, cg, H.h), H.beta, part)


def energy_micro(H: Hamiltonian, sigma: np.ndarray) -> float:
    sigma = np.asarray(sigma, dtype=float)
    local = H.table.field_all(sigma)
    return float(-0.5 * np.sum(sigma * local) + np.sum(H.h * sigma))


def energy_split(H: Hamiltonian, sigma: np.ndarray) -> tuple[float, float]:
    """
    Energías de pares de corto y largo alcance (sin el término de campo)
    """
    if not H.is_split:
        raise ConfigurationError("energy_split requiere un potencial separado en corto y largo alcance")
    sigma = np.asarray(sigma, dtype=float)
    short = -0.5 * np.sum(sigma * H.short_table.field_all(sigma))
    long = -0.5 * np.sum(sigma * H.long_table.field_all(sigma))
    return float(short), float(long)


def energy_coarse(Hbar: CoarseHamiltonian, eta: np.ndarray) -> float:
    eta = np.asarray(eta, dtype=float)
    cpot = Hbar.cpot
    local = cpot.table.field_all(eta)
    pairs = -0.5 * np.sum(eta * local) - 0.5 * cpot.diag * np.sum(eta * (eta - 1.0))
    return float(pairs + np.sum(cpot.hbar * eta))


def delta_flip_parts(H: Hamiltonian, sigma: np.ndarray, x: int, stats=None) -> tuple[float, float, float]:
    """
    Contribuciones (corto, largo, campo) a ΔH_N(σ, σ^x)
    """
    s = 1 - 2 * int(sigma[x])
    long = -s * H.long_table.local_field(sigma, x)
    short = -s * H.short_table.local_field(sigma, x) if H.short_table is not None else 0.0
    if stats is not None:
        stats.ops_long += H.long_ops
        stats.ops_short += H.short_ops
    return short, long, s * float(H.h[x])


def delta_flip(H: Hamiltonian, sigma: np.ndarray, x: int, stats=None) -> float:
    short, long, field_term = delta_flip_parts(H, sigma, x, stats)
    return short + long + field_term


def delta_exchange(H: Hamiltonian, sigma: np.ndarray, x: int, y: int, stats=None) -> float:
    """
    ΔH_N al intercambiar los espines de x e y
    """
    if x == y:
        raise ArgumentError("El intercambio requiere dos sitios distintos")
    if stats is not None:
        stats.ops_long += 2 * H.long_ops
        stats.ops_short += 2 * H.short_ops
    if sigma[x] == sigma[y]:
        return 0.0
    sx = 1 - 2 * int(sigma[x])
    table = H.table
    fx = table.local_field(sigma, x)
    fy = table.local_field(sigma, y)
    geom = H.geometry
    disp = tuple((b - a) % geom.n for a, b in zip(geom.coords(x), geom.coords(y)))
    jxy = float(table.values[disp])
    return sx * (-fx + H.h[x]) - sx * (-fy - jxy * sx + H.h[y])


def delta_coarse(Hbar: CoarseHamiltonian, eta: np.ndarray, k: int, direction: int, stats=None) -> float:
    """
    ΔH̄(0) para η(k) → η(k) + direction (adsorción +1, desorción −1)
    """
    if direction not in (1, -1):
        raise ArgumentError(f"Dirección inválida: {direction}")
    target = int(eta[k]) + direction
    if not 0 <= target <= Hbar.cg.Q:
        raise ArgumentError(f"El movimiento lleva η({k}) a {target}, fuera de 0..{Hbar.cg.Q}")
    cpot = Hbar.cpot
    others = cpot.table.local_field(eta, k)
    same_cell = int(eta[k]) if direction > 0 else int(eta[k]) - 1
    if stats is not None:
        stats.ops_coarse += Hbar.coarse_ops
    return direction * (-others - cpot.diag * same_cell + float(cpot.hbar[k]))


def delta_correction(H: Hamiltonian, Hbar: CoarseHamiltonian, sigma: np.ndarray, x: int,
                     eta: np.ndarray | None = None, correction: CorrectionPotential | None = None,
                     stats=None) -> float:
    """
    ΔH_N(σ,σ^x) − ΔH̄(0)(η,η^k); con un potencial de corrección truncado
    se evalúa Σ J_c solo hasta su alcance
    """
    cg = Hbar.cg
    k = int(cg.cell_of[x])
    s = 1 - 2 * int(sigma[x])
    if correction is not None:
        if stats is not None:
            stats.ops_long += correction.box_size
        local = correction.local_correction(sigma, x)
        return s * (-local + float(H.h[x]) - float(Hbar.hbar[k]))
    if eta is None:
        eta = project(cg, sigma)
    return delta_flip(H, sigma, x, stats) - delta_coarse(Hbar, eta, k, s, stats)
