"""Torus geometry: modular coordinates, neighbors and reflection maps."""

import logging
from dataclasses import dataclass
from typing import List

from config.constants import Axis
from utils.error_handler import PreconditionError

logger = logging.getLogger(__name__)

MODULE = "lattice"


@dataclass(frozen=True)
class Site:
    x: int
    y: int


@dataclass(frozen=True)
class TorusLattice:
    """The N x M torus with N even."""

    N: int
    M: int

    def __post_init__(self):
        if self.N < 2 or self.N % 2:
            raise PreconditionError(MODULE, f"N must be a positive even integer (got N={self.N})")
        if self.M < 1:
            raise PreconditionError(MODULE, f"M must be a positive integer (got M={self.M})")

    @classmethod
    def unchecked(cls, N: int, M: int) -> "TorusLattice":
        """Build a lattice without the even-N check; only for probing odd widths."""
        lattice = object.__new__(cls)
        object.__setattr__(lattice, "N", N)
        object.__setattr__(lattice, "M", M)
        return lattice

    @property
    def site_count(self) -> int:
        return self.N * self.M

    def index(self, s: Site) -> int:
        """Row-major index, x fastest."""
        return s.y * self.N + s.x

    def site(self, index: int) -> Site:
        return Site(index % self.N, index // self.N)

    def sites(self) -> List[Site]:
        return [Site(x, y) for y in range(self.M) for x in range(self.N)]


@dataclass(frozen=True)
class ReflectionMap:
    """Mirror across a cell boundary.

    position is the index of the boundary: a horizontal reflection at b
    swaps columns b-1-d and b+d; a vertical one at m swaps rows m-1-d and m+d.
    """

    axis: Axis
    position: int

    def validate_for(self, lattice: TorusLattice) -> None:
        extent = lattice.N if self.axis is Axis.HORIZONTAL else lattice.M
        if not 0 <= self.position <= extent:
            raise PreconditionError(
                MODULE, f"{self.axis.value} cut at {self.position} is outside [0, {extent}]"
            )


def wrap(lattice: TorusLattice, x: int, y: int) -> Site:
    return Site(x % lattice.N, y % lattice.M)


def neighbors(lattice: TorusLattice, s: Site) -> List[Site]:
    """Neighbors in the fixed order right, left, up, down."""
    return [
        wrap(lattice, s.x + 1, s.y),
        wrap(lattice, s.x - 1, s.y),
        wrap(lattice, s.x, s.y + 1),
        wrap(lattice, s.x, s.y - 1),
    ]


def reflect_site(reflection: ReflectionMap, lattice: TorusLattice, s: Site) -> Site:
    if reflection.axis is Axis.HORIZONTAL:
        return wrap(lattice, 2 * reflection.position - 1 - s.x, s.y)
    return wrap(lattice, s.x, 2 * reflection.position - 1 - s.y)
