"""Dimer configurations on the torus: validity, weights, ASCII I/O and enumeration."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Tuple

import numpy as np
import sympy

from config.constants import Spin
from config.settings import get_setting
from core.lattice import Site, TorusLattice
from utils.error_handler import CapacityError, DomainError, PreconditionError

logger = logging.getLogger(__name__)

MODULE = "dimer-config"


class DimerConfig:
    """A labeling of the torus sites by U/D/L/R.

    labels has shape (M, N) and is indexed [y, x]; the array is read-only.
    Construction does not check the matching rules, use validate() for that.
    """

    __slots__ = ("lattice", "labels")

    def __init__(self, lattice: TorusLattice, labels: np.ndarray):
        array = np.array(labels, dtype=np.int8, copy=True)
        if array.shape != (lattice.M, lattice.N):
            raise PreconditionError(
                MODULE, f"labels have shape {array.shape}, expected {(lattice.M, lattice.N)}"
            )
        array.setflags(write=False)
        self.lattice = lattice
        self.labels = array

    def label(self, s: Site) -> Spin:
        return Spin(int(self.labels[s.y % self.lattice.M, s.x % self.lattice.N]))

    def key(self) -> bytes:
        return self.labels.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DimerConfig):
            return NotImplemented
        return self.lattice == other.lattice and self.key() == other.key()

    def __hash__(self) -> int:
        return hash((self.lattice, self.key()))

    def __repr__(self) -> str:
        return f"DimerConfig(N={self.lattice.N}, M={self.lattice.M}, rows={format_config(self).splitlines()})"


@dataclass(frozen=True)
class LabelConstraints:
    """Prescribed and excluded labels per site index (row-major, x fastest)."""

    required: Mapping[int, Spin] = field(default_factory=dict)
    forbidden: Mapping[int, FrozenSet[Spin]] = field(default_factory=dict)

    def allows(self, index: int, spin: Spin) -> bool:
        wanted = self.required.get(index)
        if wanted is not None and wanted != spin:
            return False
        excluded = self.forbidden.get(index)
        return not (excluded and spin in excluded)


def validate(config: DimerConfig) -> bool:
    """True iff all four matching rules hold at every site."""
    labels = config.labels
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 3:
        return False
    above = np.roll(labels, -1, axis=0)
    below = np.roll(labels, 1, axis=0)
    right = np.roll(labels, -1, axis=1)
    left = np.roll(labels, 1, axis=1)

    up_ok = np.all((labels != Spin.U) | (above == Spin.D))
    down_ok = np.all((labels != Spin.D) | (below == Spin.U))
    left_ok = np.all((labels != Spin.L) | (left == Spin.R))
    right_ok = np.all((labels != Spin.R) | (right == Spin.L))
    return bool(up_ok and down_ok and left_ok and right_ok)


def vertical_count(config: DimerConfig) -> int:
    return int(np.count_nonzero(config.labels == Spin.U))


def weight(config: DimerConfig, z: float) -> float:
    check_fugacity(z)
    return float(z) ** vertical_count(config)


def check_fugacity(z: float, module: str = MODULE) -> None:
    if not z > 0:
        raise DomainError(module, f"fugacity z must be positive (got {z})")


def all_horizontal(lattice: TorusLattice, phase: int = 0) -> DimerConfig:
    """Every row paired as (phase, phase+1), (phase+2, phase+3), ..."""
    labels = np.empty((lattice.M, lattice.N), dtype=np.int8)
    for x in range(lattice.N):
        labels[:, x] = Spin.R if (x - phase) % 2 == 0 else Spin.L
    return DimerConfig(lattice, labels)


def all_vertical(lattice: TorusLattice, phase: int = 0) -> DimerConfig:
    """Every column paired vertically; needs M even."""
    if lattice.M % 2:
        raise PreconditionError(MODULE, f"an all-vertical configuration needs M even (got M={lattice.M})")
    labels = np.empty((lattice.M, lattice.N), dtype=np.int8)
    for y in range(lattice.M):
        labels[y, :] = Spin.U if (y - phase) % 2 == 0 else Spin.D
    return DimerConfig(lattice, labels)


def format_config(config: DimerConfig) -> str:
    """One character per site, row y=0 first."""
    return "\n".join("".join(Spin(int(v)).char for v in row) for row in config.labels)


def parse_config(text: str) -> DimerConfig:
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not rows:
        raise PreconditionError(MODULE, "empty configuration text")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise PreconditionError(MODULE, f"rows have different lengths {sorted(widths)}")
    try:
        labels = np.array([[Spin.from_char(c) for c in row] for row in rows], dtype=np.int8)
    except ValueError as e:
        raise PreconditionError(MODULE, str(e)) from None
    return DimerConfig(TorusLattice(len(rows[0]), len(rows)), labels)


def _moves(lattice: TorusLattice) -> List[Tuple[Tuple[Spin, int, Spin], ...]]:
    """Per site: (own label, partner index, partner label) in U, D, L, R order."""
    N, M = lattice.N, lattice.M
    table = []
    for i in range(N * M):
        x, y = i % N, i // N
        table.append((
            (Spin.U, ((y + 1) % M) * N + x, Spin.D),
            (Spin.D, ((y - 1) % M) * N + x, Spin.U),
            (Spin.L, y * N + (x - 1) % N, Spin.R),
            (Spin.R, y * N + (x + 1) % N, Spin.L),
        ))
    return table


def iter_label_tuples(
    lattice: TorusLattice,
    constraints: Optional[LabelConstraints] = None,
) -> Iterator[Tuple[int, ...]]:
    """Backtracking over dimer placements in raster order.

    The first uncovered site is covered in each of its (at most four) ways;
    with constraints, branches that break a prescribed label are cut.
    """
    size = lattice.N * lattice.M
    moves = _moves(lattice)
    labels = [-1] * size
    rules = constraints or LabelConstraints()
    checked = bool(rules.required) or bool(rules.forbidden)

    def place(start: int) -> Iterator[Tuple[int, ...]]:
        i = start
        while i < size and labels[i] != -1:
            i += 1
        if i == size:
            yield tuple(labels)
            return
        for own, partner, other in moves[i]:
            if partner == i or labels[partner] != -1:
                continue
            if checked and not (rules.allows(i, own) and rules.allows(partner, other)):
                continue
            labels[i] = own
            labels[partner] = other
            yield from place(i + 1)
            labels[i] = -1
            labels[partner] = -1

    yield from place(0)


def enumerate_configs(
    lattice: TorusLattice,
    constraints: Optional[LabelConstraints] = None,
    max_configs: Optional[int] = None,
) -> Iterator[DimerConfig]:
    """Yield every configuration (satisfying the constraints) exactly once."""
    cap = max_configs if max_configs is not None else get_setting("max_configs")
    shape = (lattice.M, lattice.N)
    count = 0
    for labels in iter_label_tuples(lattice, constraints):
        count += 1
        if count > cap:
            raise CapacityError(MODULE, f"enumeration of {lattice.N}x{lattice.M} exceeded max_configs = {cap}")
        yield DimerConfig(lattice, np.asarray(labels, dtype=np.int8).reshape(shape))
    logger.debug(f"Enumerated {count} configurations on {lattice.N}x{lattice.M}")


def vertical_histogram(lattice: TorusLattice, max_configs: Optional[int] = None) -> Dict[int, int]:
    """Number of configurations per vertical-dimer count V."""
    cap = max_configs if max_configs is not None else get_setting("max_configs")
    histogram: Counter = Counter()
    total = 0
    for labels in iter_label_tuples(lattice):
        total += 1
        if total > cap:
            raise CapacityError(MODULE, f"enumeration of {lattice.N}x{lattice.M} exceeded max_configs = {cap}")
        histogram[labels.count(Spin.U)] += 1
    return dict(histogram)


def weight_polynomial(lattice: TorusLattice, max_configs: Optional[int] = None) -> sympy.Poly:
    """Exact Z(z) as a polynomial in z, from enumeration."""
    z = sympy.Symbol("z")
    histogram = vertical_histogram(lattice, max_configs)
    return sympy.Poly(sum(count * z ** v for v, count in histogram.items()), z)


def enumerated_partition_function(lattice: TorusLattice, z: float, max_configs: Optional[int] = None) -> float:
    check_fugacity(z)
    histogram = vertical_histogram(lattice, max_configs)
    return float(sum(count * float(z) ** v for v, count in histogram.items()))
