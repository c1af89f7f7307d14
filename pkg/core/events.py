"""The EFP event, the frozen diamond, reflected events and the chessboard estimate.

Events are conjunctions of site literals ("label at s is / is not X").
Events whose literals only mention U and D reduce to row constraints for the
transfer matrix; anything touching L or R is evaluated by enumeration.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple, Union

import numpy as np

from config.constants import HORIZONTAL_MIRROR, VERTICAL_MIRROR, TOLERANCES, Axis, Spin
from config.settings import get_setting
from core.dimer_config import (
    DimerConfig,
    LabelConstraints,
    enumerate_configs,
    enumerated_partition_function,
    validate,
    vertical_count,
)
from core.lattice import ReflectionMap, Site, TorusLattice, reflect_site, wrap
from core.transfer import (
    RowConstraints,
    constrained_log_partition_function,
    log_partition_function,
)
from utils.error_handler import PreconditionError

logger = logging.getLogger(__name__)

MODULE = "events-rp"


@dataclass(frozen=True)
class Literal:
    site: Site
    label: Spin
    required: bool = True

    def holds(self, config: DimerConfig) -> bool:
        return (config.label(self.site) == self.label) == self.required


@dataclass(frozen=True)
class LiteralEvent:
    """Conjunction of literals on one lattice."""

    lattice: TorusLattice
    literals: FrozenSet[Literal]

    def contains(self, config: DimerConfig) -> bool:
        return all(literal.holds(config) for literal in self.literals)

    def intersect(self, other: "LiteralEvent") -> "LiteralEvent":
        return LiteralEvent(self.lattice, self.literals | other.literals)

    def is_satisfiable(self) -> bool:
        required: Dict[Site, Spin] = {}
        forbidden: Dict[Site, Set[Spin]] = {}
        for literal in self.literals:
            if literal.required:
                if required.setdefault(literal.site, literal.label) != literal.label:
                    return False
            else:
                forbidden.setdefault(literal.site, set()).add(literal.label)
        return all(label not in forbidden.get(site, ()) for site, label in required.items())

    def label_constraints(self) -> LabelConstraints:
        required: Dict[int, Spin] = {}
        forbidden: Dict[int, Set[Spin]] = {}
        for literal in self.literals:
            index = self.lattice.index(literal.site)
            if literal.required:
                required[index] = literal.label
            else:
                forbidden.setdefault(index, set()).add(literal.label)
        return LabelConstraints(required, {i: frozenset(s) for i, s in forbidden.items()})

    def row_constraints(self) -> Optional[RowConstraints]:
        """U/D literals as row masks; D at (x, y) is U at (x, y-1). None if L or R occur."""
        must: Dict[int, int] = {}
        forbid: Dict[int, int] = {}
        M = self.lattice.M
        for literal in self.literals:
            if literal.label is Spin.U:
                row = literal.site.y
            elif literal.label is Spin.D:
                row = (literal.site.y - 1) % M
            else:
                return None
            target = must if literal.required else forbid
            target[row] = target.get(row, 0) | (1 << literal.site.x)
        return RowConstraints(must, forbid)

    def columns(self) -> Set[int]:
        return {literal.site.x for literal in self.literals}


@dataclass(frozen=True)
class EfpEvent:
    """A(n): on row 0, x in [0, 2n) carries U exactly when x is even."""

    n: int

    def check(self, lattice: TorusLattice) -> None:
        if self.n < 0:
            raise PreconditionError(MODULE, f"n must be non-negative (got n={self.n})")
        if 2 * self.n > lattice.N:
            raise PreconditionError(MODULE, f"A(n) needs 2n <= N (got n={self.n}, N={lattice.N})")

    def literals(self, lattice: TorusLattice) -> LiteralEvent:
        self.check(lattice)
        return LiteralEvent(
            lattice,
            frozenset(Literal(Site(x, 0), Spin.U, x % 2 == 0) for x in range(2 * self.n)),
        )


AnyEvent = Union[EfpEvent, LiteralEvent]


def _as_literals(event: AnyEvent, lattice: TorusLattice) -> LiteralEvent:
    return event.literals(lattice) if isinstance(event, EfpEvent) else event


def event_contains(event: AnyEvent, config: DimerConfig) -> bool:
    if isinstance(event, EfpEvent):
        event.check(config.lattice)
        return all(
            (config.labels[0, x] == Spin.U) == (x % 2 == 0) for x in range(2 * event.n)
        )
    return event.contains(config)


def reflect_event(event: AnyEvent, reflection: ReflectionMap, lattice: TorusLattice) -> LiteralEvent:
    """The event composed with a site reflection; L/R swap horizontally, U/D vertically."""
    reflection.validate_for(lattice)
    mirror = HORIZONTAL_MIRROR if reflection.axis is Axis.HORIZONTAL else VERTICAL_MIRROR
    source = _as_literals(event, lattice)
    return LiteralEvent(
        lattice,
        frozenset(
            Literal(reflect_site(reflection, lattice, lit.site), mirror[lit.label], lit.required)
            for lit in source.literals
        ),
    )


def event_log_probability(lattice: TorusLattice, z: float, event: AnyEvent, workers: int = 0) -> float:
    """log P(event), by constrained transfer when possible, else by enumeration."""
    literals = _as_literals(event, lattice)
    if not literals.literals:
        return 0.0
    if not literals.is_satisfiable():
        return -math.inf
    rows = literals.row_constraints()
    if rows is not None:
        return constrained_log_partition_function(lattice, z, rows, workers) - log_partition_function(
            lattice, z, workers
        )
    weight = sum(
        float(z) ** vertical_count(c) for c in enumerate_configs(lattice, literals.label_constraints())
    )
    if weight == 0:
        return -math.inf
    return math.log(weight) - math.log(enumerated_partition_function(lattice, z))


def event_probability(lattice: TorusLattice, z: float, event: AnyEvent, workers: int = 0) -> float:
    return math.exp(event_log_probability(lattice, z, event, workers))


def reflected_event_probability(
    lattice: TorusLattice, z: float, event: AnyEvent, reflection: ReflectionMap, workers: int = 0
) -> Tuple[float, float]:
    """(P(event), P(reflected event)); equal since the weight only sees V."""
    original = event_probability(lattice, z, event, workers)
    reflected = event_probability(lattice, z, reflect_event(event, reflection, lattice), workers)
    return original, reflected


def truth_table(event: AnyEvent, lattice: TorusLattice, max_configs: Optional[int] = None) -> Tuple[bool, ...]:
    """Membership of every configuration, in enumeration order."""
    return tuple(event_contains(event, c) for c in enumerate_configs(lattice, max_configs=max_configs))


# ---------------------------------------------------------------------------
# Frozen diamond


@dataclass(frozen=True)
class DiamondPattern:
    """Sites (x, y), |y| < n, |y| <= x <= 2n-2-|y|, forced to U if x+y is even, else D."""

    n: int

    def cells(self) -> List[Tuple[int, int, Spin]]:
        cells = []
        for y in range(-self.n + 1, self.n):
            for x in range(abs(y), 2 * self.n - 1 - abs(y)):
                cells.append((x, y, Spin.U if (x + y) % 2 == 0 else Spin.D))
        return cells

    def mirrored(self, swap_labels: bool = False) -> List[Tuple[int, int, Spin]]:
        """The pattern under y -> -y; swap_labels also exchanges U and D as a reflected dimer does."""
        return sorted(
            (x, -y, VERTICAL_MIRROR[label] if swap_labels else label) for x, y, label in self.cells()
        )

    def has_mirror_invariant_labels(self) -> bool:
        """Labels unchanged under y -> -y without the U/D exchange."""
        return self.mirrored() == sorted(self.cells())

    def swapped_mirror_agrees(self) -> bool:
        """Under y -> 1 - y with U and D exchanged, each label lands on the label at its image (when in the pattern)."""
        labels = {(x, y): label for x, y, label in self.cells()}
        return all(
            labels.get((x, 1 - y), VERTICAL_MIRROR[label]) is VERTICAL_MIRROR[label] for (x, y), label in labels.items()
        )

    def is_consistent(self) -> bool:
        """Every U with its upper neighbour in the pattern sees D there, and vice versa."""
        labels = {(x, y): label for x, y, label in self.cells()}
        for (x, y), label in labels.items():
            if label is Spin.U and labels.get((x, y + 1), Spin.D) is not Spin.D:
                return False
            if label is Spin.D and labels.get((x, y - 1), Spin.U) is not Spin.U:
                return False
        return True

    def literals(self, lattice: TorusLattice) -> LiteralEvent:
        return LiteralEvent(
            lattice, frozenset(Literal(wrap(lattice, x, y), label) for x, y, label in self.cells())
        )

    def matches(self, config: DimerConfig) -> bool:
        return self.literals(config.lattice).contains(config)


@dataclass
class LemmaResult:
    N: int
    M: int
    n: int
    include_boundary: bool
    # distinct configurations over both directions
    configs_checked: int
    members: int
    counterexamples: int
    first_counterexample: Optional[DimerConfig]

    @property
    def holds(self) -> bool:
        return self.counterexamples == 0


def _boundary_literal(n: int) -> Literal:
    return Literal(Site(2 * n - 1, 0), Spin.U, required=False)


def check_frozen_diamond_lemma(
    lattice: TorusLattice,
    n: int,
    include_boundary: bool = True,
    max_configs: Optional[int] = None,
) -> LemmaResult:
    """Exhaustively check  A(n)  <=>  diamond(n) [and label(2n-1, 0) != U].

    Both directions are enumerated under constraints: every member of A(n)
    must match the diamond, and every configuration matching the diamond
    side must lie in A(n).
    """
    if n < 1:
        raise PreconditionError(MODULE, f"n must be positive (got n={n})")
    if lattice.N < 2 * n or lattice.M < 2 * n:
        raise PreconditionError(MODULE, f"the lemma needs N, M >= 2n (got {lattice.N}x{lattice.M}, n={n})")
    cap = max_configs if max_configs is not None else get_setting("max_configs")
    event = EfpEvent(n)
    pattern = DiamondPattern(n)
    diamond = pattern.literals(lattice)
    if include_boundary:
        diamond = LiteralEvent(lattice, diamond.literals | {_boundary_literal(n)})

    checked = members = bad = 0
    first: Optional[DimerConfig] = None

    for config in enumerate_configs(lattice, event.literals(lattice).label_constraints(), cap):
        checked += 1
        members += 1
        if not diamond.contains(config):
            bad += 1
            first = first or config
    for config in enumerate_configs(lattice, diamond.label_constraints(), cap):
        if not event_contains(event, config):
            checked += 1
            bad += 1
            first = first or config

    logger.info(
        f"Lemma check {lattice.N}x{lattice.M} n={n} boundary={include_boundary}: "
        f"{checked} configurations, {members} in A(n), {bad} counterexamples"
    )
    return LemmaResult(lattice.N, lattice.M, n, include_boundary, checked, members, bad, first)


# ---------------------------------------------------------------------------
# Reflection positivity


@dataclass(frozen=True)
class ChessboardResult:
    N: int
    M: int
    n: int
    z: float
    k: int
    lhs: float
    rhs: float
    m: Optional[int] = None

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + TOLERANCES["CHESSBOARD_SLACK"]


def reflected_tiles(lattice: TorusLattice, n: int, k: int) -> LiteralEvent:
    """A(n) reflected k times: E_j = E_{j-1} and its mirror image at column 2^{j-1} * 2n."""
    if k < 0:
        raise PreconditionError(MODULE, f"k must be non-negative (got k={k})")
    if n < 1:
        raise PreconditionError(MODULE, f"n must be positive (got n={n})")
    period = (2 ** k) * 2 * n
    if lattice.N % period:
        raise PreconditionError(MODULE, f"{k} reflections of a width-{2 * n} tile need N divisible by {period} (got N={lattice.N})")
    event = EfpEvent(n).literals(lattice)
    for j in range(1, k + 1):
        cut = ReflectionMap(Axis.HORIZONTAL, (2 ** (j - 1)) * 2 * n)
        event = event.intersect(reflect_event(event, cut, lattice))
    return event


def chessboard_check(lattice: TorusLattice, z: float, n: int, k: int, workers: int = 0) -> ChessboardResult:
    """P(A(n)) <= P(all 2^k reflected copies)^(1/2^k)."""
    tiles = reflected_tiles(lattice, n, k)
    lhs = event_probability(lattice, z, EfpEvent(n), workers)
    rhs = lhs if k == 0 else event_probability(lattice, z, tiles, workers) ** (1.0 / 2 ** k)
    result = ChessboardResult(lattice.N, lattice.M, n, float(z), k, lhs, rhs)
    logger.info(f"Chessboard {lattice.N}x{lattice.M} n={n} k={k} z={z}: {lhs:.6e} <= {rhs:.6e}: {result.holds}")
    return result


def bowtie_check(
    lattice: TorusLattice, z: float, n: int, k: int, m: Optional[int] = None, workers: int = 0
) -> ChessboardResult:
    """P(E) <= P(E and its mirror image across row boundary m)^(1/2), E the k-fold tile event.

    Row 0 must stay on one side of the cut pair {m, m + M/2}, so 1 <= m <= M/2.
    """
    if lattice.M % 2:
        raise PreconditionError(MODULE, f"a vertical reflection needs M even (got M={lattice.M})")
    m = lattice.M // 2 if m is None else m
    if not 1 <= m <= lattice.M // 2:
        raise PreconditionError(MODULE, f"row cut m must lie in [1, {lattice.M // 2}] (got m={m})")
    tiles = reflected_tiles(lattice, n, k)
    bowtie = tiles.intersect(reflect_event(tiles, ReflectionMap(Axis.VERTICAL, m), lattice))
    lhs = event_probability(lattice, z, tiles, workers)
    rhs = math.sqrt(event_probability(lattice, z, bowtie, workers))
    result = ChessboardResult(lattice.N, lattice.M, n, float(z), k, lhs, rhs, m)
    logger.info(f"Bow-tie {lattice.N}x{lattice.M} n={n} k={k} m={m} z={z}: {lhs:.6e} <= {rhs:.6e}: {result.holds}")
    return result


# ---------------------------------------------------------------------------
# Reference states


@dataclass(frozen=True)
class ReferenceStateFamily:
    """Per even row and block of ell columns, one even column c of the block.

    Columns c-1 and c carry vertical dimers from row y to y+1; every other
    site is horizontal with L at even x and R at odd x.
    """

    lattice: TorusLattice
    ell: int

    def __post_init__(self):
        if self.ell < 2 or self.ell % 2:
            raise PreconditionError(MODULE, f"block length ell must be a positive even integer (got {self.ell})")
        if self.lattice.N % self.ell:
            raise PreconditionError(MODULE, f"N must be divisible by ell (got N={self.lattice.N}, ell={self.ell})")
        if self.lattice.M % 2:
            raise PreconditionError(MODULE, f"reference states need M even (got M={self.lattice.M})")

    @property
    def choice_shape(self) -> Tuple[int, int]:
        return self.lattice.M // 2, self.lattice.N // self.ell

    def count(self) -> int:
        rows, blocks = self.choice_shape
        return (self.ell // 2) ** (rows * blocks)

    def entropy_density(self) -> float:
        """ln(count) / (MN ln 2)."""
        rows, blocks = self.choice_shape
        return rows * blocks * math.log(self.ell // 2) / (self.lattice.site_count * math.log(2))

    def predicted_density(self) -> float:
        return math.log(self.ell / 2) / (2 * self.ell * math.log(2))

    def member(self, choices: np.ndarray) -> DimerConfig:
        """choices[r, b] in [0, ell/2) picks column b*ell + 2*choices[r, b] on row 2r."""
        N = self.lattice.N
        labels = np.empty((self.lattice.M, N), dtype=np.int8)
        labels[:, 0::2] = Spin.L
        labels[:, 1::2] = Spin.R
        rows, blocks = self.choice_shape
        for r in range(rows):
            for b in range(blocks):
                c = b * self.ell + 2 * int(choices[r, b])
                for x in ((c - 1) % N, c):
                    labels[2 * r, x] = Spin.U
                    labels[2 * r + 1, x] = Spin.D
        return DimerConfig(self.lattice, labels)

    def iter_members(self, limit: Optional[int] = None, seed: int = 0) -> Iterator[DimerConfig]:
        """All members when count() <= limit, else `refstate_samples` seeded draws."""
        shape = self.choice_shape
        cap = limit if limit is not None else get_setting("max_configs")
        if self.count() <= cap:
            for flat in itertools.product(range(self.ell // 2), repeat=shape[0] * shape[1]):
                yield self.member(np.array(flat, dtype=np.int64).reshape(shape))
            return
        rng = np.random.default_rng(seed)
        for _ in range(get_setting("refstate_samples")):
            yield self.member(rng.integers(0, self.ell // 2, size=shape))


@dataclass(frozen=True)
class ReferenceCount:
    N: int
    M: int
    ell: int
    count: int
    entropy_density: float
    predicted_density: float
    members_validated: int


def reference_state_count(family: ReferenceStateFamily, limit: Optional[int] = None, seed: int = 0) -> ReferenceCount:
    """Exact family size and entropy density, after validating the listed or sampled members."""
    validated = 0
    for config in family.iter_members(limit, seed):
        if not validate(config):
            raise PreconditionError(MODULE, f"reference state is not a valid configuration:\n{config!r}")
        validated += 1
    lattice = family.lattice
    return ReferenceCount(
        lattice.N,
        lattice.M,
        family.ell,
        family.count(),
        family.entropy_density(),
        family.predicted_density(),
        validated,
    )

