"""Exact partition functions and EFP from the row-to-row transfer matrix.

A row state is the set S of columns whose site carries U in that row, as a
bitmask. The kernel K(S, S') counts the horizontal tilings of the columns
outside S | S' (S and S' disjoint); the transfer step multiplies by z^|S'|.
Z = Tr (K D_z)^M.

W(S) = #even(S) - #odd(S) changes sign at every step, so propagation runs
blockwise between the sectors w and -w.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse
from scipy.special import logsumexp

from config.constants import TOLERANCES
from config.settings import get_setting
from core.dimer_config import check_fugacity
from core.lattice import TorusLattice
from utils.error_handler import CapacityError, DomainError, PreconditionError
from utils.performance_optimizer import PerformanceOptimizer
from utils.system_checker import SystemChecker

logger = logging.getLogger(__name__)

MODULE = "gibbs-exact"

# Growth rate of kernel nonzeros per column, (1 + sqrt 2)
_NNZ_GROWTH = 1.0 + math.sqrt(2.0)


@dataclass(frozen=True)
class RowConstraints:
    """Per-row bitmasks of columns that must / must not carry a U label."""

    must: Mapping[int, int] = field(default_factory=dict)
    forbid: Mapping[int, int] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not any(self.must.values()) and not any(self.forbid.values())

    def contradictory(self) -> bool:
        return any(mask & self.forbid.get(row, 0) for row, mask in self.must.items())

    def merged(self, other: "RowConstraints") -> "RowConstraints":
        must = dict(self.must)
        forbid = dict(self.forbid)
        for row, mask in other.must.items():
            must[row] = must.get(row, 0) | mask
        for row, mask in other.forbid.items():
            forbid[row] = forbid.get(row, 0) | mask
        return RowConstraints(must, forbid)


def efp_constraints(n: int) -> RowConstraints:
    """Row 0: U on the even columns of [0, 2n), no U on the odd ones."""
    even = sum(1 << x for x in range(0, 2 * n, 2))
    odd = sum(1 << x for x in range(1, 2 * n, 2))
    return RowConstraints({0: even} if even else {}, {0: odd} if odd else {})


def horizontal_tilings(free_mask: int, N: int) -> int:
    """Tilings of the free columns of a ring of N sites by horizontal dimers.

    An open free run has one tiling when its length is even; the full free
    ring has two.
    """
    if free_mask == (1 << N) - 1:
        return 2 if N % 2 == 0 else 0
    occupied = [x for x in range(N) if not (free_mask >> x) & 1]
    for a, b in zip(occupied, occupied[1:] + [occupied[0] + N]):
        if (b - a - 1) % 2:
            return 0
    return 1


def _popcount(values: np.ndarray, width: int) -> np.ndarray:
    counts = np.zeros(values.shape, dtype=np.int64)
    for bit in range(width):
        counts += (values >> bit) & 1
    return counts


def _bit_reverse(values: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros_like(values)
    for bit in range(width):
        out |= ((values >> bit) & 1) << (width - 1 - bit)
    return out


class TransferOperator:
    """Row-to-row transfer operator on 2^N row states, with fugacity z."""

    def __init__(self, N: int, z: float, max_states: Optional[int] = None):
        check_fugacity(z, MODULE)
        if N < 2 or N % 2:
            raise PreconditionError(MODULE, f"N must be a positive even integer (got N={N})")
        self.N = N
        self.z = float(z)
        self.n_states = 1 << N
        cap = max_states if max_states is not None else get_setting("max_states")
        if self.n_states > cap:
            raise CapacityError(MODULE, f"2^{N} = {self.n_states} row states exceed max_states = {cap}")

        estimated_nnz = int(_NNZ_GROWTH ** N) + self.n_states
        SystemChecker.ensure_memory(estimated_nnz * 24, f"transfer kernel for N={N}", MODULE)

        states = np.arange(self.n_states, dtype=np.int64)
        even_cols = sum(1 << x for x in range(0, N, 2))
        self.states = states
        self.popcount = _popcount(states, N)
        self.winding = _popcount(states & even_cols, N) - _popcount(states & ~even_cols, N)
        self.zpow = self.z ** self.popcount.astype(np.float64)

        self.kernel = self._build_kernel()
        self._sectors: Dict[int, np.ndarray] = {
            int(w): np.flatnonzero(self.winding == w) for w in np.unique(self.winding)
        }
        self._position = np.empty(self.n_states, dtype=np.int64)
        for idx in self._sectors.values():
            self._position[idx] = np.arange(len(idx))
        self._blocks: Dict[int, scipy.sparse.csr_matrix] = {}
        logger.info(f"Transfer operator N={N}, z={self.z}: {self.n_states} states, {self.kernel.nnz} nonzeros")

    def _build_kernel(self) -> scipy.sparse.csr_matrix:
        N = self.N
        full = self.n_states - 1
        subset_bits: Dict[int, np.ndarray] = {}
        rows: List[np.ndarray] = []
        cols: List[np.ndarray] = []
        vals: List[np.ndarray] = []
        for free in range(self.n_states):
            tilings = horizontal_tilings(free, N)
            if not tilings:
                continue
            occupied = full ^ free
            positions = np.array([x for x in range(N) if (occupied >> x) & 1], dtype=np.int64)
            k = len(positions)
            if k not in subset_bits:
                subset_bits[k] = (np.arange(1 << k, dtype=np.int64)[:, None] >> np.arange(k)) & 1
            lower = subset_bits[k] @ (np.int64(1) << positions) if k else np.zeros(1, dtype=np.int64)
            rows.append(lower)
            cols.append(occupied ^ lower)
            vals.append(np.full(len(lower), float(tilings)))
        kernel = scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_states, self.n_states),
        )
        kernel.sum_duplicates()
        return kernel

    def entry(self, source: int, target: int) -> float:
        """T(S -> S') = z^|S'| K(S, S')."""
        return float(self.kernel[source, target]) * float(self.zpow[target])

    def dense(self) -> np.ndarray:
        """Full transfer matrix T(S, S'); small N only."""
        return self.kernel.toarray() * self.zpow[None, :]

    def _block(self, sector: int) -> scipy.sparse.csr_matrix:
        """Kernel restricted to (sector -> -sector), laid out as target x source."""
        if sector not in self._blocks:
            target = self._sectors[-sector]
            source = self._sectors[sector]
            self._blocks[sector] = self.kernel[target][:, source].tocsr()
        return self._blocks[sector]

    def allowed_masks(self, M: int, constraints: Optional[RowConstraints]) -> List[Optional[np.ndarray]]:
        masks: List[Optional[np.ndarray]] = [None] * M
        if constraints is None:
            return masks
        for row in set(constraints.must) | set(constraints.forbid):
            must = constraints.must.get(row, 0)
            forbid = constraints.forbid.get(row, 0)
            if not (must or forbid):
                continue
            if not 0 <= row < M:
                raise PreconditionError(MODULE, f"constraint row {row} outside [0, {M})")
            masks[row] = ((self.states & must) == must) & ((self.states & forbid) == 0)
        return masks

    def orbit_representatives(self) -> Tuple[np.ndarray, np.ndarray]:
        """Canonical states under column rotations and reflection, with orbit sizes."""
        N, full = self.N, self.n_states - 1
        images = []
        for flipped in (self.states, _bit_reverse(self.states, N)):
            for r in range(N):
                images.append(((flipped << r) | (flipped >> (N - r))) & full)
        canonical = np.min(np.stack(images), axis=0)
        reps, sizes = np.unique(canonical, return_counts=True)
        return reps, sizes.astype(np.float64)

    def propagate_diagonal(
        self,
        starts: np.ndarray,
        M: int,
        masks: Sequence[Optional[np.ndarray]],
        reverse: bool = False,
    ) -> np.ndarray:
        """log (T^M)(S0, S0) under the row masks, for start states sharing one sector."""
        sector = int(self.winding[starts[0]])
        columns = np.arange(len(starts))
        vectors = np.zeros((len(self._sectors[sector]), len(starts)))
        vectors[self._position[starts], columns] = 1.0
        log_scale = np.zeros(len(starts))
        current = sector
        for step in range(1, M + 1):
            if reverse:
                vectors = vectors * self.zpow[self._sectors[current]][:, None]
            vectors = self._block(current) @ vectors
            current = -current
            target = self._sectors[current]
            if not reverse:
                vectors *= self.zpow[target][:, None]
            mask = masks[step % M]
            if mask is not None:
                vectors *= mask[target][:, None]
            peak = vectors.max(axis=0)
            alive = peak > 0
            vectors[:, alive] = vectors[:, alive] / peak[alive]
            log_scale[alive] += np.log(peak[alive])
            log_scale[~alive] = -np.inf
        if current != sector:
            return np.full(len(starts), -np.inf)
        diagonal = vectors[self._position[starts], columns]
        with np.errstate(divide="ignore"):
            return np.log(diagonal) + log_scale

    def log_trace(
        self,
        M: int,
        constraints: Optional[RowConstraints] = None,
        reverse: bool = False,
        workers: int = 0,
    ) -> float:
        """log of sum over allowed S0 of (T^M)(S0, S0), with row constraints applied."""
        if M < 1:
            raise PreconditionError(MODULE, f"M must be positive (got M={M})")
        if constraints is not None and constraints.contradictory():
            return -math.inf
        masks = self.allowed_masks(M, constraints)
        if all(mask is None for mask in masks):
            starts, weights = self.orbit_representatives()
        else:
            starts = np.flatnonzero(masks[0]) if masks[0] is not None else self.states.copy()
            weights = np.ones(len(starts))
        if M % 2:
            keep = self.winding[starts] == 0
            starts, weights = starts[keep], weights[keep]
        if len(starts) == 0:
            return -math.inf

        workers = PerformanceOptimizer.worker_count(workers)
        tasks: List[Tuple[np.ndarray, np.ndarray]] = []
        for sector in sorted(set(int(w) for w in self.winding[starts])):
            in_sector = self.winding[starts] == sector
            sector_starts, sector_weights = starts[in_sector], weights[in_sector]
            width = PerformanceOptimizer.block_size(len(self._sectors[sector]), len(sector_starts), workers)
            for lo in range(0, len(sector_starts), width):
                tasks.append((sector_starts[lo:lo + width], sector_weights[lo:lo + width]))
        logger.debug(f"log_trace N={self.N}, M={M}: {len(starts)} start states in {len(tasks)} blocks")

        # Blocks are built lazily; build them up front so workers only read.
        for sector in {int(self.winding[block[0]]) for block, _ in tasks}:
            self._block(sector)
            self._block(-sector)

        def run(task: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
            return self.propagate_diagonal(task[0], M, masks, reverse)

        if workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                logs = list(pool.map(run, tasks))
        else:
            logs = [run(task) for task in tasks]

        values = np.concatenate(logs)
        scale = np.concatenate([w for _, w in tasks])
        finite = np.isfinite(values)
        if not finite.any():
            return -math.inf
        return float(logsumexp(values[finite], b=scale[finite]))


@lru_cache(maxsize=8)
def get_operator(N: int, z: float, max_states: Optional[int] = None) -> TransferOperator:
    return TransferOperator(N, z, max_states)


def log_partition_function(lattice: TorusLattice, z: float, workers: int = 0, reverse: bool = False) -> float:
    return get_operator(lattice.N, float(z), get_setting("max_states")).log_trace(
        lattice.M, reverse=reverse, workers=workers
    )


def partition_function(lattice: TorusLattice, z: float, workers: int = 0) -> float:
    """Z_{N,M}(z) = Tr T^M."""
    return math.exp(log_partition_function(lattice, z, workers))


def constrained_log_partition_function(
    lattice: TorusLattice, z: float, constraints: RowConstraints, workers: int = 0
) -> float:
    return get_operator(lattice.N, float(z), get_setting("max_states")).log_trace(
        lattice.M, constraints=constraints, workers=workers
    )


@dataclass(frozen=True)
class EfpRecord:
    N: int
    M: int
    n: int
    z: float
    probability: float
    log_probability: float
    normalized_exponent: float

    @classmethod
    def from_log(cls, N: int, M: int, n: int, z: float, log_probability: float) -> "EfpRecord":
        # Rounding can push log P a hair above zero for the empty event
        log_probability = min(log_probability, 0.0)
        denominator = n * min(n, M)
        exponent = -log_probability / denominator if denominator else 0.0
        return cls(N, M, n, float(z), math.exp(log_probability), log_probability, exponent)


def _check_efp_args(lattice: TorusLattice, n: int) -> None:
    if n < 0:
        raise PreconditionError(MODULE, f"n must be non-negative (got n={n})")
    if 2 * n > lattice.N:
        raise PreconditionError(MODULE, f"the event A(n) needs N >= 2n (got N={lattice.N}, n={n})")


def efp_exact(lattice: TorusLattice, z: float, n: int, workers: int = 0) -> EfpRecord:
    """P(A_{N,M}(n)) = Z_constrained / Z."""
    _check_efp_args(lattice, n)
    if n == 0:
        return EfpRecord.from_log(lattice.N, lattice.M, 0, z, 0.0)
    log_z = log_partition_function(lattice, z, workers)
    log_zc = constrained_log_partition_function(lattice, z, efp_constraints(n), workers)
    return EfpRecord.from_log(lattice.N, lattice.M, n, z, log_zc - log_z)


def efp_table(lattice: TorusLattice, z: float, n_values: Iterable[int], workers: int = 0) -> List[EfpRecord]:
    """efp_exact over several n, sharing the operator and the unconstrained trace."""
    n_values = list(n_values)
    for n in n_values:
        _check_efp_args(lattice, n)
    log_z = log_partition_function(lattice, z, workers)
    records = []
    for n in n_values:
        if n == 0:
            records.append(EfpRecord.from_log(lattice.N, lattice.M, 0, z, 0.0))
            continue
        log_zc = constrained_log_partition_function(lattice, z, efp_constraints(n), workers)
        records.append(EfpRecord.from_log(lattice.N, lattice.M, n, z, log_zc - log_z))
        logger.info(f"EFP N={lattice.N} M={lattice.M} z={z} n={n}: log P = {log_zc - log_z:.6f}")
    return records


@dataclass(frozen=True)
class DecaySummary:
    N: int
    M: int
    z: float
    normalization: str
    exponents: Dict[int, float]
    minimum: float
    maximum: float

    @property
    def ratio(self) -> float:
        return self.maximum / self.minimum if self.minimum > 0 else math.inf


NORMALIZATIONS = {
    "n_min": lambda n, M: n * min(n, M),
    "nM": lambda n, M: n * M,
    "n2": lambda n, M: n * n,
}


def fit_decay_exponents(
    records: Sequence[EfpRecord],
    normalization: str = "n_min",
    n_range: Optional[Iterable[int]] = None,
) -> DecaySummary:
    """Exponents -ln P / (n min(n, M)) per n with their min and max.

    normalization "nM" divides by n*M instead, for the shallow regime M < n.
    """
    if not records:
        raise PreconditionError(MODULE, "no EFP records to fit")
    if normalization not in NORMALIZATIONS:
        raise PreconditionError(MODULE, f"unknown normalization {normalization!r}")
    first = records[0]
    for record in records:
        if (record.N, record.M, record.z) != (first.N, first.M, first.z):
            raise PreconditionError(MODULE, "records must share N, M and z")
        if not record.probability > 0 and not math.isfinite(record.log_probability):
            raise DomainError(MODULE, f"zero probability at n={record.n}")
    wanted = set(n_range) if n_range is not None else None
    scale = NORMALIZATIONS[normalization]
    exponents = {
        r.n: -r.log_probability / scale(r.n, r.M)
        for r in records
        if r.n > 0 and (wanted is None or r.n in wanted)
    }
    if not exponents:
        raise PreconditionError(MODULE, "no records with n >= 1 in the requested range")
    values = list(exponents.values())
    return DecaySummary(first.N, first.M, first.z, normalization, exponents, min(values), max(values))


def mean_vertical_density(lattice: TorusLattice, z: float, workers: int = 0) -> float:
    """<V>/(NM) = z d/dz ln Z / (NM), by a centered difference in ln z."""
    check_fugacity(z, MODULE)
    step = TOLERANCES["FINITE_DIFFERENCE_STEP"]
    upper = log_partition_function(lattice, z * (1 + step), workers)
    lower = log_partition_function(lattice, z * (1 - step), workers)
    return (upper - lower) / (2 * step) / lattice.site_count
