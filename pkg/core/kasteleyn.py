"""Kasteleyn cross-check of Z on the torus.

Orientation: horizontal edges point +x with sign +1, vertical edges point +y
with sign (-1)^x. Edges crossing the vertical seam (x = N-1 -> 0) are scaled
by theta_h, edges crossing the horizontal seam (y = M-1 -> 0) by theta_v.
Each Pfaffian is a signed sum over the four winding classes (a, b) of labeled
configurations; the class signs are read off explicit representatives and the
four Pfaffians are recombined so that every class counts with weight +1.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import TOLERANCES
from config.settings import get_setting
from core.dimer_config import check_fugacity
from core.lattice import TorusLattice
from utils.error_handler import CapacityError, PreconditionError
from utils.performance_optimizer import PerformanceOptimizer
from utils.system_checker import SystemChecker

logger = logging.getLogger(__name__)

MODULE = "kasteleyn"

SPIN_STRUCTURES: Tuple[Tuple[int, int], ...] = tuple(product((1, -1), repeat=2))

# (tail, head, sign) of an oriented edge, sign already including the seam twist
Edge = Tuple[int, int, float]


@dataclass(frozen=True)
class SignedAdjacency:
    matrix: np.ndarray
    spin_structure: Tuple[int, int]
    z: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def is_antisymmetric(self) -> bool:
        return bool(np.array_equal(self.matrix, -self.matrix.T))


def oriented_edges(lattice: TorusLattice, theta_h: int = 1, theta_v: int = 1) -> Tuple[List[Edge], List[Edge]]:
    """Horizontal and vertical edges as (tail, head, sign); vertex index x + N*y."""
    N, M = lattice.N, lattice.M
    horizontal: List[Edge] = []
    vertical: List[Edge] = []
    for y in range(M):
        for x in range(N):
            tail = x + N * y
            twist_h = theta_h if x == N - 1 else 1
            horizontal.append((tail, (x + 1) % N + N * y, float(twist_h)))
            twist_v = theta_v if y == M - 1 else 1
            vertical.append((tail, x + N * ((y + 1) % M), float((-1) ** x * twist_v)))
    return horizontal, vertical


def signed_adjacency(lattice: TorusLattice, z: float, theta_h: int, theta_v: int) -> SignedAdjacency:
    """Antisymmetric Kasteleyn matrix for one spin structure.

    Parallel edges (N = 2 or M = 2) are summed into the same entry, each with
    its own sign.
    """
    check_fugacity(z, MODULE)
    size = lattice.site_count
    matrix = np.zeros((size, size))
    horizontal, vertical = oriented_edges(lattice, theta_h, theta_v)
    for weight, edges in ((1.0, horizontal), (float(z), vertical)):
        for tail, head, sign in edges:
            matrix[tail, head] += sign * weight
            matrix[head, tail] -= sign * weight
    return SignedAdjacency(matrix, (theta_h, theta_v), float(z))


def pfaffian(matrix: np.ndarray) -> Tuple[float, float]:
    """(sign, log|Pf|) by skew-symmetric Parlett-Reid elimination with pivoting.

    Returns (0.0, -inf) for a singular matrix or odd dimension.
    """
    A = np.array(matrix, dtype=np.float64, copy=True)
    n = A.shape[0]
    if n % 2:
        return 0.0, -math.inf
    sign = 1.0
    log_abs = 0.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.abs(A[k + 1:, k]).argmax())
        if kp != k + 1:
            A[[k + 1, kp], k:] = A[[kp, k + 1], k:]
            A[k:, [k + 1, kp]] = A[k:, [kp, k + 1]]
            sign = -sign
        pivot = A[k, k + 1]
        if abs(pivot) <= TOLERANCES["PFAFFIAN_PIVOT"]:
            return 0.0, -math.inf
        sign *= math.copysign(1.0, pivot)
        log_abs += math.log(abs(pivot))
        if k + 2 < n:
            tau = A[k, k + 2:] / pivot
            column = A[k + 2:, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, column) - np.outer(column, tau)
    return sign, log_abs


def pfaffian_squared_matches_det(matrix: np.ndarray, rtol: float = 1e-8) -> bool:
    """Pf(A)^2 = det(A), with zero judged against the scale of A.

    Singular values of an antisymmetric matrix come in pairs, so rounding
    noise in a singular determinant sits near eps^2 * |A|^dim; anything
    below eps^1.5 * |A|^dim counts as zero.
    """
    sign, log_pf = pfaffian(matrix)
    det_sign, log_det = np.linalg.slogdet(matrix)
    scale = float(np.linalg.norm(matrix, 2))
    if scale == 0:
        return sign == 0
    floor = matrix.shape[0] * math.log(scale) + 1.5 * math.log(np.finfo(np.float64).eps)
    pf_zero = sign == 0 or 2 * log_pf < floor
    det_zero = det_sign == 0 or log_det < floor
    if pf_zero or det_zero:
        return pf_zero and det_zero
    return det_sign > 0 and abs(2 * log_pf - log_det) <= rtol * max(1.0, abs(log_det))


def _permutation_sign(sequence: Sequence[int]) -> int:
    seen = [False] * len(sequence)
    sign = 1
    for start in range(len(sequence)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = sequence[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def term_sign(lattice: TorusLattice, pairs: Sequence[Tuple[int, int]]) -> int:
    """Sign of a matching's term in the untwisted Pfaffian.

    pairs are (tail, head) along the oriented edge used by the matching.
    """
    horizontal, vertical = oriented_edges(lattice)
    signs = {(t, h): s for t, h, s in horizontal + vertical}
    order = [v for pair in pairs for v in pair]
    sign = _permutation_sign(order)
    for pair in pairs:
        sign *= int(signs[pair])
    return sign


def _reference_pairs(lattice: TorusLattice, skip_rows=(), skip_columns=()) -> List[Tuple[int, int]]:
    N = lattice.N
    pairs = []
    for y in range(lattice.M):
        if y in skip_rows:
            continue
        for x in range(0, N, 2):
            if x in skip_columns:
                continue
            pairs.append((x + N * y, x + 1 + N * y))
    return pairs


def winding_class_signs(lattice: TorusLattice) -> Dict[Tuple[int, int], int]:
    """Sign of each winding class (a, b) relative to the all-horizontal matching."""
    N, M = lattice.N, lattice.M
    base = term_sign(lattice, _reference_pairs(lattice))

    shifted_row = [(x + 1, (x + 2) % N) for x in range(0, N, 2)]
    horizontal = term_sign(lattice, shifted_row + _reference_pairs(lattice, skip_rows={0})) * base

    # Odd M admits no configuration with an odd number of seam-crossing vertical dimers
    vertical = -1
    if M % 2 == 0:
        column0 = [(N * y, N * ((y + 1) % M)) for y in range(1, M, 2)]
        column1 = [(1 + N * y, 1 + N * (y + 1)) for y in range(0, M, 2)]
        vertical = term_sign(lattice, column0 + column1 + _reference_pairs(lattice, skip_columns={0})) * base

    return {(0, 0): 1, (1, 0): horizontal, (0, 1): vertical, (1, 1): -horizontal * vertical}


def combination_weights(signs: Dict[Tuple[int, int], int]) -> Dict[Tuple[int, int], float]:
    """c(theta) = 1/4 sum_{a,b} sign(a,b) theta_h^a theta_v^b."""
    return {
        (th, tv): 0.25 * sum(s * th ** a * tv ** b for (a, b), s in signs.items())
        for th, tv in SPIN_STRUCTURES
    }


def _check_size(lattice: TorusLattice, max_dim: Optional[int]) -> None:
    if lattice.M < 2:
        raise PreconditionError(MODULE, "the construction needs M >= 2 (M = 1 gives vertical self-loops)")
    cap = max_dim if max_dim is not None else get_setting("max_dim")
    if lattice.site_count > cap:
        raise CapacityError(MODULE, f"matrix dimension {lattice.site_count} exceeds max_dim = {cap}")
    SystemChecker.ensure_memory(3 * lattice.site_count ** 2 * 8, f"Kasteleyn matrices for {lattice.N}x{lattice.M}", MODULE)


def kasteleyn_log_partition_function(
    lattice: TorusLattice, z: float, max_dim: Optional[int] = None, workers: int = 0
) -> float:
    """log Z from the four spin-structure Pfaffians.

    Logs a warning when the signed terms cancel below KASTELEYN_CANCELLATION
    of the largest one, and returns -inf when they cancel exactly.
    """
    _check_size(lattice, max_dim)
    check_fugacity(z, MODULE)
    weights = combination_weights(winding_class_signs(lattice))

    def solve(theta: Tuple[int, int]) -> Tuple[float, float]:
        return pfaffian(signed_adjacency(lattice, z, *theta).matrix)

    workers = min(PerformanceOptimizer.worker_count(workers), len(SPIN_STRUCTURES))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, SPIN_STRUCTURES))
    else:
        results = [solve(theta) for theta in SPIN_STRUCTURES]

    finite = [log_abs for _, log_abs in results if math.isfinite(log_abs)]
    if not finite:
        return -math.inf
    peak = max(finite)
    terms = [
        weights[theta] * sign * math.exp(log_abs - peak)
        for theta, (sign, log_abs) in zip(SPIN_STRUCTURES, results)
        if sign != 0
    ]
    total = abs(sum(terms))
    largest = max(abs(t) for t in terms)
    if total < TOLERANCES["KASTELEYN_CANCELLATION"] * largest:
        logger.warning(
            f"{MODULE}: the four Pfaffian terms cancel to {total / largest:.3e} of the largest "
            f"on {lattice.N}x{lattice.M}, z={z}"
        )
    if total == 0:
        return -math.inf
    return math.log(total) + peak


def kasteleyn_partition_function(
    lattice: TorusLattice, z: float, max_dim: Optional[int] = None, workers: int = 0
) -> float:
    """Z from the four spin-structure Pfaffians."""
    return math.exp(kasteleyn_log_partition_function(lattice, z, max_dim, workers))
