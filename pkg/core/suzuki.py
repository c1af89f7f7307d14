"""Exact diagonalization of the generalized XY chain H_N(z) = H0 + H1 / z.

H0 = -sum_j (X_j X_{j+1} - Y_j Y_{j+1})
H1 =  sum_j Z_j (1 + X_{j-1} X_{j+1} / 2 + Y_{j-1} Y_{j+1} / 2)

Sites j = 1..N, periodic. Site 1 is the most significant factor of the
Kronecker product and local basis state 0 is sigma^z = +1.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from config.constants import TOLERANCES
from config.settings import get_setting
from core.dimer_config import check_fugacity
from core.lattice import TorusLattice
from core.transfer import efp_table
from utils.error_handler import CapacityError, ConvergenceError, PreconditionError

logger = logging.getLogger(__name__)

MODULE = "suzuki-chain"

IDENTITY = scipy.sparse.identity(2, dtype=complex, format="csr")
PAULI = {
    "x": scipy.sparse.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex)),
    "y": scipy.sparse.csr_matrix(np.array([[0, -1j], [1j, 0]], dtype=complex)),
    "z": scipy.sparse.csr_matrix(np.array([[1, 0], [0, -1]], dtype=complex)),
}


def pauli_string(N: int, factors: Dict[int, str]) -> scipy.sparse.csr_matrix:
    """Tensor product with the given Pauli on each listed site (1-based, wrapped)."""
    wrapped = {(j - 1) % N: p for j, p in factors.items()}
    product = scipy.sparse.identity(1, dtype=complex, format="csr")
    for site in range(N):
        factor = PAULI[wrapped[site]] if site in wrapped else IDENTITY
        product = scipy.sparse.kron(product, factor, format="csr")
    return product


def _real(matrix: scipy.sparse.csr_matrix) -> scipy.sparse.csr_matrix:
    if matrix.nnz and np.abs(matrix.data.imag).max() > TOLERANCES["HERMITICITY"]:
        raise PreconditionError(MODULE, "operator has a non-negligible imaginary part")
    real = matrix.real.tocsr()
    real.eliminate_zeros()
    return real


@dataclass(frozen=True)
class SpinChainOperator:
    N: int
    z: float
    h0: scipy.sparse.csr_matrix
    h1: scipy.sparse.csr_matrix

    @property
    def matrix(self) -> scipy.sparse.csr_matrix:
        return (self.h0 + self.h1 / self.z).tocsr()

    @property
    def dimension(self) -> int:
        return 1 << self.N

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def parity_defect(self) -> float:
        """max |[H, prod_j Z_j]| entrywise."""
        parity = scipy.sparse.diags(_parity_diagonal(self.N))
        commutator = self.matrix @ parity - parity @ self.matrix
        return float(np.abs(commutator.data).max()) if commutator.nnz else 0.0

    def norm_bound(self) -> float:
        """Max absolute row sum, an upper bound on the spectral norm."""
        return float(np.abs(self.matrix).sum(axis=1).max())


def _spin_bits(N: int) -> np.ndarray:
    """bits[i, j-1] = 1 when site j is down in basis state i."""
    states = np.arange(1 << N, dtype=np.int64)
    return np.stack([(states >> (N - j)) & 1 for j in range(1, N + 1)], axis=1)


def _parity_diagonal(N: int) -> np.ndarray:
    return np.where(_spin_bits(N).sum(axis=1) % 2 == 0, 1.0, -1.0)


def build_hamiltonian(N: int, z: float, max_chain_length: Optional[int] = None) -> SpinChainOperator:
    check_fugacity(z, MODULE)
    cap = max_chain_length if max_chain_length is not None else get_setting("max_chain_length")
    if N < 4 or N % 2:
        raise PreconditionError(MODULE, f"chain length must be even and at least 4 (got N={N})")
    if N > cap:
        raise CapacityError(MODULE, f"chain length {N} exceeds max_chain_length = {cap}")

    dim = 1 << N
    h0 = scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    h1 = scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    for j in range(1, N + 1):
        h0 = h0 - (pauli_string(N, {j: "x", j + 1: "x"}) - pauli_string(N, {j: "y", j + 1: "y"}))
        h1 = h1 + pauli_string(N, {j: "z"})
        h1 = h1 + 0.5 * pauli_string(N, {j - 1: "x", j: "z", j + 1: "x"})
        h1 = h1 + 0.5 * pauli_string(N, {j - 1: "y", j: "z", j + 1: "y"})
    operator = SpinChainOperator(N, float(z), _real(h0), _real(h1))
    logger.info(f"Built H_{N}(z={z}): dimension {dim}, {operator.matrix.nnz} nonzeros")
    return operator


@dataclass(frozen=True)
class GroundSpace:
    energy: float
    vectors: np.ndarray  # columns span the ground space
    tolerance: float

    @property
    def degeneracy(self) -> int:
        return self.vectors.shape[1]


def ground_space(op: SpinChainOperator, degeneracy_tolerance: Optional[float] = None) -> GroundSpace:
    """All eigenvectors within degeneracy_tolerance of the lowest energy."""
    H = op.matrix
    scale = op.norm_bound()
    tolerance = TOLERANCES["DEGENERACY_RELATIVE"] * scale if degeneracy_tolerance is None else degeneracy_tolerance
    dense_limit = get_setting("dense_eigen_dim")

    if op.dimension <= dense_limit:
        energies, vectors = np.linalg.eigh(H.toarray())
    elif not math.isfinite(tolerance):
        raise PreconditionError(MODULE, f"an unbounded degeneracy window needs dimension <= {dense_limit}")
    else:
        energies, vectors = _lowest_block(H, tolerance)

    keep = energies <= energies[0] + tolerance
    ground = GroundSpace(float(energies[0]), vectors[:, keep], tolerance)

    residual = np.linalg.norm(H @ ground.vectors - ground.vectors * energies[keep], axis=0).max()
    if residual > TOLERANCES["GROUND_RESIDUAL"] * max(scale, 1.0):
        raise ConvergenceError(MODULE, f"ground-space residual {residual:.3e} exceeds tolerance")
    logger.info(f"Ground space N={op.N} z={op.z}: E0={ground.energy:.12f}, degeneracy {ground.degeneracy}")
    return ground


def _lowest_block(H: scipy.sparse.csr_matrix, tolerance: float):
    """Lowest eigenpairs from eigsh, widening k until the ground multiplet is closed."""
    k = 8
    while True:
        k = min(k, H.shape[0] - 2)
        try:
            energies, vectors = scipy.sparse.linalg.eigsh(H, k=k, which="SA", tol=1e-12)
        except scipy.sparse.linalg.ArpackNoConvergence as e:
            raise ConvergenceError(MODULE, f"eigsh did not converge with k={k}: {e}") from e
        order = np.argsort(energies)
        energies, vectors = energies[order], vectors[:, order]
        if energies[-1] > energies[0] + tolerance or k >= H.shape[0] - 2:
            return energies, vectors
        logger.debug(f"Ground multiplet fills all {k} requested eigenpairs; widening")
        k *= 2


def staggered_mask(N: int, n: int, phase: int = 0) -> np.ndarray:
    """Basis states with site j in sigma^z = (-1)^(j + phase) for j = 1..n."""
    if n > N or n < 0:
        raise PreconditionError(MODULE, f"need 0 <= n <= N (got n={n}, N={N})")
    bits = _spin_bits(N)
    mask = np.ones(1 << N, dtype=bool)
    for j in range(1, n + 1):
        want_down = (j + phase) % 2 == 1
        mask &= bits[:, j - 1] == int(want_down)
    return mask


def staggered_projector_expectation(gs: GroundSpace, n: int, phase: int = 0) -> float:
    """Equal-weight average of <v|P_n|v> over the ground space; P_0 = 1."""
    N = int(round(math.log2(gs.vectors.shape[0])))
    mask = staggered_mask(N, n, phase)
    weight = (np.abs(gs.vectors[mask, :]) ** 2).sum() / gs.degeneracy
    return float(min(max(weight, 0.0), 1.0))


@dataclass(frozen=True)
class ProfileRow:
    N: int
    z: float
    n: int
    expectation: float
    log_expectation: float
    phase: int
    energy: float
    degeneracy: int


def staggered_profile(N: int, z: float, n_max: int, phase: int = 0) -> List[ProfileRow]:
    gs = ground_space(build_hamiltonian(N, z))
    rows = []
    for n in range(0, n_max + 1):
        value = staggered_projector_expectation(gs, n, phase)
        log_value = math.log(value) if value > 0 else -math.inf
        rows.append(ProfileRow(N, float(z), n, value, log_value, phase, gs.energy, gs.degeneracy))
    return rows


@dataclass(frozen=True)
class ComparisonRow:
    N: int
    z: float
    n: int
    expectation: float
    expectation_flipped: float
    expectation_2n: float
    dimer_efp: float
    M: int


def comparison_report(N: int, z: float, n_max: int, M: int = 64, workers: int = 0) -> List[ComparisonRow]:
    """Chain projector expectations next to the dimer EFP on N x M.

    The dimer event for n spans 2n columns, so the chain value on 2n sites
    (expectation_2n) is the one that lines up with dimer_efp row by row.
    """
    if 2 * n_max > N:
        raise PreconditionError(MODULE, f"the dimer event needs 2*n_max <= N (got n_max={n_max}, N={N})")
    gs = ground_space(build_hamiltonian(N, z))
    records = efp_table(TorusLattice(N, M), z, range(1, n_max + 1), workers)
    rows = []
    for record in records:
        rows.append(ComparisonRow(
            N,
            float(z),
            record.n,
            staggered_projector_expectation(gs, record.n, 0),
            staggered_projector_expectation(gs, record.n, 1),
            staggered_projector_expectation(gs, 2 * record.n, 0),
            record.probability,
            M,
        ))
    return rows
