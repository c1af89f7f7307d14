import math

import numpy as np
import pytest

from config.constants import Spin
from config.settings import update_setting
from core import transfer
from core.dimer_config import enumerate_configs, enumerated_partition_function, vertical_count
from core.lattice import TorusLattice
from utils.error_handler import CapacityError, DomainError, PreconditionError


def enumerated_efp(lattice, z, n):
    total = 0.0
    inside = 0.0
    for config in enumerate_configs(lattice):
        w = z ** vertical_count(config)
        total += w
        row = config.labels[0]
        if all((row[x] == Spin.U) == (x % 2 == 0) for x in range(2 * n)):
            inside += w
    return inside / total


def test_partition_function_anchors():
    assert transfer.partition_function(TorusLattice(2, 2), 1.0) == pytest.approx(8.0, rel=1e-12)
    assert transfer.partition_function(TorusLattice(2, 1), 1.0) == pytest.approx(2.0, rel=1e-12)
    for z in (0.3, 1.7):
        assert transfer.partition_function(TorusLattice(2, 2), z) == pytest.approx(4 + 4 * z * z, rel=1e-12)


@pytest.mark.parametrize("N", [2, 4])
@pytest.mark.parametrize("M", [1, 2, 3, 4])
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
def test_partition_function_matches_enumeration(N, M, z):
    lattice = TorusLattice(N, M)
    assert transfer.partition_function(lattice, z) == pytest.approx(enumerated_partition_function(lattice, z), rel=1e-12)


def test_bottom_up_and_top_down_agree():
    lattice = TorusLattice(6, 5)
    forward = transfer.log_partition_function(lattice, 1.3)
    backward = transfer.log_partition_function(lattice, 1.3, reverse=True)
    assert backward == pytest.approx(forward, rel=1e-12)


def test_efp_anchors():
    lattice = TorusLattice(2, 2)
    assert transfer.efp_exact(lattice, 1.0, 1).probability == pytest.approx(1 / 8, rel=1e-12)
    z = 0.7
    assert transfer.efp_exact(lattice, z, 1).probability == pytest.approx(z * z / (4 + 4 * z * z), rel=1e-12)


@pytest.mark.parametrize("N, M", [(2, 2), (4, 2), (4, 4), (6, 4)])
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
def test_efp_matches_enumeration(N, M, z):
    lattice = TorusLattice(N, M)
    for n in (1, 2):
        if 2 * n > N:
            continue
        exact = transfer.efp_exact(lattice, z, n)
        assert exact.probability == pytest.approx(enumerated_efp(lattice, z, n), rel=1e-10)


def test_efp_of_empty_event_is_one():
    record = transfer.efp_exact(TorusLattice(4, 4), 1.0, 0)
    assert record.probability == 1.0
    assert record.normalized_exponent == 0.0


def test_efp_needs_room_for_the_event():
    with pytest.raises(PreconditionError):
        transfer.efp_exact(TorusLattice(4, 4), 1.0, 3)
    with pytest.raises(PreconditionError):
        transfer.efp_exact(TorusLattice(4, 4), 1.0, -1)


def test_efp_is_monotone_in_n():
    records = transfer.efp_table(TorusLattice(8, 6), 1.0, range(0, 5))
    probabilities = [r.probability for r in records]
    assert all(b <= a for a, b in zip(probabilities, probabilities[1:]))
    assert probabilities[-1] > 0


def test_efp_table_matches_single_calls():
    lattice = TorusLattice(6, 4)
    table = transfer.efp_table(lattice, 2.0, [1, 2, 3])
    for record in table:
        single = transfer.efp_exact(lattice, 2.0, record.n)
        assert record.log_probability == pytest.approx(single.log_probability, rel=1e-12)


def test_mean_vertical_density_matches_enumeration():
    lattice = TorusLattice(4, 4)
    z = 1.3
    total = 0.0
    moment = 0.0
    for config in enumerate_configs(lattice):
        v = vertical_count(config)
        total += z ** v
        moment += v * z ** v
    expected = moment / total / lattice.site_count
    assert transfer.mean_vertical_density(lattice, z) == pytest.approx(expected, rel=1e-6)


def test_fit_arithmetic():
    record = transfer.EfpRecord.from_log(4, 3, 2, 1.0, -6.0)
    summary = transfer.fit_decay_exponents([record])
    assert summary.exponents == {2: pytest.approx(1.5)}
    assert summary.minimum == summary.maximum == pytest.approx(1.5)
    assert summary.ratio == pytest.approx(1.0)


def test_fit_normalizations():
    record = transfer.EfpRecord.from_log(16, 2, 4, 1.0, -8.0)
    assert transfer.fit_decay_exponents([record], "nM").exponents[4] == pytest.approx(1.0)
    assert transfer.fit_decay_exponents([record], "n2").exponents[4] == pytest.approx(0.5)
    assert transfer.fit_decay_exponents([record], "n_min").exponents[4] == pytest.approx(1.0)


def test_fit_errors():
    with pytest.raises(PreconditionError):
        transfer.fit_decay_exponents([])
    with pytest.raises(PreconditionError):
        transfer.fit_decay_exponents([transfer.EfpRecord.from_log(4, 3, 2, 1.0, -6.0)], "n3")
    mixed = [transfer.EfpRecord.from_log(4, 3, 1, 1.0, -1.0), transfer.EfpRecord.from_log(4, 4, 2, 1.0, -2.0)]
    with pytest.raises(PreconditionError):
        transfer.fit_decay_exponents(mixed)
    with pytest.raises(DomainError):
        transfer.fit_decay_exponents([transfer.EfpRecord.from_log(4, 3, 2, 1.0, -math.inf)])


@pytest.mark.parametrize(
    "free, N, expected",
    [(0b1111, 4, 2), (0b0011, 4, 1), (0b0001, 4, 0), (0b0000, 4, 1), (0b0110, 4, 1), (0b011101, 6, 0)],
)
def test_horizontal_tilings(free, N, expected):
    assert transfer.horizontal_tilings(free, N) == expected


def test_kernel_structure():
    op = transfer.TransferOperator(6, 1.5)
    kernel = op.kernel
    assert (kernel - kernel.T).nnz == 0
    rows, cols = kernel.nonzero()
    assert np.all(op.winding[rows] == -op.winding[cols])
    assert np.all((op.states[rows] & op.states[cols]) == 0)


def test_orbit_sizes_cover_all_states():
    op = transfer.TransferOperator(8, 1.0)
    reps, sizes = op.orbit_representatives()
    assert sizes.sum() == 2 ** 8
    assert len(reps) < 2 ** 8


def test_dense_transfer_matrix_trace():
    op = transfer.TransferOperator(4, 0.8)
    T = op.dense()
    lattice = TorusLattice(4, 3)
    assert np.trace(np.linalg.matrix_power(T, 3)) == pytest.approx(enumerated_partition_function(lattice, 0.8), rel=1e-12)
    assert op.entry(0b0101, 0b1010) == pytest.approx(0.8 ** 2)


def test_state_cap():
    update_setting("max_states", 4)
    with pytest.raises(CapacityError):
        transfer.log_partition_function(TorusLattice(4, 4), 1.0)


def test_constraint_outside_the_torus():
    constraints = transfer.RowConstraints({5: 1}, {})
    with pytest.raises(PreconditionError):
        transfer.constrained_log_partition_function(TorusLattice(4, 2), 1.0, constraints)


def test_contradictory_constraints_have_zero_weight():
    constraints = transfer.RowConstraints({0: 1}, {0: 1})
    assert transfer.constrained_log_partition_function(TorusLattice(4, 2), 1.0, constraints) == -math.inf


@pytest.mark.slow
def test_efp_positive_exponents_at_twelve():
    records = transfer.efp_table(TorusLattice(12, 12), 1.0, range(1, 5))
    assert all(r.normalized_exponent > 0 for r in records)
    logs = [r.log_probability for r in records]
    assert all(b < a for a, b in zip(logs, logs[1:]))


@pytest.mark.slow
def test_decay_exponents_stay_in_a_window():
    records = transfer.efp_table(TorusLattice(16, 16), 1.0, range(1, 7))
    assert all(r.normalized_exponent > 0 for r in records)
    summary = transfer.fit_decay_exponents(records, n_range=range(2, 7))
    assert summary.ratio <= 4


@pytest.mark.slow
def test_shallow_torus_scales_with_height():
    records = transfer.efp_table(TorusLattice(16, 2), 1.0, range(2, 7))
    summary = transfer.fit_decay_exponents(records, "nM")
    assert summary.minimum > 0
    assert summary.ratio <= 4
