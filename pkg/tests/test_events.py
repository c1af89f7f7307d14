import math

import numpy as np
import pytest

from config.constants import Axis, Spin
from core import events
from core.dimer_config import all_horizontal, parse_config, validate
from core.lattice import ReflectionMap, Site, TorusLattice
from utils.error_handler import PreconditionError


def test_event_membership_examples():
    assert events.event_contains(events.EfpEvent(1), parse_config("UD\nDU"))
    assert not events.event_contains(events.EfpEvent(2), all_horizontal(TorusLattice(4, 4)))
    assert not events.event_contains(events.EfpEvent(1), parse_config("UUDD\nDDUU"))


def test_odd_column_u_breaks_the_event():
    config = parse_config("UURL\nDDRL")
    assert validate(config)
    assert not events.event_contains(events.EfpEvent(1), config)


def test_event_needs_room():
    with pytest.raises(PreconditionError):
        events.event_contains(events.EfpEvent(2), parse_config("UD\nDU"))


def test_reflect_across_first_boundary():
    lattice = TorusLattice(4, 2)
    reflected = events.reflect_event(events.EfpEvent(1), ReflectionMap(Axis.HORIZONTAL, 2), lattice)
    assert reflected.columns() == {2, 3}
    assert events.Literal(Site(3, 0), Spin.U, True) in reflected.literals
    assert events.Literal(Site(2, 0), Spin.U, False) in reflected.literals


def test_double_reflection_keeps_truth_table():
    lattice = TorusLattice(4, 2)
    cut = ReflectionMap(Axis.HORIZONTAL, 2)
    once = events.reflect_event(events.EfpEvent(1), cut, lattice)
    twice = events.reflect_event(once, cut, lattice)
    assert events.truth_table(twice, lattice) == events.truth_table(events.EfpEvent(1), lattice)


def test_vertical_reflection_swaps_u_and_d():
    lattice = TorusLattice(4, 4)
    reflected = events.reflect_event(events.EfpEvent(1), ReflectionMap(Axis.VERTICAL, 1), lattice)
    assert events.Literal(Site(0, 1), Spin.D, True) in reflected.literals


def test_reflected_tiles_cover_the_torus():
    assert events.reflected_tiles(TorusLattice(8, 2), 1, 2).columns() == set(range(8))


@pytest.mark.parametrize("axis, position", [(Axis.HORIZONTAL, 2), (Axis.HORIZONTAL, 1), (Axis.VERTICAL, 1)])
def test_reflection_preserves_probability(axis, position):
    lattice = TorusLattice(4, 4)
    original, reflected = events.reflected_event_probability(
        lattice, 1.5, events.EfpEvent(1), ReflectionMap(axis, position)
    )
    assert reflected == pytest.approx(original, rel=1e-10)


def test_reflection_preserves_probability_by_enumeration():
    lattice = TorusLattice(4, 2)
    event = events.LiteralEvent(lattice, frozenset({events.Literal(Site(0, 0), Spin.L)}))
    assert event.row_constraints() is None
    original, reflected = events.reflected_event_probability(
        lattice, 0.5, event, ReflectionMap(Axis.HORIZONTAL, 2)
    )
    assert reflected == pytest.approx(original, rel=1e-12)
    assert 0 < original < 1


def test_unsatisfiable_event_has_zero_probability():
    lattice = TorusLattice(4, 2)
    event = events.LiteralEvent(
        lattice,
        frozenset({events.Literal(Site(0, 0), Spin.U), events.Literal(Site(0, 0), Spin.L)}),
    )
    assert not event.is_satisfiable()
    assert events.event_probability(lattice, 1.0, event) == 0.0


def test_event_probability_agrees_with_efp():
    lattice = TorusLattice(6, 4)
    p = events.event_probability(lattice, 2.0, events.EfpEvent(2))
    literal_p = events.event_probability(lattice, 2.0, events.EfpEvent(2).literals(lattice))
    assert p == pytest.approx(literal_p, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_diamond_shape(n):
    pattern = events.DiamondPattern(n)
    assert len(pattern.cells()) == n * n + (n - 1) * (n - 1)
    assert pattern.has_mirror_invariant_labels()
    assert pattern.mirrored(swap_labels=True) != sorted(pattern.cells())
    assert pattern.swapped_mirror_agrees()
    assert pattern.is_consistent()


@pytest.mark.parametrize("n", [1, 2])
def test_frozen_diamond_lemma_small(n):
    result = events.check_frozen_diamond_lemma(TorusLattice(4, 4), n)
    assert result.holds
    assert result.members > 0
    assert result.configs_checked == result.members
    assert result.first_counterexample is None


def test_lemma_needs_the_boundary_literal():
    result = events.check_frozen_diamond_lemma(TorusLattice(4, 4), 1, include_boundary=False)
    assert not result.holds
    assert result.first_counterexample is not None
    assert result.configs_checked == result.members + result.counterexamples


def test_lemma_preconditions():
    with pytest.raises(PreconditionError):
        events.check_frozen_diamond_lemma(TorusLattice(4, 2), 2)
    with pytest.raises(PreconditionError):
        events.check_frozen_diamond_lemma(TorusLattice(4, 4), 0)


@pytest.mark.slow
@pytest.mark.parametrize("N, M, n", [(6, 6, 2), (6, 6, 3), (8, 8, 2)])
def test_frozen_diamond_lemma_large(N, M, n):
    assert events.check_frozen_diamond_lemma(TorusLattice(N, M), n).holds


def test_chessboard_examples():
    assert events.chessboard_check(TorusLattice(4, 2), 1.0, 1, 1).holds
    assert events.chessboard_check(TorusLattice(8, 2), 2.0, 1, 2).holds


def test_chessboard_without_reflection_is_equality():
    result = events.chessboard_check(TorusLattice(8, 4), 0.5, 1, 0)
    assert result.lhs == result.rhs


@pytest.mark.parametrize("N, M", [(4, 2), (8, 2), (8, 4)])
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
def test_chessboard_grid(N, M, z):
    for k in (1, 2):
        if N % (2 ** k * 2):
            continue
        result = events.chessboard_check(TorusLattice(N, M), z, 1, k)
        assert result.lhs <= result.rhs + 1e-12
        assert 0 < result.lhs <= 1


def test_chessboard_divisibility():
    with pytest.raises(PreconditionError):
        events.chessboard_check(TorusLattice(6, 2), 1.0, 1, 1)


@pytest.mark.parametrize("z", [0.5, 2.0])
def test_bowtie(z):
    result = events.bowtie_check(TorusLattice(4, 4), z, 1, 1)
    assert result.m == 2
    assert result.holds
    assert events.bowtie_check(TorusLattice(8, 4), z, 1, 1, m=1).holds


def test_bowtie_preconditions():
    with pytest.raises(PreconditionError):
        events.bowtie_check(TorusLattice(4, 3), 1.0, 1, 1)
    with pytest.raises(PreconditionError):
        events.bowtie_check(TorusLattice(4, 4), 1.0, 1, 1, m=3)


def test_reference_family_small():
    family = events.ReferenceStateFamily(TorusLattice(4, 4), 4)
    result = events.reference_state_count(family)
    assert result.count == 4
    assert result.members_validated == 4


def test_reference_members_place_vertical_pairs():
    family = events.ReferenceStateFamily(TorusLattice(4, 2), 4)
    config = family.member(np.array([[0]]))
    assert validate(config)
    assert config.label(Site(3, 0)) is Spin.U
    assert config.label(Site(0, 1)) is Spin.D


def test_reference_family_without_freedom():
    result = events.reference_state_count(events.ReferenceStateFamily(TorusLattice(8, 8), 2))
    assert result.count == 1
    assert result.entropy_density == 0.0


@pytest.mark.parametrize("ell", [4, 8])
@pytest.mark.parametrize("size", [8, 16])
def test_reference_entropy(ell, size):
    family = events.ReferenceStateFamily(TorusLattice(size, size), ell)
    result = events.reference_state_count(family, seed=7)
    rows, blocks = size // 2, size // ell
    assert result.count == (ell // 2) ** (rows * blocks)
    assert result.entropy_density == pytest.approx(math.log(ell / 2) / (2 * ell * math.log(2)), abs=1e-12)
    assert result.entropy_density == pytest.approx(result.predicted_density, abs=1e-12)
    assert result.members_validated > 0


@pytest.mark.parametrize("N, M, ell", [(6, 4, 4), (8, 3, 4), (8, 8, 3), (8, 8, 0)])
def test_reference_family_preconditions(N, M, ell):
    with pytest.raises(PreconditionError):
        events.ReferenceStateFamily(TorusLattice(N, M), ell)
