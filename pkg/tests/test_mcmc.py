import logging

import networkx as nx
import numpy as np
import pytest

from config.constants import InitialState, Observable, Spin
from core import mcmc, transfer
from core.dimer_config import DimerConfig, all_horizontal, all_vertical, enumerate_configs, validate
from core.lattice import TorusLattice
from utils.error_handler import CapacityError, PreconditionError


def make_state(lattice, z, start=InitialState.HORIZONTAL, seed=1):
    rng = np.random.Generator(np.random.PCG64(seed))
    return mcmc.SamplerState.from_config(mcmc.start_config(lattice, start), z, rng, seed)


@pytest.mark.parametrize("z", [0.3, 1.0, 2.5])
def test_acceptance_ratio_is_the_weight_ratio(z):
    forward = mcmc.acceptance_probability(z, True)
    backward = mcmc.acceptance_probability(z, False)
    assert forward / backward == pytest.approx(z * z, rel=1e-12)


def test_acceptance_at_unit_fugacity():
    assert mcmc.acceptance_probability(1.0, True) == 1.0
    assert mcmc.acceptance_probability(1.0, False) == 1.0


def test_single_flip_creates_two_vertical_dimers():
    state = make_state(TorusLattice(4, 4), 1.0)
    stats = mcmc.SweepStats()
    mcmc._try_flip(state, 0, 0, 0.0, stats)
    assert state.vertical == 2
    assert stats.accepted == 1
    assert state.labels[0, 0] == Spin.U and state.labels[1, 1] == Spin.D
    assert validate(state.config())


def test_unflippable_face_is_rejected():
    state = make_state(TorusLattice(4, 4), 1.0)
    stats = mcmc.SweepStats()
    mcmc._try_flip(state, 1, 0, 0.0, stats)
    assert stats.flippable == 0
    assert state.vertical == 0


def test_sweeps_keep_configurations_valid():
    state = make_state(TorusLattice(6, 4), 1.0)
    for _ in range(50):
        stats = mcmc.plaquette_flip_sweep(state, check=True)
        assert stats.proposed == 24
    assert state.sweeps == 50
    assert state.vertical == int(np.count_nonzero(state.labels == Spin.U))
    assert 0 < state.stats.acceptance <= 1


def test_chains_are_deterministic():
    lattice = TorusLattice(4, 4)
    first = mcmc.run_chains(lattice, 1.0, sweeps=300, burn_in=50, seed=11, batches=10)
    second = mcmc.run_chains(lattice, 1.0, sweeps=300, burn_in=50, seed=11, batches=10)
    assert [r.estimate.mean for r in first] == [r.estimate.mean for r in second]
    assert [r.start for r in first] == ["horizontal", "vertical"]
    other = mcmc.run_chains(lattice, 1.0, sweeps=300, burn_in=50, seed=12, batches=10)
    assert [r.estimate.mean for r in other] != [r.estimate.mean for r in first]


def test_single_row_is_rejected():
    with pytest.raises(PreconditionError):
        make_state(TorusLattice(4, 1), 1.0)


def test_invalid_start_is_rejected():
    labels = np.array(all_horizontal(TorusLattice(4, 2)).labels)
    labels[0, 0] = Spin.U
    with pytest.raises(PreconditionError):
        mcmc.SamplerState.from_config(DimerConfig(TorusLattice(4, 2), labels), 1.0, np.random.default_rng(0))


def test_burn_in_must_leave_samples():
    state = make_state(TorusLattice(4, 4), 1.0)
    with pytest.raises(PreconditionError):
        mcmc.estimate_observable(state, Observable.V_DENSITY, 10, 10)


def test_few_batches_warn(caplog):
    state = make_state(TorusLattice(4, 4), 1.0)
    with caplog.at_level(logging.WARNING, logger="core.mcmc"):
        estimate = mcmc.estimate_observable(state, Observable.V_DENSITY, 60, 10, batches=5)
    assert estimate.batches == 5
    assert "batches" in caplog.text


def test_autocorrelation_of_constant_series():
    assert mcmc.integrated_autocorrelation(np.ones(100)) == 0.5


def test_autocorrelation_of_correlated_series():
    rng = np.random.default_rng(3)
    noise = rng.normal(size=20000)
    series = np.empty_like(noise)
    series[0] = noise[0]
    for t in range(1, len(noise)):
        series[t] = 0.9 * series[t - 1] + noise[t]
    # AR(1) with phi = 0.9 has tau_int = (1 + phi) / (2 (1 - phi)) = 9.5
    assert mcmc.integrated_autocorrelation(series) == pytest.approx(9.5, rel=0.25)


def test_large_fugacity_prefers_vertical_dimers():
    state = make_state(TorusLattice(4, 4), 50.0, InitialState.VERTICAL)
    estimate = mcmc.estimate_observable(state, Observable.V_DENSITY, 500, 100)
    assert estimate.mean > 0.45


def test_flip_sectors_on_small_torus():
    lattice = TorusLattice(4, 4)
    result = mcmc.flip_sector_mean(lattice, 1.0)
    assert result.components >= 2
    assert result.sector_size < result.total_configs
    assert result.global_mean == pytest.approx(transfer.mean_vertical_density(lattice, 1.0), rel=1e-6)


def test_flip_graph_cap():
    with pytest.raises(CapacityError):
        mcmc.flip_graph(TorusLattice(4, 4), max_configs=10)


def test_chain_matches_its_sector():
    lattice = TorusLattice(4, 4)
    exact = mcmc.flip_sector_mean(lattice, 1.0, InitialState.HORIZONTAL).sector_mean
    state = make_state(lattice, 1.0, seed=5)
    estimate = mcmc.estimate_observable(state, Observable.V_DENSITY, 4000, 400)
    assert abs(estimate.mean - exact) <= 5 * estimate.stderr + 1e-3


def test_site_observable_at_vertical_start():
    state = make_state(TorusLattice(4, 2), 1.0, InitialState.VERTICAL)
    assert mcmc.measure(state, Observable.SITE_U) == 1.0
    assert mcmc.measure(state, Observable.ROW_PATTERN, n=1) == 0.0
    assert validate(all_vertical(TorusLattice(4, 2)))


def test_site_observable_matches_enumeration():
    lattice = TorusLattice(4, 4)
    graph, _ = mcmc.flip_graph(lattice)
    start = tuple(int(v) for v in all_horizontal(lattice).labels.ravel())
    sector = nx.node_connected_component(graph, start)
    total = up = 0.0
    for config in enumerate_configs(lattice):
        if tuple(int(v) for v in config.labels.ravel()) in sector:
            total += 1.0
            up += float(config.labels[0, 0] == Spin.U)
    exact = up / total
    state = make_state(lattice, 1.0, seed=404)
    estimate = mcmc.estimate_observable(state, Observable.SITE_U, 20_000, 2_000)
    assert 0 < exact < 1
    assert abs(estimate.mean - exact) <= 3 * estimate.stderr


@pytest.mark.slow
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
def test_density_on_six_by_six(z):
    lattice = TorusLattice(6, 6)
    starts = (InitialState.HORIZONTAL, InitialState.VERTICAL)
    results = mcmc.run_chains(lattice, z, starts, sweeps=100_000, burn_in=10_000, seed=20240607)
    for start, result in zip(starts, results):
        exact = mcmc.flip_sector_mean(lattice, z, start).sector_mean
        assert abs(result.estimate.mean - exact) <= 3 * result.estimate.stderr
    assert results[0].estimate.mean != results[1].estimate.mean
