"""Plaquette-flip Metropolis sampling of the weighted dimer measure.

Plaquette flips never change the winding sector of a torus configuration,
so chains are started from both the all-horizontal and the all-vertical
configuration and compared against the exact mean over the start's flip
component (flip_sector_mean) as well as the global exact value.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from tqdm import tqdm

from config.constants import MCMC_CONSTANTS, InitialState, Observable, Spin
from config.settings import get_setting
from core.dimer_config import (
    DimerConfig,
    all_horizontal,
    all_vertical,
    check_fugacity,
    iter_label_tuples,
    validate,
)
from core.lattice import TorusLattice
from utils.error_handler import CapacityError, PreconditionError

logger = logging.getLogger(__name__)

MODULE = "mcmc"


def acceptance_probability(z: float, to_vertical: bool) -> float:
    """Metropolis acceptance for rotating a plaquette's dimer pair."""
    ratio = z * z if to_vertical else 1.0 / (z * z)
    return min(1.0, ratio)


@dataclass
class SweepStats:
    proposed: int = 0
    flippable: int = 0
    accepted: int = 0

    def add(self, other: "SweepStats") -> None:
        self.proposed += other.proposed
        self.flippable += other.flippable
        self.accepted += other.accepted

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


@dataclass
class SamplerState:
    """Working copy of a configuration with its generator and counters."""

    lattice: TorusLattice
    labels: np.ndarray
    z: float
    rng: np.random.Generator
    seed: int = 0
    sweeps: int = 0
    vertical: int = 0
    stats: SweepStats = field(default_factory=SweepStats)

    @classmethod
    def from_config(cls, config: DimerConfig, z: float, rng: np.random.Generator, seed: int = 0) -> "SamplerState":
        check_fugacity(z, MODULE)
        if config.lattice.M < 2:
            raise PreconditionError(MODULE, "plaquette flips need M >= 2")
        if not validate(config):
            raise PreconditionError(MODULE, "the start configuration is not valid")
        labels = np.array(config.labels, dtype=np.int8, copy=True)
        return cls(config.lattice, labels, float(z), rng, seed, vertical=int(np.count_nonzero(labels == Spin.U)))

    def config(self) -> DimerConfig:
        return DimerConfig(self.lattice, self.labels)


def _try_flip(state: SamplerState, x: int, y: int, draw: float, stats: SweepStats) -> None:
    N, M = state.lattice.N, state.lattice.M
    labels = state.labels
    x1, y1 = (x + 1) % N, (y + 1) % M
    a, b, c, d = labels[y, x], labels[y, x1], labels[y1, x], labels[y1, x1]
    if a == Spin.R and b == Spin.L and c == Spin.R and d == Spin.L:
        stats.flippable += 1
        if draw < acceptance_probability(state.z, True):
            labels[y, x] = labels[y, x1] = Spin.U
            labels[y1, x] = labels[y1, x1] = Spin.D
            state.vertical += 2
            stats.accepted += 1
    elif a == Spin.U and b == Spin.U and c == Spin.D and d == Spin.D:
        stats.flippable += 1
        if draw < acceptance_probability(state.z, False):
            labels[y, x] = labels[y1, x] = Spin.R
            labels[y, x1] = labels[y1, x1] = Spin.L
            state.vertical -= 2
            stats.accepted += 1


def plaquette_flip_sweep(state: SamplerState, check: bool = False) -> SweepStats:
    """N*M proposals at uniformly chosen faces."""
    N, M = state.lattice.N, state.lattice.M
    faces = state.rng.integers(0, N * M, size=N * M)
    draws = state.rng.random(N * M)
    stats = SweepStats(proposed=N * M)
    for face, draw in zip(faces.tolist(), draws.tolist()):
        _try_flip(state, face % N, face // N, draw, stats)
    state.sweeps += 1
    state.stats.add(stats)
    if check and not validate(state.config()):
        raise AssertionError(f"{MODULE}: invalid configuration after sweep {state.sweeps}")
    return stats


def measure(state: SamplerState, observable: Observable, n: int = 1) -> float:
    if observable is Observable.V_DENSITY:
        return state.vertical / state.lattice.site_count
    if observable is Observable.SITE_U:
        return float(state.labels[0, 0] == Spin.U)
    row = state.labels[0, : 2 * n]
    return float(all((row[x] == Spin.U) == (x % 2 == 0) for x in range(2 * n)))


def integrated_autocorrelation(samples: np.ndarray, window_factor: float = 5.0) -> float:
    """tau_int = 1/2 + sum_t rho(t), with the self-consistent window t < c * tau."""
    centered = samples - samples.mean()
    variance = centered.var()
    if len(samples) < 2 or variance == 0:
        return 0.5
    size = 1 << (2 * len(samples) - 1).bit_length()
    spectrum = np.fft.rfft(centered, size)
    rho = np.fft.irfft(spectrum * np.conj(spectrum), size)[: len(samples)]
    rho /= rho[0]
    tau = 0.5
    for t in range(1, len(samples)):
        tau += rho[t]
        if t >= window_factor * tau:
            break
    return max(tau, 0.5)


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    tau_int: float
    acceptance: float
    samples: int
    batches: int


def batch_means(samples: np.ndarray, batches: int) -> Tuple[float, int]:
    """Standard error from non-overlapping batch means."""
    size = len(samples) // batches
    if size == 0:
        batches, size = len(samples), 1
    means = samples[: batches * size].reshape(batches, size).mean(axis=1)
    if batches < 2:
        return 0.0, batches
    return float(means.std(ddof=1) / math.sqrt(batches)), batches


def estimate_observable(
    state: SamplerState,
    observable: Observable,
    sweeps: int,
    burn_in: int,
    batches: Optional[int] = None,
    n: int = 1,
    progress: Optional[bool] = None,
) -> Estimate:
    """Mean and error of an observable over sweeps - burn_in measured sweeps."""
    if not sweeps > burn_in >= 0:
        raise PreconditionError(MODULE, f"need sweeps > burn_in >= 0 (got sweeps={sweeps}, burn_in={burn_in})")
    if observable is Observable.ROW_PATTERN and not 1 <= n <= state.lattice.N // 2:
        raise PreconditionError(MODULE, f"row pattern needs 1 <= n <= N/2 (got n={n})")
    batches = batches or get_setting("batches", MCMC_CONSTANTS["DEFAULT_BATCHES"])
    show = get_setting("progress", False) if progress is None else progress

    samples = np.empty(sweeps - burn_in)
    for sweep in tqdm(range(sweeps), desc=f"{observable.value} z={state.z}", disable=not show):
        plaquette_flip_sweep(state)
        if sweep >= burn_in:
            samples[sweep - burn_in] = measure(state, observable, n)

    batch_error, used = batch_means(samples, batches)
    if used < MCMC_CONSTANTS["MIN_BATCHES"]:
        logger.warning(f"{MODULE}: only {used} batches for {observable.value}; errors are unreliable")
    tau = integrated_autocorrelation(samples)
    naive = samples.std(ddof=1) / math.sqrt(len(samples)) if len(samples) > 1 else 0.0
    stderr = max(batch_error, naive * math.sqrt(2 * tau))
    return Estimate(float(samples.mean()), float(stderr), float(tau), state.stats.acceptance, len(samples), used)


def start_config(lattice: TorusLattice, start: Union[InitialState, DimerConfig]) -> DimerConfig:
    if isinstance(start, DimerConfig):
        return start
    if start is InitialState.VERTICAL:
        return all_vertical(lattice)
    return all_horizontal(lattice)


@dataclass(frozen=True)
class ChainResult:
    chain: int
    seed: int
    start: str
    sweeps: int
    burn_in: int
    z: float
    observable: str
    estimate: Estimate


def _run_chain(
    lattice: TorusLattice,
    z: float,
    start: InitialState,
    seed: int,
    chain: int,
    sequence: np.random.SeedSequence,
    observable: Observable,
    sweeps: int,
    burn_in: int,
    batches: Optional[int],
    n: int,
) -> ChainResult:
    rng = np.random.Generator(np.random.PCG64(sequence))
    state = SamplerState.from_config(start_config(lattice, start), z, rng, seed)
    estimate = estimate_observable(state, observable, sweeps, burn_in, batches, n)
    logger.info(
        f"Chain {chain} ({start.value} start) z={z}: {observable.value} = {estimate.mean:.6f} "
        f"+/- {estimate.stderr:.2e}, tau={estimate.tau_int:.2f}"
    )
    return ChainResult(chain, seed, start.value, sweeps, burn_in, float(z), observable.value, estimate)


def run_chains(
    lattice: TorusLattice,
    z: float,
    starts: Sequence[InitialState] = (InitialState.HORIZONTAL, InitialState.VERTICAL),
    sweeps: Optional[int] = None,
    burn_in: Optional[int] = None,
    seed: int = MCMC_CONSTANTS["DEFAULT_SEED"],
    chains_per_start: int = 1,
    observable: Observable = Observable.V_DENSITY,
    batches: Optional[int] = None,
    n: int = 1,
    workers: int = 1,
) -> List[ChainResult]:
    """Independent chains with streams spawned from one SeedSequence."""
    sweeps = sweeps if sweeps is not None else get_setting("sweeps")
    burn_in = burn_in if burn_in is not None else get_setting("burn_in")
    jobs = [(start, i) for start in starts for i in range(chains_per_start)]
    sequences = np.random.SeedSequence(seed).spawn(len(jobs))
    arguments = [
        (lattice, z, start, seed, chain, sequences[chain], observable, sweeps, burn_in, batches, n)
        for chain, (start, _) in enumerate(jobs)
    ]
    if workers > 1 and len(arguments) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_chain, *zip(*arguments)))
    return [_run_chain(*args) for args in arguments]


# ---------------------------------------------------------------------------
# Exact reference restricted to a flip component


@dataclass(frozen=True)
class SectorMean:
    global_mean: float
    sector_mean: float
    sector_size: int
    total_configs: int
    components: int


def _flip_neighbors(labels: np.ndarray) -> List[Tuple[int, ...]]:
    M, N = labels.shape
    out = []
    for y in range(M):
        y1 = (y + 1) % M
        for x in range(N):
            x1 = (x + 1) % N
            a, b, c, d = labels[y, x], labels[y, x1], labels[y1, x], labels[y1, x1]
            flipped = None
            if a == Spin.R and b == Spin.L and c == Spin.R and d == Spin.L:
                flipped = labels.copy()
                flipped[y, x] = flipped[y, x1] = Spin.U
                flipped[y1, x] = flipped[y1, x1] = Spin.D
            elif a == Spin.U and b == Spin.U and c == Spin.D and d == Spin.D:
                flipped = labels.copy()
                flipped[y, x] = flipped[y1, x] = Spin.R
                flipped[y, x1] = flipped[y1, x1] = Spin.L
            if flipped is not None:
                out.append(tuple(int(v) for v in flipped.ravel()))
    return out


def flip_graph(lattice: TorusLattice, max_configs: Optional[int] = None) -> Tuple[nx.Graph, Dict[Tuple[int, ...], int]]:
    """Configurations as nodes, single plaquette flips as edges."""
    if lattice.M < 2:
        raise PreconditionError(MODULE, "plaquette flips need M >= 2")
    cap = max_configs if max_configs is not None else get_setting("max_configs")
    graph = nx.Graph()
    counts: Dict[Tuple[int, ...], int] = {}
    for labels in iter_label_tuples(lattice):
        key = tuple(int(v) for v in labels)
        counts[key] = key.count(int(Spin.U))
        if len(counts) > cap:
            raise CapacityError(MODULE, f"flip graph of {lattice.N}x{lattice.M} exceeds max_configs = {cap}")
    graph.add_nodes_from(counts)
    shape = (lattice.M, lattice.N)
    for key in counts:
        for other in _flip_neighbors(np.array(key, dtype=np.int8).reshape(shape)):
            graph.add_edge(key, other)
    return graph, counts


def flip_sector_mean(
    lattice: TorusLattice,
    z: float,
    start: Union[InitialState, DimerConfig] = InitialState.HORIZONTAL,
    max_configs: Optional[int] = None,
) -> SectorMean:
    """Exact <V>/(NM) over all configurations and over the start's flip component."""
    check_fugacity(z, MODULE)
    graph, counts = flip_graph(lattice, max_configs)
    key = tuple(int(v) for v in start_config(lattice, start).labels.ravel())
    sector = nx.node_connected_component(graph, key)

    def mean(keys) -> float:
        weights = np.array([float(z) ** counts[k] for k in keys])
        values = np.array([counts[k] for k in keys], dtype=np.float64)
        return float(weights @ values / weights.sum() / lattice.site_count)

    result = SectorMean(
        mean(counts), mean(sector), len(sector), len(counts), nx.number_connected_components(graph)
    )
    logger.info(
        f"Flip sectors {lattice.N}x{lattice.M}: {result.components} components, start sector "
        f"{result.sector_size}/{result.total_configs}"
    )
    return result
