import logging
import math
from typing import Any, Dict, Iterator, List, Optional

from config.constants import ComputationMethod, InitialState, Observable, Spin
from core import events, kasteleyn, mcmc, suzuki, transfer
from core.dimer_config import (
    enumerate_configs,
    enumerated_partition_function,
    format_config,
    parse_config,
    validate,
    vertical_count,
)
from core.lattice import Site, TorusLattice
from utils.error_handler import CapacityError, DimerEfpError, ErrorHandler, PreconditionError
from utils.metrics_collector import MetricsCollector

logger = logging.getLogger(__name__)

Row = Dict[str, Any]


class DimerEfpRunner:
    """One method per CLI subcommand; each returns the rows of its CSV."""

    def __init__(self, workers: int = 0):
        self.workers = workers
        self.metrics = MetricsCollector()

    def _fail(self, what: str, error: Exception) -> None:
        error_type = ErrorHandler.classify_error(error)
        self.metrics.record_failure(error_type.name)
        ErrorHandler.handle_error(error_type, f"{what}: {error}")

    def partition_functions(self, N: int, M: int, z: float, method: str = "all") -> List[Row]:
        lattice = TorusLattice(N, M)
        chosen = ComputationMethod(method)
        methods = (
            [ComputationMethod.ENUMERATE, ComputationMethod.TRANSFER, ComputationMethod.KASTELEYN]
            if chosen is ComputationMethod.ALL
            else [chosen]
        )
        rows = []
        for m in methods:
            try:
                with self.metrics.timed(f"zfn_{m.value}"):
                    if m is ComputationMethod.ENUMERATE:
                        value = enumerated_partition_function(lattice, z)
                        log_z = math.log(value)
                    elif m is ComputationMethod.TRANSFER:
                        log_z = transfer.log_partition_function(lattice, z, self.workers)
                    else:
                        log_z = kasteleyn.kasteleyn_log_partition_function(lattice, z, workers=self.workers)
            except (CapacityError, PreconditionError) as e:
                if chosen is not ComputationMethod.ALL:
                    self._fail(f"zfn {m.value}", e)
                    raise
                logger.warning(f"zfn: skipping {m.value} on {N}x{M}: {e}")
                continue
            rows.append({"N": N, "M": M, "z": float(z), "method": m.value, "log_z": log_z, "z_value": math.exp(log_z)})
        return rows

    def efp(self, N: int, M: int, z: float, n_min: int, n_max: int) -> List[Row]:
        if n_min > n_max:
            raise PreconditionError("cli", f"--n-min {n_min} exceeds --n-max {n_max}")
        with self.metrics.timed("efp"):
            records = transfer.efp_table(TorusLattice(N, M), z, range(n_min, n_max + 1), self.workers)
        return [
            {
                "N": r.N, "M": r.M, "n": r.n, "z": r.z,
                "log_prob": r.log_probability, "prob": r.probability,
                "normalized_exponent": r.normalized_exponent,
            }
            for r in records
        ]

    def fit_decay(self, N: int, M: int, z: float, n_min: int, n_max: int, normalization: str = "n_min") -> List[Row]:
        with self.metrics.timed("fit_decay"):
            records = transfer.efp_table(TorusLattice(N, M), z, range(n_min, n_max + 1), self.workers)
            try:
                summary = transfer.fit_decay_exponents(records, normalization)
            except DimerEfpError as e:
                self._fail("fit-decay", e)
                raise
        return [
            {
                "N": N, "M": M, "z": float(z), "n": n, "normalized_exponent": value,
                "min_exponent": summary.minimum, "max_exponent": summary.maximum, "ratio": summary.ratio,
            }
            for n, value in sorted(summary.exponents.items())
        ]

    def enumerate(self, N: int, M: int) -> Iterator[str]:
        lattice = TorusLattice(N, M)
        with self.metrics.timed("enumerate"):
            for config in enumerate_configs(lattice):
                yield format_config(config)

    def lemma_check(self, N: int, M: int, n: int, include_boundary: bool = True) -> List[Row]:
        with self.metrics.timed("lemma_check"):
            result = events.check_frozen_diamond_lemma(TorusLattice(N, M), n, include_boundary)
        if result.first_counterexample is not None:
            logger.info(f"First counterexample:\n{format_config(result.first_counterexample)}")
        return [{
            "N": N, "M": M, "n": n, "include_boundary": include_boundary,
            "configs_checked": result.configs_checked, "members": result.members,
            "counterexamples": result.counterexamples, "holds": result.holds,
        }]

    def chessboard(self, N: int, M: int, n: int, z: float, k: int) -> List[Row]:
        with self.metrics.timed("chessboard_check"):
            r = events.chessboard_check(TorusLattice(N, M), z, n, k, self.workers)
        return [{"N": N, "M": M, "n": n, "z": r.z, "k": k, "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds}]

    def bowtie(self, N: int, M: int, n: int, z: float, k: int, m: Optional[int]) -> List[Row]:
        with self.metrics.timed("bowtie_check"):
            r = events.bowtie_check(TorusLattice(N, M), z, n, k, m, self.workers)
        return [{"N": N, "M": M, "n": n, "z": r.z, "k": k, "m": r.m, "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds}]

    def refstate(self, N: int, M: int, ell: int, seed: int) -> List[Row]:
        with self.metrics.timed("refstate"):
            r = events.reference_state_count(events.ReferenceStateFamily(TorusLattice(N, M), ell), seed=seed)
        return [{
            "N": N, "M": M, "ell": ell, "count": r.count, "entropy_density": r.entropy_density,
            "predicted_density": r.predicted_density, "members_validated": r.members_validated,
        }]

    def _exact_observable(self, lattice: TorusLattice, z: float, observable: Observable, n: int) -> Optional[float]:
        try:
            if observable is Observable.V_DENSITY:
                return transfer.mean_vertical_density(lattice, z, self.workers)
            if observable is Observable.SITE_U:
                event = events.LiteralEvent(lattice, frozenset({events.Literal(Site(0, 0), Spin.U)}))
                return events.event_probability(lattice, z, event, self.workers)
            return transfer.efp_exact(lattice, z, n, self.workers).probability
        except CapacityError as e:
            logger.warning(f"mcmc: no exact reference: {e}")
            return None

    def mcmc(
        self,
        N: int,
        M: int,
        z: float,
        sweeps: int,
        burn_in: int,
        seed: int,
        chains: int = 1,
        observable: str = "v_density",
        n: int = 1,
        sector: bool = False,
    ) -> List[Row]:
        lattice = TorusLattice(N, M)
        which = Observable(observable)
        starts = [InitialState.HORIZONTAL] + ([InitialState.VERTICAL] if M % 2 == 0 else [])
        with self.metrics.timed("mcmc"):
            results = mcmc.run_chains(
                lattice, z, starts, sweeps, burn_in, seed, chains, which, n=n, workers=self.workers
            )
        exact = self._exact_observable(lattice, z, which, n)
        sector_values: Dict[str, Optional[float]] = {}
        for start in starts:
            sector_values[start.value] = None
            if sector and which is Observable.V_DENSITY:
                try:
                    sector_values[start.value] = mcmc.flip_sector_mean(lattice, z, start).sector_mean
                except CapacityError as e:
                    logger.warning(f"mcmc: no sector reference: {e}")
        return [
            {
                "chain": r.chain, "seed": r.seed, "start": r.start, "sweeps": r.sweeps, "burn_in": r.burn_in,
                "z": r.z, "observable": r.observable, "mean": r.estimate.mean, "stderr": r.estimate.stderr,
                "tau_int": r.estimate.tau_int, "acceptance": r.estimate.acceptance,
                "exact": exact, "sector_exact": sector_values[r.start],
            }
            for r in results
        ]

    def suzuki(self, N: int, z: float, n_max: int, phase: int = 0) -> List[Row]:
        with self.metrics.timed("suzuki"):
            rows = suzuki.staggered_profile(N, z, n_max, phase)
        return [
            {
                "N": r.N, "z": r.z, "n": r.n, "expectation": r.expectation, "log_expectation": r.log_expectation,
                "phase": r.phase, "energy": r.energy, "degeneracy": r.degeneracy,
            }
            for r in rows
        ]

    def suzuki_compare(self, N: int, z: float, n_max: int, M: int) -> List[Row]:
        with self.metrics.timed("suzuki_compare"):
            rows = suzuki.comparison_report(N, z, n_max, M, self.workers)
        return [
            {
                "N": r.N, "z": r.z, "n": r.n, "expectation": r.expectation,
                "expectation_flipped": r.expectation_flipped, "expectation_2n": r.expectation_2n,
                "dimer_efp": r.dimer_efp, "M": r.M,
            }
            for r in rows
        ]

    def validate_text(self, text: str) -> Row:
        try:
            config = parse_config(text)
        except PreconditionError as e:
            self._fail("validate", e)
            raise
        valid = validate(config)
        return {
            "N": config.lattice.N,
            "M": config.lattice.M,
            "valid": valid,
            "vertical_count": vertical_count(config) if valid else None,
        }

    def get_metrics_summary(self) -> Dict[str, Any]:
        return self.metrics.get_summary()
