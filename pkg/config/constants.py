from enum import Enum, IntEnum, auto
from typing import Dict, List


class Spin(IntEnum):
    """Site labels; each names the direction of the site's dimer partner."""
    U = 0
    D = 1
    L = 2
    R = 3

    @property
    def char(self) -> str:
        return self.name

    @classmethod
    def from_char(cls, char: str) -> "Spin":
        try:
            return cls[char.upper()]
        except KeyError:
            raise ValueError(f"Unknown spin label {char!r}; expected one of U, D, L, R") from None


class Axis(Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


class ComputationMethod(Enum):
    ENUMERATE = "enumerate"
    TRANSFER = "transfer"
    KASTELEYN = "kasteleyn"
    ALL = "all"


class Observable(Enum):
    V_DENSITY = "v_density"
    SITE_U = "site_u"
    ROW_PATTERN = "row_pattern"


class InitialState(Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


class ErrorType(Enum):
    PRECONDITION_ERROR = auto()
    CAPACITY_ERROR = auto()
    DOMAIN_ERROR = auto()
    CONVERGENCE_ERROR = auto()
    IO_ERROR = auto()
    SYSTEM_ERROR = auto()


# Label swaps under reflections
HORIZONTAL_MIRROR = {Spin.U: Spin.U, Spin.D: Spin.D, Spin.L: Spin.R, Spin.R: Spin.L}
VERTICAL_MIRROR = {Spin.U: Spin.D, Spin.D: Spin.U, Spin.L: Spin.L, Spin.R: Spin.R}

# Numerical tolerances
TOLERANCES = {
    "CHESSBOARD_SLACK": 1e-12,
    "HERMITICITY": 1e-12,
    "GROUND_RESIDUAL": 1e-8,
    "DEGENERACY_RELATIVE": 1e-8,
    "KASTELEYN_CANCELLATION": 1e-6,
    "FINITE_DIFFERENCE_STEP": 1e-5,
    "PFAFFIAN_PIVOT": 1e-300,
}

EXIT_CODES = {
    "OK": 0,
    "GENERIC_ERROR": 1,
    "PRECONDITION": 2,
    "CAPACITY": 3,
    "CONVERGENCE": 4,
}

MCMC_CONSTANTS = {
    "MIN_BATCHES": 20,
    "DEFAULT_BATCHES": 20,
    "DEFAULT_SEED": 20240607,
}

# Frozen CSV columns per subcommand
CSV_HEADERS: Dict[str, List[str]] = {
    "zfn": ["N", "M", "z", "method", "log_z", "z_value"],
    "efp": ["N", "M", "n", "z", "log_prob", "prob", "normalized_exponent"],
    "fit-decay": ["N", "M", "z", "n", "normalized_exponent", "min_exponent", "max_exponent", "ratio"],
    "lemma-check": ["N", "M", "n", "include_boundary", "configs_checked", "members", "counterexamples", "holds"],
    "chessboard-check": ["N", "M", "n", "z", "k", "lhs", "rhs", "holds"],
    "bowtie-check": ["N", "M", "n", "z", "k", "m", "lhs", "rhs", "holds"],
    "refstate": ["N", "M", "ell", "count", "entropy_density", "predicted_density", "members_validated"],
    "mcmc": ["chain", "seed", "start", "sweeps", "burn_in", "z", "observable", "mean", "stderr",
             "tau_int", "acceptance", "exact", "sector_exact"],
    "suzuki": ["N", "z", "n", "expectation", "log_expectation", "phase", "energy", "degeneracy"],
    "suzuki-compare": ["N", "z", "n", "expectation", "expectation_flipped", "expectation_2n", "dimer_efp", "M"],
}

FILE_CONSTANTS = {
    "MANIFEST_SUFFIX": ".manifest.json",
    "JSON_SUFFIX": ".json",
}

FLOAT_FORMAT = ".17g"

TOOL_NAME = "dimer-efp"
TOOL_VERSION = "0.3.0"


def get_csv_header(subcommand: str) -> List[str]:
    return CSV_HEADERS.get(subcommand, [])
