"""Experiment file format: [section] headers, key = value lines, # comments, comma lists."""

from dataclasses import dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..compression.operators import parse_operator
from ..config import (
    DEFAULT_MASTER_SEED,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_WORKERS,
    SUPPORTED_BOUNDS,
    SUPPORTED_EM_ALGOS,
    SUPPORTED_EM_PROPOSALS,
    SUPPORTED_PLACEMENTS,
    SUPPORTED_PROBLEMS,
    SUPPORTED_SCHEDULES,
    SUPPORTED_SGD_REGIMES,
    SUPPORTED_STOPPING,
)
from ..errors import ParseError
from ..logger import setup_logger

logger = setup_logger(__name__)

SECTIONS: Tuple[str, ...] = ("problem", "algorithm", "output")

# Problem keys accepted for each kind besides "kind" and "seed"
PROBLEM_KEYS: Dict[str, Tuple[str, ...]] = {
    "sgd": ("n", "d", "mu", "L", "shared_Q", "regime", "batch", "replacement"),
    "spider": ("n", "d", "mu", "L", "shared_Q"),
    "em": ("n", "means", "mixture_weights", "algo", "size", "proposal"),
    "td": ("states", "d", "lam", "reward_scale", "variant"),
    "linear": ("d", "sigma"),
}


@dataclass
class ProblemConfig:
    """
    Problem instance.

    Attributes:
        kind: Problem family (sgd, spider, em, td, linear)
        seed: Instance generator seed
        n: Components (sgd, spider) or observations (em)
        d: Dimension (sgd, spider, linear) or number of features (td)
        mu: Smallest Hessian eigenvalue of the quadratic
        L: Largest Hessian eigenvalue of the quadratic
        shared_Q: Identical component Hessians
        regime: Lyapunov pair of the SGD oracle
        batch: Mini-batch size of the SGD oracle
        replacement: Mini-batches drawn with replacement
        means: Mixture means generating the EM data
        mixture_weights: Mixture weights (uniform when empty)
        algo: Stochastic EM oracle
        size: Mini-batch or Monte Carlo size of the EM oracle
        proposal: Importance proposal of saem_is
        states: Number of MRP states
        lam: Discount factor
        reward_scale: Rewards drawn in [-reward_scale, reward_scale]
        variant: TD Lyapunov pair (standard or vw)
        sigma: Noise level of the linear test field
    """

    kind: str = "sgd"
    seed: int = 0
    n: int = 50
    d: int = 10
    mu: float = 1.0
    L: float = 10.0
    shared_Q: bool = True
    regime: str = "nonconvex"
    batch: int = 1
    replacement: bool = True
    means: List[float] = field(default_factory=lambda: [-2.0, 2.0])
    mixture_weights: List[float] = field(default_factory=list)
    algo: str = "minibatch"
    size: int = 1
    proposal: str = "prior"
    states: int = 10
    lam: float = 0.5
    reward_scale: float = 1.0
    variant: str = "standard"
    sigma: float = 1.0


@dataclass
class AlgorithmConfig:
    """
    Iteration, step-size and replication settings.

    Attributes:
        T: Number of iterations
        schedule: constant, horizon, polynomial or fast
        gamma: Constant step (gamma_max/2 when unset)
        gamma_tilde: Numerator of a diminishing schedule
        T0: Offset of a diminishing schedule
        beta: Exponent of the polynomial schedule
        stopping: Output rule recorded in the summary
        seeds: Replicate indices
        master_seed: Experiment seed
        workers: Worker processes
        store_iterates: Keep iterates (implied by averaged statistics)
        horizons: Horizons of the rate sweep (empty for none)
        compression: Operator string, e.g. "top:1"
        placement: Where the operator acts (field, perturbed, lowprec)
        gamma_bar: Step of the low-precision scheme
        k_in: Inner loop length of SA-SPIDER
        k_out: Number of SA-SPIDER epochs
        b: Correction mini-batch size of SA-SPIDER
    """

    T: int = 1000
    schedule: str = "constant"
    gamma: Optional[float] = None
    gamma_tilde: Optional[float] = None
    T0: Optional[int] = None
    beta: float = 1.0
    stopping: str = "last"
    seeds: List[int] = field(default_factory=lambda: list(range(8)))
    master_seed: int = DEFAULT_MASTER_SEED
    workers: int = DEFAULT_WORKERS
    store_iterates: bool = False
    horizons: List[int] = field(default_factory=list)
    compression: Optional[str] = None
    placement: str = "field"
    gamma_bar: Optional[float] = None
    k_in: Optional[int] = None
    k_out: Optional[int] = None
    b: Optional[int] = None


@dataclass
class OutputConfig:
    """
    Reporting settings.

    Attributes:
        directory: Default output directory
        bound: Bound curve compared with the aggregate
        burn_in: First horizon where the bound is checked
        trajectories: Write the per-replicate trajectory CSV
    """

    directory: str = DEFAULT_OUTPUT_DIR
    bound: str = "none"
    burn_in: int = 0
    trajectories: bool = True


@dataclass
class ExperimentConfig:
    """Parsed experiment file."""

    problem: ProblemConfig = field(default_factory=ProblemConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


# Value converters: each raises ValueError with a message naming the problem


def _int(text: str) -> int:
    return int(text)


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(f"must be non-negative, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(f"must be at least 1, got {value}")
    return value


def _float(text: str) -> float:
    return float(text)


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise ValueError(f"must be positive, got {text}")
    return value


def _non_negative_float(text: str) -> float:
    value = float(text)
    if not value >= 0.0:
        raise ValueError(f"must be non-negative, got {text}")
    return value


def _unit_interval_float(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise ValueError(f"must lie in (0, 1], got {text}")
    return value


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true or false, got '{text}'")


def _choice(options: List[str]) -> Callable[[str], str]:
    def convert(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got '{text}'")
        return text

    return convert


def _split(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _float_list(text: str) -> List[float]:
    return [float(part) for part in _split(text)]


def _non_empty_float_list(text: str) -> List[float]:
    values = _float_list(text)
    if not values:
        raise ValueError("list is empty")
    return values


def _horizon_list(text: str) -> List[int]:
    values = [_positive_int(part) for part in _split(text)]
    if values != sorted(set(values)):
        raise ValueError("horizons must be strictly increasing")
    return values


def _seed_list(text: str) -> List[int]:
    """
    Replicate indices.

    A single integer N means 0..N-1, "a..b" is an inclusive range and a comma
    list of two or more values names the indices explicitly.
    """
    parts = _split(text)
    if not parts:
        raise ValueError("empty seeds list")
    if len(parts) == 1 and ".." in parts[0]:
        low, high = (int(x) for x in parts[0].split("..", 1))
        if low < 0 or high < low:
            raise ValueError(f"invalid range '{parts[0]}'")
        return list(range(low, high + 1))
    if len(parts) == 1:
        return list(range(_positive_int(parts[0])))
    seeds = [_non_negative_int(part) for part in parts]
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate seeds")
    return seeds


def _operator(text: str) -> str:
    parse_operator(text)
    return text


_PROBLEM_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "kind": _choice(SUPPORTED_PROBLEMS),
    "seed": _non_negative_int,
    "n": _positive_int,
    "d": _positive_int,
    "mu": _non_negative_float,
    "L": _positive_float,
    "shared_Q": _bool,
    "regime": _choice(SUPPORTED_SGD_REGIMES),
    "batch": _positive_int,
    "replacement": _bool,
    "means": _non_empty_float_list,
    "mixture_weights": _float_list,
    "algo": _choice(SUPPORTED_EM_ALGOS),
    "size": _positive_int,
    "proposal": _choice(SUPPORTED_EM_PROPOSALS),
    "states": _positive_int,
    "lam": _non_negative_float,
    "reward_scale": _positive_float,
    "variant": _choice(["standard", "vw"]),
    "sigma": _non_negative_float,
}

_ALGORITHM_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "T": _positive_int,
    "schedule": _choice(SUPPORTED_SCHEDULES),
    "gamma": _positive_float,
    "gamma_tilde": _positive_float,
    "T0": _non_negative_int,
    "beta": _unit_interval_float,
    "stopping": _choice(SUPPORTED_STOPPING),
    "seeds": _seed_list,
    "master_seed": _non_negative_int,
    "workers": _positive_int,
    "store_iterates": _bool,
    "horizons": _horizon_list,
    "compression": _operator,
    "placement": _choice(SUPPORTED_PLACEMENTS),
    "gamma_bar": _positive_float,
    "k_in": _positive_int,
    "k_out": _positive_int,
    "b": _positive_int,
}

_OUTPUT_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "directory": str,
    "bound": _choice(SUPPORTED_BOUNDS),
    "burn_in": _non_negative_int,
    "trajectories": _bool,
}

_CONVERTERS: Dict[str, Dict[str, Callable[[str], Any]]] = {
    "problem": _PROBLEM_CONVERTERS,
    "algorithm": _ALGORITHM_CONVERTERS,
    "output": _OUTPUT_CONVERTERS,
}

Entries = Dict[str, Dict[str, Tuple[str, int]]]


def _scan(text: str) -> Entries:
    """Split the text into {section: {key: (raw value, line)}}."""
    entries: Entries = {}
    section: Optional[str] = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ParseError(line_no, f"Unknown section [{section}]. Supported sections: {', '.join(SECTIONS)}")
            if section in entries:
                raise ParseError(line_no, f"Duplicate section [{section}]")
            entries[section] = {}
            continue
        if "=" not in line:
            raise ParseError(line_no, f"Expected 'key = value', got '{line}'")
        if section is None:
            raise ParseError(line_no, "Key outside of a section")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError(line_no, "Missing key before '='")
        if key in entries[section]:
            raise ParseError(line_no, f"Duplicate key '{key}'")
        entries[section][key] = (value, line_no)
    return entries


def _convert(section: str, entries: Dict[str, Tuple[str, int]], allowed: Tuple[str, ...]) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    converters = _CONVERTERS[section]
    for key, (raw, line_no) in entries.items():
        if key not in allowed:
            raise ParseError(line_no, f"Unknown key '{key}' in [{section}]")
        try:
            values[key] = converters[key](raw)
        except ValueError as exc:
            raise ParseError(line_no, f"Invalid value for '{key}': {exc}") from exc
    return values


def _line_of(entries: Dict[str, Tuple[str, int]], *keys: str) -> int:
    for key in keys:
        if key in entries:
            return entries[key][1]
    return 0


def _build_problem(entries: Dict[str, Tuple[str, int]]) -> ProblemConfig:
    kind = ProblemConfig.kind
    if "kind" in entries:
        kind = _convert("problem", {"kind": entries["kind"]}, ("kind",))["kind"]
    allowed = ("kind", "seed") + PROBLEM_KEYS[kind]
    problem = ProblemConfig(**_convert("problem", entries, allowed))

    if kind == "sgd" and problem.batch > problem.n:
        raise ParseError(_line_of(entries, "batch"), f"Batch size {problem.batch} exceeds n={problem.n}")
    if kind in ("sgd", "spider") and problem.mu > problem.L:
        raise ParseError(_line_of(entries, "mu", "L"), f"mu={problem.mu} exceeds L={problem.L}")
    if kind == "td":
        if not problem.lam < 1.0:
            raise ParseError(
                _line_of(entries, "lam"), f"Invalid value for 'lam': must lie in [0, 1), got {problem.lam}"
            )
        if problem.reward_scale > 1.0:
            raise ParseError(_line_of(entries, "reward_scale"), "Invalid value for 'reward_scale': must be at most 1")
        if problem.d > problem.states:
            raise ParseError(_line_of(entries, "d"), f"d={problem.d} exceeds states={problem.states}")
    if kind == "em" and problem.mixture_weights:
        weights = problem.mixture_weights
        if len(weights) != len(problem.means) or min(weights) <= 0.0 or abs(sum(weights) - 1.0) > 1e-9:
            raise ParseError(
                _line_of(entries, "mixture_weights"),
                "Invalid value for 'mixture_weights': need one positive weight per mean summing to 1",
            )
    return problem


def _build_algorithm(entries: Dict[str, Tuple[str, int]], problem: ProblemConfig) -> AlgorithmConfig:
    algorithm = AlgorithmConfig(**_convert("algorithm", entries, tuple(_ALGORITHM_CONVERTERS)))

    if algorithm.schedule == "polynomial" and algorithm.gamma_tilde is None:
        raise ParseError(_line_of(entries, "schedule"), "Polynomial schedule needs 'gamma_tilde'")
    if algorithm.placement != "field" and algorithm.compression is None:
        raise ParseError(_line_of(entries, "placement"), f"Placement '{algorithm.placement}' needs 'compression'")
    if algorithm.placement == "lowprec":
        if algorithm.gamma_bar is None:
            raise ParseError(_line_of(entries, "placement"), "Low-precision placement needs 'gamma_bar'")
        if algorithm.schedule != "constant":
            raise ParseError(_line_of(entries, "schedule"), "Low-precision placement needs the constant schedule")
    if problem.kind == "spider":
        if algorithm.compression is not None:
            raise ParseError(_line_of(entries, "compression"), "SA-SPIDER runs do not support compression")
        if algorithm.b is not None and algorithm.b > problem.n:
            raise ParseError(_line_of(entries, "b"), f"Batch size {algorithm.b} exceeds n={problem.n}")
    elif any(key in entries for key in ("k_in", "k_out", "b")):
        raise ParseError(_line_of(entries, "k_in", "k_out", "b"), "Loop sizes k_in, k_out and b are SA-SPIDER keys")
    return algorithm


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse and validate an experiment file.

    Args:
        text: File contents

    Returns:
        ExperimentConfig with defaults filled in

    Raises:
        ParseError: On the first malformed line, unknown key or invalid value
    """
    entries = _scan(text)
    problem = _build_problem(entries.get("problem", {}))
    algorithm = _build_algorithm(entries.get("algorithm", {}), problem)
    output = OutputConfig(**_convert("output", entries.get("output", {}), tuple(_OUTPUT_CONVERTERS)))
    logger.debug(f"config parsed problem:{problem.kind};T:{algorithm.T};seeds:{len(algorithm.seeds)}")
    return ExperimentConfig(problem=problem, algorithm=algorithm, output=output)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _format_seeds(seeds: List[int]) -> str:
    if seeds == list(range(len(seeds))):
        return str(len(seeds))
    if seeds == list(range(seeds[0], seeds[0] + len(seeds))):
        return f"{seeds[0]}..{seeds[-1]}"
    return ", ".join(str(s) for s in seeds)


def serialize(config: ExperimentConfig) -> str:
    """Render a config in the file format; parse_config(serialize(c)) == c."""
    lines: List[str] = ["[problem]"]
    allowed = ("kind", "seed") + PROBLEM_KEYS[config.problem.kind]
    for f in fields(ProblemConfig):
        value = getattr(config.problem, f.name)
        if f.name in allowed and not (f.name == "mixture_weights" and not value):
            lines.append(f"{f.name} = {_format_value(value)}")

    lines += ["", "[algorithm]"]
    for f in fields(AlgorithmConfig):
        value = getattr(config.algorithm, f.name)
        if value is None or (f.name == "horizons" and not value):
            continue
        text = _format_seeds(value) if f.name == "seeds" else _format_value(value)
        lines.append(f"{f.name} = {text}")

    lines += ["", "[output]"]
    for f in fields(OutputConfig):
        lines.append(f"{f.name} = {_format_value(getattr(config.output, f.name))}")
    return "\n".join(lines) + "\n"
