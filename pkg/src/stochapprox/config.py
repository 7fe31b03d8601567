"""Configuration constants for the stochastic approximation toolkit."""

from typing import Dict, List

# Iterates with a larger norm (or any non-finite entry) abort the run
DIVERGENCE_NORM: float = 1e12

# Statistical checks accept measured <= bound + SE_MULTIPLIER * stderr
SE_MULTIPLIER: float = 3.0

# Relative tolerance for deterministic identities
IDENTITY_RTOL: float = 1e-10

# Stopping weights must sum to one within this tolerance
PMF_ATOL: float = 1e-12

# Fraction of the Monte Carlo budget spent on the stationarity target in the SAEM-IS cost tables
SAEM_IS_KAPPA: float = 0.5

# Rate fits below this r^2 are refit on the final decade only
RATE_FIT_MIN_R2: float = 0.98
RATE_FIT_MIN_POINTS: int = 4
RATE_FIT_MIN_DECADES: float = 2.0

# Irreducibility mixing weight for random transition matrices
MRP_UNIFORM_MIX: float = 0.01

TRAJECTORY_HEADER: List[str] = ["replicate", "k", "gamma", "W", "V", "normh2"]
AGGREGATE_HEADER: List[str] = ["k", "mean_W", "se_W", "bound"]

SUPPORTED_PROBLEMS: List[str] = ["sgd", "em", "td", "spider", "linear"]

SUPPORTED_SCHEDULES: List[str] = ["constant", "horizon", "polynomial", "fast"]

SUPPORTED_STOPPING: List[str] = ["last", "random", "average"]

SUPPORTED_SGD_REGIMES: List[str] = [
    "nonconvex",
    "convex",
    "strongly_convex",
    "strongly_convex_VW",
]

SUPPORTED_EM_ALGOS: List[str] = ["full", "minibatch", "saem_es", "saem_is"]

SUPPORTED_EM_PROPOSALS: List[str] = ["prior", "posterior"]

SUPPORTED_PLACEMENTS: List[str] = ["field", "perturbed", "lowprec"]

SUPPORTED_BOUNDS: List[str] = [
    "random_stop",
    "constant_step",
    "horizon_tuned",
    "fast_recursion",
    "fast_rate",
    "td_robust",
    "td_fast",
    "spider",
    "spider_rate",
    "em_minibatch",
    "gauss_southwell",
    "low_precision",
    "sc_sgd",
    "none",
]

# CLI exit codes
EXIT_CODES: Dict[str, int] = {
    "ok": 0,
    "config": 1,
    "divergence": 2,
    "check": 3,
}

DEFAULT_WORKERS: int = 1
DEFAULT_MASTER_SEED: int = 0
DEFAULT_OUTPUT_DIR: str = "results"
