"""Shipped experiment presets."""

from typing import Dict, Tuple

# name -> (one-line description, experiment file text)
PRESETS: Dict[str, Tuple[str, str]] = {
    "sgd_horizon": (
        "Nonconvex SGD on a quadratic finite sum with the horizon-tuned step",
        """\
# Mean squared gradient of SGD decays as 1/sqrt(T)
[problem]
kind = sgd
seed = 0
n = 50
d = 10
mu = 1.0
L = 10.0
regime = nonconvex

[algorithm]
T = 1000
schedule = horizon
stopping = random
seeds = 16
horizons = 100, 300, 1000, 3000, 10000

[output]
bound = constant_step
""",
    ),
    "sgd_fast": (
        "Strongly convex SGD with the diminishing fast-rate schedule (last iterate)",
        """\
[problem]
kind = sgd
seed = 0
n = 50
d = 10
mu = 1.0
L = 10.0
regime = strongly_convex_VW

[algorithm]
T = 2000
schedule = fast
seeds = 16

[output]
bound = fast_rate
""",
    ),
    "td_robust": (
        "TD(0) with the robust constant step, error of the averaged iterate",
        """\
# Averaged TD(0) on a 10-state chain, squared value error decays as 1/sqrt(T)
[problem]
kind = td
seed = 0
states = 10
d = 3
lam = 0.5

[algorithm]
T = 1000
schedule = horizon
stopping = average
store_iterates = true
seeds = 32
horizons = 100, 300, 1000, 3000, 10000, 30000

[output]
bound = td_robust
""",
    ),
    "td_fast": (
        "TD(0) with the diminishing step, last-iterate distance to the fixed point",
        """\
[problem]
kind = td
seed = 0
states = 10
d = 3
lam = 0.5
reward_scale = 0.1
variant = vw

[algorithm]
T = 2000
schedule = fast
seeds = 16

[output]
bound = td_fast
""",
    ),
    "em_minibatch": (
        "Mini-batch stochastic EM on a two-component Gaussian mixture",
        """\
[problem]
kind = em
seed = 0
n = 200
means = -2.0, 2.0
algo = minibatch
size = 10

[algorithm]
T = 500
schedule = constant
stopping = random
seeds = 16

[output]
bound = em_minibatch
""",
    ),
    "spider_quadratic": (
        "SA-SPIDER on a 64-component quadratic, averaged W against the aggregate bound",
        """\
[problem]
kind = spider
seed = 0
n = 64
d = 10
mu = 1.0
L = 10.0

[algorithm]
T = 1280
schedule = constant
seeds = 8
horizons = 128, 400, 1280, 4000, 12800

[output]
bound = spider
""",
    ),
    "compressed_top1": (
        "Deterministic Gauss-Southwell descent (full gradient, top:1) with step 1/(8dL)",
        """\
[problem]
kind = sgd
seed = 0
n = 50
d = 20
mu = 1.0
L = 10.0
batch = 50
replacement = false
regime = nonconvex

[algorithm]
T = 2000
schedule = constant
gamma = 0.000625
compression = top:1
seeds = 1

[output]
bound = gauss_southwell
""",
    ),
}


def get_preset(name: str) -> str:
    """
    Get the experiment file text of a preset.

    Raises:
        ValueError: If the preset does not exist
    """
    if name not in PRESETS:
        supported = ", ".join(PRESETS.keys())
        raise ValueError(f"Unsupported preset: {name}. Supported presets: {supported}")
    return PRESETS[name][1]
