"""Generic stochastic approximation engine."""

from concurrent.futures import ProcessPoolExecutor, as_completed
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ..config import DIVERGENCE_NORM
from ..errors import DimensionMismatchError, DivergenceError, NonconstantStepError
from ..logger import setup_logger
from ..problems.base import FieldOracle
from .models import ConstantStep, Record, StepSchedule, TrajectoryLog
from .rng import make_rng
from .schedules import gammas

logger = setup_logger(__name__)


def check_finite(w: np.ndarray, k: int) -> None:
    """Raise DivergenceError when w has a non-finite entry or a huge norm."""
    norm = float(np.linalg.norm(w))
    if not np.all(np.isfinite(w)) or not norm <= DIVERGENCE_NORM:
        logger.warning(f"divergence k:{k};norm:{norm}")
        raise DivergenceError(k, norm)


def _validate_run(field: FieldOracle, schedule: StepSchedule, T: int, w0: np.ndarray) -> None:
    """Validate horizon, dimensions and the low-precision step pairing."""
    if T < 1:
        raise ValueError(f"Horizon T must be at least 1, got {T}")
    if w0.shape != (field.dim,):
        raise DimensionMismatchError(
            f"Initial point has shape {w0.shape}, field expects ({field.dim},)"
        )
    constant_step: Optional[float] = getattr(field, "constant_step", None)
    if constant_step is not None:
        if not isinstance(schedule, ConstantStep) or schedule.gamma != constant_step:
            raise NonconstantStepError(
                f"Low-precision field needs ConstantStep(gamma={constant_step}), got {schedule}"
            )


def run_sa(
    field: FieldOracle,
    schedule: StepSchedule,
    T: int,
    w0: np.ndarray,
    seed: int,
    replicate: int = 0,
    store_iterates: bool = False,
) -> TrajectoryLog:
    """
    Run w_{k+1} = w_k + gamma_{k+1} H(w_k, X_{k+1}) for T steps.

    Record k holds W, V and ||h||^2 at w_k, before the (k+1)-th update.

    Args:
        field: Random-field oracle
        schedule: Step-size schedule
        T: Number of updates
        w0: Initial iterate
        seed: Master seed
        replicate: Replicate index selecting the random stream
        store_iterates: Keep w_0..w_{T-1} for random stopping and averaging

    Returns:
        TrajectoryLog with exactly T records

    Raises:
        DivergenceError: On a non-finite or exploding iterate
        DimensionMismatchError: If w0 or a sample does not match the field
    """
    w = np.array(w0, dtype=float)
    _validate_run(field, schedule, T, w)
    steps = gammas(schedule, T)
    rng = make_rng(seed, replicate)
    check_finite(w, 0)

    logger.debug(f"run started replicate:{replicate};T:{T};d:{field.dim}")

    records: List[Record] = []
    iterates = np.empty((T, field.dim)) if store_iterates else None
    for k in range(T):
        gamma = float(steps[k])
        h = field.mean_field(w)
        records.append(
            Record(
                k=k,
                gamma=gamma,
                W=field.lyapunov_W(w),
                V=field.lyapunov_V(w),
                normh2=float(h @ h),
            )
        )
        if iterates is not None:
            iterates[k] = w
        H = field.sample(w, rng)
        if H.shape != w.shape:
            raise DimensionMismatchError(f"Sample has shape {H.shape}, expected {w.shape}")
        w = w + gamma * H
        check_finite(w, k + 1)

    logger.info(
        f"run finished replicate:{replicate};T:{T};final_W:{field.lyapunov_W(w)}"
    )
    return TrajectoryLog(replicate=replicate, records=records, final_w=w, iterates=iterates)


def map_replicates(
    task: Callable[[int], TrajectoryLog],
    replicates: Sequence[int],
    workers: int = 1,
) -> List[TrajectoryLog]:
    """
    Evaluate task(replicate) for every replicate, merged in the given order.

    With workers > 1 the task runs in a process pool and must be picklable
    (a module-level function or a functools.partial of one).
    """
    if workers <= 1:
        return [task(r) for r in replicates]

    results: Dict[int, TrajectoryLog] = {}
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(task, r): r for r in replicates}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return [results[r] for r in replicates]


def _run_one(
    replicate: int,
    field: FieldOracle,
    schedule: StepSchedule,
    T: int,
    w0: np.ndarray,
    master_seed: int,
    store_iterates: bool,
) -> TrajectoryLog:
    return run_sa(field, schedule, T, w0, master_seed, replicate, store_iterates)


def run_replicates(
    field: FieldOracle,
    schedule: StepSchedule,
    T: int,
    w0: np.ndarray,
    master_seed: int,
    replicates: Union[int, Sequence[int]],
    workers: int = 1,
    store_iterates: bool = False,
) -> List[TrajectoryLog]:
    """
    Run independent replicates of the same SA configuration.

    replicates is a count (indices 0..replicates-1) or an explicit index list.
    Results are identical for any worker count.
    """
    indices = list(range(replicates)) if isinstance(replicates, int) else list(replicates)
    logger.info(
        f"replicates started count:{len(indices)};T:{T};workers:{workers};seed:{master_seed}"
    )
    task = partial(
        _run_one,
        field=field,
        schedule=schedule,
        T=T,
        w0=np.asarray(w0, dtype=float),
        master_seed=master_seed,
        store_iterates=store_iterates,
    )
    return map_replicates(task, indices, workers)
