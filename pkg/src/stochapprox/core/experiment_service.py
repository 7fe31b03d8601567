"""Experiment service - entry point for all interfaces."""

import csv
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..compression.operators import operator_profile, parse_operator
from ..compression.propagation import PropagationExtras
from ..compression.wrappers import wrap_compressed_field, wrap_low_precision, wrap_perturbed_iterate
from ..config import AGGREGATE_HEADER, TRAJECTORY_HEADER
from ..diagnostics.bounds import BOUND_STATISTICS, aggregate, bound_curve, check_curve, statistic_weights
from ..diagnostics.rates import RateFit, fit_rate
from ..errors import BiasTooLargeError, InfiniteCvWithBiasError, InvalidScheduleError, StochApproxError
from ..logger import setup_logger
from ..ports.config_parser import ExperimentConfig
from ..problems.em import EmField, em_fixed_point, estimate_em_constants, make_gmm, sbar
from ..problems.linear import GaussianLinearField
from ..problems.sgd import MinibatchSpec, SgdField, make_quadratic_problem, objective
from ..problems.td import (
    TdField,
    dpi_norm2,
    random_features,
    random_mrp,
    td_fast_schedule,
    td_robust_step,
    v_min,
    value_function,
)
from .constants import derive_constants
from .engine import map_replicates, run_replicates
from .models import (
    ConstantStep,
    DerivedConstants,
    HorizonTunedStep,
    PolynomialStep,
    RegimeConstants,
    StepSchedule,
    StoppingRule,
    TrajectoryLog,
    is_unbounded,
)
from .rng import make_rng
from .schedules import fast_rate_schedule, gammas
from .spider import (
    SpiderConfig,
    quadratic_components,
    run_spider,
    spider_constant_config,
    spider_deltas,
    spider_gamma_max,
)
from .stopping import select_output, stopping_omegas

logger = setup_logger(__name__)

# Parameter box probed when EM constants are estimated
EM_PROBE_POINTS: int = 32


@dataclass
class ExperimentSetup:
    """
    Instantiated problem ready to run.

    Attributes:
        field: Random-field oracle (a component field for SA-SPIDER)
        rc: Constant bundle of the oracle
        dc: Derived constants, None when the bundle admits none
        w0: Initial iterate
        inputs: Instance quantities the bound curves draw on
    """

    field: Any
    rc: RegimeConstants
    dc: Optional[DerivedConstants]
    w0: np.ndarray
    inputs: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentSummary:
    """
    Outcome of one experiment.

    Attributes:
        problem: Problem family
        T: Iterations per replicate
        replicates: Number of replicates
        bound: Bound key
        statistic: Statistic compared with the bound
        final_mean: Mean of the statistic at the last horizon
        final_se: Standard error at the last horizon
        final_bound: Bound at the last horizon
        check_passed: Pointwise bound check outcome
        violations: Number of violating horizons
        stopping: Output rule
        output_W: Mean W of the output iterates
        oracle_calls: Component evaluations per replicate (SA-SPIDER)
        rate: Fit over the horizon sweep, if any
    """

    problem: str
    T: int
    replicates: int
    bound: str
    statistic: str
    final_mean: float
    final_se: float
    final_bound: float
    check_passed: bool
    violations: int
    stopping: str
    output_W: float
    oracle_calls: Optional[int] = None
    rate: Optional[RateFit] = None

    @property
    def passed(self) -> bool:
        return self.check_passed

    def lines(self) -> List[str]:
        """Return the summary as 'key: value' lines."""
        items: Dict[str, Any] = {
            "problem": self.problem,
            "T": self.T,
            "replicates": self.replicates,
            "bound": self.bound,
            "statistic": self.statistic,
            "final_mean_W": repr(self.final_mean),
            "final_se_W": repr(self.final_se),
            "final_bound": repr(self.final_bound),
            "check_passed": str(self.check_passed).lower(),
            "violations": self.violations,
            "stopping": self.stopping,
            "output_W": repr(self.output_W),
        }
        if self.oracle_calls is not None:
            items["oracle_calls"] = self.oracle_calls
        if self.rate is not None:
            items["slope"] = repr(self.rate.slope)
            items["slope_r2"] = repr(self.rate.r2)
        return [f"{key}: {value}" for key, value in items.items()]


def _spider_task(
    replicate: int,
    cf: Any,
    config: SpiderConfig,
    w_init: np.ndarray,
    master_seed: int,
    store_iterates: bool,
) -> TrajectoryLog:
    return run_spider(cf, config, w_init, master_seed, replicate, store_iterates)


def _format(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


class ExperimentService:
    """
    Main service for configured experiments.

    Used by the CLI and the tests alike. Builds the problem, runs the
    replicates, aggregates them against a bound curve and writes the reports.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        """
        Initialize the experiment service.

        Args:
            config: Parsed experiment configuration
        """
        self.config = config
        self._setup: Optional[ExperimentSetup] = None
        logger.info(
            f"service initialized problem:{config.problem.kind};T:{config.algorithm.T};"
            f"seeds:{len(config.algorithm.seeds)};bound:{config.output.bound}"
        )

    # Problem construction

    def setup(self) -> ExperimentSetup:
        """Build the problem instance (lazy, cached)."""
        if self._setup is None:
            builders = {
                "sgd": self._build_sgd,
                "spider": self._build_spider,
                "em": self._build_em,
                "td": self._build_td,
                "linear": self._build_linear,
            }
            self._setup = builders[self.config.problem.kind]()
        return self._setup

    def _derive(self, rc: RegimeConstants, V_bar: float) -> Optional[DerivedConstants]:
        try:
            return derive_constants(rc, V_bar)
        except (BiasTooLargeError, InfiniteCvWithBiasError) as exc:
            logger.warning(f"derived constants unavailable reason:{exc}")
            return None

    def _build_sgd(self) -> ExperimentSetup:
        pc, ac = self.config.problem, self.config.algorithm
        problem = make_quadratic_problem(pc.n, pc.d, pc.seed, pc.shared_Q, pc.mu, pc.L)
        inner = SgdField(problem, MinibatchSpec(pc.batch, pc.replacement), pc.regime)
        rc_inner = inner.regime_constants()
        w0 = np.zeros(pc.d)
        inputs: Dict[str, Any] = {
            "d": pc.d,
            "L": problem.L,
            "mu": problem.mu,
            "F0": objective(problem, w0),
            "M2_over_n": rc_inner.sigma2_0,
        }
        if problem.w_star is not None:
            e = w0 - problem.w_star
            inputs.update(F_star=problem.F_star, F_gap=objective(problem, w0) - problem.F_star, e0=float(e @ e))

        oracle: Any = inner
        if ac.compression is not None:
            op = parse_operator(ac.compression, pc.d)
            extras = PropagationExtras(L_h=problem.L, L_EH=problem.L)
            if ac.placement == "field":
                oracle = wrap_compressed_field(inner, op, extras)
            elif ac.placement == "perturbed":
                oracle = wrap_perturbed_iterate(inner, op, extras)
            else:
                oracle = wrap_low_precision(inner, op, ac.gamma_bar, extras)  # type: ignore[arg-type]
            Delta = operator_profile(op, pc.d).linear_Delta
            if Delta is not None:
                inputs["Delta"] = Delta
        rc = oracle.regime_constants()

        V_bar = max(oracle.lyapunov_V(w0) - rc.V_star, 0.0) if math.isfinite(rc.V_star) else 0.0
        inputs["W0"] = oracle.lyapunov_W(w0)
        return ExperimentSetup(field=oracle, rc=rc, dc=self._derive(rc, V_bar), w0=w0, inputs=inputs)

    def _build_spider(self) -> ExperimentSetup:
        pc = self.config.problem
        problem = make_quadratic_problem(pc.n, pc.d, pc.seed, pc.shared_Q, pc.mu, pc.L)
        cf = quadratic_components(problem)
        rc = cf.regime_constants()
        w0 = np.zeros(pc.d)
        Delta1 = cf.lyapunov_V(w0) - rc.V_star
        return ExperimentSetup(
            field=cf,
            rc=rc,
            dc=self._derive(rc, Delta1),
            w0=w0,
            inputs={"Delta1": Delta1, "L_bar2": cf.L_bar2, "W0": cf.lyapunov_W(w0)},
        )

    def _build_em(self) -> ExperimentSetup:
        pc = self.config.problem
        weights = np.asarray(pc.mixture_weights) if pc.mixture_weights else None
        model = make_gmm(pc.n, np.asarray(pc.means), weights, pc.seed)
        K = len(pc.means)
        theta0 = np.quantile(model.y, (np.arange(K) + 0.5) / K)
        theta_star = em_fixed_point(model, theta0)
        radius = max(1.0, float(np.max(np.abs(theta_star - theta0))))
        constants = estimate_em_constants(
            model,
            theta_center=(theta0 + theta_star) / 2.0,
            radius=radius,
            n_points=EM_PROBE_POINTS,
            rng=np.random.default_rng(pc.seed),
            kind=pc.proposal,
            theta0=theta0,
        )
        oracle = EmField(model, pc.algo, pc.size, pc.proposal, constants)
        rc = oracle.regime_constants()
        w0 = sbar(model, theta0)
        return ExperimentSetup(
            field=oracle,
            rc=rc,
            dc=self._derive(rc, constants.V_bar),
            w0=w0,
            inputs={"constants": constants, "b": pc.size, "W0": oracle.lyapunov_W(w0)},
        )

    def _build_td(self) -> ExperimentSetup:
        pc = self.config.problem
        mrp = random_mrp(pc.states, pc.lam, pc.seed, pc.reward_scale)
        features = random_features(pc.states, pc.d, pc.seed + 1)
        oracle = TdField(mrp, features, pc.variant)
        rc = oracle.regime_constants()
        w0 = np.zeros(pc.d)
        e = w0 - oracle.w_star
        V_bar = oracle.lyapunov_V(w0)
        return ExperimentSetup(
            field=oracle,
            rc=rc,
            dc=self._derive(rc, V_bar),
            w0=w0,
            inputs={
                "vmin": v_min(mrp, features),
                "lam": mrp.lam,
                "V_star_norm2": dpi_norm2(mrp, value_function(mrp)),
                "e0": float(e @ e),
                "V_bar": V_bar,
                "W0": oracle.lyapunov_W(w0),
            },
        )

    def _build_linear(self) -> ExperimentSetup:
        pc = self.config.problem
        oracle = GaussianLinearField.contraction(pc.d, pc.sigma)
        rc = oracle.regime_constants()
        w0 = np.ones(pc.d)
        return ExperimentSetup(
            field=oracle,
            rc=rc,
            dc=self._derive(rc, oracle.lyapunov_V(w0)),
            w0=w0,
            inputs={"W0": oracle.lyapunov_W(w0)},
        )

    # Schedules

    def _require_dc(self, purpose: str) -> DerivedConstants:
        dc = self.setup().dc
        if dc is None:
            raise StochApproxError(f"{purpose} needs derived constants, which this oracle does not admit")
        return dc

    def schedule(self, T: int) -> StepSchedule:
        """Step schedule for a run of T iterations."""
        ac, pc = self.config.algorithm, self.config.problem
        s = self.setup()
        if ac.placement == "lowprec":
            return ConstantStep(ac.gamma_bar)  # type: ignore[arg-type]

        if ac.schedule == "constant":
            if ac.gamma is not None:
                return ConstantStep(ac.gamma)
            dc = self._require_dc("Default constant step")
            if is_unbounded(dc.gamma_max):
                raise InvalidScheduleError("gamma_max is unbounded; set 'gamma'")
            return ConstantStep(float(dc.gamma_max) / 2.0)  # type: ignore[arg-type]

        if ac.schedule == "horizon":
            if pc.kind == "td":
                inputs = s.inputs
                return ConstantStep(td_robust_step(inputs["V_bar"], inputs["V_star_norm2"], inputs["lam"], T))
            dc = self._require_dc("Horizon-tuned step")
            return HorizonTunedStep(V_bar=dc.V_bar, eta0=dc.eta0, L_V=dc.L_V, gamma_max=dc.gamma_max, T=T)

        if ac.schedule == "polynomial":
            return PolynomialStep(gamma_tilde=ac.gamma_tilde, T0=ac.T0 or 0, beta=ac.beta)  # type: ignore[arg-type]

        if pc.kind == "td":
            return td_fast_schedule(s.inputs["vmin"], s.inputs["lam"], ac.gamma_tilde)
        return fast_rate_schedule(self._require_dc("Fast-rate schedule"), ac.gamma_tilde, ac.T0)

    def _spider_config(self, T: int) -> SpiderConfig:
        ac, pc = self.config.algorithm, self.config.problem
        s = self.setup()
        k_in = ac.k_in or math.ceil(round(math.sqrt(pc.n), 9))
        b = ac.b or min(k_in, pc.n)
        k_out = ac.k_out if ac.k_out and T == ac.T else max(1, T // k_in)
        if ac.schedule == "constant" and ac.gamma is not None:
            return SpiderConfig(k_in=k_in, k_out=k_out, b=b, schedule=ConstantStep(ac.gamma))
        if ac.schedule != "constant":
            return SpiderConfig(k_in=k_in, k_out=k_out, b=b, schedule=self.schedule(k_in * k_out))
        return spider_constant_config(s.field, k_in, k_out, b, Delta1=s.inputs["Delta1"])

    def horizon(self) -> int:
        """Iterations per replicate (k_in k_out for SA-SPIDER)."""
        if self.config.problem.kind == "spider":
            return self._spider_config(self.config.algorithm.T).T
        return self.config.algorithm.T

    # Bounds

    def _bound_params(self, name: str, steps: np.ndarray, schedule: StepSchedule) -> Dict[str, Any]:
        """Collect the keyword arguments of bound_curve for this instance."""
        try:
            return self._collect_bound_params(name, steps, schedule)
        except KeyError as exc:
            raise StochApproxError(
                f"Bound '{name}' is not available for problem '{self.config.problem.kind}' (missing {exc})"
            ) from exc

    def _collect_bound_params(self, name: str, steps: np.ndarray, schedule: StepSchedule) -> Dict[str, Any]:
        s = self.setup()
        inputs = s.inputs
        if name in ("random_stop", "constant_step", "horizon_tuned", "td_robust"):
            return {"dc": self._require_dc(f"Bound '{name}'")}
        if name == "fast_recursion":
            return {"dc": self._require_dc(f"Bound '{name}'"), "W0": inputs["W0"]}
        if name in ("fast_rate", "td_fast"):
            if not isinstance(schedule, PolynomialStep):
                raise InvalidScheduleError(f"Bound '{name}' needs a diminishing schedule")
            if name == "fast_rate":
                return {"dc": self._require_dc(f"Bound '{name}'"), "schedule": schedule, "W0": inputs["W0"]}
            if self.config.problem.variant != "vw":
                raise StochApproxError("Bound 'td_fast' needs variant = vw")
            keys = ("vmin", "lam", "V_star_norm2", "e0")
            return {**{k: inputs[k] for k in keys}, "schedule": schedule}
        if name in ("spider", "spider_rate"):
            config = self._spider_config(steps.size)
            rc = s.rc
            if name == "spider":
                return {
                    "rc": rc,
                    "L_bar2": inputs["L_bar2"],
                    "k_in": config.k_in,
                    "b": config.b,
                    "Delta1": inputs["Delta1"],
                }
            c_V = float(rc.c_V)  # type: ignore[arg-type]
            g_max = spider_gamma_max(rc.rho, rc.L_V, inputs["L_bar2"], c_V, rc.c_h1, config.k_in, config.b)
            _, Delta2 = spider_deltas(0.0, 0.0, rc.L_V, inputs["L_bar2"], c_V, rc.rho, config.k_in, config.b, g_max)
            return {"Delta1": inputs["Delta1"], "Delta2": Delta2, "rho": rc.rho, "c_h0": rc.c_h0}
        if name == "em_minibatch":
            return {"constants": inputs["constants"], "b": inputs["b"]}
        if name == "gauss_southwell":
            return {k: inputs[k] for k in ("d", "L", "F0", "F_star")}
        if name == "low_precision":
            return {k: inputs[k] for k in ("d", "Delta", "L", "M2_over_n", "F_gap")}
        if name == "sc_sgd":
            return {k: inputs[k] for k in ("mu", "L", "M2_over_n", "e0")}
        return {}

    # Runs

    def _needs_iterates(self, bound: str) -> bool:
        ac = self.config.algorithm
        return ac.store_iterates or ac.stopping != "last" or BOUND_STATISTICS[bound] == "averaged_iterate"

    def run_logs(
        self, T: int, seeds: Sequence[int], master_seed: int
    ) -> Tuple[List[TrajectoryLog], np.ndarray, StepSchedule]:
        """Run every replicate for T iterations; return (logs, steps, schedule)."""
        ac = self.config.algorithm
        s = self.setup()
        store = self._needs_iterates(self.config.output.bound)
        if self.config.problem.kind == "spider":
            config = self._spider_config(T)
            task = partial(
                _spider_task, cf=s.field, config=config, w_init=s.w0, master_seed=master_seed, store_iterates=store
            )
            return map_replicates(task, list(seeds), ac.workers), gammas(config.schedule, config.T), config.schedule
        schedule = self.schedule(T)
        logs = run_replicates(s.field, schedule, T, s.w0, master_seed, list(seeds), ac.workers, store)
        return logs, gammas(schedule, T), schedule

    def _output_W(self, logs: List[TrajectoryLog], steps: np.ndarray, master_seed: int) -> float:
        rule = StoppingRule(self.config.algorithm.stopping)
        dc = self.setup().dc
        omegas = stopping_omegas(dc, steps) if dc is not None else None
        values = [
            self.setup().field.lyapunov_W(select_output(log, rule, make_rng(master_seed, log.replicate, 1), omegas))
            for log in logs
        ]
        return float(np.mean(values))

    def _sweep(self, seeds: Sequence[int], master_seed: int) -> Optional[RateFit]:
        horizons = self.config.algorithm.horizons
        if not horizons:
            return None
        bound = self.config.output.bound
        statistic = BOUND_STATISTICS[bound]
        points = []
        for T in horizons:
            logs, steps, schedule = self.run_logs(T, seeds, master_seed)
            weights = statistic_weights(bound, steps, **self._bound_params(bound, steps, schedule))
            agg = aggregate(logs, np.full(steps.size, np.inf), statistic, weights, self.setup().field)
            points.append((float(steps.size), float(agg.mean[-1])))
            logger.info(f"sweep point T:{steps.size};value:{agg.mean[-1]}")
        return fit_rate(points)

    def run(
        self,
        out_dir: Optional[Union[Path, str]] = None,
        seeds: Optional[Sequence[int]] = None,
        master_seed: Optional[int] = None,
    ) -> ExperimentSummary:
        """
        Run the experiment and write its reports.

        Writes trajectory.csv (one row per replicate and iteration),
        aggregate.csv (mean, SE and bound per horizon) and summary.txt.

        Args:
            out_dir: Output directory (defaults to the configured one)
            seeds: Replicate indices overriding the configured ones
            master_seed: Master seed overriding the configured one

        Returns:
            ExperimentSummary; passed is False when the bound check fails

        Raises:
            DivergenceError: If an iterate diverges
            StochApproxError: If the configuration is inconsistent with the instance
        """
        cfg = self.config
        out = Path(out_dir if out_dir is not None else cfg.output.directory)
        seeds = list(cfg.algorithm.seeds if seeds is None else seeds)
        master_seed = cfg.algorithm.master_seed if master_seed is None else master_seed
        bound_name = cfg.output.bound
        statistic = BOUND_STATISTICS[bound_name]
        logger.info(f"experiment started problem:{cfg.problem.kind};replicates:{len(seeds)};out:{out}")

        logs, steps, schedule = self.run_logs(self.horizon(), seeds, master_seed)
        params = self._bound_params(bound_name, steps, schedule)
        curve = bound_curve(bound_name, steps, **params)
        weights = statistic_weights(bound_name, steps, **params)
        agg = aggregate(logs, curve, statistic, weights, self.setup().field)
        check = check_curve(agg.mean, agg.se, agg.bound, cfg.output.burn_in)
        rate = self._sweep(seeds, master_seed)

        out.mkdir(parents=True, exist_ok=True)
        if cfg.output.trajectories:
            self._write_trajectories(out / "trajectory.csv", logs)
        self._write_aggregate(out / "aggregate.csv", agg.rows())

        summary = ExperimentSummary(
            problem=cfg.problem.kind,
            T=int(steps.size),
            replicates=len(logs),
            bound=bound_name,
            statistic=statistic,
            final_mean=float(agg.mean[-1]),
            final_se=float(agg.se[-1]),
            final_bound=float(agg.bound[-1]),
            check_passed=check.passed,
            violations=check.violations,
            stopping=cfg.algorithm.stopping,
            output_W=self._output_W(logs, steps, master_seed),
            oracle_calls=logs[0].oracle_calls if cfg.problem.kind == "spider" else None,
            rate=rate,
        )
        (out / "summary.txt").write_text("\n".join(summary.lines()) + "\n", encoding="utf-8")
        logger.info(f"experiment finished passed:{summary.passed};out:{out}")
        return summary

    def _write_trajectories(self, path: Path, logs: List[TrajectoryLog]) -> None:
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=TRAJECTORY_HEADER, lineterminator="\n")
            writer.writeheader()
            rows = 0
            for log in logs:
                for r in log.records:
                    writer.writerow(
                        {
                            "replicate": log.replicate,
                            "k": r.k,
                            "gamma": _format(r.gamma),
                            "W": _format(r.W),
                            "V": _format(r.V),
                            "normh2": _format(r.normh2),
                        }
                    )
                    rows += 1
        logger.info(f"csv written path:{path};rows:{rows}")

    def _write_aggregate(self, path: Path, rows: List[Dict[str, Any]]) -> None:
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=AGGREGATE_HEADER, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _format(value) for key, value in row.items()})
        logger.info(f"csv written path:{path};rows:{len(rows)}")


def run_experiment(config: ExperimentConfig, out_dir: Optional[Union[Path, str]] = None) -> ExperimentSummary:
    """Run a parsed experiment and write its reports to out_dir."""
    return ExperimentService(config).run(out_dir)
