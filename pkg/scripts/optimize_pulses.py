"""
optimize_pulses.py — BFGS synthesis of control pulses and multi-start ensembles.

Each run draws hx, hy i.i.d. uniform on [-a, a] from numpy's PCG64 generator
seeded with (config.seed + run index), minimises G with dense-inverse-Hessian
BFGS under a strong-Wolfe line search, then scores the result before and
after the ideal low-pass filter whose cutoff matches the penalised band.

Run statuses:
  converged          max-norm of ∇G below grad_tolerance
  max_iterations     iteration budget exhausted
  line_search_failed no step satisfying the Wolfe conditions; best point kept
  restart_advised    Tr(U_T† U) vanished, the fidelity gradient is undefined
  error: <message>   the run raised; the ensemble continues without it
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import repeat
from typing import Callable, Optional

import numpy as np
from scipy.optimize import OptimizeResult
from scipy.optimize import minimize as scipy_minimize

from dynamics import ControlSequence
from lowpass import DEFAULT_OVERSAMPLE, FilterSpec, cutoff_from_band, filtered_fidelity
from spectral import ObjectiveSpec, evaluate_objective
from spin_model import SpinChainSystem, TargetGate

logger = logging.getLogger(__name__)

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_LINE_SEARCH_FAILED = "line_search_failed"
STATUS_RESTART_ADVISED = "restart_advised"

# Bound of the uniform start distribution, units of J.
DEFAULT_INIT_AMPLITUDE = 3.0

# scipy's BFGS exit codes
_SCIPY_STATUS = {
    0: STATUS_CONVERGED,
    1: STATUS_MAX_ITERATIONS,
    2: STATUS_LINE_SEARCH_FAILED,
}

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


class SingularGradientError(RuntimeError):
    """Raised from inside the objective to stop BFGS at a singular fidelity gradient."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 2000
    grad_tolerance: float = 1e-8
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    init_amplitude: float = DEFAULT_INIT_AMPLITUDE
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be ≥ 1, got {self.max_iterations}")
        if not self.grad_tolerance > 0:
            raise ValueError(f"grad_tolerance must be positive, got {self.grad_tolerance}")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError(
                f"Wolfe constants need 0 < c1 < c2 < 1, got c1={self.wolfe_c1}, c2={self.wolfe_c2}"
            )
        if self.init_amplitude < 0:
            raise ValueError(f"init_amplitude must be ≥ 0, got {self.init_amplitude}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass
class OptimizationTrace:
    """G at the start point and after every accepted iteration."""

    values: list[float] = field(default_factory=list)
    status: str = ""
    iterations: int = 0
    grad_max: float = math.nan
    message: str = ""


@dataclass(frozen=True, eq=False)
class RunResult:
    run_index: int
    seed: int
    iterations: int
    status: str
    final_G: float
    pre_filter_fidelity: float
    post_filter_fidelity: float
    power_x: float
    power_y: float
    controls: Optional[ControlSequence] = None

    @property
    def ok(self) -> bool:
        return not self.status.startswith("error")

    @property
    def power_total(self) -> float:
        return 0.5 * (self.power_x + self.power_y)

    @property
    def fidelity_loss(self) -> float:
        return self.pre_filter_fidelity - self.post_filter_fidelity


def init_controls(seed: int, n: int, dt: float, amplitude: float) -> ControlSequence:
    """Uniform [-amplitude, amplitude] start point from PCG64(seed); hx drawn before hy."""
    if amplitude < 0:
        raise ValueError(f"amplitude must be ≥ 0, got {amplitude}")
    rng = np.random.default_rng(seed)
    hx = rng.uniform(-amplitude, amplitude, size=n)
    hy = rng.uniform(-amplitude, amplitude, size=n)
    return ControlSequence(dt, hx, hy)


def bfgs_minimize(
    fun: Objective,
    x0: np.ndarray,
    config: OptimizerConfig,
) -> tuple[np.ndarray, OptimizationTrace]:
    """Minimise fun(x) -> (f, ∇f) from x0; returns the last accepted point and its trace."""
    trace = OptimizationTrace()
    accepted = {"x": np.array(x0, dtype=float)}

    def value_and_gradient(x: np.ndarray) -> tuple[float, np.ndarray]:
        value, gradient = fun(x)
        if not trace.values:
            trace.values.append(float(value))
        return value, gradient

    def record(intermediate_result: OptimizeResult) -> None:
        accepted["x"] = np.array(intermediate_result.x, dtype=float)
        trace.values.append(float(intermediate_result.fun))
        logger.debug("iteration %d: G = %.12g", len(trace.values) - 1, intermediate_result.fun)

    try:
        result = scipy_minimize(
            value_and_gradient,
            np.array(x0, dtype=float),
            jac=True,
            method="BFGS",
            callback=record,
            options={
                "maxiter": config.max_iterations,
                "gtol": config.grad_tolerance,
                "norm": np.inf,
                "c1": config.wolfe_c1,
                "c2": config.wolfe_c2,
            },
        )
    except SingularGradientError as exc:
        trace.status = STATUS_RESTART_ADVISED
        trace.iterations = len(trace.values) - 1 if trace.values else 0
        trace.message = str(exc)
        logger.warning("optimisation stopped: %s", exc)
        return accepted["x"], trace

    trace.status = _SCIPY_STATUS.get(result.status, f"error: {result.message}")
    trace.iterations = int(result.nit)
    trace.message = str(result.message)
    if result.jac is not None:
        trace.grad_max = float(np.max(np.abs(result.jac)))
    return np.array(result.x, dtype=float), trace


def minimize(
    spec: ObjectiveSpec,
    init: ControlSequence,
    config: OptimizerConfig,
) -> tuple[ControlSequence, OptimizationTrace]:
    """Minimise G over both control directions starting from init."""
    if init.n != spec.band.n:
        raise ValueError(f"initial controls have {init.n} slices, band expects {spec.band.n}")

    def fun(vector: np.ndarray) -> tuple[float, np.ndarray]:
        result = evaluate_objective(spec, ControlSequence.from_vector(vector, init.dt))
        if result.singular:
            raise SingularGradientError("fidelity gradient singular at F≈0")
        return result.value, result.gradient

    best, trace = bfgs_minimize(fun, init.as_vector(), config)
    return ControlSequence.from_vector(best, init.dt), trace


def _failed_run(run_index: int, seed: int, exc: Exception) -> RunResult:
    return RunResult(
        run_index=run_index,
        seed=seed,
        iterations=0,
        status=f"error: {exc}",
        final_G=math.nan,
        pre_filter_fidelity=math.nan,
        post_filter_fidelity=math.nan,
        power_x=math.nan,
        power_y=math.nan,
    )


def run_single(
    spec: ObjectiveSpec,
    config: OptimizerConfig,
    filter_spec: FilterSpec,
    run_index: int,
) -> RunResult:
    """One seeded start: optimise, then score with and without the filter."""
    seed = config.seed + run_index
    try:
        init = init_controls(seed, spec.band.n, spec.dt, config.init_amplitude)
        controls, trace = minimize(spec, init, config)
        final = evaluate_objective(spec, controls)
        post = filtered_fidelity(spec.system, controls, spec.target, filter_spec)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        logger.warning("run %d (seed %d) failed: %s", run_index, seed, exc)
        return _failed_run(run_index, seed, exc)

    logger.info(
        "run %d (seed %d): %s after %d iterations, F=%.12f, F_filtered=%.6f",
        run_index, seed, trace.status, trace.iterations, final.fidelity, post,
    )
    return RunResult(
        run_index=run_index,
        seed=seed,
        iterations=trace.iterations,
        status=trace.status,
        final_G=final.value,
        pre_filter_fidelity=final.fidelity,
        post_filter_fidelity=post,
        power_x=final.power_x,
        power_y=final.power_y,
        controls=controls,
    )


def run_experiment(
    system: SpinChainSystem,
    target: TargetGate,
    spec: ObjectiveSpec,
    config: OptimizerConfig,
    n_runs: int,
    oversample: int = DEFAULT_OVERSAMPLE,
    workers: int = 1,
) -> list[RunResult]:
    """n_runs independent starts with seeds config.seed + j, returned in run order."""
    if n_runs < 1:
        raise ValueError(f"n_runs must be ≥ 1, got {n_runs}")
    spec = replace(spec, system=system, target=target)
    omega0 = cutoff_from_band(spec.band.n, spec.band.delta, spec.dt)
    filter_spec = FilterSpec(omega0, oversample)
    run_indices = range(n_runs)

    if workers <= 1:
        return [run_single(spec, config, filter_spec, j) for j in run_indices]

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_single, repeat(spec), repeat(config), repeat(filter_spec), run_indices))
