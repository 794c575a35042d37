"""
Tests for optimize_pulses.py — seeded starts, the BFGS core and ensembles.

Tests validate:
  1. Initialisation is reproducible, bounded and uniform
  2. BFGS solves quadratic (up to dimension 20) and Rosenbrock problems with a monotone trace
  3. A bare spin reaches the NOT gate without penalty
  4. Singular starts and failed runs are reported, not raised
  5. Ensembles are ordered by run index and independent of the worker count
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

sys.path.insert(0, str(Path(__file__).parent.parent / "scripts"))
import optimize_pulses
from dynamics import ControlSequence, fidelity_and_gradient, propagate
from lowpass import FilterSpec
from optimize_pulses import (
    STATUS_CONVERGED,
    STATUS_LINE_SEARCH_FAILED,
    STATUS_RESTART_ADVISED,
    OptimizerConfig,
    bfgs_minimize,
    init_controls,
    minimize,
    run_experiment,
    run_single,
)
from spectral import ObjectiveSpec, SpectralBand, evaluate_objective
from spin_model import SpinChainSystem, target_gate


def bare_spin_spec(mu: float = 1.0, n: int = 4) -> ObjectiveSpec:
    return ObjectiveSpec(mu, SpectralBand.quarter(n), SpinChainSystem.build(1), target_gate("not", 1), 0.2)


# ═══════════════════════════════════════════════════════════════════════════════
# INITIALISATION
# ═══════════════════════════════════════════════════════════════════════════════

class TestInitControls:

    def test_reproducible(self):
        first = init_controls(7, 64, 0.2, 1.0)
        second = init_controls(7, 64, 0.2, 1.0)
        assert first.as_vector().tobytes() == second.as_vector().tobytes()

    def test_seeds_differ(self):
        assert not np.array_equal(init_controls(0, 16, 0.2, 1.0).hx, init_controls(1, 16, 0.2, 1.0).hx)

    def test_bounded(self):
        controls = init_controls(3, 256, 0.2, 0.5)
        assert np.all(np.abs(controls.as_vector()) <= 0.5)

    def test_zero_amplitude_gives_zero_controls(self):
        assert not np.any(init_controls(4, 16, 0.2, 0.0).as_vector())

    def test_uniform_statistics(self):
        a = 3.0
        draws = init_controls(21, 10_000, 0.2, a).hx
        assert np.all(np.abs(draws) <= a)
        assert abs(draws.mean()) < 3 * a / math.sqrt(3 * draws.size)
        assert draws.var() == pytest.approx(a * a / 3, rel=0.05)

    def test_hx_drawn_before_hy(self):
        rng = np.random.default_rng(11)
        controls = init_controls(11, 8, 0.2, 1.0)
        assert np.array_equal(controls.hx, rng.uniform(-1, 1, 8))
        assert np.array_equal(controls.hy, rng.uniform(-1, 1, 8))


class TestOptimizerConfig:

    @pytest.mark.parametrize("kwargs", [
        {"max_iterations": 0},
        {"grad_tolerance": 0.0},
        {"wolfe_c1": 0.9, "wolfe_c2": 0.5},
        {"init_amplitude": -1.0},
        {"seed": -3},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)


# ═══════════════════════════════════════════════════════════════════════════════
# BFGS CORE
# ═══════════════════════════════════════════════════════════════════════════════

class TestBFGS:

    def test_quadratic(self):
        a = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]])
        b = np.array([1.0, -2.0, 0.5])

        def fun(x):
            return 0.5 * x @ a @ x - b @ x, a @ x - b

        x, trace = bfgs_minimize(fun, np.zeros(3), OptimizerConfig())
        assert np.allclose(x, np.linalg.solve(a, b), atol=1e-7)
        assert trace.status == STATUS_CONVERGED
        assert trace.grad_max < 1e-8

    def test_spd_quadratic_dimension_20(self):
        rng = np.random.default_rng(20)
        m = rng.normal(size=(20, 20))
        a = m @ m.T + 20 * np.eye(20)
        b = rng.normal(size=20)

        def fun(x):
            return 0.5 * x @ a @ x - b @ x, a @ x - b

        x, trace = bfgs_minimize(fun, np.zeros(20), OptimizerConfig())
        assert trace.status == STATUS_CONVERGED
        assert trace.iterations <= 200
        assert trace.grad_max < 1e-8
        assert np.allclose(x, np.linalg.solve(a, b), atol=1e-8)

    def test_trace_monotone(self):
        x0 = np.array([-1.2, 1.0])
        _, trace = bfgs_minimize(lambda x: (rosen(x), rosen_der(x)), x0, OptimizerConfig(grad_tolerance=1e-6))
        assert trace.values[0] == pytest.approx(rosen(x0))
        assert all(b <= a + 1e-12 for a, b in zip(trace.values, trace.values[1:]))
        assert len(trace.values) == trace.iterations + 1

    def test_rosenbrock(self):
        x, trace = bfgs_minimize(
            lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]), OptimizerConfig(grad_tolerance=1e-6)
        )
        assert trace.status in (STATUS_CONVERGED, STATUS_LINE_SEARCH_FAILED)
        assert np.allclose(x, [1.0, 1.0], atol=1e-4)

    def test_iteration_cap(self):
        _, trace = bfgs_minimize(
            lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]), OptimizerConfig(max_iterations=3)
        )
        assert trace.status == optimize_pulses.STATUS_MAX_ITERATIONS
        assert trace.iterations == 3


# ═══════════════════════════════════════════════════════════════════════════════
# PULSE OPTIMISATION
# ═══════════════════════════════════════════════════════════════════════════════

class TestMinimize:

    def test_bare_spin_reaches_not(self):
        spec = bare_spin_spec()
        controls, trace = minimize(spec, init_controls(5, 4, 0.2, 1.0), OptimizerConfig())
        fidelity = fidelity_and_gradient(spec.system, controls, spec.target).fidelity
        assert fidelity > 1 - 1e-9
        total = propagate(spec.system, controls).total
        phase = total[0, 1] / abs(total[0, 1])
        assert np.allclose(total, phase * np.array([[0, 1], [1, 0]]), atol=1e-4)
        assert trace.values[-1] <= trace.values[0]

    def test_singular_start_advises_restart(self):
        """Zero controls give U = I, orthogonal to NOT."""
        spec = bare_spin_spec()
        controls, trace = minimize(spec, ControlSequence.zeros(4, 0.2), OptimizerConfig())
        assert trace.status == STATUS_RESTART_ADVISED
        assert trace.iterations == 0
        assert not np.any(controls.as_vector())

    def test_penalty_only_lowers_band_power(self):
        spec = bare_spin_spec(mu=0.0, n=16)
        init = init_controls(2, 16, 0.2, 1.0)
        controls, _ = minimize(spec, init, OptimizerConfig(max_iterations=200))
        assert evaluate_objective(spec, controls).power_total < evaluate_objective(spec, init).power_total

    def test_slice_mismatch(self):
        with pytest.raises(ValueError):
            minimize(bare_spin_spec(n=4), ControlSequence.zeros(8, 0.2), OptimizerConfig())


class TestEnsemble:

    def test_run_single_scores_before_and_after_filter(self):
        spec = bare_spin_spec(mu=0.5, n=8)
        result = run_single(spec, OptimizerConfig(seed=10), FilterSpec(10.0), run_index=2)
        assert result.seed == 12
        assert result.ok
        assert 0.0 <= result.post_filter_fidelity <= 1.0
        assert result.fidelity_loss == pytest.approx(result.pre_filter_fidelity - result.post_filter_fidelity)
        assert result.controls is not None and result.controls.n == 8

    def test_run_failure_is_captured(self, monkeypatch):
        def broken(*args, **kwargs):
            raise RuntimeError("filter exploded")

        monkeypatch.setattr(optimize_pulses, "filtered_fidelity", broken)
        result = run_single(bare_spin_spec(), OptimizerConfig(), FilterSpec(10.0), run_index=0)
        assert not result.ok
        assert result.status == "error: filter exploded"
        assert math.isnan(result.post_filter_fidelity)
        assert result.controls is None

    def test_ordered_and_reproducible(self):
        spec = bare_spin_spec(mu=0.5, n=8)
        config = OptimizerConfig(seed=3)
        first = run_experiment(spec.system, spec.target, spec, config, n_runs=3)
        second = run_experiment(spec.system, spec.target, spec, config, n_runs=3)
        assert [r.run_index for r in first] == [0, 1, 2]
        assert [r.seed for r in first] == [3, 4, 5]
        assert [r.final_G for r in first] == [r.final_G for r in second]

    def test_invalid_run_count(self):
        spec = bare_spin_spec()
        with pytest.raises(ValueError):
            run_experiment(spec.system, spec.target, spec, OptimizerConfig(), n_runs=0)

    @pytest.mark.slow
    def test_worker_pool_matches_serial(self):
        spec = bare_spin_spec(mu=0.5, n=8)
        config = OptimizerConfig(seed=1)
        serial = run_experiment(spec.system, spec.target, spec, config, n_runs=4)
        pooled = run_experiment(spec.system, spec.target, spec, config, n_runs=4, workers=2)
        assert [r.final_G for r in pooled] == [r.final_G for r in serial]
        assert [r.post_filter_fidelity for r in pooled] == [r.post_filter_fidelity for r in serial]
