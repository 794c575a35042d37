"""
Tests for selfcheck.py — every check passes on the real implementation and
catches a deliberately broken one.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "scripts"))
import selfcheck
import spectral
from lowpass import filtered_control, sine_integral
from optimize_pulses import init_controls


# ═══════════════════════════════════════════════════════════════════════════════
# ORACLES
# ═══════════════════════════════════════════════════════════════════════════════

class TestOracles:

    def test_central_difference_of_quadratic(self):
        x = np.array([1.0, -2.0, 0.5])
        gradient = selfcheck.central_difference(lambda v: float(v @ v), x)
        assert np.allclose(gradient, 2 * x, atol=1e-8)

    def test_relative_max_error_floor(self):
        assert selfcheck.relative_max_error(np.array([1e-12]), np.zeros(1)) == pytest.approx(1e-12)
        assert selfcheck.relative_max_error(np.array([1.1, 2.0]), np.array([1.0, 2.0])) == pytest.approx(0.05)

    def test_report_exit_codes(self, capsys):
        ok = selfcheck.CheckResult("a", True, "fine")
        bad = selfcheck.CheckResult("b", False, "broken")
        assert selfcheck.report([ok]) == 0
        assert selfcheck.report([ok, bad]) == selfcheck.SELFTEST_FAILURE_EXIT
        assert "1/2 checks passed" in capsys.readouterr().out


# ═══════════════════════════════════════════════════════════════════════════════
# CHECKS ON THE REAL IMPLEMENTATION
# ═══════════════════════════════════════════════════════════════════════════════

class TestChecksPass:

    def test_objective_gradient(self):
        assert selfcheck.check_objective_gradient(instances=10).passed

    @pytest.mark.parametrize("check", [
        selfcheck.check_power_gradient,
        selfcheck.check_power_fraction_range,
        selfcheck.check_parseval,
        selfcheck.check_unitarity,
        selfcheck.check_sine_integral,
        selfcheck.check_filtered_control,
        selfcheck.check_determinism,
    ])
    def test_check_passes(self, check):
        result = check()
        assert result.passed, result.detail


# ═══════════════════════════════════════════════════════════════════════════════
# NEGATIVE CONTROLS
# ═══════════════════════════════════════════════════════════════════════════════

class TestChecksCatchErrors:

    def test_sign_error_in_objective_gradient(self):
        def flipped(spec, controls):
            result = spectral.evaluate_objective(spec, controls)
            return result._replace(gradient=-result.gradient)

        assert not selfcheck.check_objective_gradient(evaluate=flipped, instances=3).passed

    def test_missing_quotient_term(self):
        def band_only(h, band):
            y = np.where(band.mask, spectral.dft(h), 0.0)
            return 2.0 * np.real(np.fft.fft(y, norm="ortho")) / np.dot(h, h)

        assert not selfcheck.check_power_gradient(power_gradient_fn=band_only, trials=3).passed

    def test_unnormalised_dft(self):
        assert not selfcheck.check_parseval(dft_fn=lambda h: np.fft.ifft(h)).passed

    def test_negative_exponent_dft(self):
        """Same power spectrum, wrong sign convention: only the direct sum catches it."""
        assert not selfcheck.check_parseval(dft_fn=lambda h: np.fft.fft(h, norm="ortho")).passed

    def test_sine_integral_off_by_constant(self):
        assert not selfcheck.check_sine_integral(si_fn=lambda x: sine_integral(x) + 1e-6).passed

    def test_filter_with_wrong_cutoff(self):
        def doubled_cutoff(controls, omega0, t):
            return filtered_control(controls, 2 * omega0, t)

        assert not selfcheck.check_filtered_control(filtered_fn=doubled_cutoff, trials=2).passed

    def test_unseeded_initialisation(self):
        def unseeded(seed, n, dt, amplitude):
            return init_controls(int(np.random.default_rng().integers(1 << 30)), n, dt, amplitude)

        assert not selfcheck.check_determinism(init_fn=unseeded).passed

    def test_non_unitary_propagator(self):
        def leaky(system, controls):
            result = selfcheck.dynamics.propagate(system, controls)
            return type(result)(
                result.slice_unitaries * 1.001,
                result.prefix_products * 1.001,
                result.eigenvalues,
                result.eigenvectors,
            )

        assert not selfcheck.check_unitarity(propagate_fn=leaky, trials=2).passed
