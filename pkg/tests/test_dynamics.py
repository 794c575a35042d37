"""
Tests for dynamics.py — propagation, fidelity and the exact fidelity gradient.

Tests validate:
  1. ControlSequence validation and vector layout
  2. Propagators against scipy's matrix exponential
  3. Fidelity range, phase invariance and closed-form single-qubit cases
  4. Exact exp-derivative and fidelity gradient vs finite differences
  5. The singular case Tr(U_T† U) = 0
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

sys.path.insert(0, str(Path(__file__).parent.parent / "scripts"))
from dynamics import (
    ControlSequence,
    exp_derivative,
    fidelity_and_gradient,
    fidelity_gradient,
    gate_fidelity,
    propagate,
    slice_hamiltonian,
)
from selfcheck import central_difference, relative_max_error
from spin_model import SpinChainSystem, target_gate


# ═══════════════════════════════════════════════════════════════════════════════
# CONTROL SEQUENCE
# ═══════════════════════════════════════════════════════════════════════════════

class TestControlSequence:

    def test_vector_layout(self):
        controls = ControlSequence(0.2, [1, 2, 3], [4, 5, 6])
        assert list(controls.as_vector()) == [1, 2, 3, 4, 5, 6]
        back = ControlSequence.from_vector(controls.as_vector(), 0.2)
        assert np.array_equal(back.hx, controls.hx)
        assert np.array_equal(back.hy, controls.hy)

    def test_total_duration_and_starts(self):
        controls = ControlSequence.zeros(128, 0.2)
        assert controls.total_duration == pytest.approx(25.6)
        assert controls.slice_starts[3] == pytest.approx(0.6)

    def test_amplitudes_read_only(self):
        controls = ControlSequence.zeros(4, 0.2)
        with pytest.raises(ValueError):
            controls.hx[0] = 1.0

    def test_input_arrays_copied(self):
        hx = np.zeros(4)
        controls = ControlSequence(0.2, hx, np.zeros(4))
        hx[0] = 5.0
        assert controls.hx[0] == 0.0

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ControlSequence(0.2, [1, 2], [1])
        with pytest.raises(ValueError):
            ControlSequence(0.0, [1], [1])
        with pytest.raises(ValueError):
            ControlSequence(0.2, [math.nan], [0])
        with pytest.raises(ValueError):
            ControlSequence(0.2, [], [])
        with pytest.raises(ValueError):
            ControlSequence.from_vector(np.zeros(5), 0.2)


# ═══════════════════════════════════════════════════════════════════════════════
# PROPAGATION
# ═══════════════════════════════════════════════════════════════════════════════

class TestPropagate:

    def test_slices_match_expm(self, chain2, random_controls):
        result = propagate(chain2, random_controls)
        for i in range(random_controls.n):
            h = slice_hamiltonian(chain2, random_controls.hx[i], random_controls.hy[i])
            assert np.allclose(result.slice_unitaries[i], expm(-1j * h * 0.2), atol=1e-12)

    def test_ordering_first_slice_acts_first(self, chain2, random_controls):
        result = propagate(chain2, random_controls)
        expected = np.eye(4)
        for u in result.slice_unitaries:
            expected = u @ expected
        assert np.allclose(result.total, expected, atol=1e-12)

    def test_zero_controls_evolve_under_drift(self, chain3):
        controls = ControlSequence.zeros(16, 0.2)
        expected = expm(-1j * chain3.drift * 16 * 0.2)
        assert np.allclose(propagate(chain3, controls).total, expected, atol=1e-11)

    def test_unitarity(self, chain3, rng):
        controls = ControlSequence(0.2, rng.uniform(-3, 3, 32), rng.uniform(-3, 3, 32))
        total = propagate(chain3, controls).total
        assert np.max(np.abs(total.conj().T @ total - np.eye(8))) < 1e-10

    def test_time_reversal_single_spin(self, single_qubit, random_controls):
        """H0 = 0 for N = 1: negated controls played backwards undo the evolution."""
        reversed_controls = ControlSequence(0.2, -random_controls.hx[::-1], -random_controls.hy[::-1])
        forward = propagate(single_qubit, random_controls).total
        backward = propagate(single_qubit, reversed_controls).total
        assert np.allclose(backward, forward.conj().T, atol=1e-12)
        assert np.allclose(backward @ forward, np.eye(2), atol=1e-12)

    def test_prefix_products(self, chain2, random_controls):
        result = propagate(chain2, random_controls)
        assert np.allclose(result.prefix_products[0], result.slice_unitaries[0])
        assert np.allclose(result.prefix_products[2],
                           result.slice_unitaries[2] @ result.slice_unitaries[1] @ result.slice_unitaries[0])


# ═══════════════════════════════════════════════════════════════════════════════
# FIDELITY
# ═══════════════════════════════════════════════════════════════════════════════

class TestGateFidelity:

    def test_target_itself(self):
        gate = target_gate("swap", 3)
        assert gate_fidelity(gate, gate.unitary) == pytest.approx(1.0)

    def test_global_phase_invariant(self):
        gate = target_gate("not", 2)
        assert gate_fidelity(gate, np.exp(0.7j) * gate.unitary) == pytest.approx(1.0)

    def test_orthogonal_operator(self):
        """Tr(σ_x · I) = 0."""
        assert gate_fidelity(target_gate("not", 1), np.eye(2)) == 0.0

    def test_single_qubit_rotation(self, single_qubit):
        """One slice of hx on a bare spin: F = |sin(hx dt)| against NOT."""
        dt = 0.2
        for hx in (0.3, 1.0, math.pi / (2 * dt)):
            controls = ControlSequence(dt, [hx], [0.0])
            fidelity = gate_fidelity(target_gate("not", 1), propagate(single_qubit, controls).total)
            assert fidelity == pytest.approx(abs(math.sin(hx * dt)), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            gate_fidelity(target_gate("not", 2), np.eye(2))

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=8, max_size=8))
    def test_fidelity_in_unit_interval(self, amplitudes):
        system = SpinChainSystem.build(2)
        controls = ControlSequence(0.2, amplitudes[:4], amplitudes[4:])
        fidelity = gate_fidelity(target_gate("swap", 2), propagate(system, controls).total)
        assert 0.0 <= fidelity <= 1.0


# ═══════════════════════════════════════════════════════════════════════════════
# GRADIENTS
# ═══════════════════════════════════════════════════════════════════════════════

class TestExpDerivative:

    def test_matches_finite_difference(self, chain2, rng):
        h = slice_hamiltonian(chain2, 0.4, -0.7)
        b = chain2.control_x
        eps = 1e-6
        numeric = (expm(-1j * (h + eps * b) * 0.2) - expm(-1j * (h - eps * b) * 0.2)) / (2 * eps)
        assert np.allclose(exp_derivative(h, b, 0.2), numeric, atol=1e-8)

    def test_degenerate_spectrum(self, chain2):
        """Zero controls leave the triplet threefold degenerate."""
        h = chain2.drift
        b = chain2.control_y
        eps = 1e-6
        numeric = (expm(-1j * (h + eps * b) * 0.2) - expm(-1j * (h - eps * b) * 0.2)) / (2 * eps)
        assert np.allclose(exp_derivative(h, b, 0.2), numeric, atol=1e-8)

    def test_commuting_direction(self):
        """For [H, B] = 0 the derivative is -i dt B e^{-iH dt}."""
        h = np.diag([1.0, -2.0]).astype(complex)
        b = np.diag([0.5, 3.0]).astype(complex)
        expected = -1j * 0.3 * b @ expm(-1j * h * 0.3)
        assert np.allclose(exp_derivative(h, b, 0.3), expected, atol=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            exp_derivative(np.eye(2), np.eye(4), 0.2)


class TestFidelityGradient:

    @pytest.mark.parametrize("n_qubits,target", [(1, "not"), (2, "swap"), (3, "not")])
    def test_matches_finite_difference(self, n_qubits, target, rng):
        system = SpinChainSystem.build(n_qubits)
        gate = target_gate(target, n_qubits)
        controls = ControlSequence(0.2, rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 6))

        def fidelity_at(vector):
            return gate_fidelity(gate, propagate(system, ControlSequence.from_vector(vector, 0.2)).total)

        grad_x, grad_y = fidelity_gradient(system, controls, gate)
        numeric = central_difference(fidelity_at, controls.as_vector())
        assert relative_max_error(np.concatenate([grad_x, grad_y]), numeric) < 1e-6

    def test_fidelity_matches_gate_fidelity(self, chain2, random_controls):
        gate = target_gate("swap", 2)
        result = fidelity_and_gradient(chain2, random_controls, gate)
        assert result.fidelity == pytest.approx(gate_fidelity(gate, propagate(chain2, random_controls).total))
        assert not result.singular

    def test_singular_overlap(self, single_qubit, caplog):
        """Identity evolution against NOT: Tr = 0, zero gradient and a warning."""
        controls = ControlSequence.zeros(4, 0.2)
        result = fidelity_and_gradient(single_qubit, controls, target_gate("not", 1))
        assert result.singular
        assert result.fidelity == 0.0
        assert not np.any(result.grad_x)
        assert not np.any(result.grad_y)
        assert "singular" in caplog.text
