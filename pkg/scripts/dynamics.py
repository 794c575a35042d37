"""
dynamics.py — Piecewise-constant propagation, gate fidelity and its exact gradient.

Slice i (1-based) holds H_i = H0 + hx_i σ_x^1 + hy_i σ_y^1 on [(i-1)dt, i dt].
The total propagator is U = U_n ··· U_2 U_1, slice 1 acting first.

Every slice exponential comes from a Hermitian eigendecomposition, which is
reused for the exact directional derivative of exp(-i H dt) (divided
differences of the exponential over the eigenvalues). Prefix and suffix
products are cached so the full gradient costs O(n) exponentials.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from spin_model import SpinChainSystem, TargetGate

logger = logging.getLogger(__name__)

# |λ_p - λ_q|·dt below this uses the diagonal limit of the divided difference
DEGENERACY_TOL = 1e-9
# |Tr(U_T† U)| below this makes |·| non-differentiable in practice
SINGULAR_TRACE_TOL = 1e-14


class PropagationError(RuntimeError):
    """Eigendecomposition of a slice Hamiltonian failed."""

    def __init__(self, slice_index: int, message: str):
        super().__init__(f"slice {slice_index}: {message}")
        self.slice_index = slice_index


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """n slices of duration dt with amplitudes hx, hy (units of J)."""

    dt: float
    hx: np.ndarray
    hy: np.ndarray

    def __post_init__(self):
        hx = np.array(self.hx, dtype=float).reshape(-1)
        hy = np.array(self.hy, dtype=float).reshape(-1)
        if hx.size < 1:
            raise ValueError("control sequence needs at least one slice")
        if hx.shape != hy.shape:
            raise ValueError(f"hx has {hx.size} slices but hy has {hy.size}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"slice duration must be positive, got {self.dt!r}")
        if not (np.all(np.isfinite(hx)) and np.all(np.isfinite(hy))):
            raise ValueError("control amplitudes must be finite")
        hx.setflags(write=False)
        hy.setflags(write=False)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "hx", hx)
        object.__setattr__(self, "hy", hy)

    @property
    def n(self) -> int:
        return self.hx.size

    @property
    def total_duration(self) -> float:
        return self.n * self.dt

    @property
    def slice_starts(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    def as_vector(self) -> np.ndarray:
        """Flatten to [hx..., hy...], the optimiser's parameter layout."""
        return np.concatenate([self.hx, self.hy])

    @classmethod
    def from_vector(cls, vector: np.ndarray, dt: float) -> "ControlSequence":
        vector = np.asarray(vector, dtype=float)
        if vector.size % 2:
            raise ValueError(f"parameter vector length {vector.size} is odd")
        half = vector.size // 2
        return cls(dt, vector[:half], vector[half:])

    @classmethod
    def zeros(cls, n: int, dt: float) -> "ControlSequence":
        return cls(dt, np.zeros(n), np.zeros(n))


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Slice unitaries, cumulative products and the decompositions behind them.

    prefix_products[i] = U_{i+1} ··· U_1 (0-based i), so prefix_products[-1] is the total.
    """

    slice_unitaries: np.ndarray
    prefix_products: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.prefix_products[-1]


class FidelityGradient(NamedTuple):
    fidelity: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    singular: bool


def slice_hamiltonian(system: SpinChainSystem, hx_i: float, hy_i: float) -> np.ndarray:
    """H0 + hx_i σ_x^1 + hy_i σ_y^1."""
    return system.drift + hx_i * system.control_x + hy_i * system.control_y


def _slice_hamiltonians(system: SpinChainSystem, controls: ControlSequence) -> np.ndarray:
    return (
        system.drift[None, :, :]
        + controls.hx[:, None, None] * system.control_x[None, :, :]
        + controls.hy[:, None, None] * system.control_y[None, :, :]
    )


def _eigh_slices(hamiltonians: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(hamiltonians)
    except np.linalg.LinAlgError as exc:
        for index, hamiltonian in enumerate(hamiltonians, start=1):
            try:
                np.linalg.eigh(hamiltonian)
            except np.linalg.LinAlgError:
                raise PropagationError(index, f"eigendecomposition failed: {exc}") from exc
        raise PropagationError(0, f"eigendecomposition failed: {exc}") from exc


def _dagger(matrices: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(matrices, -1, -2))


def _exp_from_eigh(eigenvalues: np.ndarray, eigenvectors: np.ndarray, dt: float) -> np.ndarray:
    phases = np.exp(-1j * eigenvalues * dt)
    return (eigenvectors * phases[..., None, :]) @ _dagger(eigenvectors)


def _divided_differences(eigenvalues: np.ndarray, dt: float) -> np.ndarray:
    """Γ_pq = (e^{-iλ_p dt} - e^{-iλ_q dt}) / (-i(λ_p - λ_q)dt), Γ_pp = e^{-iλ_p dt}."""
    phases = np.exp(-1j * eigenvalues * dt)
    gaps = eigenvalues[..., :, None] - eigenvalues[..., None, :]
    numerator = phases[..., :, None] - phases[..., None, :]
    degenerate = np.abs(gaps) * dt < DEGENERACY_TOL
    safe_gaps = np.where(degenerate, 1.0, gaps)
    diagonal_limit = np.broadcast_to(phases[..., :, None], numerator.shape)
    return np.where(degenerate, diagonal_limit, numerator / (-1j * safe_gaps * dt))


def _exp_derivative_from_eigh(
    eigenvalues: np.ndarray,
    eigenvectors: np.ndarray,
    direction: np.ndarray,
    dt: float,
) -> np.ndarray:
    rotated = _dagger(eigenvectors) @ (-1j * dt * direction) @ eigenvectors
    return eigenvectors @ (rotated * _divided_differences(eigenvalues, dt)) @ _dagger(eigenvectors)


def exp_derivative(hamiltonian: np.ndarray, direction: np.ndarray, dt: float) -> np.ndarray:
    """d/ds exp(-i (H + sB) dt) at s = 0, for Hermitian H and B."""
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    direction = np.asarray(direction, dtype=complex)
    if hamiltonian.shape != direction.shape:
        raise ValueError(f"shape mismatch: H {hamiltonian.shape} vs B {direction.shape}")
    eigenvalues, eigenvectors = np.linalg.eigh(hamiltonian)
    return _exp_derivative_from_eigh(eigenvalues, eigenvectors, direction, dt)


def propagate(system: SpinChainSystem, controls: ControlSequence) -> PropagationResult:
    """Exact piecewise-constant evolution U = U_n ··· U_1."""
    eigenvalues, eigenvectors = _eigh_slices(_slice_hamiltonians(system, controls))
    slices = _exp_from_eigh(eigenvalues, eigenvectors, controls.dt)

    prefix = np.empty_like(slices)
    accumulated = np.eye(system.dim, dtype=complex)
    for i in range(controls.n):
        accumulated = slices[i] @ accumulated
        prefix[i] = accumulated

    for array in (slices, prefix, eigenvalues, eigenvectors):
        array.setflags(write=False)
    return PropagationResult(slices, prefix, eigenvalues, eigenvectors)


def _trace_overlap(target: TargetGate, unitary: np.ndarray) -> complex:
    unitary = np.asarray(unitary)
    if unitary.shape != target.unitary.shape:
        raise ValueError(
            f"dimension mismatch: target is {target.unitary.shape}, unitary is {unitary.shape}"
        )
    # vdot conjugates its first argument: Σ conj(T_ij) U_ij = Tr(T† U)
    return complex(np.vdot(target.unitary, unitary))


def gate_fidelity(target: TargetGate, unitary: np.ndarray) -> float:
    """F = |Tr(U_T† U)| / 2^N, insensitive to global phase."""
    tau = _trace_overlap(target, unitary)
    return min(abs(tau) / target.dim, 1.0)


def fidelity_and_gradient(
    system: SpinChainSystem,
    controls: ControlSequence,
    target: TargetGate,
) -> FidelityGradient:
    """Fidelity plus ∂F/∂hx_i and ∂F/∂hy_i from one propagation."""
    propagation = propagate(system, controls)
    tau = _trace_overlap(target, propagation.total)
    fidelity = min(abs(tau) / target.dim, 1.0)

    if abs(tau) < SINGULAR_TRACE_TOL:
        logger.warning("fidelity gradient singular at F≈0 (|Tr(U_T† U)| = %.3g)", abs(tau))
        zeros = np.zeros(controls.n)
        return FidelityGradient(fidelity, zeros, zeros.copy(), True)

    slices = propagation.slice_unitaries
    eye = np.eye(system.dim, dtype=complex)

    # suffix[i] = U_n ··· U_{i+2}, before[i] = U_i ··· U_1 (0-based slice i)
    suffix = np.empty_like(slices)
    accumulated = eye
    for i in range(controls.n - 1, -1, -1):
        suffix[i] = accumulated
        accumulated = accumulated @ slices[i]
    before = np.concatenate([eye[None], propagation.prefix_products[:-1]], axis=0)

    # Tr(U_T† suffix D before) = Tr(before U_T† suffix · D)
    cyclic = before @ _dagger(target.unitary) @ suffix

    gradients = []
    for generator in system.generators:
        derivative = _exp_derivative_from_eigh(
            propagation.eigenvalues, propagation.eigenvectors, generator, controls.dt
        )
        dtau = np.einsum("nij,nji->n", cyclic, derivative)
        gradients.append(np.real(np.conj(tau) * dtau) / (target.dim * abs(tau)))

    return FidelityGradient(fidelity, gradients[0], gradients[1], False)


def fidelity_gradient(
    system: SpinChainSystem,
    controls: ControlSequence,
    target: TargetGate,
) -> tuple[np.ndarray, np.ndarray]:
    """(∂F/∂hx, ∂F/∂hy); zero vectors when Tr(U_T† U) vanishes."""
    result = fidelity_and_gradient(system, controls, target)
    return result.grad_x, result.grad_y
