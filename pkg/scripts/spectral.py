"""
spectral.py — High-frequency power penalty and the combined objective G.

For a control vector h of length n the unitary DFT is

    y_k = n^{-1/2} Σ_l e^{+2πi kl/n} h_l

and the penalised share of power is the band around the Nyquist index,

    P = Σ_{k=n/2-Δ}^{n/2+Δ} |y_k|² / |y|²,

so with Δ = n/4 the band is the upper half of the spectrum. The objective
minimised by the optimiser is

    G = (1 - μ) P_total - μ F,   P_total = (P(hx) + P(hy)) / 2.

Gradients are analytic: ∂|y_k|²/∂h_l = (2/√n) Re(e^{-2πi kl/n} y_k), summed
over the band with a single forward FFT, then the quotient rule using
∂|y|²/∂h_l = 2 h_l (Parseval).
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from dynamics import ControlSequence, fidelity_and_gradient
from spin_model import SpinChainSystem, TargetGate

logger = logging.getLogger(__name__)

# |h|² below this is treated as the zero signal, whose P is defined as 0
ZERO_SIGNAL_TOL = 1e-300


@dataclass(frozen=True)
class SpectralBand:
    """Penalised DFT indices n/2 - Δ ... n/2 + Δ, both ends inclusive."""

    n: int
    delta: int

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError(f"band needs an even signal length ≥ 2, got n={self.n}")
        if not 0 <= self.delta <= self.n // 2:
            raise ValueError(f"band half-width Δ={self.delta} outside 0..{self.n // 2}")

    @classmethod
    def quarter(cls, n: int) -> "SpectralBand":
        """The Δ = n/4 band used throughout the experiments."""
        return cls(n, n // 4)

    @property
    def low(self) -> int:
        return self.n // 2 - self.delta

    @property
    def high(self) -> int:
        # n/2 + Δ reaches n only when Δ = n/2; index n aliases 0, already inside
        return min(self.n // 2 + self.delta, self.n - 1)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.low, self.high + 1)

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.low:self.high + 1] = True
        return mask


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """Everything needed to evaluate G for a control sequence."""

    mu: float
    band: SpectralBand
    system: SpinChainSystem
    target: TargetGate
    dt: float

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"fidelity weight mu={self.mu} outside [0, 1]")
        if self.system.n_qubits != self.target.n_qubits:
            raise ValueError(
                f"system has {self.system.n_qubits} qubits, target {self.target.name} "
                f"has {self.target.n_qubits}"
            )
        if not self.dt > 0:
            raise ValueError(f"slice duration must be positive, got {self.dt}")


class ObjectiveValue(NamedTuple):
    value: float
    gradient: np.ndarray
    fidelity: float
    power_x: float
    power_y: float
    singular: bool
    degenerate: bool

    @property
    def power_total(self) -> float:
        return 0.5 * (self.power_x + self.power_y)


def dft(h: np.ndarray) -> np.ndarray:
    """Unitary DFT with the positive-exponent convention y = Q h."""
    h = np.asarray(h, dtype=float)
    if h.size < 1:
        raise ValueError("DFT of an empty signal")
    # numpy's ortho inverse transform is exactly n^{-1/2} Σ e^{+2πi kl/n} h_l
    return np.fft.ifft(h, norm="ortho")


def power_spectrum(h: np.ndarray) -> np.ndarray:
    """|y_k|² for every DFT index."""
    return np.abs(dft(h)) ** 2


def is_degenerate(h: np.ndarray) -> bool:
    h = np.asarray(h, dtype=float)
    return float(np.dot(h, h)) < ZERO_SIGNAL_TOL


def power_fraction(h: np.ndarray, band: SpectralBand) -> float:
    """Share of |y|² inside the band; 0 for the zero signal."""
    h = np.asarray(h, dtype=float)
    if h.size != band.n:
        raise ValueError(f"signal length {h.size} does not match band length {band.n}")
    total = float(np.dot(h, h))
    if total < ZERO_SIGNAL_TOL:
        return 0.0
    in_band = float(np.sum(power_spectrum(h)[band.mask]))
    return min(max(in_band / total, 0.0), 1.0)


def power_gradient(h: np.ndarray, band: SpectralBand) -> np.ndarray:
    """∂P/∂h_l; zero vector for the zero signal."""
    h = np.asarray(h, dtype=float)
    if h.size != band.n:
        raise ValueError(f"signal length {h.size} does not match band length {band.n}")
    total = float(np.dot(h, h))
    if total < ZERO_SIGNAL_TOL:
        return np.zeros(band.n)

    y = dft(h)
    in_band = np.where(band.mask, y, 0.0)
    fraction = float(np.sum(np.abs(in_band) ** 2)) / total
    # Σ_band e^{-2πi kl/n} y_k is a forward FFT of the masked spectrum
    band_gradient = 2.0 * np.real(np.fft.fft(in_band, norm="ortho"))
    return (band_gradient - 2.0 * fraction * h) / total


def evaluate_objective(spec: ObjectiveSpec, controls: ControlSequence) -> ObjectiveValue:
    """G, its gradient over [hx..., hy...], and the pieces that make it up."""
    if controls.n != spec.band.n:
        raise ValueError(f"controls have {controls.n} slices, band expects {spec.band.n}")

    overlap = fidelity_and_gradient(spec.system, controls, spec.target)
    power_x = power_fraction(controls.hx, spec.band)
    power_y = power_fraction(controls.hy, spec.band)
    degenerate = is_degenerate(controls.hx) or is_degenerate(controls.hy)
    if degenerate:
        logger.debug("zero control direction, its power fraction is taken as 0")

    penalty_weight = 0.5 * (1.0 - spec.mu)
    value = (1.0 - spec.mu) * 0.5 * (power_x + power_y) - spec.mu * overlap.fidelity
    gradient = np.concatenate([
        penalty_weight * power_gradient(controls.hx, spec.band) - spec.mu * overlap.grad_x,
        penalty_weight * power_gradient(controls.hy, spec.band) - spec.mu * overlap.grad_y,
    ])
    return ObjectiveValue(
        value=float(value),
        gradient=gradient,
        fidelity=overlap.fidelity,
        power_x=power_x,
        power_y=power_y,
        singular=overlap.singular and spec.mu > 0,
        degenerate=degenerate,
    )


def objective(spec: ObjectiveSpec, controls: ControlSequence) -> tuple[float, np.ndarray]:
    """(G, ∇G) with ∇G laid out as [∂G/∂hx..., ∂G/∂hy...]."""
    result = evaluate_objective(spec, controls)
    return result.value, result.gradient
