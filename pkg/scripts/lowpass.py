#!/usr/bin/env python3
"""
lowpass.py — Ideal low-pass filtering of piecewise-constant controls.

An ideal filter passing only |ω| ≤ ω0 turns a rectangular pulse on [a, b] into

    (1/π) [Si(ω0 (b - t)) - Si(ω0 (a - t))],

so a sequence whose slice i occupies [(i-1)dt, i dt] filters to

    h_k(t) = (1/π) Σ_i h_{k,i} [Si(ω0 (i dt - t)) - Si(ω0 ((i-1) dt - t))].

The filtered controls are evaluated only inside the window [0, n dt]; the
experiment is assumed to drive nothing outside it. Filtered evolution is
approximated by a finer piecewise-constant sequence sampled at the midpoint
of each of n·oversample sub-slices.

Usage:
    python lowpass.py --slices 128 --delta 32 --dt 0.2
"""

import argparse
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import sici

from dynamics import ControlSequence, gate_fidelity, propagate
from spectral import SpectralBand
from spin_model import SpinChainSystem, TargetGate

DEFAULT_OVERSAMPLE = 16
# slack on the window check for times computed in floating point
WINDOW_TOL = 1e-12


@dataclass(frozen=True)
class FilterSpec:
    omega0: float
    oversample: int = DEFAULT_OVERSAMPLE

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise ValueError(f"cutoff omega0 must be positive, got {self.omega0}")
        if int(self.oversample) != self.oversample or self.oversample < 1:
            raise ValueError(f"oversample must be an integer ≥ 1, got {self.oversample}")


def sine_integral(x):
    """Si(x) = ∫_0^x sin(t)/t dt, for scalars or arrays."""
    si, _ = sici(x)
    if np.ndim(si) == 0:
        return float(si)
    return si


def cutoff_from_band(n: int, delta: int, dt: float) -> float:
    """Angular frequency of the lowest penalised DFT index, 2π(n/2 - Δ)/(n dt)."""
    band = SpectralBand(n, delta)
    if not dt > 0:
        raise ValueError(f"slice duration must be positive, got {dt}")
    if band.low == 0:
        raise ValueError(f"Δ={delta} = n/2 leaves no pass band (ω0 = 0)")
    return 2.0 * math.pi * band.low / (n * dt)


def _filter_weights(controls: ControlSequence, omega0: float, times: np.ndarray) -> np.ndarray:
    edges = np.arange(controls.n + 1) * controls.dt
    integrals = sici(omega0 * (edges[None, :] - times[:, None]))[0]
    return (integrals[:, 1:] - integrals[:, :-1]) / math.pi


def filtered_control(controls: ControlSequence, omega0: float, t):
    """Filtered (hx, hy) at time(s) t inside [0, n dt]."""
    if not omega0 > 0:
        raise ValueError(f"cutoff omega0 must be positive, got {omega0}")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    window = controls.total_duration
    if np.any(times < -WINDOW_TOL) or np.any(times > window + WINDOW_TOL):
        raise ValueError(f"filtered controls are defined on [0, {window}] only")

    weights = _filter_weights(controls, omega0, times)
    hx_filtered = weights @ controls.hx
    hy_filtered = weights @ controls.hy
    if np.ndim(t) == 0:
        return float(hx_filtered[0]), float(hy_filtered[0])
    return hx_filtered, hy_filtered


def filtered_samples(
    controls: ControlSequence,
    filter_spec: FilterSpec,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub-slice midpoints and the filtered controls sampled there."""
    sub_dt = controls.dt / filter_spec.oversample
    times = (np.arange(controls.n * filter_spec.oversample) + 0.5) * sub_dt
    hx_filtered, hy_filtered = filtered_control(controls, filter_spec.omega0, times)
    return times, hx_filtered, hy_filtered


def filtered_sequence(controls: ControlSequence, filter_spec: FilterSpec) -> ControlSequence:
    """Piecewise-constant stand-in for the filtered controls."""
    _, hx_filtered, hy_filtered = filtered_samples(controls, filter_spec)
    return ControlSequence(controls.dt / filter_spec.oversample, hx_filtered, hy_filtered)


def filtered_fidelity(
    system: SpinChainSystem,
    controls: ControlSequence,
    target: TargetGate,
    filter_spec: FilterSpec,
) -> float:
    """Gate fidelity reached when the controls pass through the ideal filter."""
    evolution = propagate(system, filtered_sequence(controls, filter_spec))
    return gate_fidelity(target, evolution.total)


def main():
    parser = argparse.ArgumentParser(description="Cutoff frequency for a spectral band")
    parser.add_argument("--slices", type=int, default=128, help="Slices per direction (default: 128)")
    parser.add_argument("--delta", type=int, help="Band half-width (default: slices/4)")
    parser.add_argument("--dt", type=float, default=0.2, help="Slice duration (default: 0.2)")
    args = parser.parse_args()

    delta = args.slices // 4 if args.delta is None else args.delta
    omega0 = cutoff_from_band(args.slices, delta, args.dt)
    print(f"n={args.slices}, Δ={delta}, dt={args.dt}")
    print(f"  ω0 = {omega0:.10f} (Nyquist π/dt = {math.pi / args.dt:.10f})")


if __name__ == "__main__":
    main()
