#!/usr/bin/env python3
"""
selfcheck.py — Numerical invariant checks against independent oracles.

Checks:
  1. Objective gradient vs central finite differences (50 random small instances)
  2. Power-fraction gradient vs finite differences, ⟨∇P, h⟩ = 0, P ∈ [0, 1]
  3. DFT unitarity (Parseval) and agreement with direct O(n²) summation
  4. Unitarity of every slice and total propagator
  5. Si(x) vs adaptive quadrature of sin(t)/t, and oddness
  6. Filtered controls vs quadrature convolution with the ideal low-pass kernel
  7. Seeded initialisation is reproducible bit for bit

Each check takes the function under test as an argument, so a deliberately
broken implementation can be passed in to confirm the check catches it.

Usage:
    python selfcheck.py            # exit code 3 if any check fails
"""

import argparse
import math
import sys
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

import dynamics
import lowpass
import optimize_pulses
import spectral
from dynamics import ControlSequence
from spectral import ObjectiveSpec, SpectralBand
from spin_model import SpinChainSystem, target_gate

SELFTEST_FAILURE_EXIT = 3
FD_STEP = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def central_difference(fun: Callable[[np.ndarray], float], x: np.ndarray, eps: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    gradient = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        gradient[i] = (fun(x + step) - fun(x - step)) / (2 * eps)
    return gradient


def relative_max_error(actual: np.ndarray, expected: np.ndarray, floor: float = 1e-10) -> float:
    """max|a - e| / max|e|, falling back to the absolute error when e ≈ 0."""
    scale = float(np.max(np.abs(expected))) if np.size(expected) else 0.0
    error = float(np.max(np.abs(np.asarray(actual) - np.asarray(expected)))) if np.size(expected) else 0.0
    return error / scale if scale > floor else error


def sine_integral_oracle(x: float) -> float:
    value, _ = quad(lambda s: np.sinc(s / np.pi), 0.0, x, epsabs=1e-14, epsrel=1e-13, limit=500)
    return value


def convolution_oracle(start: float, stop: float, amplitude: float, omega0: float, t: float) -> float:
    """Ideal low-pass kernel sin(ω0(t-s))/(π(t-s)) integrated against a rectangle."""
    kernel = lambda s: (omega0 / np.pi) * np.sinc(omega0 * (t - s) / np.pi)  # noqa: E731
    value, _ = quad(kernel, start, stop, epsabs=1e-13, epsrel=1e-12, limit=500)
    return amplitude * value


def random_instance(rng: np.random.Generator, max_qubits: int = 3, max_slices: int = 16):
    """Random (spec, controls) pair with N ≤ max_qubits, even n ≤ max_slices."""
    n_qubits = int(rng.integers(1, max_qubits + 1))
    target_name = "swap" if n_qubits >= 2 and rng.random() < 0.5 else "not"
    n = 2 * int(rng.integers(1, max_slices // 2 + 1))
    dt = 0.2
    spec = ObjectiveSpec(
        mu=float(rng.uniform(0.0, 1.0)),
        band=SpectralBand(n, int(rng.integers(0, n // 2))),
        system=SpinChainSystem.build(n_qubits),
        target=target_gate(target_name, n_qubits),
        dt=dt,
    )
    controls = ControlSequence(dt, rng.uniform(-1, 1, n), rng.uniform(-1, 1, n))
    return spec, controls


def check_objective_gradient(
    evaluate=spectral.evaluate_objective,
    instances: int = 50,
    tolerance: float = 1e-6,
    seed: int = 2012,
) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        spec, controls = random_instance(rng)
        analytic = evaluate(spec, controls).gradient

        def value_at(vector, spec=spec, dt=controls.dt):
            return evaluate(spec, ControlSequence.from_vector(vector, dt)).value

        numeric = central_difference(value_at, controls.as_vector())
        worst = max(worst, relative_max_error(analytic, numeric))
    return CheckResult(
        "objective gradient vs finite differences",
        worst < tolerance,
        f"worst relative error {worst:.2e} over {instances} instances (tolerance {tolerance:g})",
    )


def check_power_gradient(
    power_gradient_fn=spectral.power_gradient,
    trials: int = 20,
    tolerance: float = 1e-7,
    seed: int = 7,
) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_orthogonality = 0.0
    for _ in range(trials):
        band = SpectralBand.quarter(64)
        h = rng.normal(size=64)
        analytic = power_gradient_fn(h, band)
        numeric = central_difference(lambda v: spectral.power_fraction(v, band), h)
        worst = max(worst, relative_max_error(analytic, numeric))
        orthogonality = abs(float(np.dot(analytic, h))) / max(
            float(np.linalg.norm(analytic) * np.linalg.norm(h)), 1e-300
        )
        worst_orthogonality = max(worst_orthogonality, orthogonality)
    passed = worst < tolerance and worst_orthogonality < 1e-9
    return CheckResult(
        "power-fraction gradient vs finite differences",
        passed,
        f"worst relative error {worst:.2e}, worst |⟨∇P, h⟩|/(|∇P||h|) {worst_orthogonality:.2e}",
    )


def check_power_fraction_range(power_fraction_fn=spectral.power_fraction, trials: int = 200, seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_scale = 0.0
    in_range = True
    for _ in range(trials):
        n = 2 * int(rng.integers(1, 65))
        band = SpectralBand(n, int(rng.integers(0, n // 2 + 1)))
        h = rng.normal(size=n)
        value = power_fraction_fn(h, band)
        in_range &= 0.0 <= value <= 1.0
        scaled = power_fraction_fn(float(rng.uniform(-100, 100)) * h, band)
        worst_scale = max(worst_scale, abs(scaled - value))
    return CheckResult(
        "power fraction in [0, 1] and scale invariant",
        bool(in_range) and worst_scale < 1e-12,
        f"range ok: {bool(in_range)}, worst scale deviation {worst_scale:.2e}",
    )


def check_parseval(dft_fn=spectral.dft, trials: int = 50, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        h = rng.normal(size=int(rng.integers(1, 257)))
        y = dft_fn(h)
        energy = float(np.dot(h, h))
        worst = max(worst, abs(float(np.sum(np.abs(y) ** 2)) - energy) / energy)

    n = 128
    h = rng.normal(size=n)
    k, l = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    direct = (np.exp(2j * np.pi * k * l / n) @ h) / math.sqrt(n)
    direct_error = float(np.max(np.abs(dft_fn(h) - direct))) / float(np.linalg.norm(h))
    return CheckResult(
        "DFT unitarity (Parseval)",
        worst < 1e-10 and direct_error < 1e-10,
        f"worst Parseval error {worst:.2e}, deviation from direct summation {direct_error:.2e}",
    )


def check_unitarity(propagate_fn=dynamics.propagate, trials: int = 100, seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        spec, controls = random_instance(rng)
        result = propagate_fn(spec.system, controls)
        eye = np.eye(spec.system.dim)
        for unitary in list(result.slice_unitaries) + [result.total]:
            worst = max(worst, float(np.max(np.abs(unitary.conj().T @ unitary - eye))))
    return CheckResult(
        "propagator unitarity",
        worst < 1e-10,
        f"worst ‖U†U - I‖_max {worst:.2e} over {trials} random sequences",
    )


def check_sine_integral(si_fn=lowpass.sine_integral, seed: int = 13) -> CheckResult:
    rng = np.random.default_rng(seed)
    points = [0.0, math.pi, 1e-8, 1.0, 16.0, 16.5, 40.0] + list(rng.uniform(-50, 50, 30))
    worst = max(abs(si_fn(x) - sine_integral_oracle(x)) for x in points)
    odd = max(abs(si_fn(-x) + si_fn(x)) for x in points)
    bounded = all(abs(si_fn(x)) < math.pi / 2 + 0.2 for x in points)
    return CheckResult(
        "sine integral vs quadrature",
        worst < 1e-10 and odd < 1e-13 and bounded,
        f"worst error {worst:.2e}, worst oddness defect {odd:.2e}",
    )


def check_filtered_control(filtered_fn=lowpass.filtered_control, trials: int = 5, seed: int = 17) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n, dt = 16, 0.2
        omega0 = float(rng.uniform(1.0, 20.0))
        index = int(rng.integers(0, n))
        amplitude = float(rng.uniform(-2, 2))
        hx = np.zeros(n)
        hx[index] = amplitude
        controls = ControlSequence(dt, hx, np.zeros(n))
        for t in rng.uniform(0, n * dt, 20):
            value, _ = filtered_fn(controls, omega0, float(t))
            expected = convolution_oracle(index * dt, (index + 1) * dt, amplitude, omega0, float(t))
            worst = max(worst, abs(value - expected))
    return CheckResult(
        "filtered controls vs convolution oracle",
        worst < 1e-8,
        f"worst absolute error {worst:.2e}",
    )


def check_determinism(init_fn=optimize_pulses.init_controls) -> CheckResult:
    first = init_fn(42, 128, 0.2, 1.0)
    second = init_fn(42, 128, 0.2, 1.0)
    identical = first.as_vector().tobytes() == second.as_vector().tobytes()
    return CheckResult("seeded initialisation reproducible", identical, f"bitwise identical: {identical}")


ALL_CHECKS = (
    check_objective_gradient,
    check_power_gradient,
    check_power_fraction_range,
    check_parseval,
    check_unitarity,
    check_sine_integral,
    check_filtered_control,
    check_determinism,
)


def run_all_checks() -> list[CheckResult]:
    return [check() for check in ALL_CHECKS]


def report(results: list[CheckResult]) -> int:
    """Print the report; return the process exit code."""
    for result in results:
        marker = "✓" if result.passed else "✗"
        print(f"  {marker} {result.name}: {result.detail}")
    failed = [r for r in results if not r.passed]
    print(f"\n  {len(results) - len(failed)}/{len(results)} checks passed")
    return SELFTEST_FAILURE_EXIT if failed else 0


def main():
    parser = argparse.ArgumentParser(description="Run the numerical self-test suite")
    parser.parse_args()
    started = time.perf_counter()
    print("🔬 Self-test")
    code = report(run_all_checks())
    print(f"  Elapsed: {time.perf_counter() - started:.1f} s")
    sys.exit(code)


if __name__ == "__main__":
    main()
