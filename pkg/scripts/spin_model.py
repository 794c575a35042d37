#!/usr/bin/env python3
"""
spin_model.py — Heisenberg spin chain with local Zeeman control on the first spin.

Builds dense complex matrices for:
  - Pauli operators embedded at a chain site
  - The isotropic nearest-neighbour drift H0 = J Σ_i Σ_k σ_k^i σ_k^{i+1}
  - The two control generators σ_x^1, σ_y^1
  - Target gates NOT_N (flip last qubit) and SWAP_N (swap last two qubits)

Conventions:
  - S_k is the full Pauli matrix σ_k, not σ_k/2.
  - Site 1 is the leftmost (most significant) tensor factor.
  - ħ = 1, energies in units of J, times in units of 1/J.

Usage:
    python spin_model.py --qubits 3 --target not
"""

import argparse
from dataclasses import dataclass
from functools import reduce

import numpy as np

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

SWAP_2Q = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)

TARGET_NAMES = ("not", "swap")


def _check_qubits(n_qubits: int) -> None:
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ValueError(f"qubit count must be an integer ≥ 1, got {n_qubits!r}")


def _kron_all(factors: list[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, factors, np.eye(1, dtype=complex))


def pauli_embed(axis: str, site: int, n_qubits: int) -> np.ndarray:
    """Return I^{⊗(site-1)} ⊗ σ_axis ⊗ I^{⊗(N-site)} as a 2^N × 2^N matrix."""
    _check_qubits(n_qubits)
    if axis not in PAULI:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    if not 1 <= site <= n_qubits:
        raise ValueError(f"site {site} out of range 1..{n_qubits}")
    eye = np.eye(2, dtype=complex)
    factors = [PAULI[axis] if i == site else eye for i in range(1, n_qubits + 1)]
    return _kron_all(factors)


def build_drift(n_qubits: int, coupling: float = 1.0) -> np.ndarray:
    """Isotropic Heisenberg drift on an open chain of n_qubits spins."""
    _check_qubits(n_qubits)
    dim = 2 ** n_qubits
    drift = np.zeros((dim, dim), dtype=complex)
    for site in range(1, n_qubits):
        for axis in "xyz":
            drift += pauli_embed(axis, site, n_qubits) @ pauli_embed(axis, site + 1, n_qubits)
    return coupling * drift


@dataclass(frozen=True, eq=False)
class SpinChainSystem:
    """Drift and control generators for a chain controlled on its first spin."""

    n_qubits: int
    coupling: float
    drift: np.ndarray
    control_x: np.ndarray
    control_y: np.ndarray

    @classmethod
    def build(cls, n_qubits: int, coupling: float = 1.0) -> "SpinChainSystem":
        drift = build_drift(n_qubits, coupling)
        control_x = pauli_embed("x", 1, n_qubits)
        control_y = pauli_embed("y", 1, n_qubits)
        for matrix in (drift, control_x, control_y):
            matrix.setflags(write=False)
        return cls(n_qubits, coupling, drift, control_x, control_y)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def generators(self) -> tuple[np.ndarray, np.ndarray]:
        return self.control_x, self.control_y


@dataclass(frozen=True, eq=False)
class TargetGate:
    """Unitary to synthesise, tagged with a short name for reports."""

    name: str
    n_qubits: int
    unitary: np.ndarray

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


def target_not(n_qubits: int) -> TargetGate:
    """NOT_N = I^{⊗(N-1)} ⊗ σ_x, negation of the last qubit."""
    _check_qubits(n_qubits)
    unitary = np.kron(np.eye(2 ** (n_qubits - 1), dtype=complex), PAULI["x"])
    unitary.setflags(write=False)
    return TargetGate(f"NOT{n_qubits}", n_qubits, unitary)


def target_swap(n_qubits: int) -> TargetGate:
    """SWAP_N = I^{⊗(N-2)} ⊗ SWAP, exchange of the last two qubits."""
    _check_qubits(n_qubits)
    if n_qubits < 2:
        raise ValueError(f"SWAP target needs at least 2 qubits, got {n_qubits}")
    unitary = np.kron(np.eye(2 ** (n_qubits - 2), dtype=complex), SWAP_2Q)
    unitary.setflags(write=False)
    return TargetGate(f"SWAP{n_qubits}", n_qubits, unitary)


def target_gate(name: str, n_qubits: int) -> TargetGate:
    """Look up a target by its config name ('not' or 'swap')."""
    builders = {"not": target_not, "swap": target_swap}
    if name not in builders:
        raise ValueError(f"unknown target {name!r}, expected one of {', '.join(TARGET_NAMES)}")
    return builders[name](n_qubits)


def main():
    parser = argparse.ArgumentParser(description="Inspect the spin chain model")
    parser.add_argument("--qubits", type=int, default=3, help="Chain length N (default: 3)")
    parser.add_argument("--coupling", type=float, default=1.0, help="Coupling J (default: 1)")
    parser.add_argument("--target", choices=TARGET_NAMES, default="not")
    args = parser.parse_args()

    system = SpinChainSystem.build(args.qubits, args.coupling)
    target = target_gate(args.target, args.qubits)
    spectrum = np.linalg.eigvalsh(system.drift)

    print(f"Heisenberg chain: N={system.n_qubits}, J={system.coupling}, dim={system.dim}")
    print(f"  Drift spectrum: {np.array2string(np.round(spectrum, 6), separator=', ')}")
    print(f"  Target: {target.name}")


if __name__ == "__main__":
    main()
