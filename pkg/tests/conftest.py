"""
Shared fixtures and utilities for the pulse synthesis test suite.

Slow tests (full-size ensembles) are skipped unless pytest runs with --runslow.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add scripts to path
sys.path.insert(0, str(Path(__file__).parent.parent / "scripts"))

from dynamics import ControlSequence  # noqa: E402
from spectral import ObjectiveSpec, SpectralBand  # noqa: E402
from spin_model import SpinChainSystem, target_gate  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow ensemble tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size ensembles, skipped without --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ─── Fixtures: Systems and Controls ───────────────────────────────────────────

@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def single_qubit():
    return SpinChainSystem.build(1)


@pytest.fixture
def chain2():
    return SpinChainSystem.build(2)


@pytest.fixture
def chain3():
    return SpinChainSystem.build(3)


@pytest.fixture
def random_controls(rng):
    """Eight slices of dt = 0.2 with amplitudes uniform on [-1, 1]."""
    return ControlSequence(0.2, rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8))


@pytest.fixture
def swap2_spec(chain2):
    """G for SWAP on two qubits, eight slices, μ = 0.3, Δ = 2."""
    return ObjectiveSpec(
        mu=0.3,
        band=SpectralBand.quarter(8),
        system=chain2,
        target=target_gate("swap", 2),
        dt=0.2,
    )
