"""
experiment_config.py — Experiment configuration: JSON file, flag overrides, validation.

Precedence: built-in defaults < config file < command-line flags.
Defaults reproduce the published setup: dt = 0.2, n = 128 slices for chains
of up to three qubits and 512 beyond, μ = 0.05, Δ = n/4, 120 runs, starts uniform on [-3, 3].

Example config file:
    {"qubits": 3, "target": "swap", "mu": 1.0, "runs": 20, "delta": "n/4"}
"""

import json
import math
import os
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

from optimize_pulses import DEFAULT_INIT_AMPLITUDE, OptimizerConfig
from spin_model import TARGET_NAMES

KNOWN_KEYS = (
    "qubits", "target", "slices", "dt", "mu", "delta", "runs", "seed", "oversample", "out",
    "max_iterations", "grad_tolerance", "init_amplitude", "workers",
)

SMALL_CHAIN_SLICES = 128
LARGE_CHAIN_SLICES = 512
DEFAULT_DELTA = "n/4"

_SYMBOLIC_DELTA = re.compile(r"^n\s*/\s*(\d+)$")


class ConfigError(ValueError):
    """Invalid configuration; the message names key, value and valid range."""

    def __init__(self, key: str, value: Any, rule: str):
        super().__init__(f"{key}={value!r} is invalid: {rule}")
        self.key = key
        self.value = value
        self.rule = rule


@dataclass(frozen=True)
class ExperimentConfig:
    qubits: int = 3
    target: str = "not"
    slices: int = SMALL_CHAIN_SLICES
    dt: float = 0.2
    mu: float = 0.05
    delta: int = SMALL_CHAIN_SLICES // 4
    runs: int = 120
    seed: int = 0
    oversample: int = 16
    out: str = "results"
    max_iterations: int = 2000
    grad_tolerance: float = 1e-8
    init_amplitude: float = DEFAULT_INIT_AMPLITUDE
    workers: int = 1

    @property
    def output_dir(self) -> Path:
        return Path(self.out)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            max_iterations=self.max_iterations,
            grad_tolerance=self.grad_tolerance,
            init_amplitude=self.init_amplitude,
            seed=self.seed,
        )

    def echo(self) -> dict[str, str]:
        """Provenance block for output headers; out and workers are left out so files do not depend on them."""
        echoed = {}
        for key, value in asdict(self).items():
            if key in ("out", "workers"):
                continue
            echoed[key] = "%.17g" % value if isinstance(value, float) else str(value)
        return echoed


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(key, value, "expected an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise ConfigError(key, value, "expected an integer")


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(key, value, "expected a number")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, value, "expected a number") from None
    if not math.isfinite(number):
        raise ConfigError(key, value, "expected a finite number")
    return number


def resolve_delta(value: Any, slices: int) -> int:
    """Integer Δ, or the symbolic form 'n/K' evaluated against the slice count."""
    if isinstance(value, str):
        match = _SYMBOLIC_DELTA.match(value.strip())
        if match:
            divisor = int(match.group(1))
            if divisor == 0:
                raise ConfigError("delta", value, "divisor in 'n/K' must be positive")
            return slices // divisor
    return _as_int("delta", value)


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("config", str(path), "file does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", str(path), f"not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("config", str(path), "top level must be a JSON object")
    return data


def parse_config(
    overrides: Optional[dict[str, Any]] = None,
    config_path: Optional[Path] = None,
    check_band: bool = True,
) -> ExperimentConfig:
    """Merge file values and flag overrides (None means 'not given'), then validate.

    With check_band=False the slice count only has to be positive and Δ is not
    checked against it; filtering with an explicit cutoff needs no band.
    """
    raw: dict[str, Any] = {}
    if config_path is not None:
        raw.update(load_config_file(config_path))
    if overrides:
        raw.update({key: value for key, value in overrides.items() if value is not None})

    unknown = sorted(set(raw) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigError(unknown[0], raw[unknown[0]], f"unknown key, expected one of {', '.join(KNOWN_KEYS)}")

    qubits = _as_int("qubits", raw.get("qubits", 3))
    if qubits < 1:
        raise ConfigError("qubits", qubits, "qubits ≥ 1")

    target = str(raw.get("target", "not")).lower()
    if target not in TARGET_NAMES:
        raise ConfigError("target", target, f"target ∈ {{{', '.join(TARGET_NAMES)}}}")
    if target == "swap" and qubits < 2:
        raise ConfigError("qubits", qubits, "qubits ≥ 2 for the swap target")

    default_slices = SMALL_CHAIN_SLICES if qubits <= 3 else LARGE_CHAIN_SLICES
    slices = _as_int("slices", raw.get("slices", default_slices))
    if check_band and (slices < 2 or slices % 2):
        raise ConfigError("slices", slices, "slices even and ≥ 2")
    if slices < 1:
        raise ConfigError("slices", slices, "slices ≥ 1")

    dt = _as_float("dt", raw.get("dt", 0.2))
    if dt <= 0:
        raise ConfigError("dt", dt, "dt > 0")

    mu = _as_float("mu", raw.get("mu", 0.05))
    if not 0.0 <= mu <= 1.0:
        raise ConfigError("mu", mu, "mu ∈ [0,1]")

    delta = resolve_delta(raw.get("delta", DEFAULT_DELTA), slices)
    if check_band and not 0 <= delta < slices // 2:
        raise ConfigError("delta", raw.get("delta", DEFAULT_DELTA), f"0 ≤ delta < slices/2 = {slices // 2}")

    runs = _as_int("runs", raw.get("runs", 120))
    if runs < 1:
        raise ConfigError("runs", runs, "runs ≥ 1")

    seed = _as_int("seed", raw.get("seed", 0))
    if seed < 0:
        raise ConfigError("seed", seed, "seed ≥ 0")

    oversample = _as_int("oversample", raw.get("oversample", 16))
    if oversample < 1:
        raise ConfigError("oversample", oversample, "oversample ≥ 1")

    out = raw.get("out", "results")
    if not isinstance(out, (str, os.PathLike)) or not str(out):
        raise ConfigError("out", out, "a non-empty directory path")

    max_iterations = _as_int("max_iterations", raw.get("max_iterations", 2000))
    if max_iterations < 1:
        raise ConfigError("max_iterations", max_iterations, "max_iterations ≥ 1")

    grad_tolerance = _as_float("grad_tolerance", raw.get("grad_tolerance", 1e-8))
    if grad_tolerance <= 0:
        raise ConfigError("grad_tolerance", grad_tolerance, "grad_tolerance > 0")

    init_amplitude = _as_float("init_amplitude", raw.get("init_amplitude", DEFAULT_INIT_AMPLITUDE))
    if init_amplitude <= 0:
        raise ConfigError("init_amplitude", init_amplitude, "init_amplitude > 0")

    workers = _as_int("workers", raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers", workers, "workers ≥ 1")

    return ExperimentConfig(
        qubits=qubits,
        target=target,
        slices=slices,
        dt=dt,
        mu=mu,
        delta=delta,
        runs=runs,
        seed=seed,
        oversample=oversample,
        out=str(out),
        max_iterations=max_iterations,
        grad_tolerance=grad_tolerance,
        init_amplitude=init_amplitude,
        workers=workers,
    )
