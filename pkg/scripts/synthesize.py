#!/usr/bin/env python3
"""
synthesize.py — Spectrally constrained pulse synthesis for a Heisenberg spin chain.

Subcommands:
  run       Multi-start BFGS ensemble; writes results, per-run control dumps and
            spectra, a summary and a post-filter fidelity histogram
  filter    Pass a control dump through the ideal low-pass filter; writes the
            dense filtered pulse next to the step values plus F_pre / F_post
  compare   Constrained arm (configured μ) and unconstrained arm (μ = 1) on
            common seeds, with the separation between their post-filter fidelities
  selftest  Gradient, Parseval, unitarity, Si and convolution checks

Exit codes: 0 success, 1 invalid configuration or input, 2 runtime/numerical
error, 3 self-test failure.

Usage:
    python synthesize.py run --qubits 3 --target not --mu 0.05 --runs 120 --out results/not3
    python synthesize.py run --config experiment.json --runs 5
    python synthesize.py filter results/not3/controls/run_0000.csv --out results/not3/filtered
    python synthesize.py compare --target swap --runs 120 --workers 8 --out results/swap3
    python synthesize.py selftest
"""

import argparse
import logging
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

import selfcheck
from dynamics import PropagationError, gate_fidelity, propagate
from experiment_config import KNOWN_KEYS, ConfigError, ExperimentConfig, parse_config
from lowpass import FilterSpec, cutoff_from_band, filtered_fidelity, filtered_samples
from optimize_pulses import RunResult, run_experiment
from results_io import (
    HIGH_FIDELITY_THRESHOLD,
    RESULT_COLUMNS,
    DumpParseError,
    histogram_rows,
    read_control_dump,
    result_rows,
    summarize,
    write_control_dump,
    write_spectrum_dump,
    write_summary,
    write_table,
)
from spectral import ObjectiveSpec, SpectralBand
from spin_model import TARGET_NAMES, SpinChainSystem, target_gate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

FILTERED_COLUMNS = ["t", "hx_step", "hy_step", "hx_filtered", "hy_filtered"]
COMPARISON_COLUMNS = ["arm", "mu", "runs_ok", "mean_F_pre", "mean_F_post", "median_F_post",
                      "fraction_above_0.96", "mean_P_total"]


class OutputDirError(RuntimeError):
    pass


def ensure_writable(directory: Path) -> None:
    """Create the output directory and prove it accepts files, before any compute."""
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=directory, prefix=".write-check-"):
            pass
    except OSError as exc:
        raise OutputDirError(f"output directory {directory} is not writable: {exc}") from exc


def build_objective(config: ExperimentConfig) -> ObjectiveSpec:
    system = SpinChainSystem.build(config.qubits)
    return ObjectiveSpec(
        mu=config.mu,
        band=SpectralBand(config.slices, config.delta),
        system=system,
        target=target_gate(config.target, config.qubits),
        dt=config.dt,
    )


def run_ensemble(config: ExperimentConfig) -> list[RunResult]:
    spec = build_objective(config)
    return run_experiment(
        spec.system,
        spec.target,
        spec,
        config.optimizer_config(),
        config.runs,
        oversample=config.oversample,
        workers=config.workers,
    )


def write_artifacts(out: Path, config: ExperimentConfig, results: Sequence[RunResult]) -> dict:
    """Results table, control dumps, spectra, summary and histogram for one ensemble."""
    provenance = config.echo()
    band = SpectralBand(config.slices, config.delta)
    write_table(out / "results.csv", RESULT_COLUMNS, result_rows(results), provenance)

    for result in results:
        if result.controls is None:
            continue
        run_provenance = {**provenance, "run": str(result.run_index), "run_seed": str(result.seed)}
        name = f"run_{result.run_index:04d}.csv"
        write_control_dump(out / "controls" / name, result.controls, run_provenance)
        write_spectrum_dump(out / "spectra" / name, result.controls, band, run_provenance)

    summary = summarize(results)
    write_summary(out / "summary.csv", summary, provenance)
    write_table(
        out / "histogram.csv",
        ["bin_left", "bin_right", "count"],
        histogram_rows([r.post_filter_fidelity for r in results]),
        provenance,
    )
    return summary


def print_summary(label: str, summary: dict) -> None:
    print(f"\n{label}")
    print(f"  Runs completed: {summary['runs_ok']}/{summary['runs']}")
    if summary["runs_ok"]:
        print(f"  Mean F before filter: {summary['mean_F_pre']:.6f}")
        print(f"  Mean F after filter:  {summary['mean_F_post']:.6f} (median {summary['median_F_post']:.6f})")
        print(f"  F after filter > {HIGH_FIDELITY_THRESHOLD}: {summary['fraction_above_0.96']:.0%}")
        print(f"  Mean high-band power: {summary['mean_P_total']:.4f}")


def cmd_run(config: ExperimentConfig) -> int:
    out = config.output_dir
    ensure_writable(out)
    spec = build_objective(config)
    omega0 = cutoff_from_band(config.slices, config.delta, config.dt)

    print(f"🔬 {spec.target.name} on a {config.qubits}-qubit chain")
    print(f"   n={config.slices}, dt={config.dt}, μ={config.mu}, Δ={config.delta}, ω0={omega0:.6f}")
    print(f"   Runs: {config.runs} (seeds {config.seed}..{config.seed + config.runs - 1}), workers: {config.workers}")

    started = time.perf_counter()
    results = run_ensemble(config)
    summary = write_artifacts(out, config, results)

    print_summary(f"✓ Ensemble finished in {time.perf_counter() - started:.1f} s → {out}", summary)
    failed = [r for r in results if not r.ok]
    for result in failed:
        print(f"  ⚠ run {result.run_index} (seed {result.seed}): {result.status}")
    return EXIT_OK


def cmd_compare(config: ExperimentConfig) -> int:
    """Constrained and unconstrained arms on the same seeds."""
    out = config.output_dir
    ensure_writable(out)
    arms = [
        ("constrained", replace(config, out=str(out / "constrained"))),
        ("unconstrained", replace(config, mu=1.0, out=str(out / "unconstrained"))),
    ]

    summaries = {}
    for label, arm_config in arms:
        print(f"🔬 {label} arm: μ={arm_config.mu}, {arm_config.runs} runs")
        ensure_writable(arm_config.output_dir)
        results = run_ensemble(arm_config)
        summaries[label] = write_artifacts(arm_config.output_dir, arm_config, results)
        print_summary(f"✓ {label} arm → {arm_config.output_dir}", summaries[label])

    rows = [
        (label, float(arm_config.mu), summaries[label]["runs_ok"], summaries[label]["mean_F_pre"],
         summaries[label]["mean_F_post"], summaries[label]["median_F_post"],
         summaries[label]["fraction_above_0.96"], summaries[label]["mean_P_total"])
        for label, arm_config in arms
    ]
    mean_gap = summaries["constrained"]["mean_F_post"] - summaries["unconstrained"]["mean_F_post"]
    fraction_gap = (summaries["constrained"]["fraction_above_0.96"]
                    - summaries["unconstrained"]["fraction_above_0.96"])
    provenance = {**config.echo(), "mean_F_post_gap": "%.17g" % mean_gap,
                  "fraction_above_0.96_gap": "%.17g" % fraction_gap}
    write_table(out / "comparison.csv", COMPARISON_COLUMNS, rows, provenance)

    print("\nSeparation (constrained - unconstrained)")
    print(f"  Mean F after filter: {mean_gap:+.4f}")
    print(f"  Share above {HIGH_FIDELITY_THRESHOLD}: {fraction_gap:+.0%}")
    return EXIT_OK


def cmd_filter(
    dump_path: Path,
    out: Path,
    qubits: Optional[int] = None,
    target: Optional[str] = None,
    omega0: Optional[float] = None,
    delta: Optional[str] = None,
    oversample: Optional[int] = None,
) -> int:
    """Filter one control dump; settings missing from flags come from the dump header."""
    controls, provenance = read_control_dump(dump_path)
    overrides = {
        "qubits": qubits if qubits is not None else provenance.get("qubits"),
        "target": target if target is not None else provenance.get("target"),
        "slices": controls.n,
        "dt": controls.dt,
        "delta": delta if delta is not None else provenance.get("delta"),
        "oversample": oversample if oversample is not None else provenance.get("oversample"),
    }
    config = parse_config(overrides, check_band=omega0 is None)
    ensure_writable(out)

    system = SpinChainSystem.build(config.qubits)
    gate = target_gate(config.target, config.qubits)
    if omega0 is None:
        omega0 = cutoff_from_band(config.slices, config.delta, config.dt)
    filter_spec = FilterSpec(omega0, config.oversample)

    f_pre = gate_fidelity(gate, propagate(system, controls).total)
    f_post = filtered_fidelity(system, controls, gate, filter_spec)
    times, hx_filtered, hy_filtered = filtered_samples(controls, filter_spec)
    slice_of = np.minimum((times // controls.dt).astype(int), controls.n - 1)

    rows = (
        (float(t), float(controls.hx[i]), float(controls.hy[i]), float(fx), float(fy))
        for t, i, fx, fy in zip(times, slice_of, hx_filtered, hy_filtered)
    )
    header = {
        **config.echo(),
        "source": dump_path.name,
        "omega0": "%.17g" % omega0,
        "F_pre": "%.17g" % f_pre,
        "F_post": "%.17g" % f_post,
    }
    destination = out / f"filtered_{dump_path.stem}.csv"
    write_table(destination, FILTERED_COLUMNS, rows, header)

    print(f"✓ {dump_path.name}: {gate.name}, ω0={omega0:.6f}, oversample={config.oversample}")
    print(f"  F before filter: {f_pre:.12f}")
    print(f"  F after filter:  {f_post:.12f}")
    print(f"  Filtered pulse → {destination}")
    return EXIT_OK


def cmd_selftest() -> int:
    print("🔬 Self-test")
    started = time.perf_counter()
    code = selfcheck.report(selfcheck.run_all_checks())
    print(f"  Elapsed: {time.perf_counter() - started:.1f} s")
    return code


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file (flags override its values)")
    parser.add_argument("--qubits", type=int, help="Chain length N (default: 3)")
    parser.add_argument("--target", choices=TARGET_NAMES, help="Target gate (default: not)")
    parser.add_argument("--slices", type=int, help="Slices per direction (default: 128, 512 for N ≥ 4)")
    parser.add_argument("--dt", type=float, help="Slice duration in 1/J (default: 0.2)")
    parser.add_argument("--mu", type=float, help="Fidelity weight μ ∈ [0, 1] (default: 0.05)")
    parser.add_argument("--delta", help="Band half-width, integer or 'n/K' (default: n/4)")
    parser.add_argument("--runs", "--n-runs", dest="runs", type=int, help="Independent starts (default: 120)")
    parser.add_argument("--seed", type=int, help="Seed of run 0; run j uses seed + j (default: 0)")
    parser.add_argument("--oversample", type=int, help="Sub-slices per slice for filtering (default: 16)")
    parser.add_argument("--out", help="Output directory (default: results)")
    parser.add_argument("--max-iter", dest="max_iterations", type=int, help="BFGS iteration cap (default: 2000)")
    parser.add_argument("--gtol", dest="grad_tolerance", type=float, help="Max-norm gradient tolerance (default: 1e-8)")
    parser.add_argument("--amplitude", dest="init_amplitude", type=float, help="Start amplitude bound in J (default: 3)")
    parser.add_argument("--workers", type=int, help="Worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Spectrally constrained pulse synthesis")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logs")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_experiment_flags(sub.add_parser("run", help="Run a multi-start ensemble"))
    _add_experiment_flags(sub.add_parser("compare", help="Constrained vs unconstrained arms"))

    filter_parser = sub.add_parser("filter", help="Filter a control dump")
    filter_parser.add_argument("dump", type=Path, help="Control dump written by 'run'")
    filter_parser.add_argument("--omega0", type=float, help="Cutoff angular frequency (default: from band)")
    filter_parser.add_argument("--delta", help="Band half-width for the cutoff, integer or 'n/K'")
    filter_parser.add_argument("--qubits", type=int, help="Chain length (default: from dump header)")
    filter_parser.add_argument("--target", choices=TARGET_NAMES, help="Target gate (default: from dump header)")
    filter_parser.add_argument("--oversample", type=int, help="Sub-slices per slice (default: 16)")
    filter_parser.add_argument("--out", type=Path, help="Output directory (default: the dump's directory)")

    sub.add_parser("selftest", help="Run the numerical self-test suite")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "selftest":
            return cmd_selftest()
        if args.command == "filter":
            return cmd_filter(
                args.dump,
                args.out if args.out is not None else args.dump.parent,
                qubits=args.qubits,
                target=args.target,
                omega0=args.omega0,
                delta=args.delta,
                oversample=args.oversample,
            )
        overrides = {key: getattr(args, key, None) for key in KNOWN_KEYS}
        config = parse_config(overrides, args.config)
        return cmd_run(config) if args.command == "run" else cmd_compare(config)
    except (ConfigError, DumpParseError, FileNotFoundError) as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OutputDirError, PropagationError, OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
