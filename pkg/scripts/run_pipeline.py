#!/usr/bin/env python3
"""
run_pipeline.py — Reproduce the full experiment grid.

Runs all stages in order:
  1. Self-test (gradients, Parseval, unitarity, filter oracle)
  2. NOT on three qubits: constrained vs unconstrained → results/not3
  3. SWAP on three qubits: constrained vs unconstrained → results/swap3
  4. NOT on four qubits (only with --with-four-qubit) → results/not4
  5. SWAP on four qubits (only with --with-four-qubit) → results/swap4
  6. Filter run 0 of every constrained arm → <arm>/constrained/filtered

Usage:
    python run_pipeline.py                          # Three-qubit grid
    python run_pipeline.py --with-four-qubit        # Add the N = 4 arms (slow)
    python run_pipeline.py --runs 10 --workers 4    # Smaller ensembles in parallel
    python run_pipeline.py --from-step 3            # Resume from step 3
    python run_pipeline.py --dry-run                # Show what would run
"""

import argparse
import subprocess
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parent.parent
SCRIPTS_DIR = PROJECT_ROOT / "scripts"
RESULTS_DIR = PROJECT_ROOT / "results"

PYTHON = sys.executable
SYNTHESIZE = str(SCRIPTS_DIR / "synthesize.py")

ARMS = [
    ("not", 3),
    ("swap", 3),
]
FOUR_QUBIT_ARMS = [
    ("not", 4),
    ("swap", 4),
]


def run_step(name: str, cmd: list[str], dry_run: bool = False) -> bool:
    """Run a pipeline step. Returns True on success."""
    print(f"\n{'='*60}")
    print(f"  Step: {name}")
    print(f"  Command: {' '.join(cmd)}")
    print(f"{'='*60}")

    if dry_run:
        print("  [DRY RUN — skipped]")
        return True

    try:
        result = subprocess.run(cmd, cwd=str(PROJECT_ROOT), capture_output=False)
        if result.returncode != 0:
            print(f"\n  ⚠ Step '{name}' exited with code {result.returncode}")
            return False
        return True
    except OSError as e:
        print(f"\n  ✗ Step '{name}' failed: {e}")
        return False


def build_steps(args: argparse.Namespace) -> list[tuple[str, list[str]]]:
    steps = [("Self-test", [PYTHON, SYNTHESIZE, "selftest"])]

    arms = ARMS + (FOUR_QUBIT_ARMS if args.with_four_qubit else [])
    for target, qubits in arms:
        out = args.results_dir / f"{target}{qubits}"
        cmd = [PYTHON, SYNTHESIZE, "compare",
               "--qubits", str(qubits), "--target", target,
               "--mu", str(args.mu), "--runs", str(args.runs),
               "--seed", str(args.seed), "--workers", str(args.workers),
               "--out", str(out)]
        steps.append((f"{target.upper()}{qubits}: constrained vs unconstrained", cmd))

    for target, qubits in arms:
        arm_dir = args.results_dir / f"{target}{qubits}" / "constrained"
        steps.append((
            f"{target.upper()}{qubits}: filter run 0",
            [PYTHON, SYNTHESIZE, "filter", str(arm_dir / "controls" / "run_0000.csv"),
             "--out", str(arm_dir / "filtered")],
        ))
    return steps


def main():
    parser = argparse.ArgumentParser(description="Run the full experiment grid")
    parser.add_argument("--from-step", type=int, default=1, help="Start from step N")
    parser.add_argument("--with-four-qubit", action="store_true", help="Include the N = 4 arms")
    parser.add_argument("--runs", type=int, default=120, help="Runs per arm (default: 120)")
    parser.add_argument("--mu", type=float, default=0.05, help="μ of the constrained arm (default: 0.05)")
    parser.add_argument("--seed", type=int, default=0, help="Seed of run 0 (default: 0)")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes per arm (default: 1)")
    parser.add_argument("--results-dir", type=Path, default=RESULTS_DIR, help="Output root (default: results/)")
    parser.add_argument("--dry-run", action="store_true", help="Show commands without running")
    args = parser.parse_args()

    steps = build_steps(args)

    print("\n🔬 Spectrally constrained pulse synthesis: experiment grid")
    print(f"   Steps to run: {len(steps)} (starting from step {args.from_step})")
    print(f"   Runs per arm: {args.runs}, μ = {args.mu}, workers = {args.workers}")
    if args.dry_run:
        print("   Mode: DRY RUN")

    success_count = 0
    halted = False
    for i, (name, cmd) in enumerate(steps, 1):
        if i < args.from_step:
            print(f"\n  [Step {i} skipped — starting from step {args.from_step}]")
            continue

        ok = run_step(f"{i}. {name}", cmd, args.dry_run)
        if ok:
            success_count += 1
        else:
            print(f"\n⚠ Pipeline halted at step {i}. Resume with: --from-step {i}")
            halted = True
            break

    print(f"\n{'='*60}")
    print(f"  Pipeline complete: {success_count}/{len(steps)} steps succeeded")
    print(f"{'='*60}")
    return 1 if halted else 0


if __name__ == "__main__":
    sys.exit(main())
