"""
results_io.py — Plain-text tables for run results, control dumps and histograms.

Every file starts with a provenance block of '# key: value' lines (sorted,
no timestamps, so fixed seeds give byte-identical files) followed by one
'# col1,col2,...' line naming the columns, then comma-separated rows.
Floats are written with 17 significant digits so values survive a round trip.
"""

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dynamics import ControlSequence
from optimize_pulses import RunResult
from spectral import SpectralBand, power_spectrum

FLOAT_FORMAT = "%.17g"
HISTOGRAM_BINS = 20
HIGH_FIDELITY_THRESHOLD = 0.96

RESULT_COLUMNS = ["run", "seed", "iterations", "status", "F_pre", "F_post", "P_x", "P_y", "final_G"]
CONTROL_COLUMNS = ["index", "t_start", "hx", "hy"]
SPECTRUM_COLUMNS = ["k", "omega", "Px_k", "Py_k", "in_band"]
HISTOGRAM_COLUMNS = ["bin_left", "bin_right", "count"]
SUMMARY_COLUMNS = ["key", "value"]


class DumpParseError(ValueError):
    """Malformed table; line_number is 1-based."""

    def __init__(self, path: Path, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    text = str(value)
    # status messages may carry commas
    return text.replace(",", ";").replace("\n", " ")


def write_table(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    provenance: dict,
) -> None:
    lines = [f"# {key}: {provenance[key]}" for key in sorted(provenance)]
    lines.append("# " + ",".join(columns))
    for row in rows:
        lines.append(",".join(format_cell(value) for value in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path: Path) -> tuple[dict[str, str], list[str], list[tuple[int, list[str]]]]:
    """Split a table into provenance, column names and (line number, cells) rows."""
    header: list[tuple[int, str]] = []
    rows: list[tuple[int, list[str]]] = []
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if rows:
                raise DumpParseError(path, line_number, "header line after data rows")
            header.append((line_number, line[1:].strip()))
        else:
            rows.append((line_number, [cell.strip() for cell in line.split(",")]))

    if not header:
        raise DumpParseError(path, 1, "missing '#' column header")
    columns = header[-1][1].split(",")
    provenance = {}
    for line_number, text in header[:-1]:
        key, sep, value = text.partition(":")
        if not sep:
            raise DumpParseError(path, line_number, f"expected 'key: value', got {text!r}")
        provenance[key.strip()] = value.strip()
    return provenance, [c.strip() for c in columns], rows


def _parse_float(path: Path, line_number: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DumpParseError(path, line_number, f"{column}={text!r} is not a number") from None
    if not math.isfinite(value):
        raise DumpParseError(path, line_number, f"{column}={text!r} is not finite")
    return value


def write_control_dump(path: Path, controls: ControlSequence, provenance: dict) -> None:
    rows = (
        (i + 1, float(t_start), float(hx), float(hy))
        for i, (t_start, hx, hy) in enumerate(zip(controls.slice_starts, controls.hx, controls.hy))
    )
    write_table(path, CONTROL_COLUMNS, rows, {**provenance, "dt": FLOAT_FORMAT % controls.dt})


def read_control_dump(path: Path) -> tuple[ControlSequence, dict[str, str]]:
    """Parse a dump written by write_control_dump back into a ControlSequence."""
    provenance, columns, rows = read_table(path)
    if columns != CONTROL_COLUMNS:
        raise DumpParseError(path, 1, f"expected columns {CONTROL_COLUMNS}, got {columns}")
    if not rows:
        raise DumpParseError(path, 1, "no control rows")

    starts, hx, hy = [], [], []
    for expected_index, (line_number, cells) in enumerate(rows, start=1):
        if len(cells) != len(CONTROL_COLUMNS):
            raise DumpParseError(path, line_number, f"expected 4 fields, got {len(cells)}")
        try:
            index = int(cells[0])
        except ValueError:
            raise DumpParseError(path, line_number, f"index={cells[0]!r} is not an integer") from None
        if index != expected_index:
            raise DumpParseError(path, line_number, f"index {index} out of order, expected {expected_index}")
        starts.append(_parse_float(path, line_number, "t_start", cells[1]))
        hx.append(_parse_float(path, line_number, "hx", cells[2]))
        hy.append(_parse_float(path, line_number, "hy", cells[3]))

    if "dt" in provenance:
        dt = _parse_float(path, 1, "dt", provenance["dt"])
    elif len(starts) > 1:
        dt = starts[1] - starts[0]
    else:
        raise DumpParseError(path, 1, "cannot infer dt from a single row without a 'dt' header")
    if not dt > 0:
        raise DumpParseError(path, 1, f"dt={dt} must be positive")

    for (line_number, _), start, i in zip(rows, starts, range(len(starts))):
        if abs(start - i * dt) > 1e-9 * max(1.0, i * dt):
            raise DumpParseError(path, line_number, f"t_start={start} inconsistent with dt={dt}")

    return ControlSequence(dt, np.array(hx), np.array(hy)), provenance


def write_spectrum_dump(
    path: Path,
    controls: ControlSequence,
    band: SpectralBand,
    provenance: dict,
) -> None:
    spectrum_x = power_spectrum(controls.hx)
    spectrum_y = power_spectrum(controls.hy)
    omegas = 2.0 * math.pi * np.arange(controls.n) / controls.total_duration
    mask = band.mask
    rows = (
        (k, float(omegas[k]), float(spectrum_x[k]), float(spectrum_y[k]), bool(mask[k]))
        for k in range(controls.n)
    )
    write_table(path, SPECTRUM_COLUMNS, rows, provenance)


def result_rows(results: Sequence[RunResult]) -> list[tuple]:
    return [
        (
            r.run_index, r.seed, r.iterations, r.status,
            float(r.pre_filter_fidelity), float(r.post_filter_fidelity),
            float(r.power_x), float(r.power_y), float(r.final_G),
        )
        for r in results
    ]


def summarize(results: Sequence[RunResult]) -> dict[str, float]:
    """Ensemble statistics over the runs that completed."""
    completed = [r for r in results if r.ok]
    summary: dict[str, float] = {"runs": len(results), "runs_ok": len(completed)}
    if not completed:
        for key in ("mean_F_post", "median_F_post", "fraction_above_0.96",
                    "mean_F_pre", "median_F_pre", "mean_P_total", "mean_fidelity_loss"):
            summary[key] = math.nan
        return summary

    post = np.array([r.post_filter_fidelity for r in completed])
    pre = np.array([r.pre_filter_fidelity for r in completed])
    summary["mean_F_post"] = float(np.mean(post))
    summary["median_F_post"] = float(np.median(post))
    summary["fraction_above_0.96"] = float(np.mean(post > HIGH_FIDELITY_THRESHOLD))
    summary["mean_F_pre"] = float(np.mean(pre))
    summary["median_F_pre"] = float(np.median(pre))
    summary["mean_P_total"] = float(np.mean([r.power_total for r in completed]))
    summary["mean_fidelity_loss"] = float(np.mean(pre - post))
    return summary


def histogram_rows(values: Sequence[float], bins: int = HISTOGRAM_BINS) -> list[tuple[float, float, int]]:
    """Uniform bins on [0, 1]; NaN entries from failed runs are left out."""
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values[np.isfinite(values)], bins=bins, range=(0.0, 1.0))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def write_summary(path: Path, summary: dict, provenance: dict) -> None:
    rows = [(key, float(value) if isinstance(value, float) else value) for key, value in summary.items()]
    write_table(path, SUMMARY_COLUMNS, rows, provenance)


def read_summary(path: Path) -> dict[str, float]:
    _, columns, rows = read_table(path)
    if columns != SUMMARY_COLUMNS:
        raise DumpParseError(path, 1, f"expected columns {SUMMARY_COLUMNS}, got {columns}")
    return {cells[0]: float(cells[1]) for _, cells in rows}
