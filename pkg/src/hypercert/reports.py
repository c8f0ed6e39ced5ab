"""Report rendering: aligned text tables for humans, CSV for machines.

Every report function is pure (strings in, strings out); the cli module owns
file placement. Percentages print to 2 decimals, certified margins and
volumes in scientific notation, and missing cells (empty partitions) as
"n/a" rather than a misleading 0.00.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import ContainmentRow, RegionSet, log_volume, log_volume_eps_ball, overlap_possible

LN10 = math.log(10.0)


def format_table(headers, rows) -> str:
    """Monospace-aligned table; first column left-aligned, the rest right."""
    headers = [str(h) for h in headers]
    cells = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))

    def fmt(row):
        parts = [row[0].ljust(widths[0])]
        parts += [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        return "  ".join(parts).rstrip()

    lines = [fmt(headers), "  ".join("-" * w for w in widths)]
    lines += [fmt(row) for row in cells]
    return "\n".join(lines) + "\n"


def _csv_text(headers, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


def _pct(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2f}"


# ---------------------------------------------------------------------------
# Containment (the four-column percentage table)

_CONTAINMENT_HEADERS = ("region", "train_positive", "test_positive",
                        "test_negative", "test_ambiguous")


def containment_text(rows) -> str:
    table = [[r.region, _pct(r.train_positive), _pct(r.test_positive),
              _pct(r.test_negative), _pct(r.test_ambiguous)] for r in rows]
    title = "Share of each partition inside the region sets (%)\n\n"
    return title + format_table(_CONTAINMENT_HEADERS, table)


def containment_csv(rows) -> str:
    table = [[r.region, _pct(r.train_positive), _pct(r.test_positive),
              _pct(r.test_negative), _pct(r.test_ambiguous)] for r in rows]
    return _csv_text(_CONTAINMENT_HEADERS, table)


# ---------------------------------------------------------------------------
# Training metrics


def metrics_csv(metrics) -> str:
    rows = [[m.epoch, f"{m.loss:.6f}", f"{m.train_accuracy:.4f}"] for m in metrics]
    return _csv_text(("epoch", "loss", "train_accuracy"), rows)


# ---------------------------------------------------------------------------
# Verification


@dataclass
class VerifyEntry:
    region: str
    boxes: int
    status: str
    margin: float
    wall_time: float
    counterexample: Optional[np.ndarray] = None


def verification_text(entries) -> str:
    headers = ("region", "boxes", "status", "margin", "wall_s")
    table = [[e.region, e.boxes, e.status, f"{e.margin:.4e}", f"{e.wall_time:.2f}"]
             for e in entries]
    out = "Region verification\n\n" + format_table(headers, table)
    for e in entries:
        if e.counterexample is not None:
            head = np.array2string(e.counterexample[:6], precision=5, separator=", ")
            out += f"\ncounterexample[{e.region}] (first 6 coords): {head}\n"
    return out


def verification_csv(entries) -> str:
    # No wall-clock column: the machine-readable file is byte-stable across reruns.
    table = [[e.region, e.boxes, e.status, f"{e.margin:.17g}"] for e in entries]
    return _csv_text(("region", "boxes", "status", "margin"), table)


# ---------------------------------------------------------------------------
# Volumes (reported in log10; -inf prints as -inf)


@dataclass
class VolumeRow:
    name: str
    boxes: int
    log10_volume: float
    overlap: str   # "possible", "no", or "-" for balls


def _log10(ln_value: float) -> float:
    return ln_value / LN10 if math.isfinite(ln_value) else ln_value


def volume_rows(sets, dim: int, eps_grid) -> list:
    rows = []
    for regions in sets:
        rows.append(VolumeRow(
            regions.describe(), len(regions.boxes), _log10(log_volume(regions)),
            "possible" if overlap_possible(regions) else "no",
        ))
    for eps in eps_grid:
        rows.append(VolumeRow(
            f"eps-ball({eps:g})", 1, _log10(log_volume_eps_ball(dim, eps)), "-",
        ))
    return rows


def volume_text(rows) -> str:
    table = [[r.name, r.boxes, f"{r.log10_volume:.2f}", r.overlap] for r in rows]
    title = "Volumes (log10; summed box-wise, overlap flagged when boxes intersect)\n\n"
    return title + format_table(("set", "boxes", "log10_volume", "overlap"), table)


def volume_csv(rows) -> str:
    table = [[r.name, r.boxes, f"{r.log10_volume:.17g}", r.overlap] for r in rows]
    return _csv_text(("set", "boxes", "log10_volume", "overlap"), table)


# ---------------------------------------------------------------------------
# Per-point certified radii


def radius_summary(radii) -> dict:
    radii = np.asarray(list(radii), dtype=np.float64)
    if radii.size == 0:
        return {"count": 0, "min": float("nan"), "median": float("nan"), "max": float("nan")}
    return {
        "count": int(radii.size),
        "min": float(radii.min()),
        "median": float(np.median(radii)),
        "max": float(radii.max()),
    }


def radius_text(summary: dict) -> str:
    if summary["count"] == 0:
        return "Certified radii: no points evaluated\n"
    return (
        f"Certified l-inf radii over {summary['count']} points: "
        f"min {summary['min']:.3e}, median {summary['median']:.3e}, "
        f"max {summary['max']:.3e}\n"
    )


def radius_csv(radii) -> str:
    rows = [[i, f"{r:.17g}"] for i, r in enumerate(radii)]
    return _csv_text(("point", "radius"), rows)
