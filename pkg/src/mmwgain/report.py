"""Tables derived from a simulation run: per-class statistics, histograms, link lists."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io
from .antenna import orientation_report
from .gain import MIN_STAT_SAMPLES, gain_statistics

CLASSES = ("LOS", "OLOS", "all")
STAT_NAMES = ("peak", "median", "outage")
LINK_COLUMNS = ["link_id", "class", "ms_x", "ms_y", "ms_z", "n_paths"]
ORIENTATION_COLUMNS = ["orientation_id", "phi0_deg", "theta0_deg", "chi0_deg", "axis_duplicate"]


def _as_rows(records) -> list[dict]:
    out = []
    for r in records:
        if isinstance(r, dict):
            out.append(r)
        else:
            out.append({"link_id": r.link_id, "class": r.cls, "orientation_id": r.orientation_id,
                        "case": r.case, "gain_db": r.gain_db})
    return out


def stats_rows(records_by_array: dict) -> list[list]:
    """Peak / median / outage per array, case and link class.

    Groups below the 50-sample floor are still reported, with
    ``reliable = 0``.
    """
    rows = []
    for kind, records in records_by_array.items():
        recs = _as_rows(records)
        for case in sorted({r["case"] for r in recs}):
            for cls in CLASSES:
                v = [r["gain_db"] for r in recs if r["case"] == case and (cls == "all" or r["class"] == cls)]
                if not v:
                    continue
                s = gain_statistics(v, min_count=1)
                for name in STAT_NAMES:
                    rows.append([kind, case, cls, name, getattr(s, name), s.count,
                                 s.count >= MIN_STAT_SAMPLES])
    return rows


def histogram_rows(records_by_array: dict, bin_width: float = 1.0) -> list[list]:
    """Counts on shared integer-aligned bins so every (array, case) is comparable."""
    everything = [r["gain_db"] for recs in records_by_array.values() for r in _as_rows(recs)]
    if not everything:
        return []
    lo = np.floor(min(everything) / bin_width) * bin_width
    hi = np.ceil(max(everything) / bin_width) * bin_width
    if hi <= lo:
        hi = lo + bin_width
    edges = lo + bin_width * np.arange(int(round((hi - lo) / bin_width)) + 1)
    rows = []
    for kind, records in records_by_array.items():
        recs = _as_rows(records)
        for case in sorted({r["case"] for r in recs}):
            counts, _ = np.histogram([r["gain_db"] for r in recs if r["case"] == case], edges)
            rows += [[kind, case, a, b, int(c)] for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return rows


def read_stats_groups(paths) -> dict:
    """Results files keyed by the array name in their ``results_<array>.csv`` file name."""
    out = {}
    for p in paths:
        p = Path(p)
        kind = p.stem.split("_", 1)[1] if p.stem.startswith("results_") else p.stem
        out[kind] = io.read_results(p)
    return out


def write_links(path, links) -> None:
    io.write_csv(path, LINK_COLUMNS,
                 ([l.link_id, l.cls, *l.ms, len(l.mpcs)] for l in links))


def write_orientations(path, orientations=None) -> None:
    io.write_csv(path, ORIENTATION_COLUMNS,
                 ([r[c] for c in ORIENTATION_COLUMNS] for r in orientation_report(orientations)))


def write_run(out_dir, result, comments: dict | None = None) -> list[Path]:
    """Every CSV of a simulate run; returns the paths in a fixed order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, recs in result.records.items():
        p = out_dir / f"results_{kind}.csv"
        io.write_results(p, recs)
        written.append(p)
    for name, writer in (("stats.csv", lambda p: io.write_stats(p, stats_rows(result.records))),
                         ("histogram.csv", lambda p: io.write_histogram(p, histogram_rows(result.records))),
                         ("links.csv", lambda p: write_links(p, result.links)),
                         ("mpcs.csv", lambda p: io.write_mpcs(p, result.links)),
                         ("orientations.csv", lambda p: write_orientations(p, result.orientations))):
        writer(out_dir / name)
        written.append(out_dir / name)
    if comments:
        p = out_dir / "run.csv"
        io.write_csv(p, ["key", "value"], ([k, v] for k, v in comments.items()))
        written.append(p)
    return written


def format_table(rows: list[list]) -> str:
    """Plain-text Table-I style summary of :func:`stats_rows` output."""
    lines = [f"{'array':<6}{'case':>5}  {'class':<6}{'peak':>9}{'median':>9}{'outage':>9}{'n':>7}"]
    groups = {}
    for kind, case, cls, name, value, count, reliable in rows:
        groups.setdefault((kind, case, cls), {})[name] = value
        groups[(kind, case, cls)]["n"] = (count, reliable)
    for (kind, case, cls), g in groups.items():
        n, ok = g["n"]
        flag = "" if ok else " *"
        lines.append(f"{kind:<6}{case:>5}  {cls:<6}{g['peak']:9.2f}{g['median']:9.2f}{g['outage']:9.2f}"
                     f"{n:>7}{flag}")
    if any(not g["n"][1] for g in groups.values()):
        lines.append(f"* fewer than {MIN_STAT_SAMPLES} samples; percentiles not reliable")
    return "\n".join(lines)
