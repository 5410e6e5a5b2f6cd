"""Delimited file formats: results, statistics, histograms, MPC dumps, patterns.

CSV output follows RFC 4180 (the csv module defaults, CRLF line ends),
``.`` decimal separator and 9 significant digits. Pattern and coefficient
files carry ``# key = value`` header lines before the CSV header.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from . import swe
from .core import ETA0, RadiationPattern, wavenumber


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    """Number formatting shared by every writer."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def write_csv(path, header: list[str], rows, comments: dict | None = None) -> None:
    buf = io.StringIO(newline="")
    for k, v in (comments or {}).items():
        buf.write(f"# {k} = {fmt(v)}\r\n")
    w = csv.writer(buf)
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """(header comments, column names, rows) of a file written by :func:`write_csv`."""
    text = Path(path).read_text(encoding="utf-8")
    comments = {}
    lines = text.splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            if "=" in line:
                k, v = line[1:].split("=", 1)
                comments[k.strip()] = v.strip()
            body_start = i + 1
        else:
            break
    rows = list(csv.reader(lines[body_start:]))
    if not rows:
        raise FormatError(f"{path}: no header row")
    return comments, rows[0], [r for r in rows[1:] if r]


# ---------------------------------------------------------------------------
# Simulation outputs

RESULT_COLUMNS = ["link_id", "class", "orientation_id", "case", "gain_db"]
STATS_COLUMNS = ["array", "case", "class", "stat", "value_db", "count", "reliable"]
HISTOGRAM_COLUMNS = ["array", "case", "bin_lo_db", "bin_hi_db", "count"]
MPC_COLUMNS = ["link_id", "path_id", "is_los", "delay_s", "theta_deg", "phi_deg",
               "aVV_re", "aVV_im", "xpr_db"]


def write_results(path, records) -> None:
    write_csv(path, RESULT_COLUMNS,
              ([r.link_id, r.cls, r.orientation_id, r.case, r.gain_db] for r in records))


def read_results(path) -> list[dict]:
    _, cols, rows = read_csv(path)
    if cols != RESULT_COLUMNS:
        raise FormatError(f"{path}: expected columns {RESULT_COLUMNS}, got {cols}")
    return [{"link_id": int(r[0]), "class": r[1], "orientation_id": int(r[2]), "case": int(r[3]),
             "gain_db": float(r[4])} for r in rows]


def write_stats(path, rows) -> None:
    write_csv(path, STATS_COLUMNS, rows)


def write_histogram(path, rows) -> None:
    write_csv(path, HISTOGRAM_COLUMNS, rows)


def write_mpcs(path, links) -> None:
    def rows():
        for link in links:
            for pid, p in enumerate(link.mpcs):
                yield [link.link_id, pid, p.is_los, p.delay, np.rad2deg(p.arrival.theta),
                       np.rad2deg(p.arrival.phi), p.a_vv.real, p.a_vv.imag, p.xpr_db]
    write_csv(path, MPC_COLUMNS, rows())


REFERENCE_COLUMNS = ["link_id", "rms_delay_spread_s"]
CALIBRATION_COLUMNS = ["eps_r", "rms_error_s"]
LINK_PARAM_COLUMNS = ["link_id", "class", "pathloss_db", "mean_delay_s", "rms_delay_spread_s",
                      "reference_rms_delay_spread_s"]


def write_references(path, link_ids, spreads) -> None:
    write_csv(path, REFERENCE_COLUMNS, zip(link_ids, spreads))


def read_references(path) -> dict[int, float]:
    """Reference delay spreads keyed by link id."""
    _, cols, rows = read_csv(path)
    if cols != REFERENCE_COLUMNS:
        raise FormatError(f"{path}: expected columns {REFERENCE_COLUMNS}, got {cols}")
    try:
        out = {int(r[0]): float(r[1]) for r in rows}
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row") from exc
    if not all(math.isfinite(v) and v >= 0 for v in out.values()):
        raise FormatError(f"{path}: delay spreads must be finite and >= 0")
    return out


# ---------------------------------------------------------------------------
# Patterns and coefficients

PATTERN_COLUMNS = ["theta_deg", "phi_deg", "ReEv", "ImEv", "ReEh", "ImEh"]
COEFF_COLUMNS = ["n", "m", "s", "re", "im"]


def write_pattern(path, p: RadiationPattern) -> None:
    comments = {"frequency_hz": p.frequency}
    if p.grid_step is not None:
        comments["grid_step_deg"] = np.rad2deg(p.grid_step)
    rows = zip(np.rad2deg(p.theta), np.rad2deg(p.phi), p.e_v.real, p.e_v.imag, p.e_h.real, p.e_h.imag)
    write_csv(path, PATTERN_COLUMNS, rows, comments)


def read_pattern(path) -> RadiationPattern:
    comments, cols, rows = read_csv(path)
    if cols != PATTERN_COLUMNS:
        raise FormatError(f"{path}: expected columns {PATTERN_COLUMNS}, got {cols}")
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry") from exc
    if data.ndim != 2 or data.shape[1] != 6:
        raise FormatError(f"{path}: every row needs 6 values")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: NaN or infinite values")
    freq = float(comments.get("frequency_hz", 60e9))
    step = comments.get("grid_step_deg")
    step = float(step) if step is not None else None
    if step is not None:
        expected = int(round(180.0 / step)) * int(round(360.0 / step))
        if len(data) != expected:
            raise FormatError(f"{path}: {len(data)} rows, a {step:g} deg grid has {expected}")
    return RadiationPattern(np.deg2rad(data[:, 0]), np.deg2rad(data[:, 1]),
                            data[:, 2] + 1j * data[:, 3], data[:, 4] + 1j * data[:, 5], freq,
                            np.deg2rad(step) if step is not None else None)


def write_coefficients(path, c: swe.SweCoefficients, frequency: float) -> None:
    table = swe.mode_table(c.n_max)
    comments = {"n_max": c.n_max, "frequency_hz": frequency, "residual": c.residual,
                "condition": c.condition}
    rows = ([int(n), int(m), int(s), q.real, q.imag] for (s, m, n), q in zip(table, c.q))
    write_csv(path, COEFF_COLUMNS, rows, comments)


def read_coefficients(path) -> tuple[swe.SweCoefficients, float]:
    comments, cols, rows = read_csv(path)
    if cols != COEFF_COLUMNS:
        raise FormatError(f"{path}: expected columns {COEFF_COLUMNS}, got {cols}")
    n_max = int(comments["n_max"])
    freq = float(comments.get("frequency_hz", 60e9))
    q = np.zeros(swe.n_modes(n_max), dtype=complex)
    if len(rows) != q.size:
        raise FormatError(f"{path}: {len(rows)} rows, N={n_max} needs {q.size}")
    for r in rows:
        n, m, s = int(r[0]), int(r[1]), int(r[2])
        q[swe.mode_index(s, m, n)] = float(r[3]) + 1j * float(r[4])
    res = float(comments.get("residual", "nan"))
    cond = float(comments.get("condition", "nan"))
    return swe.SweCoefficients(n_max, q, wavenumber(freq), ETA0, res, cond), freq
