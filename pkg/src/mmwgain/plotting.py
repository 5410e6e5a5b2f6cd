"""Static figures written next to the CSV outputs (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .blockage import loss_curve
from .core import BodyModel

STYLE = {"font.size": 9, "axes.grid": True, "grid.alpha": 0.3}
CASE_LABELS = {1: "free space", 2: "body", 3: "body + finger"}


def _figure(width: float = 6.0, height: float = 3.6) -> Figure:
    fig = Figure(figsize=(width, height), layout="constrained")
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    # no timestamp, so reruns give the same bytes
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def gain_histogram(records_by_array: dict, path, bin_width: float = 1.0) -> Path:
    """Histogram of total array gain per array and case, as step lines."""
    import matplotlib as mpl

    with mpl.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        allv = [r.gain_db for recs in records_by_array.values() for r in recs]
        edges = np.arange(np.floor(min(allv)), np.ceil(max(allv)) + bin_width, bin_width)
        styles = {"ula": "-", "da": "--"}
        for kind, recs in records_by_array.items():
            for case in sorted({r.case for r in recs}):
                v = [r.gain_db for r in recs if r.case == case]
                counts, _ = np.histogram(v, edges)
                ax.step(edges[:-1], counts / max(1, len(v)), where="post",
                        ls=styles.get(kind, "-"), label=f"{kind.upper()} case {case}")
        ax.set_xlabel("total array gain [dB]")
        ax.set_ylabel("fraction per bin")
        ax.legend(fontsize=7, ncols=2)
        return _save(fig, path)


def link_traces(records, n_links: int, n_orientations: int, case: int, path,
                bound_db: float | None = None, title: str = "") -> Path:
    """Gain versus link index, one thin line per orientation, median in red."""
    import matplotlib as mpl

    g = np.full((n_orientations, n_links), np.nan)
    ids = sorted({r.link_id for r in records})
    col = {lid: i for i, lid in enumerate(ids)}
    for r in records:
        if r.case == case:
            g[r.orientation_id, col[r.link_id]] = r.gain_db
    x = np.arange(len(ids))
    with mpl.rc_context(STYLE):
        fig = _figure(7.0, 3.4)
        ax = fig.add_subplot()
        for row in g[:, : len(ids)]:
            ax.plot(x, row, color="k", lw=0.3, alpha=0.5)
        ax.plot(x, np.nanmedian(g[:, : len(ids)], axis=0), color="r", lw=1.2, label="median")
        if bound_db is not None:
            ax.axhline(bound_db, color="r", ls="--", lw=1.0, label=f"bound {bound_db:.1f} dB")
        ax.set_xlabel("link index")
        ax.set_ylabel("total array gain [dB]")
        ax.set_title(title or CASE_LABELS.get(case, f"case {case}"))
        ax.legend(fontsize=7, loc="lower right")
        return _save(fig, path)


def body_loss_figure(model: BodyModel, path, phi0: float = np.pi) -> Path:
    import matplotlib as mpl

    phi, loss = loss_curve(phi0, model)
    with mpl.rc_context(STYLE):
        fig = _figure(5.0, 3.0)
        ax = fig.add_subplot()
        ax.plot(np.rad2deg(phi), loss)
        ax.invert_yaxis()
        ax.set_xlabel("arrival azimuth [deg]")
        ax.set_ylabel("body loss [dB]")
        ax.set_title(f"phi0 = {np.rad2deg(phi0):.0f} deg, phi_b = {np.rad2deg(model.phi_b):.1f} deg")
        return _save(fig, path)


def pattern_cut(theta_deg, gain_dbi, path, label: str = "", floor_db: float = -30.0) -> Path:
    """Gain along a polar cut (theta from 0 to 360 deg through both half planes)."""
    import matplotlib as mpl

    with mpl.rc_context(STYLE):
        fig = _figure(5.0, 3.0)
        ax = fig.add_subplot()
        ax.plot(theta_deg, np.maximum(gain_dbi, floor_db), label=label or None)
        ax.set_xlabel("polar angle through the cut [deg]")
        ax.set_ylabel("gain [dBi]")
        if label:
            ax.legend(fontsize=7)
        return _save(fig, path)


def calibration_objective(grid, objective, best: float, path) -> Path:
    import matplotlib as mpl

    with mpl.rc_context(STYLE):
        fig = _figure(5.0, 3.0)
        ax = fig.add_subplot()
        ax.plot(grid, np.asarray(objective) * 1e9, marker=".")
        ax.axvline(best, color="r", ls="--", lw=1.0)
        ax.set_xlabel("relative permittivity")
        ax.set_ylabel("RMS delay-spread error [ns]")
        return _save(fig, path)
