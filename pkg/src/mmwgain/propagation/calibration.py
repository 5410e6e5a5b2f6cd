"""Grid search for the permittivity that best reproduces reference delay spreads."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ..core import from_db20, wavelength, wavenumber
from .channel import (
    DELAY_SPREAD_FLOOR_DB,
    LargeScaleParams,
    Pdp,
    delay_kernel,
    large_scale_params,
    mixed_reflection,
    pdp_power,
    synthesize_pdp,
)
from .geometry import Environment
from .tracer import PathGeometry, path_amplitudes

log = logging.getLogger(__name__)


class DegenerateCalibrationWarning(RuntimeWarning):
    pass


def permittivity_grid(lo: float = 2.0, hi: float = 6.0, step: float = 0.1) -> np.ndarray:
    # built from integer indices and rounded so that e.g. 3.6 is exactly 3.6
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 10)


@dataclass(frozen=True)
class CalibrationResult:
    eps_r: float
    grid: np.ndarray
    objective: np.ndarray  # RMS delay-spread error (s) per grid value
    degenerate: bool = False


def link_params(paths: list[PathGeometry], env: Environment, eps_r: float | None,
                bandwidth: float = 4e9, frequency: float = 60e9,
                floor_db: float | None = DELAY_SPREAD_FLOOR_DB) -> LargeScaleParams:
    amps = path_amplitudes(paths, env, frequency, eps_r)
    pdp = synthesize_pdp(None, bandwidth, delays=[p.delay for p in paths], amplitudes=amps)
    return large_scale_params(pdp, floor_db)


def amplitude_table(paths: list[PathGeometry], env: Environment, grid,
                    frequency: float = 60e9) -> np.ndarray:
    """Path amplitudes for every candidate permittivity at once, (n_grid, n_paths)."""
    grid = np.asarray(grid, dtype=float)
    k = wavenumber(frequency)
    lam = wavelength(frequency)
    out = np.empty((grid.size, len(paths)), dtype=complex)
    for n, p in enumerate(paths):
        d = p.length
        a = np.full(grid.size, lam / (4.0 * np.pi * d) * np.exp(-1j * k * d))
        for inc, w in zip(p.incidence, p.w_perp):
            a = a * mixed_reflection(grid, inc, w)
        out[:, n] = a * from_db20(-p.obstruction_db(env.L_a))
    return out


def delay_spread_table(env: Environment, links: list[list[PathGeometry]], grid,
                       bandwidth: float = 4e9, frequency: float = 60e9) -> np.ndarray:
    """RMS delay spread per candidate permittivity and link, (n_grid, n_links).

    The delay kernel does not depend on the permittivity, so each link's
    kernel is built once and applied to all candidates in one product.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    out = np.empty((grid.size, len(links)))
    for i, paths in enumerate(links):
        t, K = delay_kernel([p.delay for p in paths], bandwidth)
        P = pdp_power(K @ amplitude_table(paths, env, grid, frequency).T, bandwidth)
        for j in range(grid.size):
            out[j, i] = large_scale_params(Pdp(t, P[:, j], bandwidth)).rms_delay_spread
    return out


def simulated_delay_spreads(env: Environment, links: list[list[PathGeometry]], eps_r: float,
                            bandwidth: float = 4e9, frequency: float = 60e9) -> np.ndarray:
    return delay_spread_table(env, links, [eps_r], bandwidth, frequency)[0]


def calibrate_permittivity(env: Environment, links: list[list[PathGeometry]], reference,
                           grid=None, bandwidth: float = 4e9,
                           frequency: float = 60e9) -> CalibrationResult:
    """Permittivity on ``grid`` minimizing the RMS delay-spread error.

    ``links`` are traced path geometries (traced once, re-weighted per
    candidate). Ties go to the smaller permittivity.
    """
    reference = np.asarray(reference, dtype=float)
    if len(links) == 0:
        raise ValueError("calibration needs at least one link")
    if reference.shape != (len(links),):
        raise ValueError("need one reference delay spread per link")
    grid = permittivity_grid() if grid is None else np.asarray(grid, dtype=float)
    sim = delay_spread_table(env, links, grid, bandwidth, frequency)
    obj = np.sqrt(np.mean((sim - reference[None, :]) ** 2, axis=1))
    for eps, o in zip(grid, obj):
        log.debug("eps_r=%.2f rms error %.4g s", eps, o)
    degenerate = bool(np.ptp(obj) <= 1e-15 * max(1.0, float(np.max(np.abs(obj)))))
    if degenerate:
        warnings.warn("delay spread does not depend on permittivity here; returning grid minimum",
                      DegenerateCalibrationWarning, stacklevel=2)
        best = int(np.argmin(grid))
    else:
        ties = np.flatnonzero(obj == obj.min())
        best = int(ties[np.argmin(grid[ties])])
    return CalibrationResult(float(grid[best]), grid, obj, degenerate)
