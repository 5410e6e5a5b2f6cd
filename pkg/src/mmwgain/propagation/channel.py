"""Per-path radio quantities: Fresnel reflection, free-space loss, XPR, PDPs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import SPEED_OF_LIGHT, Mpc, db10, db20, wavelength

HANN_ENERGY = 1.5  # integral of the squared normalized kernel, in units of 1/B
DELAY_SPREAD_FLOOR_DB = 40.0


# ---------------------------------------------------------------------------
# Reflection and free-space loss


def fresnel_coeff(eps_r, incidence_angle, pol: str = "perpendicular"):
    """Fresnel amplitude reflection coefficient of a half-space.

    ``incidence_angle`` is measured from the surface normal. Parallel uses the
    convention that gives the same sign as perpendicular at normal incidence.
    """
    c = np.cos(incidence_angle)
    root = np.sqrt(eps_r - np.sin(incidence_angle) ** 2 + 0j)
    if pol in ("perpendicular", "te", "s"):
        return (c - root) / (c + root)
    if pol in ("parallel", "tm", "p"):
        return (root - eps_r * c) / (root + eps_r * c)
    raise ValueError(f"unknown polarization {pol!r}")


def mixed_reflection(eps_r, incidence_angle, w_perp):
    """Single scalar coefficient for a wave whose power is ``w_perp`` perpendicular.

    Power-weighted mix of the two polarizations, carrying the phase of the
    perpendicular coefficient (real and negative for lossless media).
    """
    rs = fresnel_coeff(eps_r, incidence_angle, "perpendicular")
    rp = fresnel_coeff(eps_r, incidence_angle, "parallel")
    mag = np.sqrt(w_perp * np.abs(rs) ** 2 + (1.0 - w_perp) * np.abs(rp) ** 2)
    return mag * np.exp(1j * np.angle(rs))


def fspl(distance, frequency: float = 60e9):
    """Free-space path loss 20 log10(4 pi d / lambda) in dB."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 20.0 * np.log10(4.0 * np.pi * d / wavelength(frequency))
    return float(out) if out.ndim == 0 else out


def fspl_delay(delay, frequency: float = 60e9):
    return fspl(np.asarray(delay) * SPEED_OF_LIGHT, frequency)


def excess_loss(a_vv, delay: float, frequency: float = 60e9) -> float:
    """Loss beyond free space: -20 log10|a_VV| - FSPL(delay), in dB."""
    return float(-db20(abs(a_vv)) - fspl_delay(delay, frequency))


# ---------------------------------------------------------------------------
# Cross-polarization


@dataclass(frozen=True)
class XprModel:
    """XPR_dB ~ N(max(0, alpha2 * L_ex + beta2), sigma2^2)."""

    alpha2: float = -0.6
    beta2: float = 35.0
    sigma2: float = 4.0

    def __post_init__(self):
        if not (self.alpha2 < 0 and self.beta2 > 0 and self.sigma2 >= 0):
            raise ValueError("XPR model needs alpha2 < 0, beta2 > 0, sigma2 >= 0")

    @property
    def breakpoint(self) -> float:
        """Excess loss beyond which the mean XPR is clipped to 0 dB."""
        return -self.beta2 / self.alpha2

    def mean(self, l_ex):
        return np.maximum(0.0, self.alpha2 * np.asarray(l_ex, dtype=float) + self.beta2)

    def draw(self, l_ex, rng: np.random.Generator):
        mu = self.mean(l_ex)
        return rng.normal(mu, self.sigma2)


def expand_polarimetric(mpc: Mpc, model: XprModel, rng: np.random.Generator) -> Mpc:
    """Fill the cross-polar terms of ``alpha`` from a drawn XPR.

    HH equals VV; VH = HV = VV / sqrt(XPR). The direct path stays diagonal.
    """
    a = mpc.a_vv
    if mpc.is_los:
        xpr = math.inf
        alpha = np.diag([a, a])
    else:
        xpr = float(model.draw(mpc.excess_loss, rng))
        x = a / math.sqrt(10.0 ** (xpr / 10.0))
        alpha = np.array([[a, x], [x, a]])
    return Mpc(mpc.arrival, mpc.delay, alpha, mpc.is_los, mpc.excess_loss, xpr, mpc.n_bounces)


def expand_link(mpcs: list[Mpc], model: XprModel, rng: np.random.Generator) -> list[Mpc]:
    """Expand every path of a link in order from one stream."""
    return [expand_polarimetric(p, model, rng) for p in mpcs]


# ---------------------------------------------------------------------------
# Power delay profiles


@dataclass(frozen=True)
class Pdp:
    delay: np.ndarray  # s
    power: np.ndarray  # linear
    bandwidth: float | None = None


def hann_kernel(x):
    """Delay response of a Hann-windowed band, in units of 1/B, peak 1.

    sinc(x) / (1 - x^2), with the removable singularity at |x| = 1 equal to 1/2.
    """
    x = np.asarray(x, dtype=float)
    den = 1.0 - x * x
    near = np.abs(den) < 1e-8
    safe = np.where(near, 1.0, den)
    return np.where(near, 0.5, np.sinc(x) / safe)


def synthesize_pdp(mpcs, bandwidth: float = 4e9, delays=None, amplitudes=None,
                   guard: float = 32.0) -> Pdp:
    """Band-limited PDP |sum_l a_l K(B (t - tau_l))|^2 on a grid of step 1/(4B).

    Amplitudes default to the co-polar VV term of each path. The grid is
    anchored at integer multiples of the step and extends ``guard``/B past
    the first and last path. Powers are scaled so that well separated paths
    keep their energy.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if delays is None:
        if not mpcs:
            raise ValueError("cannot synthesize a PDP from zero paths")
        delays = np.array([p.delay for p in mpcs])
        amplitudes = np.array([p.a_vv for p in mpcs])
    delays = np.asarray(delays, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if delays.size == 0:
        raise ValueError("cannot synthesize a PDP from zero paths")
    t, K = delay_kernel(delays, bandwidth, guard)
    return Pdp(t, pdp_power(K @ amplitudes, bandwidth), bandwidth)


def delay_kernel(delays, bandwidth: float, guard: float = 32.0) -> tuple[np.ndarray, np.ndarray]:
    """Delay grid and the (samples, paths) kernel matrix used by :func:`synthesize_pdp`."""
    delays = np.asarray(delays, dtype=float)
    dt = 1.0 / (4.0 * bandwidth)
    k0 = math.floor((delays.min() - guard / bandwidth) / dt)
    k1 = math.ceil((delays.max() + guard / bandwidth) / dt)
    t = np.arange(k0, k1 + 1) * dt
    return t, hann_kernel(bandwidth * (t[:, None] - delays[None, :]))


def pdp_power(h, bandwidth: float) -> np.ndarray:
    """Sampled power of the band-limited response ``h`` (energy-preserving scale)."""
    return np.abs(h) ** 2 * (0.25 / HANN_ENERGY)


@dataclass(frozen=True)
class LargeScaleParams:
    pathloss: float  # dB
    mean_delay: float  # s
    rms_delay_spread: float  # s


def large_scale_params(pdp: Pdp, floor_db: float | None = DELAY_SPREAD_FLOOR_DB) -> LargeScaleParams:
    """Path loss, mean delay and rms delay spread of a sampled PDP.

    Samples more than ``floor_db`` below the peak are left out of the delay
    moments (as a sounder noise floor would); path loss uses every sample.
    """
    p = np.asarray(pdp.power, dtype=float)
    t = np.asarray(pdp.delay, dtype=float)
    total = p.sum()
    if not total > 0:
        raise ValueError("PDP has no energy")
    w = p
    if floor_db is not None:
        w = np.where(p >= p.max() * 10.0 ** (-floor_db / 10.0), p, 0.0)
    w = w / w.sum()
    mean = float(w @ t)
    spread = float(np.sqrt(max(0.0, w @ (t - mean) ** 2)))
    return LargeScaleParams(float(-db10(total)), mean, spread)
