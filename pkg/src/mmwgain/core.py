"""Shared domain types, angle conventions, Euler rotations and RNG streams.

Angles are radians internally. Field quantities are stored linear; dB is
for display and file formats only (20*log10 for amplitudes, 10*log10 for
powers).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
SPEED_OF_LIGHT = 299_792_458.0
ETA0 = 376.730313668
POLE_EPS = 1e-9


class DegenerateBasisWarning(UserWarning):
    """Raised (as a warning) when a direction sits exactly on a pole."""


def wrap_azimuth(phi):
    """Normalize azimuth into [0, 2*pi)."""
    out = np.mod(phi, TWO_PI)
    # np.mod can round up to 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return out if np.ndim(out) else float(out)


def wrap_pi(x):
    """Wrap an angle difference into [-pi, pi)."""
    return np.mod(np.asarray(x) + np.pi, TWO_PI) - np.pi


def db10(x):
    return 10.0 * np.log10(x)


def db20(x):
    return 20.0 * np.log10(np.abs(x))


def from_db10(x):
    return 10.0 ** (np.asarray(x) / 10.0)


def from_db20(x):
    return 10.0 ** (np.asarray(x) / 20.0)


def wavelength(frequency: float) -> float:
    return SPEED_OF_LIGHT / frequency


def wavenumber(frequency: float) -> float:
    return TWO_PI * frequency / SPEED_OF_LIGHT


@dataclass(frozen=True)
class Direction:
    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta)
        if not (0.0 <= theta <= np.pi) or not np.isfinite(theta):
            raise ValueError(f"theta={theta} outside [0, pi]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", float(wrap_azimuth(float(self.phi))))

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "Direction":
        return cls(np.deg2rad(theta_deg), np.deg2rad(phi_deg))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        theta, phi = cart_to_sph(np.asarray(v, dtype=float))
        return cls(float(theta), float(phi))

    def unit_vector(self) -> np.ndarray:
        return sph_to_cart(self.theta, self.phi)

    @property
    def is_pole(self) -> bool:
        return self.theta == 0.0 or self.theta == np.pi


@dataclass(frozen=True)
class EulerOrientation:
    """Phone posture as rotations about z, then y1, then z2."""

    phi0: float = 0.0
    theta0: float = 0.0
    chi0: float = 0.0

    @classmethod
    def from_degrees(cls, phi0: float, theta0: float, chi0: float = 0.0) -> "EulerOrientation":
        return cls(np.deg2rad(phi0), np.deg2rad(theta0), np.deg2rad(chi0))

    def degrees(self) -> tuple[float, float, float]:
        return tuple(float(np.rad2deg(a)) for a in (self.phi0, self.theta0, self.chi0))

    def inverse(self) -> "EulerOrientation":
        return EulerOrientation(-self.chi0, -self.theta0, -self.phi0)


@dataclass(frozen=True)
class PolarimetricGain:
    e_v: complex
    e_h: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.e_v, self.e_h], dtype=complex)

    @property
    def power(self) -> float:
        return abs(self.e_v) ** 2 + abs(self.e_h) ** 2

    @property
    def gain_dbi(self) -> float:
        return float(db10(self.power))


@dataclass(frozen=True, eq=False)
class RadiationPattern:
    """Polarimetric far-field gains sampled on an angular grid.

    ``theta``/``phi`` are flat arrays of length L; ``e_v``/``e_h`` are the
    complex field gains along theta-hat and phi-hat (sqrt of linear gain).
    """

    theta: np.ndarray
    phi: np.ndarray
    e_v: np.ndarray
    e_h: np.ndarray
    frequency: float = 60e9
    grid_step: float | None = None

    def __post_init__(self):
        th = np.ascontiguousarray(self.theta, dtype=float).ravel()
        ph = wrap_azimuth(np.ascontiguousarray(self.phi, dtype=float).ravel())
        ev = np.ascontiguousarray(self.e_v, dtype=complex).ravel()
        eh = np.ascontiguousarray(self.e_h, dtype=complex).ravel()
        if not (th.size == ph.size == ev.size == eh.size):
            raise ValueError("grid and gains must have the same length")
        if np.any(th < 0) or np.any(th > np.pi):
            raise ValueError("theta outside [0, pi]")
        if not (np.all(np.isfinite(ev)) and np.all(np.isfinite(eh))):
            raise ValueError("pattern contains non-finite values")
        for arr in (th, ph, ev, eh):
            arr.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)
        object.__setattr__(self, "e_v", ev)
        object.__setattr__(self, "e_h", eh)

    def __len__(self) -> int:
        return self.theta.size

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.e_v) ** 2 + np.abs(self.e_h) ** 2

    @property
    def gain_dbi(self) -> np.ndarray:
        return db10(self.power)

    def stacked(self) -> np.ndarray:
        """V rows then H rows, the layout used by the SWE basis matrix."""
        return np.concatenate([self.e_v, self.e_h])

    def scaled(self, factor) -> "RadiationPattern":
        return RadiationPattern(self.theta, self.phi, self.e_v * factor, self.e_h * factor,
                                self.frequency, self.grid_step)


def sphere_grid(step: float, offset: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Equiangular (theta, phi) grid, theta offset from the poles by ``offset*step``.

    Returns flat arrays, theta-major. ``step`` in radians must divide pi.
    """
    n_theta = int(round(np.pi / step))
    n_phi = 2 * n_theta
    if not np.isclose(n_theta * step, np.pi):
        raise ValueError("grid step must divide 180 degrees")
    theta = (np.arange(n_theta) + offset) * step
    if np.any(theta <= 0) or np.any(theta >= np.pi):
        raise ValueError("grid would hit a pole; use 0 < offset < 1")
    phi = np.arange(n_phi) * step
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return tt.ravel(), pp.ravel()


def quadrature_weights(theta: np.ndarray, step: float) -> np.ndarray:
    """Midpoint-rule solid-angle weights for an equiangular grid."""
    return np.sin(theta) * step * step


def sph_to_cart(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta) * np.ones_like(phi)], axis=-1)


def cart_to_sph(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    theta = np.arccos(np.clip(v[..., 2] / r, -1.0, 1.0))
    phi = wrap_azimuth(np.arctan2(v[..., 1], v[..., 0]))
    return theta, phi


def sph_basis(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors theta-hat and phi-hat, shape (..., 3)."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    theta_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phi_hat = np.stack([-sp, cp, np.zeros_like(cp * st)], axis=-1)
    return theta_hat, phi_hat


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_matrix(o: EulerOrientation) -> np.ndarray:
    """Rotation R such that a phone-frame vector v_p sits at ``R @ v_p`` globally.

    The phone is turned about its z axis by chi0, tilted about y by theta0,
    then turned about the global z axis by phi0: R = Rz(phi0) Ry(theta0)
    Rz(chi0). The display normal therefore points at polar theta0, azimuth
    phi0. A global direction maps into the phone frame as ``R.T @ v``, so a
    pure phi0 turn shifts phone-frame azimuths by -phi0.
    """
    return _rot_z(o.phi0) @ _rot_y(o.theta0) @ _rot_z(o.chi0)


def _perturb_poles(theta: np.ndarray, what: str) -> np.ndarray:
    on_pole = (theta <= 0.0) | (theta >= np.pi)
    if np.any(on_pole):
        warnings.warn(f"{what}: {int(on_pole.sum())} direction(s) exactly on a pole, "
                      f"perturbed by {POLE_EPS} rad", DegenerateBasisWarning, stacklevel=3)
        theta = np.where(theta <= 0.0, POLE_EPS, theta)
        theta = np.where(theta >= np.pi, np.pi - POLE_EPS, theta)
    return theta


def to_phone_frame_arrays(theta, phi, o: EulerOrientation):
    """Vectorized :func:`to_phone_frame`.

    Returns ``(theta_p, phi_p, basis)`` where ``basis[..., :, :]`` maps the
    phone-frame (V, H) field components onto the global-frame (V, H)
    components at the same physical direction.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    R = rotation_matrix(o)
    v_g = sph_to_cart(theta, phi)
    v_p = v_g @ R  # R.T @ v for each row
    theta_p, phi_p = cart_to_sph(v_p)
    theta_p = _perturb_poles(theta_p, "to_phone_frame")
    th_g, ph_g = sph_basis(theta, phi)
    th_p, ph_p = sph_basis(theta_p, phi_p)
    th_p_g = th_p @ R.T
    ph_p_g = ph_p @ R.T
    basis = np.empty(theta.shape + (2, 2))
    basis[..., 0, 0] = np.sum(th_g * th_p_g, axis=-1)
    basis[..., 0, 1] = np.sum(th_g * ph_p_g, axis=-1)
    basis[..., 1, 0] = np.sum(ph_g * th_p_g, axis=-1)
    basis[..., 1, 1] = np.sum(ph_g * ph_p_g, axis=-1)
    return theta_p, phi_p, basis


def to_phone_frame(d: Direction, o: EulerOrientation) -> tuple[Direction, np.ndarray]:
    """Map a global-frame direction into the rotated phone frame.

    The 2x2 matrix converts (V, H) components expressed in the phone frame
    into the global (V, H) components. Exact pole inputs are nudged by
    ``POLE_EPS`` with a :class:`DegenerateBasisWarning`.
    """
    theta = _perturb_poles(np.array(d.theta), "to_phone_frame input")
    tp, pp, basis = to_phone_frame_arrays(theta, np.array(d.phi), o)
    return Direction(float(tp), float(pp)), basis


def rng_for(seed: int, link_id: int = 0, orientation_id: int = 0, realization_id: int = 0,
            stream: int = 0) -> np.random.Generator:
    """Independent, order-free random stream for one work item.

    ``stream`` separates uses (e.g. XPR draws vs. small-scale phases) that
    share the same indices.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(int(stream), int(link_id), int(orientation_id),
                                           int(realization_id)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class Mpc:
    """One multipath component as seen at the mobile.

    ``alpha`` is the 2x2 polarimetric amplitude [[VV, VH], [HV, HH]]; until
    :func:`mmwgain.propagation.expand_polarimetric` runs it only carries the
    co-polarized VV term on the diagonal.
    """

    arrival: Direction
    delay: float
    alpha: np.ndarray
    is_los: bool = False
    excess_loss: float = 0.0
    xpr_db: float = float("inf")
    n_bounces: int = 0

    def __post_init__(self):
        if not self.delay > 0:
            raise ValueError("delay must be positive")
        a = np.array(self.alpha, dtype=complex).reshape(2, 2)
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def a_vv(self) -> complex:
        return complex(self.alpha[0, 0])

    def with_alpha(self, alpha) -> "Mpc":
        return Mpc(self.arrival, self.delay, alpha, self.is_los, self.excess_loss,
                   self.xpr_db, self.n_bounces)


@dataclass(frozen=True)
class BodyModel:
    width: float = 0.5
    separation: float = 0.3
    phi_b: float = float(np.arctan2(0.25, 0.3))
    L_b: float = 20.0

    def __post_init__(self):
        if self.width < 0 or self.separation <= 0 or self.L_b < 0:
            raise ValueError("body model needs width >= 0, separation > 0, L_b >= 0")
        # the cone half-angle must match the torso geometry
        if abs(self.phi_b - math.atan2(self.width / 2.0, self.separation)) > math.radians(0.1):
            raise ValueError("phi_b inconsistent with width and separation (tolerance 0.1 deg)")


@dataclass(frozen=True)
class ScenarioConfig:
    frequency: float = 60e9
    bandwidth: float = 4e9
    bs_height: float = 5.7
    ms_height: float = 1.5
    route_step: float = 0.6
    n_phase_realizations: int = 100
    seed: int = 20180101
    L_a: float = 20.0
    body: BodyModel = field(default_factory=BodyModel)

    def __post_init__(self):
        for name in ("frequency", "bandwidth", "bs_height", "ms_height", "route_step", "L_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_phase_realizations < 1:
            raise ValueError("n_phase_realizations must be >= 1")
