"""Patch elements, ULA/DA layouts on the phone chassis, finger masks, orientations.

The element is an analytic stand-in for full-wave simulated patches: the
far field is ``a(psi) * (u - (u.d) d)`` with ``psi`` the angle from
boresight and ``u`` the slant polarization reference (perpendicular to the
boresight). The power envelope ``a^2`` is a cosine power of the half angle
in front, blended over a 20 deg band just in front of the horizon into a
flat back floor ``front_to_back`` dB down, so the whole back hemisphere
sits exactly at the floor. The blend is a degree-7 polynomial smoothstep
(three continuous derivatives), which keeps the expansion short. The
exponent is solved so that the total radiated power integrates to 4*pi at
the requested broadside gain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import betainc

from . import swe
from .core import (
    Direction,
    EulerOrientation,
    PolarimetricGain,
    RadiationPattern,
    cart_to_sph,
    from_db10,
    from_db20,
    rotation_matrix,
    sph_basis,
    sph_to_cart,
    sphere_grid,
    to_phone_frame_arrays,
    wavelength,
)

log = logging.getLogger(__name__)

CHASSIS = (0.075, 0.150, 0.008)  # x (width), y (length), z (thickness), metres
CORNER_INSET = 0.005
BLEND_START = np.deg2rad(70.0)
BLEND_END = np.deg2rad(90.0)
DEFAULT_GRID_STEP = np.deg2rad(2.0)
HOLDOUT_GRID_STEP = np.deg2rad(2.5)


@dataclass(frozen=True)
class PatchElementSpec:
    broadside_gain: float = 8.0  # dBi
    front_to_back: float = 20.0  # dB
    polarization_tilt: float = np.deg2rad(-45.0)
    substrate: str = "0.127 mm Rogers 5880, eps_r 2.2 (informational)"


@dataclass(frozen=True)
class FingerSpec:
    covered_element: int = 0
    main_attenuation: float = 20.0
    neighbor_attenuation: float = 6.0
    neighbor_cone_halfwidth: float = np.deg2rad(30.0)
    # fingertip centre in front of the covered element: 3 mm clearance + 6 mm half-thickness
    offset: float = 0.009

    def __post_init__(self):
        if self.main_attenuation < 0 or self.neighbor_attenuation < 0:
            raise ValueError("finger attenuations must be >= 0 dB")
        if self.offset < 0:
            raise ValueError("finger offset must be >= 0 m")


def _front_weight(psi):
    # regularized incomplete beta I_t(4, 4) is the degree-7 smoothstep
    t = np.clip((psi - BLEND_START) / (BLEND_END - BLEND_START), 0.0, 1.0)
    return 1.0 - betainc(4.0, 4.0, t)


def _envelope(psi, exponent: float, floor: float):
    # relative power envelope, 1 at boresight
    w = _front_weight(psi)
    return w * ((1.0 + np.cos(psi)) / 2.0) ** exponent + (1.0 - w) * floor


@lru_cache(maxsize=64)
def solve_exponent(broadside_gain: float, front_to_back: float) -> float:
    """Cosine-power exponent giving unit average gain at the stated peak."""
    peak = from_db10(broadside_gain)
    floor = from_db10(-front_to_back)

    def total_power(p):
        # azimuthal average of |u - (u.d)d|^2 around the boresight is 1 - sin^2(psi)/2
        f = lambda psi: _envelope(psi, p, floor) * (1 - 0.5 * np.sin(psi) ** 2) * np.sin(psi)
        return 2 * np.pi * quad(f, 0, np.pi, points=[BLEND_START, BLEND_END], limit=200)[0]

    return brentq(lambda p: peak * total_power(p) - 4 * np.pi, 0.01, 200.0, xtol=1e-12)


# phone upright with the display toward global +x: x -> y, y -> z, z -> x
STANDING = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _perp_frame(boresight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Slant reference (e1, e2) perpendicular to the boresight, in the phone frame.

    e1 is the local vertical (theta-hat) at the boresight with the phone
    standing and e2 = boresight x e1 the local horizontal, so a tilt of
    +45 deg radiates V + H in that posture and -45 deg radiates V + H with
    the long axis horizontal. An element facing straight up takes the limit
    from the display side.
    """
    d = STANDING @ boresight
    if abs(d[2]) > 0.99:
        d = d + 0.05 * STANDING[:, 2]
    theta, phi = cart_to_sph(d / np.linalg.norm(d))
    th_hat, _ = sph_basis(theta, phi)
    e1 = STANDING.T @ th_hat
    e1 = e1 - boresight * (e1 @ boresight)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(boresight, e1)


@dataclass(frozen=True, eq=False)
class PatchElement:
    """Grid-free analytic element pattern in the phone frame."""

    boresight: np.ndarray
    spec: PatchElementSpec = PatchElementSpec()

    def __post_init__(self):
        b = np.asarray(self.boresight, dtype=float)
        object.__setattr__(self, "boresight", b / np.linalg.norm(b))

    @property
    def polarization_vector(self) -> np.ndarray:
        e1, e2 = _perp_frame(self.boresight)
        t = self.spec.polarization_tilt
        return np.cos(t) * e1 + np.sin(t) * e2

    def fields(self, theta, phi) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        d = sph_to_cart(theta, phi)
        psi = np.arccos(np.clip(d @ self.boresight, -1.0, 1.0))
        expo = solve_exponent(self.spec.broadside_gain, self.spec.front_to_back)
        amp = np.sqrt(from_db10(self.spec.broadside_gain)
                      * _envelope(psi, expo, from_db10(-self.spec.front_to_back)))
        u = self.polarization_vector
        vec = (u - (d @ u)[..., None] * d) * amp[..., None]
        th_hat, ph_hat = sph_basis(theta, phi)
        return np.sum(vec * th_hat, axis=-1).astype(complex), np.sum(vec * ph_hat, axis=-1).astype(complex)


def patch_pattern(spec: PatchElementSpec, theta, phi, boresight=(0.0, 0.0, 1.0),
                  frequency: float = 60e9, grid_step: float | None = None) -> RadiationPattern:
    """Sample the analytic patch model on a grid."""
    ev, eh = PatchElement(np.asarray(boresight, float), spec).fields(theta, phi)
    return RadiationPattern(theta, phi, ev, eh, frequency, grid_step)


@dataclass(frozen=True)
class ElementMask:
    """Finger shadowing seen by one element, evaluated in the phone frame."""

    uniform_db: float = 0.0
    cone_axis: tuple[float, float, float] | None = None
    cone_halfwidth: float = 0.0
    cone_db: float = 0.0

    def amplitude(self, d_phone: np.ndarray) -> np.ndarray:
        out = np.full(d_phone.shape[:-1], float(from_db20(-self.uniform_db)))
        if self.cone_axis is not None and self.cone_db > 0:
            inside = d_phone @ np.asarray(self.cone_axis) >= np.cos(self.cone_halfwidth)
            out = np.where(inside, out * from_db20(-self.cone_db), out)
        return out

    @property
    def is_identity(self) -> bool:
        return self.uniform_db == 0 and (self.cone_axis is None or self.cone_db == 0)


@dataclass(frozen=True, eq=False)
class ArrayElement:
    position: np.ndarray
    boresight: np.ndarray
    polarization_tilt: float
    base_pattern: RadiationPattern
    coefficients: swe.SweCoefficients
    model: PatchElement | None = None
    mask: ElementMask = ElementMask()


@dataclass(frozen=True, eq=False)
class PhoneArray:
    kind: str
    elements: tuple[ArrayElement, ...]
    frequency: float = 60e9
    finger: FingerSpec | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.elements) != 8:
            raise ValueError("a phone array has exactly 8 elements")

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def positions(self) -> np.ndarray:
        return np.array([e.position for e in self.elements])


def _layout(kind: str, frequency: float):
    """Element (position, boresight) pairs in the phone frame (origin at chassis centre)."""
    hx, hy, hz = (c / 2 for c in CHASSIS)
    step = wavelength(frequency) / 2
    if kind == "ula":
        x0 = -hx + CORNER_INSET
        return [((x0 + i * step, hy - CORNER_INSET, hz), (0.0, 0.0, 1.0)) for i in range(8)]
    if kind == "da":
        out = []
        # left-top corner: left side face and top edge face
        out += [((-hx, hy - CORNER_INSET - i * step, 0.0), (-1.0, 0.0, 0.0)) for i in range(2)]
        out += [((-hx + CORNER_INSET + i * step, hy, 0.0), (0.0, 1.0, 0.0)) for i in range(2)]
        # right-top corner: right side face and rear face
        out += [((hx, hy - CORNER_INSET - i * step, 0.0), (1.0, 0.0, 0.0)) for i in range(2)]
        out += [((hx - CORNER_INSET - i * step, hy - CORNER_INSET, -hz), (0.0, 0.0, -1.0))
                for i in range(2)]
        return out
    raise ValueError(f"unknown array kind {kind!r} (expected 'ula' or 'da')")


@lru_cache(maxsize=32)
def _element_expansion(boresight: tuple, spec: PatchElementSpec, frequency: float,
                       grid_step: float):
    model = PatchElement(np.array(boresight), spec)
    t, p = sphere_grid(grid_step)
    base = patch_pattern(spec, t, p, boresight, frequency, grid_step)
    th, ph = sphere_grid(HOLDOUT_GRID_STEP, offset=0.3)
    holdout = patch_pattern(spec, th, ph, boresight, frequency, HOLDOUT_GRID_STEP)
    coeffs = swe.decompose_adaptive(base, holdout)
    log.info("element %s: N=%d, held-out residual %.2e", boresight, coeffs.n_max, coeffs.residual)
    return model, base, coeffs


def build_array(kind: str, spec: PatchElementSpec = PatchElementSpec(), frequency: float = 60e9,
                grid_step: float = DEFAULT_GRID_STEP,
                patterns: list[RadiationPattern] | None = None) -> PhoneArray:
    """Eight-patch ULA (one corner, display side) or DA (two top corners, four faces).

    ``patterns`` (one per element, or a single shared one) overrides the
    analytic model with externally supplied base patterns.
    """
    kind = kind.lower()
    layout = _layout(kind, frequency)
    if patterns is not None and len(patterns) not in (1, 8):
        raise ValueError("supply one pattern per element or a single shared pattern")
    elements = []
    for i, (pos, bore) in enumerate(layout):
        if patterns is None:
            model, base, coeffs = _element_expansion(bore, spec, frequency, grid_step)
        else:
            base = patterns[i if len(patterns) == 8 else 0]
            model, coeffs = None, swe.decompose_adaptive(base)
        elements.append(ArrayElement(np.array(pos), np.array(bore, float), spec.polarization_tilt,
                                     base, coeffs, model))
    meta = {
        "layout": "assumed: element coordinates/tilts not published; 5 mm corner inset",
        "chi0": 0.0,
        "pattern_source": "analytic patch" if patterns is None else "external",
    }
    return PhoneArray(kind, tuple(elements), frequency, None, meta)


def apply_finger(a: PhoneArray, f: FingerSpec) -> PhoneArray:
    """Return a copy of ``a`` with the finger mask attached to every element.

    The fingertip sits ``f.offset`` in front of the covered element along its
    boresight; every other element loses ``neighbor_attenuation`` dB inside a
    cone pointing from it toward the fingertip.
    """
    if not 0 <= f.covered_element < len(a):
        raise ValueError("covered_element out of range")
    c = a.elements[f.covered_element]
    tip = c.position + f.offset * c.boresight
    new = []
    for i, e in enumerate(a.elements):
        if i == f.covered_element:
            mask = ElementMask(uniform_db=f.main_attenuation)
        else:
            axis = tip - e.position
            axis = axis / np.linalg.norm(axis)
            mask = ElementMask(cone_axis=tuple(axis), cone_halfwidth=f.neighbor_cone_halfwidth,
                               cone_db=f.neighbor_attenuation)
        new.append(replace(e, mask=mask))
    return PhoneArray(a.kind, tuple(new), a.frequency, f, dict(a.metadata))


def enumerate_orientations() -> list[EulerOrientation]:
    """The 24 postures: phi0 every 45 deg (major), theta0 in {0, 45, 90} (minor), chi0 = 0."""
    return [EulerOrientation.from_degrees(p, t, 0.0)
            for p in range(0, 360, 45) for t in (0, 45, 90)]


def orientation_report(orientations=None) -> list[dict]:
    """Per-orientation metadata, flagging postures whose phone axis repeats.

    The display normal points at (theta0, phi0), so with theta0 = 0 every
    phi0 leaves it vertical and those postures differ only by a spin about
    that axis. They stay distinct rotations but are flagged.
    """
    orientations = orientations or enumerate_orientations()
    z = np.array([0.0, 0.0, 1.0])
    axes = [rotation_matrix(o) @ z for o in orientations]
    out = []
    for i, o in enumerate(orientations):
        dup = any(np.allclose(axes[i], axes[j], atol=1e-12) for j in range(i))
        phi0, theta0, chi0 = o.degrees()
        out.append({"orientation_id": i, "phi0_deg": phi0, "theta0_deg": theta0, "chi0_deg": chi0,
                    "axis_duplicate": bool(dup)})
    return out


class PatternInterpolator:
    """Bilinear interpolation of a pattern on a regular offset grid.

    Interpolates the Cartesian field vector (smooth through the poles) and
    projects back onto theta-hat / phi-hat at the query direction.
    """

    def __init__(self, p: RadiationPattern):
        grid = swe._regular_grid(p.theta, p.phi)
        if grid is None:
            raise ValueError("direct route needs a regular theta-major grid")
        self.th, self.ph = grid
        n_th, n_ph = self.th.size, self.ph.size
        th_hat, ph_hat = sph_basis(p.theta, p.phi)
        vec = p.e_v[:, None] * th_hat + p.e_h[:, None] * ph_hat
        self.vec = vec.reshape(n_th, n_ph, 3)
        self.dth = self.th[1] - self.th[0]
        self.dph = self.ph[1] - self.ph[0]

    def __call__(self, theta, phi) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, float)
        phi = np.asarray(phi, float)
        n_th, n_ph = self.th.size, self.ph.size
        x = np.clip((theta - self.th[0]) / self.dth, 0.0, n_th - 1.0)
        i0 = np.minimum(np.floor(x).astype(int), n_th - 2)
        fx = x - i0
        y = np.mod(phi - self.ph[0], 2 * np.pi) / self.dph
        j0 = np.floor(y).astype(int) % n_ph
        fy = y - np.floor(y)
        j1 = (j0 + 1) % n_ph
        v = (self.vec[i0, j0] * ((1 - fx) * (1 - fy))[..., None]
             + self.vec[i0 + 1, j0] * (fx * (1 - fy))[..., None]
             + self.vec[i0, j1] * ((1 - fx) * fy)[..., None]
             + self.vec[i0 + 1, j1] * (fx * fy)[..., None])
        th_hat, ph_hat = sph_basis(theta, phi)
        return np.sum(v * th_hat, axis=-1), np.sum(v * ph_hat, axis=-1)


@lru_cache(maxsize=64)
def _interpolator(pattern: RadiationPattern) -> PatternInterpolator:
    return PatternInterpolator(pattern)


def _rotated_fields(e: ArrayElement, o: EulerOrientation, theta, phi, method: str,
                    F: np.ndarray | None = None) -> np.ndarray:
    """Unmasked global-frame (e_V, e_H) of one element, shape (L, 2)."""
    L = theta.size
    if method == "swe":
        c = e.coefficients
        if F is None or F.shape[1] != c.J:
            F = swe.basis_matrix(theta, phi, c.n_max)
        E = c.scale * (F @ swe.rotate_coefficients(c, o).q)
        return np.stack([E[:L], E[L:]], axis=-1)
    if method == "direct":
        tp, pp, basis = to_phone_frame_arrays(theta, phi, o)
        ev, eh = _interpolator(e.base_pattern)(tp, pp)
        return np.einsum("lij,lj->li", basis, np.stack([ev, eh], axis=-1))
    raise ValueError(f"unknown method {method!r}")


def element_fields(a: PhoneArray, o: EulerOrientation, theta, phi, method: str = "swe",
                   F: np.ndarray | None = None) -> np.ndarray:
    """Global-frame (e_V, e_H) of every element at global directions.

    Returns shape (n_elements, L, 2). ``F`` may carry a precomputed basis
    matrix at these directions so it is reused across orientations.
    Elements sharing a base pattern are evaluated once. Finger masks act in
    the phone frame.
    """
    theta = np.atleast_1d(np.asarray(theta, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    out = np.empty((len(a), theta.size, 2), dtype=complex)
    d_phone = sph_to_cart(theta, phi) @ rotation_matrix(o)
    done = {}
    for i, e in enumerate(a.elements):
        key = id(e.base_pattern)
        if key not in done:
            done[key] = _rotated_fields(e, o, theta, phi, method, F)
        out[i] = done[key]
        if not e.mask.is_identity:
            out[i] *= e.mask.amplitude(d_phone)[:, None]
    return out


def element_gain_at(a: PhoneArray, element: int, o: EulerOrientation, d_global: Direction,
                    method: str = "swe") -> PolarimetricGain:
    """Polarimetric gain of one element of the rotated phone toward a global direction."""
    if not 0 <= element < len(a):
        raise ValueError("element index out of range")
    theta = d_global.theta
    if d_global.is_pole:
        theta = 1e-9 if theta == 0.0 else np.pi - 1e-9
    theta, phi = np.array([theta]), np.array([d_global.phi])
    e = a.elements[element]
    E = _rotated_fields(e, o, theta, phi, method)[0]
    if not e.mask.is_identity:
        E = E * e.mask.amplitude(sph_to_cart(theta, phi) @ rotation_matrix(o))[0]
    return PolarimetricGain(complex(E[0]), complex(E[1]))


_ROTATED: dict = {}


def _rotated_table(c: swe.SweCoefficients, orientations: tuple) -> np.ndarray:
    """Scaled rotated coefficient vectors, one row per orientation (cached)."""
    key = (id(c), orientations)
    hit = _ROTATED.get(key)
    if hit is None or hit[0] is not c:
        if len(_ROTATED) > 64:
            _ROTATED.clear()
        table = np.array([swe.rotate_coefficients(c, o).q * c.scale for o in orientations])
        hit = _ROTATED[key] = (c, table)
    return hit[1]


def element_fields_batch(a: PhoneArray, orientations, theta, phi,
                         masked: bool = True) -> np.ndarray:
    """SWE fields of every element for many orientations at once.

    Returns shape (n_orientations, n_elements, L, 2). The basis matrix at
    the directions is built once per truncation order; each orientation
    only rotates the coefficient vectors, since (F C) q = F (C q).
    """
    theta = np.atleast_1d(np.asarray(theta, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    theta = np.clip(theta, 1e-9, np.pi - 1e-9)
    L = theta.size
    orientations = list(orientations)
    unique = {}
    for e in a.elements:
        unique.setdefault(id(e.coefficients), e.coefficients)
    fields = {}
    by_order: dict[int, list] = {}
    for key, c in unique.items():
        by_order.setdefault(c.n_max, []).append((key, c))
    for n_max, group in by_order.items():
        F = swe.basis_matrix(theta, phi, n_max)
        Q = np.array([_rotated_table(c, tuple(orientations)) for _, c in group])  # (g, n_o, J)
        E = F @ Q.reshape(-1, Q.shape[-1]).T  # (2L, g * n_o)
        E = E.T.reshape(len(group), len(orientations), 2, L)
        for gi, (key, _) in enumerate(group):
            fields[key] = np.moveaxis(E[gi], 1, 2)  # (n_o, L, 2)
    out = np.empty((len(orientations), len(a), L, 2), dtype=complex)
    d = sph_to_cart(theta, phi)
    for oi, o in enumerate(orientations):
        d_phone = d @ rotation_matrix(o) if masked else None
        for i, e in enumerate(a.elements):
            out[oi, i] = fields[id(e.coefficients)][oi]
            if masked and not e.mask.is_identity:
                out[oi, i] *= e.mask.amplitude(d_phone)[:, None]
    return out


def mask_amplitudes(a: PhoneArray, o: EulerOrientation, theta, phi) -> np.ndarray:
    """Finger-mask amplitude factor of each element toward global directions, (n_el, L)."""
    d_phone = sph_to_cart(np.asarray(theta, float), np.asarray(phi, float)) @ rotation_matrix(o)
    return np.array([e.mask.amplitude(d_phone) for e in a.elements])
