"""Image-method tracing of the direct path and 1st/2nd-order specular reflections.

Tracing is split in two: :func:`trace_geometry` finds the valid paths
(points, facets hit, incidence angles, obstructions) and
:func:`path_amplitudes` turns them into complex VV amplitudes for a given
permittivity. Calibration reuses the geometry across many permittivities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import SPEED_OF_LIGHT, Direction, Mpc, cart_to_sph, from_db20, wavenumber, wavelength
from .channel import excess_loss, mixed_reflection
from .geometry import STRUCTURAL_LOSS_DB, Environment, GeometryError

ON_PLANE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PathGeometry:
    points: np.ndarray  # bs, reflection points..., ms
    facets: tuple[int, ...]
    incidence: tuple[float, ...]  # angle from the facet normal, per bounce
    w_perp: tuple[float, ...]  # share of V power perpendicular to the plane of incidence
    n_small: int = 0
    n_structural: int = 0

    @property
    def n_bounces(self) -> int:
        return len(self.facets)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    @property
    def delay(self) -> float:
        return self.length / SPEED_OF_LIGHT

    @property
    def arrival(self) -> Direction:
        """Direction at the mobile pointing back toward where the wave comes from."""
        u = self.points[-2] - self.points[-1]
        th, ph = cart_to_sph(u / np.linalg.norm(u))
        return Direction(float(th), float(ph))

    @property
    def departure(self) -> Direction:
        u = self.points[1] - self.points[0]
        th, ph = cart_to_sph(u / np.linalg.norm(u))
        return Direction(float(th), float(ph))

    def obstruction_db(self, L_a: float) -> float:
        return self.n_small * L_a + self.n_structural * STRUCTURAL_LOSS_DB


@dataclass(frozen=True, eq=False)
class Link:
    link_id: int
    bs: np.ndarray
    ms: np.ndarray
    mpcs: tuple[Mpc, ...]
    cls: str  # "LOS" | "OLOS"
    paths: tuple[PathGeometry, ...] = ()


class _FacetArrays:
    """Facet planes as arrays for vectorized segment tests."""

    def __init__(self, env: Environment):
        self.env = env
        self.n = np.array([f.normal for f in env.facets]).reshape(-1, 3)
        self.off = np.array([f.offset for f in env.facets])
        self.small = np.array([f.kind == "small_object" for f in env.facets], dtype=bool)

    def crossings(self, p: np.ndarray, q: np.ndarray, skip=()) -> tuple[int, int]:
        if not len(self.off):
            return 0, 0
        dp = self.n @ p - self.off
        dq = self.n @ q - self.off
        cand = np.nonzero(dp * dq < 0)[0]
        n_small = n_struct = 0
        for i in cand:
            if i in skip:
                continue
            t = dp[i] / (dp[i] - dq[i])
            if t <= 1e-9 or t >= 1 - 1e-9:
                continue
            if self.env.facets[i].contains(p + t * (q - p)):
                if self.small[i]:
                    n_small += 1
                else:
                    n_struct += 1
        return n_small, n_struct


def _theta_hat(s: np.ndarray) -> np.ndarray:
    # component of -z perpendicular to s; arbitrary when s is vertical
    e = -np.array([0.0, 0.0, 1.0]) + s[2] * s
    n = np.linalg.norm(e)
    return e / n if n > 1e-12 else np.array([1.0, 0.0, 0.0])


def _bounce(s_in: np.ndarray, s_out: np.ndarray, normal: np.ndarray) -> tuple[float, float]:
    """(incidence angle, perpendicular power share) at one reflection.

    The share is averaged over the incoming and outgoing legs so a path and
    its reverse see the same coefficient.
    """
    cos_i = min(1.0, abs(float(s_in @ normal)))
    p = np.cross(s_in, normal)
    pn = np.linalg.norm(p)
    if pn < 1e-12:
        return 0.0, 0.5
    p /= pn
    w = 0.5 * (float(_theta_hat(s_in) @ p) ** 2 + float(_theta_hat(s_out) @ p) ** 2)
    return math.acos(cos_i), w


def _check_endpoint(env: Environment, p: np.ndarray, what: str):
    for f in env.facets:
        if abs(f.signed_distance(p)) < ON_PLANE_TOL and f.contains(p - f.signed_distance(p) * f.normal):
            raise GeometryError(f"{what} lies on facet {f.name or '(unnamed)'}")


def _make_path(fa: _FacetArrays, pts: list[np.ndarray], facets: tuple[int, ...]) -> PathGeometry:
    env = fa.env
    inc, wp = [], []
    legs = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
    legs = [v / np.linalg.norm(v) for v in legs]
    for b, fi in enumerate(facets):
        a, w = _bounce(legs[b], legs[b + 1], env.facets[fi].normal)
        inc.append(a)
        wp.append(w)
    n_small = n_struct = 0
    for i in range(len(pts) - 1):
        skip = set()
        if i > 0:
            skip.add(facets[i - 1])
        if i < len(facets):
            skip.add(facets[i])
        s, t = fa.crossings(pts[i], pts[i + 1], skip)
        n_small += s
        n_struct += t
    return PathGeometry(np.array(pts), facets, tuple(inc), tuple(wp), n_small, n_struct)


def trace_geometry(env: Environment, bs, ms, max_order: int = 2) -> list[PathGeometry]:
    """All valid paths up to ``max_order`` reflections, direct path first, then by length."""
    bs = np.asarray(bs, dtype=float)
    ms = np.asarray(ms, dtype=float)
    if not 0 <= max_order <= 2:
        raise ValueError("max_order must be 0, 1 or 2")
    if np.linalg.norm(bs - ms) < ON_PLANE_TOL:
        raise GeometryError("base station and mobile coincide")
    _check_endpoint(env, bs, "base station")
    _check_endpoint(env, ms, "mobile")
    fa = _FacetArrays(env)
    facets = env.facets
    paths = [_make_path(fa, [bs, ms], ())]

    if max_order >= 1:
        for i, f in enumerate(facets):
            db, dm = f.signed_distance(bs), f.signed_distance(ms)
            if db * dm <= 0:
                continue
            img = f.mirror(bs)
            t = -db / (-db - dm)
            r = img + t * (ms - img)
            if f.contains(r):
                paths.append(_make_path(fa, [bs, r, ms], (i,)))

    if max_order >= 2:
        images = [f.mirror(bs) for f in facets]
        for i, f in enumerate(facets):
            db = f.signed_distance(bs)
            if abs(db) < ON_PLANE_TOL:
                continue
            img1 = images[i]
            for j, g in enumerate(facets):
                if j == i:
                    continue
                d1, dm = g.signed_distance(img1), g.signed_distance(ms)
                if d1 * dm <= 0:
                    continue
                img2 = g.mirror(img1)
                t2 = -d1 / (-d1 - dm)
                r2 = img2 + t2 * (ms - img2)
                if not g.contains(r2):
                    continue
                dr2 = f.signed_distance(r2)
                if db * dr2 <= 0:
                    continue
                t1 = -db / (-db - dr2)
                r1 = img1 + t1 * (r2 - img1)
                if not f.contains(r1):
                    continue
                if g.signed_distance(r1) * dm <= 0:
                    continue
                paths.append(_make_path(fa, [bs, r1, r2, ms], (i, j)))

    direct, rest = paths[0], sorted(paths[1:], key=lambda p: (p.length, p.facets))
    return [direct] + rest


def path_amplitudes(paths: list[PathGeometry], env: Environment, frequency: float = 60e9,
                    eps_r: float | None = None) -> np.ndarray:
    """Complex VV amplitude of each path.

    Free-space amplitude lambda/(4 pi d) with phase e^{-jkd}, times the
    reflection coefficients and obstruction losses. ``eps_r`` overrides the
    facet permittivities.
    """
    k = wavenumber(frequency)
    lam = wavelength(frequency)
    out = np.empty(len(paths), dtype=complex)
    for n, p in enumerate(paths):
        d = p.length
        a = lam / (4.0 * math.pi * d) * np.exp(-1j * k * d)
        for fi, inc, w in zip(p.facets, p.incidence, p.w_perp):
            eps = env.facets[fi].eps_r if eps_r is None else eps_r
            a *= mixed_reflection(eps, inc, w)
        out[n] = a * from_db20(-p.obstruction_db(env.L_a))
    return out


def to_mpcs(paths: list[PathGeometry], env: Environment, frequency: float = 60e9,
            eps_r: float | None = None) -> list[Mpc]:
    amps = path_amplitudes(paths, env, frequency, eps_r)
    out = []
    for n, (p, a) in enumerate(zip(paths, amps)):
        direct = p.n_bounces == 0
        is_los = direct and p.n_structural == 0
        out.append(Mpc(p.arrival, p.delay, np.diag([a, a]), is_los,
                       excess_loss(a, p.delay, frequency), math.inf if is_los else math.nan,
                       p.n_bounces))
    return out


def trace(env: Environment, bs, ms, max_order: int = 2, frequency: float = 60e9) -> list[Mpc]:
    """Co-polar MPCs between ``bs`` and ``ms``; index 0 is the direct path."""
    return to_mpcs(trace_geometry(env, bs, ms, max_order), env, frequency)


def classify(paths: list[PathGeometry]) -> str:
    d = paths[0]
    return "LOS" if d.n_small == 0 and d.n_structural == 0 else "OLOS"


def trace_link(env: Environment, bs, ms, link_id: int = 0, max_order: int = 2,
               frequency: float = 60e9) -> Link:
    paths = trace_geometry(env, bs, ms, max_order)
    return Link(link_id, np.asarray(bs, float), np.asarray(ms, float),
                tuple(to_mpcs(paths, env, frequency)), classify(paths), tuple(paths))
