"""Spherical wave expansion of far-field patterns and their rotation.

A base pattern E_o sampled on L directions is written as
``E_o = (k / sqrt(eta)) F q`` where the 2L x J matrix F stacks the theta
(V) and phi (H) components of the far-field spherical vector wave
functions for n = 1..N, m = -n..n, s = 1, 2 (J = 2N(N+2)), under the
e^{j w t} time convention. The rotated pattern uses the same q with a
basis F' built from Wigner-d mixing of the m-index inside each n-block.

Mode ordering inside q (and columns of F): n outermost, then m, then s::

    j = 2 * (n * (n + 1) + m - 1) + (s - 1)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import eval_jacobi

from .core import (
    ETA0,
    EulerOrientation,
    PolarimetricGain,
    RadiationPattern,
    Direction,
    wavenumber,
)

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


class SweError(RuntimeError):
    """Decomposition failed (grid too coarse / rank deficient)."""


def n_modes(n_max: int) -> int:
    return 2 * n_max * (n_max + 2)


def mode_index(s: int, m: int, n: int) -> int:
    return 2 * (n * (n + 1) + m - 1) + (s - 1)


def mode_table(n_max: int) -> np.ndarray:
    """(J, 3) integer array of (s, m, n) in column order."""
    rows = [(s, m, n) for n in range(1, n_max + 1) for m in range(-n, n + 1) for s in (1, 2)]
    return np.array(rows, dtype=int)


@dataclass(frozen=True, eq=False)
class SweCoefficients:
    n_max: int
    q: np.ndarray
    k: float = wavenumber(60e9)
    eta: float = ETA0
    residual: float = float("nan")
    condition: float = float("nan")

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        q = np.asarray(self.q, dtype=complex).ravel()
        if q.size != n_modes(self.n_max):
            raise ValueError(f"q has {q.size} entries, expected 2N(N+2) = {n_modes(self.n_max)}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def scale(self) -> float:
        return self.k / math.sqrt(self.eta)

    @property
    def J(self) -> int:
        return self.q.size


# ---------------------------------------------------------------------------
# Associated Legendre functions


def legendre_table(n_max: int, x, u=None):
    """Fully normalized associated Legendre values P̄_n^m(x) for 0 <= m <= n <= n_max.

    Normalization: integral of P̄^2 over [-1, 1] is 1, no Condon-Shortley
    phase. Returns an array of shape (n_max + 1, n_max + 1, len(x)) indexed
    [n, m]; entries with m > n are zero. Pass ``u = sin(theta)`` when x is
    cos(theta): near the poles sqrt(1 - x^2) loses everything to rounding.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > 1.0):
        raise ValueError("|x| > 1")
    if u is None:
        u = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    else:
        u = np.atleast_1d(np.asarray(u, dtype=float))
    P = np.zeros((n_max + 1, n_max + 1, x.size))
    P[0, 0] = 1.0 / math.sqrt(2.0)
    for m in range(1, n_max + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * u * P[m - 1, m - 1]
    for m in range(0, n_max):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
        for n in range(m + 2, n_max + 1):
            a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = math.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    return P


def legendre_norm(n: int, m: int, x):
    """Single fully normalized associated Legendre value (see :func:`legendre_table`)."""
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    out = legendre_table(n, x)[n, m]
    return float(out[0]) if np.ndim(x) == 0 else out


def legendre_dtheta(P: np.ndarray) -> np.ndarray:
    """d/dtheta of P̄_n^m(cos theta) from a :func:`legendre_table` result."""
    n_max = P.shape[0] - 1
    dP = np.zeros_like(P)
    for n in range(1, n_max + 1):
        dP[n, 0] = -math.sqrt(n * (n + 1.0)) * P[n, 1]
        for m in range(1, n + 1):
            lo = math.sqrt((n + m) * (n - m + 1.0)) * P[n, m - 1]
            hi = math.sqrt((n - m) * (n + m + 1.0)) * P[n, m + 1] if m < n else 0.0
            dP[n, m] = 0.5 * (lo - hi)
    return dP


# ---------------------------------------------------------------------------
# Wigner-d


def _wigner_jacobi(n: int, mu: int, m: int, theta: float) -> float:
    # closed form, valid for mu >= |m|
    lf = math.lgamma
    pref = math.exp(0.5 * (lf(n + mu + 1) + lf(n - mu + 1) - lf(n + m + 1) - lf(n - m + 1)))
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return pref * c ** (mu + m) * s ** (mu - m) * float(eval_jacobi(n - mu, mu - m, mu + m, math.cos(theta)))


def wigner_d(n: int, mu: int, m: int, theta: float) -> float:
    """Rotation coefficient d^n_{mu m}(theta) via the Jacobi-polynomial form.

    The closed form holds for mu >= |m|; the other index regions follow
    from d_{mu m} = (-1)^{mu-m} d_{m mu} = d_{-m,-mu}.
    """
    if abs(mu) > n or abs(m) > n or n < 0:
        raise ValueError(f"indices out of range: n={n}, mu={mu}, m={m}")
    if theta == 0.0:
        return float(mu == m)
    if mu >= abs(m):
        return _wigner_jacobi(n, mu, m, theta)
    if -mu >= abs(m):
        return (-1) ** ((mu - m) % 2) * _wigner_jacobi(n, -mu, -m, theta)
    if m >= abs(mu):
        return (-1) ** ((mu - m) % 2) * _wigner_jacobi(n, m, mu, theta)
    return _wigner_jacobi(n, -m, -mu, theta)


def wigner_d_sum(n: int, mu: int, m: int, theta: float) -> float:
    """Independent factorial-sum evaluation of :func:`wigner_d` (cross-check)."""
    if abs(mu) > n or abs(m) > n:
        raise ValueError("indices out of range")
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    f = math.factorial
    pref = math.sqrt(f(n + mu) * f(n - mu) * f(n + m) * f(n - m))
    total = 0.0
    for k in range(max(0, m - mu), min(n - mu, n + m) + 1):
        den = f(n + m - k) * f(k) * f(mu - m + k) * f(n - mu - k)
        total += (-1) ** k * c ** (2 * n + m - mu - 2 * k) * s ** (mu - m + 2 * k) / den
    # the sum is the mu<->m transpose of the textbook form, hence no (-1)^(mu-m)
    return pref * total


@lru_cache(maxsize=None)
def _jy_eigen(n: int) -> tuple[np.ndarray, np.ndarray]:
    # J_y on |n, m>, m = -n..n; eigenvalues are the integers -n..n
    m = np.arange(-n, n)
    jp = np.diag(np.sqrt(n * (n + 1.0) - m * (m + 1.0)), -1)
    w, V = np.linalg.eigh((jp - jp.T) / 2j)
    return np.round(w), V


def _wigner_block(n: int, theta: float) -> np.ndarray:
    # whole (mu, m) block as exp(-j theta J_y), transposed to match wigner_d;
    # one small matrix product instead of (2n+1)^2 Jacobi evaluations
    if theta == 0.0:
        return np.eye(2 * n + 1)
    w, V = _jy_eigen(n)
    return ((V * np.exp(-1j * w * theta)) @ V.conj().T).real.T


@lru_cache(maxsize=4096)
def _wigner_block_cached(n: int, theta: float) -> np.ndarray:
    d = _wigner_block(n, theta)
    d.setflags(write=False)
    return d


def wigner_d_matrix(n: int, theta: float) -> np.ndarray:
    """(2n+1) x (2n+1) matrix with rows mu = -n..n and columns m = -n..n."""
    return _wigner_block_cached(int(n), float(theta))


# ---------------------------------------------------------------------------
# Basis functions


def _sign_factor(m: int) -> float:
    # (-m/|m|)^m, defined as 1 for m = 0
    return (-1.0) ** m if m > 0 else 1.0


def basis_matrix(theta, phi, n_max: int) -> np.ndarray:
    """Assemble F (2L x J): V rows for all directions, then H rows.

    Directions must avoid the poles (the m/sin(theta) term).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    st = np.sin(theta)
    if np.any(st <= 0.0):
        raise ValueError("basis_matrix: direction on a pole")
    L = theta.size
    P = legendre_table(n_max, np.cos(theta), st)
    dP = legendre_dtheta(P)
    F = np.zeros((2 * L, n_modes(n_max)), dtype=complex)
    for n in range(1, n_max + 1):
        ms = np.arange(-n, n + 1)
        am = np.abs(ms)
        sign = np.where(ms > 0, (-1.0) ** am, 1.0)
        kmn = math.sqrt(2.0 / (n * (n + 1.0))) * sign * np.exp(-1j * np.outer(phi, ms))  # (L, 2n+1)
        msin = -1j * ms * (P[n, am].T / st[:, None])
        dth = dP[n, am].T
        ph1 = (-1j) ** (n + 1)
        ph2 = (-1j) ** n
        j1 = 2 * (n * (n + 1) + ms - 1)
        F[:L, j1] = kmn * ph1 * msin
        F[L:, j1] = kmn * ph1 * (-dth)
        F[:L, j1 + 1] = kmn * ph2 * dth
        F[L:, j1 + 1] = kmn * ph2 * msin
    return F


def basis_functions(d: Direction, s: int, m: int, n: int) -> PolarimetricGain:
    """Single far-field basis function (f_V, f_H) at one direction."""
    if s not in (1, 2) or abs(m) > n or n < 1:
        raise ValueError("invalid (s, m, n)")
    if d.is_pole:
        raise ValueError("basis_functions: direction on a pole")
    F = basis_matrix([d.theta], [d.phi], n)
    j = mode_index(s, m, n)
    return PolarimetricGain(complex(F[0, j]), complex(F[1, j]))


# ---------------------------------------------------------------------------
# Decomposition


def _regular_grid(theta: np.ndarray, phi: np.ndarray):
    """Detect a theta-major tensor grid with uniform phi spacing."""
    thetas = np.unique(theta)
    n_th = thetas.size
    if theta.size % n_th:
        return None
    n_ph = theta.size // n_th
    th = theta.reshape(n_th, n_ph)
    ph = phi.reshape(n_th, n_ph)
    if not np.all(th == th[:, :1]) or not np.all(np.diff(th[:, 0]) > 0):
        return None
    if not np.allclose(ph, ph[:1], atol=1e-12):
        return None
    expected = ph[0, 0] + 2.0 * np.pi * np.arange(n_ph) / n_ph
    if not np.allclose(ph[0], expected, atol=1e-9):
        return None
    return th[:, 0], ph[0]


def _solve_pivoted(A: np.ndarray, b: np.ndarray, ridge: float = 0.0):
    """Least squares via pivoted QR; returns (x, condition estimate)."""
    if ridge > 0:
        A = np.vstack([A, math.sqrt(ridge) * np.eye(A.shape[1])])
        b = np.concatenate([b, np.zeros(A.shape[1], dtype=b.dtype)])
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    cond = float(diag[0] / diag[-1]) if diag[-1] > 0 else float("inf")
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SweError(f"basis matrix rank deficient (condition estimate {cond:.3g}); "
                       f"grid too coarse for the requested N")
    y = scipy.linalg.solve_triangular(R, Q.conj().T @ b)
    x = np.empty_like(y)
    x[piv] = y
    return x, cond


def _ring_columns(m: int, n_max: int, P: np.ndarray, dP: np.ndarray, st: np.ndarray):
    """Theta-dependent part of all (s, n) columns sharing azimuth order m.

    Returns (A, idx): A has V rows then H rows for each ring; idx are the
    matching positions in q.
    """
    cols = []
    idx = []
    for n in range(max(1, abs(m)), n_max + 1):
        norm = math.sqrt(2.0 / (n * (n + 1.0))) * _sign_factor(m)
        msin = -1j * m * P[n, abs(m)] / st
        dth = dP[n, abs(m)]
        ph1, ph2 = (-1j) ** (n + 1), (-1j) ** n
        cols.append(np.concatenate([norm * ph1 * msin, norm * ph1 * (-dth)]))
        cols.append(np.concatenate([norm * ph2 * dth, norm * ph2 * msin]))
        j1 = mode_index(1, m, n)
        idx += [j1, j1 + 1]
    return np.stack(cols, axis=1), idx


def _decompose_regular(ev, eh, th, ph, n_max, ridge):
    n_th, n_ph = th.size, ph.size
    if n_ph <= 2 * n_max:
        raise SweError(f"{n_ph} azimuth samples cannot resolve |m| <= {n_max}")
    ev2 = ev.reshape(n_th, n_ph)
    eh2 = eh.reshape(n_th, n_ph)
    P = legendre_table(n_max, np.cos(th), np.sin(th))
    dP = legendre_dtheta(P)
    st = np.sin(th)
    w = np.tile(np.sqrt(st), 2)
    q = np.zeros(n_modes(n_max), dtype=complex)
    cond_max = 1.0
    for m in range(-n_max, n_max + 1):
        # ring-wise Fourier coefficient: mean_j E(theta_i, phi_j) e^{+j m phi_j}
        shift = np.exp(1j * m * ph)
        cv = ev2 @ shift / n_ph
        ch = eh2 @ shift / n_ph
        A, idx = _ring_columns(m, n_max, P, dP, st)
        if A.shape[0] < A.shape[1]:
            raise SweError(f"too few theta rings ({n_th}) for N={n_max}")
        x, cond = _solve_pivoted(A * w[:, None], np.concatenate([cv, ch]) * w, ridge)
        q[idx] = x
        cond_max = max(cond_max, cond)
    return q, cond_max


def _synthesize_regular(q, n_max, th, ph):
    """Evaluate F q on a tensor grid without forming F."""
    P = legendre_table(n_max, np.cos(th), np.sin(th))
    dP = legendre_dtheta(P)
    st = np.sin(th)
    n_th = th.size
    ms = np.arange(-n_max, n_max + 1)
    rings = np.empty((2 * n_th, ms.size), dtype=complex)
    for k, m in enumerate(ms):
        A, idx = _ring_columns(int(m), n_max, P, dP, st)
        rings[:, k] = A @ q[idx]
    E = rings @ np.exp(-1j * np.outer(ms, ph))
    return E[:n_th].ravel(), E[n_th:].ravel()


def decompose(p: RadiationPattern, n_max: int, ridge: float = 0.0) -> SweCoefficients:
    """Least-squares SWE coefficients of a sampled pattern.

    Rows are weighted by sqrt(sin theta) so the fit approximates the L2
    projection on the sphere for grids uniform in theta. Regular theta-major
    grids with uniform azimuth spacing use a per-m block solve (exactly
    equivalent, as columns of different m are orthogonal over the azimuth
    samples); any other grid solves the full system.
    """
    J = n_modes(n_max)
    if 2 * len(p) < J:
        raise SweError(f"2L = {2 * len(p)} < J = {J}: grid too coarse for N={n_max}")
    if np.any(np.sin(p.theta) <= 0):
        raise SweError("pattern grid contains a pole")
    k = wavenumber(p.frequency)
    scale = k / math.sqrt(ETA0)
    data = p.stacked()
    if not np.any(data):
        return SweCoefficients(n_max, np.zeros(J, dtype=complex), k, ETA0, 0.0, 1.0)
    grid = _regular_grid(p.theta, p.phi)
    if grid is not None and grid[1].size > 2 * n_max:
        q, cond = _decompose_regular(p.e_v / scale, p.e_h / scale, grid[0], grid[1], n_max, ridge)
    else:
        w = np.tile(np.sqrt(np.sin(p.theta)), 2)
        F = basis_matrix(p.theta, p.phi, n_max)
        q, cond = _solve_pivoted(F * w[:, None], data * w / scale, ridge)
    c = SweCoefficients(n_max, q, k, ETA0, float("nan"), cond)
    residual = relative_residual(c, p)
    return SweCoefficients(n_max, q, k, ETA0, residual, cond)


def reconstruct(c: SweCoefficients, theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (e_V, e_H) of the expansion at the given directions."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    grid = _regular_grid(theta, phi) if theta.size > 4096 else None
    if grid is not None:
        ev, eh = _synthesize_regular(c.q, c.n_max, grid[0], grid[1])
        return c.scale * ev, c.scale * eh
    E = c.scale * (basis_matrix(theta, phi, c.n_max) @ c.q)
    L = theta.size
    return E[:L], E[L:]


def relative_residual(c: SweCoefficients, p: RadiationPattern) -> float:
    """sin(theta)-weighted relative L2 error of the expansion on p's grid."""
    ev, eh = reconstruct(c, p.theta, p.phi)
    w = np.tile(np.sqrt(np.sin(p.theta)), 2)
    ref = p.stacked() * w
    err = np.concatenate([ev, eh]) * w - ref
    return float(np.linalg.norm(err) / np.linalg.norm(ref))


def decompose_adaptive(p: RadiationPattern, holdout: RadiationPattern | None = None,
                       n_start: int = 4, n_cap: int = 40, tol: float = 1e-3) -> SweCoefficients:
    """Pick N by doubling from ``n_start`` until the held-out residual < ``tol``.

    Without a held-out pattern the in-sample residual is used. Stops at
    ``n_cap`` and returns the last fit (with its residual) either way.
    """
    n = n_start
    best = None
    while True:
        try:
            c = decompose(p, n)
        except SweError:
            if best is None:
                raise
            log.warning("SWE: N=%d not resolvable on this grid, keeping N=%d", n, best.n_max)
            return best
        res = relative_residual(c, holdout) if holdout is not None else c.residual
        best = SweCoefficients(c.n_max, c.q, c.k, c.eta, res, c.condition)
        log.debug("SWE: N=%d residual=%.3g", n, res)
        if res < tol or n >= n_cap:
            if res >= tol:
                log.warning("SWE: residual %.3g above %.1g at N cap %d", res, tol, n)
            return best
        n = min(2 * n, n_cap)


# ---------------------------------------------------------------------------
# Rotation


def rotation_blocks(n_max: int, o: EulerOrientation) -> list[np.ndarray]:
    """Per-n complex mixing blocks C[mu, m] = e^{j mu phi0} d^n_{m mu}(theta0) e^{j m chi0}.

    Mixing the basis columns with these blocks gives the pattern of the
    phone turned by :func:`core.rotation_matrix`.
    """
    blocks = []
    for n in range(1, n_max + 1):
        ms = np.arange(-n, n + 1)
        d = wigner_d_matrix(n, o.theta0).T
        blocks.append(np.exp(1j * o.phi0 * ms)[:, None] * d * np.exp(1j * o.chi0 * ms)[None, :])
    return blocks


def rotate_basis_matrix(F: np.ndarray, n_max: int, o: EulerOrientation) -> np.ndarray:
    """Rotated basis F' where column (s, m, n) = sum_mu C[mu, m] * column (s, mu, n)."""
    Fp = np.empty_like(F)
    for n, C in enumerate(rotation_blocks(n_max, o), start=1):
        for s in (1, 2):
            cols = [mode_index(s, mu, n) for mu in range(-n, n + 1)]
            Fp[:, cols] = F[:, cols] @ C
    return Fp


def rotate_coefficients(c: SweCoefficients, o: EulerOrientation) -> SweCoefficients:
    """Equivalent coefficient-side rotation: F' q == F (T q).

    Used for cross-checking :func:`rotate_basis` and for cheap repeated
    evaluation at many directions.
    """
    qr = np.empty_like(c.q)
    for n, C in enumerate(rotation_blocks(c.n_max, o), start=1):
        for s in (1, 2):
            cols = [mode_index(s, mu, n) for mu in range(-n, n + 1)]
            qr[cols] = C @ c.q[cols]
    return SweCoefficients(c.n_max, qr, c.k, c.eta, c.residual, c.condition)


def rotate_basis(c: SweCoefficients, o: EulerOrientation, theta, phi,
                 frequency: float = 60e9) -> RadiationPattern:
    """Pattern of the rotated antenna on the requested grid, E_m = (k/sqrt(eta)) F' q."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    F = basis_matrix(theta, phi, c.n_max)
    E = c.scale * (rotate_basis_matrix(F, c.n_max, o) @ c.q)
    L = theta.size
    return RadiationPattern(theta, phi, E[:L], E[L:], frequency)


def radiated_power(p: RadiationPattern, step: float) -> float:
    """Sphere-integrated |e_V|^2 + |e_H|^2 on an equiangular offset grid."""
    return float(np.sum(p.power * np.sin(p.theta)) * step * step)
