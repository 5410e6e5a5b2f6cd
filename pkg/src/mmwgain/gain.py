"""Channel vectors, MRC combining, total array gain and its percentile statistics.

The total array gain is the mean MRC output power of the phone array over
random path phases, divided by the power an ideal isotropic receiver
matched to the base-station excitation would collect from the same paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .antenna import PhoneArray, element_fields, element_fields_batch
from .core import EulerOrientation, Mpc, db10, rotation_matrix, sph_to_cart, wavenumber

E_B = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
MIN_STAT_SAMPLES = 50


@dataclass(frozen=True, eq=False)
class ChannelVector:
    h: np.ndarray
    realization_id: int = 0

    def __len__(self) -> int:
        return self.h.size


@dataclass(frozen=True)
class GainStats:
    peak: float  # 98th percentile, dB
    median: float
    outage: float  # 2nd percentile, dB
    count: int


def _paths(mpcs: list[Mpc]):
    if not mpcs:
        raise ValueError("channel needs at least one path")
    theta = np.array([p.arrival.theta for p in mpcs])
    phi = np.array([p.arrival.phi for p in mpcs])
    alpha = np.array([p.alpha for p in mpcs])
    los = np.array([p.is_los for p in mpcs], dtype=bool)
    return theta, phi, alpha, los


def path_responses(fields: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """E^H alpha_l E_b for each element and path.

    ``fields`` is (..., L, 2) in (V, H); ``alpha`` is (L, 2, 2).
    """
    tx = alpha @ E_B  # (L, 2)
    return np.einsum("...lp,lp->...l", fields.conj(), tx)


def geometric_phase(a: PhoneArray, theta, phi, o: EulerOrientation) -> np.ndarray:
    """Plane-wave phase e^{+jk r_n . u_l} of each element for arrivals from u_l, (n_el, L).

    Element positions are in the phone frame, so they are rotated into the
    global frame first.
    """
    u = sph_to_cart(np.asarray(theta, float), np.asarray(phi, float))
    r = a.positions @ rotation_matrix(o).T
    return np.exp(1j * wavenumber(a.frequency) * (r @ u.T))


def draw_phases(mpcs: list[Mpc], rng: np.random.Generator) -> np.ndarray:
    """Uniform path phases on [0, 2pi); the direct LOS path keeps phase 0."""
    xi = rng.uniform(0.0, 2.0 * np.pi, len(mpcs))
    xi[[p.is_los for p in mpcs]] = 0.0
    return xi


def channel_vector(a: PhoneArray, o: EulerOrientation, mpcs: list[Mpc], rng: np.random.Generator,
                   method: str = "swe", realization_id: int = 0, xi=None) -> ChannelVector:
    """h_n = sum_l E_n^H alpha_l E_b e^{j xi_l} e^{jk r_n . u_l}."""
    theta, phi, alpha, _ = _paths(mpcs)
    fields = element_fields(a, o, theta, phi, method)
    c = path_responses(fields, alpha) * geometric_phase(a, theta, phi, o)
    if xi is None:
        xi = draw_phases(mpcs, rng)
    return ChannelVector(c @ np.exp(1j * np.asarray(xi)), realization_id)


def mrc_weights(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    n = np.linalg.norm(h)
    return np.zeros_like(h) if n == 0 else h.conj() / n


def mrc_output_power(h) -> float:
    """|h . w|^2 with MRC weights, which is ||h||^2."""
    h = np.asarray(h, dtype=complex)
    return float(np.real(np.vdot(h, h)))


def omni_gain(mpcs: list[Mpc], reference: str = "matched") -> float:
    """Power collected by an isotropic receiver from the given paths.

    ``matched`` sums ||alpha_l E_b||^2 (receiver matched to the BS
    excitation); ``frobenius`` sums ||alpha_l||_F^2 / 2.
    """
    if not mpcs:
        raise ValueError("channel needs at least one path")
    alpha = np.array([p.alpha for p in mpcs])
    if reference == "matched":
        return float(np.sum(np.abs(alpha @ E_B) ** 2))
    if reference == "frobenius":
        return float(np.sum(np.abs(alpha) ** 2) / 2.0)
    raise ValueError(f"unknown reference {reference!r}")


def expected_power(a: PhoneArray, o: EulerOrientation, mpcs: list[Mpc], method: str = "swe") -> float:
    """E[||h||^2] over independent path phases: sum_n sum_l |E_n^H alpha_l E_b|^2."""
    theta, phi, alpha, _ = _paths(mpcs)
    fields = element_fields(a, o, theta, phi, method)
    return float(np.sum(np.abs(path_responses(fields, alpha)) ** 2))


def total_array_gain(a: PhoneArray, o: EulerOrientation, mpcs: list[Mpc], n_realizations: int = 100,
                     rng: np.random.Generator | None = None, method: str = "closed",
                     pattern_method: str = "swe", reference: str = "matched",
                     reference_mpcs: list[Mpc] | None = None) -> float:
    """Total array gain in dB.

    ``method="closed"`` uses the expectation over phases directly;
    ``method="mc"`` averages ||h||^2 over ``n_realizations`` phase draws.
    ``reference_mpcs`` (default: ``mpcs``) sets the isotropic reference, so
    shadowed channels can be compared against the unshadowed one.
    """
    p_o = omni_gain(reference_mpcs if reference_mpcs is not None else mpcs, reference)
    if not p_o > 0:
        raise ValueError("omnidirectional reference power is zero")
    if method == "closed":
        num = expected_power(a, o, mpcs, pattern_method)
    elif method == "mc":
        if n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if rng is None:
            raise ValueError("Monte-Carlo averaging needs an rng")
        theta, phi, alpha, _ = _paths(mpcs)
        fields = element_fields(a, o, theta, phi, pattern_method)
        c = path_responses(fields, alpha) * geometric_phase(a, theta, phi, o)
        xi = np.array([draw_phases(mpcs, rng) for _ in range(n_realizations)])  # (R, L)
        h = np.exp(1j * xi) @ c.T  # (R, n_el)
        num = float(np.mean(np.sum(np.abs(h) ** 2, axis=1)))
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(db10(num / p_o))


def closed_form_table(a: PhoneArray, orientations, mpcs: list[Mpc], path_weights=None,
                      masked: bool = True) -> np.ndarray:
    """sum_l w_l |E_n^H alpha_l E_b|^2 per orientation and element, (n_o, n_el).

    ``path_weights`` is an optional (n_o, L) power factor per orientation,
    e.g. body shadowing that follows the phone azimuth.
    """
    theta, phi, alpha, _ = _paths(mpcs)
    fields = element_fields_batch(a, orientations, theta, phi, masked)
    p = np.abs(path_responses(fields, alpha)) ** 2  # (n_o, n_el, L)
    if path_weights is not None:
        p = p * np.asarray(path_weights)[:, None, :]
    return p.sum(axis=-1)


def gain_statistics(values, min_count: int = MIN_STAT_SAMPLES) -> GainStats:
    """98th / 50th / 2nd percentiles (linear interpolation) of gains in dB."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < min_count:
        raise ValueError(f"gain statistics need at least {min_count} samples "
                         f"(got {v.size}); percentiles below the {MIN_STAT_SAMPLES}-sample "
                         f"floor are not meaningful")
    outage, median, peak = np.percentile(v, [2.0, 50.0, 98.0])
    return GainStats(float(peak), float(median), float(outage), int(v.size))


def gain_upper_bound_db(element_peak_dbi: float, n_elements: int = 8) -> float:
    return element_peak_dbi + 10.0 * math.log10(n_elements)
