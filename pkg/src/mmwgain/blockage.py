"""Human-torso shadowing as a parabolic loss in arrival azimuth.

The user holds the phone in front of the body, so the torso sits behind
the phone at azimuth ``phi0 - pi``. Paths arriving within ``phi_b`` of that
direction lose up to ``L_b`` dB, falling off quadratically to 0 at the edge
of the cone. Elevation is ignored.
"""

from __future__ import annotations

import math

import numpy as np

from .core import BodyModel, Mpc, from_db20, wrap_pi


def derive_phi_b(width: float, separation: float) -> float:
    """Half-angle subtended by a torso of ``width`` at ``separation`` metres."""
    if width < 0 or separation <= 0:
        raise ValueError("width must be >= 0 and separation > 0")
    return math.atan((width / 2.0) / separation)


def body_model(width: float = 0.5, separation: float = 0.3, L_b: float = 20.0) -> BodyModel:
    return BodyModel(width=width, separation=separation, phi_b=derive_phi_b(width, separation), L_b=L_b)


def body_loss(phi_arrival, phi0: float, model: BodyModel = BodyModel()):
    """Shadowing loss in dB for arrivals at azimuth ``phi_arrival``.

    The offset from the torso direction is wrapped into [-pi, pi) first so
    the cone behaves across the 0/2pi seam.
    """
    off = wrap_pi(np.asarray(phi_arrival, dtype=float) - (phi0 - np.pi))
    if model.phi_b <= 0:
        loss = np.zeros_like(off)
    else:
        loss = np.maximum(0.0, model.L_b * (1.0 - (off / model.phi_b) ** 2))
    return float(loss) if loss.ndim == 0 else loss


def loss_curve(phi0: float, model: BodyModel = BodyModel(), n: int = 361):
    """(azimuth, loss_db) samples over a full turn, for plotting."""
    phi = np.linspace(0.0, 2 * np.pi, n)
    return phi, body_loss(phi, phi0, model)


def apply_body(mpcs: list[Mpc], phi0: float, model: BodyModel = BodyModel()) -> list[Mpc]:
    """New MPC list with each alpha scaled by the body loss (as an amplitude).

    Applying twice compounds the loss; callers apply it once per case.
    """
    out = []
    for p in mpcs:
        loss = body_loss(p.arrival.phi, phi0, model)
        out.append(p if loss == 0.0 else p.with_alpha(p.alpha * from_db20(-loss)))
    return out
