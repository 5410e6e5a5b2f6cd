from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwgain.blockage import apply_body, body_loss, body_model, derive_phi_b, loss_curve
from mmwgain.core import BodyModel, Direction, Mpc

MODEL = BodyModel()
PHI_B = math.atan(0.25 / 0.3)


def closed_form(phi, phi0, L_b=20.0, phi_b=PHI_B):
    # independent evaluation: shortest signed angle via atan2 of the unit vectors
    d = math.atan2(math.sin(phi - (phi0 - math.pi)), math.cos(phi - (phi0 - math.pi)))
    return max(0.0, L_b * (1 - (d / phi_b) ** 2))


def test_derive_phi_b():
    assert abs(math.degrees(derive_phi_b(0.5, 0.3)) - 39.8) < 0.05
    assert derive_phi_b(0.0, 0.3) == 0.0
    assert derive_phi_b(0.5, 1e12) < 1e-12
    with pytest.raises(ValueError):
        derive_phi_b(0.5, 0.0)


def test_model_consistency_checked():
    assert body_model().phi_b == pytest.approx(PHI_B)
    with pytest.raises(ValueError):
        BodyModel(phi_b=math.radians(45))
    with pytest.raises(ValueError):
        BodyModel(L_b=-1)


@pytest.mark.parametrize("phi0", [0.0, 1.0, math.pi, 5.9])
def test_loss_examples(phi0):
    assert body_loss(phi0 - math.pi, phi0) == pytest.approx(20.0)
    assert body_loss(phi0 - math.pi + PHI_B, phi0) == pytest.approx(0.0, abs=1e-12)
    assert body_loss(phi0 - math.pi - PHI_B / 2, phi0) == pytest.approx(15.0)


def test_loss_matches_closed_form_everywhere():
    rng = np.random.default_rng(0)
    phi = rng.uniform(0, 2 * np.pi, 1000)
    phi0 = rng.uniform(0, 2 * np.pi, 1000)
    for a, b in zip(phi, phi0):
        assert body_loss(a, b) == pytest.approx(closed_form(a, b), abs=1e-12)


def test_wraps_across_the_seam():
    # body at azimuth ~0: arrivals just below 2 pi are inside the cone
    phi0 = math.pi + 0.01
    assert body_loss(2 * math.pi - 0.05, phi0) == pytest.approx(closed_form(-0.05, phi0))
    assert body_loss(2 * math.pi - 0.05, phi0) > 15


@given(st.floats(-10, 10), st.floats(0, 2 * np.pi))
def test_loss_bounded(phi, phi0):
    assert 0.0 <= body_loss(phi, phi0) <= MODEL.L_b


@given(st.floats(0, 2 * np.pi), st.floats(0, np.pi))
def test_loss_symmetric_about_torso(phi0, d):
    centre = phi0 - math.pi
    assert body_loss(centre + d, phi0) == pytest.approx(body_loss(centre - d, phi0), abs=1e-9)


@given(st.floats(0, 2 * np.pi), st.floats(-4, 4))
def test_loss_continuous(phi0, phi):
    # the parabola has slope at most 2 L_b / phi_b
    h = 1e-6
    assert abs(body_loss(phi + h, phi0) - body_loss(phi, phi0)) <= 2 * 20 / PHI_B * h + 1e-9


def test_loss_curve_shape():
    phi, loss = loss_curve(math.pi)
    assert phi.size == 361 and loss.max() == pytest.approx(20.0)
    assert loss[0] == pytest.approx(20.0) and loss[180] == 0.0


def _mpcs():
    return [Mpc(Direction(1.2, phi), 1e-7 * (i + 1), np.array([[1e-3, 1e-5], [1e-5, 1e-3]]) * (i + 1))
            for i, phi in enumerate([0.0, 0.3, 2.0, math.pi, 4.0])]


def test_apply_body_preserves_structure():
    mpcs = _mpcs()
    out = apply_body(mpcs, math.pi)
    assert len(out) == len(mpcs)
    for a, b in zip(mpcs, out):
        assert a.delay == b.delay and a.arrival == b.arrival and a.is_los == b.is_los
    assert [m.alpha[0, 0] for m in mpcs] == [1e-3 * (i + 1) for i in range(5)]  # input untouched


def test_apply_body_centre_drops_20db():
    m = _mpcs()
    out = apply_body(m, math.pi)  # torso at azimuth 0
    ratio = np.abs(out[0].alpha) ** 2 / np.abs(m[0].alpha) ** 2
    assert np.allclose(10 * np.log10(ratio), -20.0)


def test_outside_cone_is_identity():
    m = _mpcs()[2:4]  # arrivals at 2.0 and pi, far from azimuth 0
    out = apply_body(m, math.pi)
    assert all(np.array_equal(a.alpha, b.alpha) for a, b in zip(m, out))


def test_double_application_compounds():
    m = _mpcs()[:1]
    once = apply_body(m, math.pi)
    twice = apply_body(once, math.pi)
    assert abs(twice[0].alpha[0, 0]) == pytest.approx(abs(m[0].alpha[0, 0]) * 1e-2)
