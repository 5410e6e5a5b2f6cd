from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from mmwgain.core import Direction, Mpc, db20, rng_for, wavelength
from mmwgain.propagation import (
    DegenerateCalibrationWarning,
    Environment,
    Facet,
    GeometryError,
    Pdp,
    XprModel,
    box_room,
    calibrate_permittivity,
    classify,
    expand_polarimetric,
    fresnel_coeff,
    fspl,
    hann_kernel,
    large_scale_params,
    parse_environment,
    path_amplitudes,
    rectangle,
    simulated_delay_spreads,
    synthesize_pdp,
    trace,
    trace_geometry,
    vertical_panel,
)
from mmwgain.propagation.geometry import format_environment
from mmwgain.scenarios import box_hall_environment

from .oracles import box_room_paths, fresnel_closed

ROOM = (10.0, 8.0, 4.0)
ROOM_ENV = Environment(tuple(box_room(ROOM)))


# --- box-room oracle -------------------------------------------------------

# generic positions: a path through a room edge (both bounces at one point)
# is a measure-zero case the two methods count differently
@pytest.mark.parametrize("bs,ms", [((1, 4, 3), (6, 3, 1.5)), ((2.5, 1.2, 0.7), (8.1, 6.6, 3.1)),
                                   ((9, 7, 2), (4.3, 2.2, 1))])
@pytest.mark.parametrize("order", [0, 1, 2])
def test_box_room_matches_image_lattice(bs, ms, order):
    paths = trace_geometry(ROOM_ENV, bs, ms, order)
    ref = box_room_paths(ROOM, bs, ms, 3.6, 60e9, order)
    assert len(paths) == len(ref)
    lengths = np.array([p.length for p in paths])
    power = db20(np.abs(path_amplitudes(paths, ROOM_ENV)))
    assert np.abs(lengths - [r[0] for r in ref]).max() < 1e-9
    assert np.abs(power - [r[1] for r in ref]).max() < 1e-9


def test_empty_environment_single_los_path():
    mpcs = trace(Environment(), (0, 0, 0), (3, 4, 0))
    assert len(mpcs) == 1 and mpcs[0].is_los
    assert np.isclose(-db20(abs(mpcs[0].a_vv)), fspl(5.0), atol=1e-12)
    assert np.isclose(mpcs[0].excess_loss, 0.0, atol=1e-9)


def test_single_wall_mirror():
    wall = rectangle((-100, -100, 0), (200, 0, 0), (0, 200, 0))
    bs, ms = np.array([0.0, 0, 2]), np.array([5.0, 1, 1])
    paths = trace_geometry(Environment((wall,)), bs, ms)
    assert len(paths) == 2
    image = bs * [1, 1, -1]
    assert np.isclose(paths[1].length, np.linalg.norm(image - ms), atol=1e-12)


def test_paths_sorted_direct_first():
    paths = trace_geometry(box_hall_environment(), (2, 12, 6), (30, 9, 1.5))
    assert paths[0].n_bounces == 0
    lengths = [p.length for p in paths[1:]]
    assert lengths == sorted(lengths)
    assert all(p.length >= paths[0].length - 1e-12 for p in paths)


def test_reciprocity():
    env = box_hall_environment()
    a, b = (3, 5, 6), (40, 17, 1.5)
    fwd = trace_geometry(env, a, b)
    rev = trace_geometry(env, b, a)
    assert len(fwd) == len(rev)
    key = lambda ps: sorted(zip(np.round([p.length for p in ps], 9),
                                np.round(np.abs(path_amplitudes(ps, env)), 15)))
    assert np.allclose(key(fwd), key(rev), rtol=1e-9, atol=0)
    assert np.allclose(fwd[0].arrival.unit_vector(), -rev[0].arrival.unit_vector())


def test_obstruction_never_adds_power():
    bs, ms = (1.0, 4.0, 3.0), (6.0, 3.0, 1.5)
    base = trace_geometry(ROOM_ENV, bs, ms)
    panel = vertical_panel(3.5, 2.0, 3.5, 6.0, 2.5)
    env2 = Environment(ROOM_ENV.facets + (panel,), 20.0)
    blocked = trace_geometry(env2, bs, ms)
    before = dict(zip([p.facets for p in base], np.abs(path_amplitudes(base, ROOM_ENV))))
    after = dict(zip([p.facets for p in blocked], np.abs(path_amplitudes(blocked, env2))))
    assert classify(blocked) == "OLOS" and classify(base) == "LOS"
    assert after[()] == pytest.approx(before[()] * 0.1)  # one small object, 20 dB
    for k, v in after.items():
        if k in before:
            assert v <= before[k] * (1 + 1e-12)


def test_structural_block_marks_olos():
    wall = rectangle((3, -10, -10), (0, 20, 0), (0, 0, 20))
    mpcs = trace(Environment((wall,)), (0, 0, 0), (6, 0, 0))
    assert not mpcs[0].is_los
    assert mpcs[0].excess_loss == pytest.approx(100.0)


def test_endpoint_on_facet_rejected():
    with pytest.raises(GeometryError, match="mobile"):
        trace(ROOM_ENV, (1, 4, 3), (5, 0, 1.5))
    with pytest.raises(GeometryError):
        trace(ROOM_ENV, (1, 4, 3), (1, 4, 3))
    with pytest.raises(ValueError):
        trace(ROOM_ENV, (1, 4, 3), (5, 4, 1), max_order=3)


def test_trace_is_deterministic():
    a = trace(box_hall_environment(), (2, 12, 6), (30, 9, 1.5))
    b = trace(box_hall_environment(), (2, 12, 6), (30, 9, 1.5))
    assert [m.a_vv for m in a] == [m.a_vv for m in b]


# --- facets and environment files ------------------------------------------

def test_facet_validation():
    with pytest.raises(GeometryError, match="coplanar"):
        Facet(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 1e-6]]))
    with pytest.raises(GeometryError):
        Facet(np.eye(3), eps_r=1.0)
    with pytest.raises(GeometryError):
        Facet(np.eye(3), kind="glass")
    with pytest.raises(GeometryError):
        Facet(np.zeros((3, 3)))


def test_environment_file_round_trip():
    env = box_hall_environment()
    back = parse_environment(format_environment(env))
    assert back.L_a == env.L_a and len(back.facets) == len(env.facets)
    for f, g in zip(env.facets, back.facets):
        assert np.allclose(f.vertices, g.vertices) and (f.kind, f.eps_r, f.name) == (g.kind, g.eps_r, g.name)


def test_environment_parse_errors():
    with pytest.raises(GeometryError):
        parse_environment("[wall]\nx = 1\n")
    with pytest.raises(GeometryError):
        parse_environment("[facet]\nname = a\n")
    with pytest.raises(GeometryError):
        parse_environment("[environment]\nL_b = 3\n")


# --- Fresnel and free space --------------------------------------------------

@pytest.mark.parametrize("pol", ["perpendicular", "parallel"])
def test_fresnel_normal_incidence(pol):
    assert abs(abs(fresnel_coeff(3.6, 0.0, pol)) - 0.3096) < 1e-3
    assert np.isclose(abs(fresnel_coeff(3.6, 0.0, pol)), abs((1 - math.sqrt(3.6)) / (1 + math.sqrt(3.6))))


@pytest.mark.parametrize("pol", ["perpendicular", "parallel"])
def test_fresnel_grazing(pol):
    assert abs(abs(fresnel_coeff(3.6, np.deg2rad(89.9), pol)) - 1) < 0.02


def test_brewster_null():
    assert abs(fresnel_coeff(3.6, math.atan(math.sqrt(3.6)), "parallel")) < 1e-3


@given(st.floats(1.01, 20), st.floats(0, np.pi / 2 - 1e-6))
def test_fresnel_bounded_and_matches_textbook(eps, angle):
    te, tm = fresnel_closed(eps, angle)
    rs = fresnel_coeff(eps, angle, "perpendicular")
    rp = fresnel_coeff(eps, angle, "parallel")
    assert abs(rs) <= 1 + 1e-12 and abs(rp) <= 1 + 1e-12
    assert np.isclose(rs, te, atol=1e-12) and np.isclose(rp, tm, atol=1e-12)


def test_fresnel_unknown_pol():
    with pytest.raises(ValueError):
        fresnel_coeff(3.6, 0.1, "circular")


def test_fspl_examples():
    assert abs(fspl(1.0) - 68.0) < 0.1
    assert np.isclose(fspl(2.0) - fspl(1.0), 20 * math.log10(2))
    assert np.isclose(fspl(wavelength(60e9) / (4 * math.pi)), 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        fspl(0.0)


# --- XPR ------------------------------------------------------------------

def test_xpr_mean_law():
    m = XprModel()
    assert m.mean(0.0) == 35.0
    assert np.isclose(m.breakpoint, 58.333333333, atol=1e-6)
    assert m.mean(m.breakpoint) == pytest.approx(0.0, abs=1e-12)
    assert m.mean(80.0) == 0.0
    with pytest.raises(ValueError):
        XprModel(alpha2=0.6)


def _nlos(l_ex: float) -> Mpc:
    return Mpc(Direction(1.0, 2.0), 1e-7, np.diag([1e-4, 1e-4]), False, l_ex)


def test_los_alpha_is_diagonal():
    los = Mpc(Direction(1.0, 2.0), 1e-7, np.diag([1e-4, 1e-4]), True)
    out = expand_polarimetric(los, XprModel(), rng_for(0, 0))
    assert out.alpha[0, 1] == 0 and out.alpha[1, 0] == 0 and math.isinf(out.xpr_db)


def test_cross_terms_follow_drawn_xpr():
    out = expand_polarimetric(_nlos(10.0), XprModel(), rng_for(0, 1))
    assert out.alpha[1, 1] == out.alpha[0, 0]
    assert out.alpha[0, 1] == out.alpha[1, 0]
    assert np.isclose(db20(abs(out.alpha[0, 0] / out.alpha[0, 1])), out.xpr_db)


@pytest.mark.parametrize("l_ex,mu", [(0, 35), (20, 23), (40, 11), (70, 0)])
def test_xpr_statistics(l_ex, mu):
    rng = rng_for(3, l_ex)
    x = np.array([expand_polarimetric(_nlos(l_ex), XprModel(), rng).xpr_db for _ in range(10_000)])
    assert abs(x.mean() - mu) < 3 * 4 / 100
    assert 3.8 <= x.std() <= 4.2


# --- PDP and large-scale parameters -----------------------------------------

def _hann_oracle(x: float) -> float:
    # inverse transform of the raised-cosine band, integrated numerically
    return quad(lambda f: (1 + math.cos(2 * math.pi * f)) * math.cos(2 * math.pi * f * x), -0.5, 0.5)[0]


def test_kernel_matches_band_transform():
    for x in [0.0, 0.3, 1.0, 1.7, 3.2, 7.5]:
        assert abs(hann_kernel(x) - _hann_oracle(x)) < 1e-12


def test_single_path_peak_and_width():
    B = 4e9
    tau = 100 / B
    pdp = synthesize_pdp(None, B, delays=[tau], amplitudes=[1.0])
    assert pdp.delay[np.argmax(pdp.power)] == pytest.approx(tau)
    half = brentq(lambda x: _hann_oracle(x) ** 2 - 0.5, 0.1, 1.5)
    assert abs(2 * half - 1.44) < 0.01
    # sampled profile is half power at the oracle half-width
    assert np.isclose(hann_kernel(half) ** 2, 0.5)
    # the band-limited kernel has its own rms width (about 0.58/B), below one resolution cell
    assert large_scale_params(pdp).rms_delay_spread < 1.0 / B
    assert np.isclose(pdp.power.sum(), 1.0, rtol=0.01)


def test_two_separated_paths_two_equal_peaks():
    B = 4e9
    pdp = synthesize_pdp(None, B, delays=[10e-9, 30e-9], amplitudes=[1.0, -1.0j])
    i1 = np.argmin(abs(pdp.delay - 10e-9))
    i2 = np.argmin(abs(pdp.delay - 30e-9))
    assert np.isclose(pdp.power[i1], pdp.power[i2], rtol=1e-6)
    assert np.isclose(pdp.power.sum(), 2.0, rtol=0.01)


def test_coherent_cancellation():
    pdp = synthesize_pdp(None, 4e9, delays=[20e-9, 20e-9], amplitudes=[1.0, -1.0])
    assert pdp.power.max() < 1e-25


def test_pdp_needs_paths():
    with pytest.raises(ValueError):
        synthesize_pdp([], 4e9)
    with pytest.raises(ValueError):
        synthesize_pdp(None, 0.0, delays=[1e-9], amplitudes=[1.0])


def test_two_point_moments():
    tau, delta = 50e-9, 12e-9
    lsp = large_scale_params(Pdp(np.array([tau, tau + delta]), np.array([0.5, 0.5])))
    assert np.isclose(lsp.mean_delay, tau + delta / 2, rtol=1e-12)
    assert np.isclose(lsp.rms_delay_spread, delta / 2, rtol=1e-12)
    assert np.isclose(lsp.pathloss, 0.0, atol=1e-12)


def test_band_limited_two_path_moments():
    B, tau, delta = 4e9, 50e-9, 100e-9
    lsp = large_scale_params(synthesize_pdp(None, B, delays=[tau, tau + delta], amplitudes=[1, 1]))
    assert np.isclose(lsp.mean_delay, tau + delta / 2, rtol=1e-6)
    assert np.isclose(lsp.rms_delay_spread, delta / 2, rtol=1e-3)


def test_single_sample_has_zero_spread():
    assert large_scale_params(Pdp(np.array([3e-9]), np.array([2.0]))).rms_delay_spread == 0.0


@given(st.floats(1e-6, 1e6))
def test_pdp_scale_invariance(c):
    t = np.linspace(0, 1e-7, 50)
    p = np.exp(-t / 2e-8)
    a = large_scale_params(Pdp(t, p))
    b = large_scale_params(Pdp(t, c * p))
    assert np.isclose(a.mean_delay, b.mean_delay, rtol=1e-9)
    assert np.isclose(a.rms_delay_spread, b.rms_delay_spread, rtol=1e-9)
    assert np.isclose(a.pathloss - b.pathloss, 10 * math.log10(c))


def test_zero_energy_pdp():
    with pytest.raises(ValueError):
        large_scale_params(Pdp(np.arange(4.0), np.zeros(4)))


# --- calibration -------------------------------------------------------------

@pytest.fixture(scope="module")
def room_links():
    rng = np.random.default_rng(1)
    ms = np.c_[rng.uniform(1, 9, 20), rng.uniform(1, 7, 20), np.full(20, 1.5)]
    return [trace_geometry(ROOM_ENV, (1, 4, 3), m) for m in ms]


@pytest.mark.parametrize("truth", [2.0, 3.6, 6.0])
def test_calibration_self_consistency(room_links, truth):
    ref = simulated_delay_spreads(ROOM_ENV, room_links, truth)
    assert calibrate_permittivity(ROOM_ENV, room_links, ref).eps_r == truth


@pytest.mark.parametrize("seed", range(4))
def test_calibration_noise_robustness(room_links, seed):
    ref = simulated_delay_spreads(ROOM_ENV, room_links, 3.6)
    noisy = ref * (1 + 0.05 * np.random.default_rng(seed).uniform(-1, 1, ref.size))
    assert abs(calibrate_permittivity(ROOM_ENV, room_links, noisy).eps_r - 3.6) <= 0.3 + 1e-9


def test_calibration_degenerate_warns():
    links = [trace_geometry(Environment(), (0, 0, 0), (5, 0, 0))]
    with pytest.warns(DegenerateCalibrationWarning):
        r = calibrate_permittivity(Environment(), links, [1e-9])
    assert r.degenerate and r.eps_r == 2.0


def test_calibration_input_checks(room_links):
    with pytest.raises(ValueError):
        calibrate_permittivity(ROOM_ENV, [], [])
    with pytest.raises(ValueError):
        calibrate_permittivity(ROOM_ENV, room_links, [1e-9])


def test_calibration_ties_go_to_smaller(room_links):
    ref = simulated_delay_spreads(ROOM_ENV, room_links, 3.6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = calibrate_permittivity(ROOM_ENV, room_links, ref, grid=[4.0, 3.6, 2.0, 3.6])
    assert r.eps_r == 3.6 and np.argmin(r.objective) == 1
    with pytest.warns(DegenerateCalibrationWarning):
        r = calibrate_permittivity(Environment(), [trace_geometry(Environment(), (0, 0, 0), (5, 0, 0))],
                                   [0.0], grid=[5.0, 3.0, 4.0])
    assert r.eps_r == 3.0
