"""Command line front end: ``mmwgain simulate | calibrate | pattern | stats``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
(including a failed ``--verify`` rerun).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io, plotting, report, swe
from .antenna import PatchElementSpec, patch_pattern
from .core import EulerOrientation, RadiationPattern, sphere_grid
from .gain import gain_upper_bound_db
from .pipeline import ARRAY_KINDS, CASES, run_simulation
from .propagation import GeometryError, calibrate_permittivity, link_params, trace_geometry
from .propagation.calibration import simulated_delay_spreads
from .propagation.tracer import classify
from .scenarios import Scenario, ScenarioError, demo_scenario_path, load_scenario

log = logging.getLogger("mmwgain")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class VerifyError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunManifest:
    scenario: Path
    arrays: tuple[str, ...]
    cases: tuple[int, ...]
    seed: int | None
    out: Path
    realizations: int | None = None
    method: str = "closed"
    jobs: int = 1
    links: tuple[int, ...] | None = None
    reference: str = "matched"
    plots: bool = True


def _parse_links(text: str | None, n: int) -> tuple[int, ...] | None:
    """``"0-19"`` or ``"3,5,9"`` (or a mix) into link ids."""
    if not text:
        return None
    ids = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            ids += range(int(a), int(b) + 1)
        elif part:
            ids.append(int(part))
    if not ids:
        raise ValueError("empty link selection")
    bad = [i for i in ids if not 0 <= i < n]
    if bad:
        raise ValueError(f"link ids out of range 0..{n - 1}: {bad[:5]}")
    return tuple(dict.fromkeys(ids))


def _scenario(path, seed: int | None = None, realizations: int | None = None) -> Scenario:
    sc = load_scenario(path)
    cfg = sc.config
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(seed))
    if realizations is not None:
        cfg = dataclasses.replace(cfg, n_phase_realizations=int(realizations))
    return dataclasses.replace(sc, config=cfg)


def _writable(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ScenarioError(f"output directory not writable: {out} ({exc})") from exc
    return out


# ---------------------------------------------------------------------------
# simulate


def _simulate_once(m: RunManifest, out: Path):
    sc = _scenario(m.scenario, m.seed, m.realizations)
    ids = m.links if m.links is not None else tuple(range(sc.n_links))
    if not ids:
        raise ScenarioError("scenario has no links")
    result = run_simulation(sc, m.arrays, m.cases, m.method, m.realizations, m.jobs, ids, m.reference)
    comments = {"scenario": sc.name, "seed": sc.config.seed, "method": m.method,
                "realizations": sc.config.n_phase_realizations, "reference": m.reference,
                "links": len(ids)}
    files = report.write_run(out, result, comments)
    return sc, result, files


def cmd_simulate(m: RunManifest, verify: bool = False) -> int:
    out = _writable(m.out)
    t0 = time.perf_counter()
    sc, result, files = _simulate_once(m, out)
    log.info("simulated %d links in %.1f s", len(result.links), time.perf_counter() - t0)
    rows = report.stats_rows(result.records)
    print(report.format_table(rows))
    if m.plots:
        _simulation_figures(sc, result, out)
    if verify:
        with tempfile.TemporaryDirectory() as tmp:
            _, _, again = _simulate_once(m, Path(tmp))
            diff = [a.name for a, b in zip(files, again) if a.read_bytes() != b.read_bytes()]
        if diff:
            raise VerifyError(f"rerun differs in: {', '.join(diff)}")
        print(f"verify: {len(files)} files byte-identical on rerun")
    return EXIT_OK


def _simulation_figures(sc: Scenario, result, out: Path) -> None:
    plotting.gain_histogram(result.records, out / "histogram.png")
    bound = gain_upper_bound_db(sc.element.broadside_gain)
    for kind, recs in result.records.items():
        for case in sorted({r.case for r in recs}):
            plotting.link_traces(recs, len(result.links), len(result.orientations), case,
                                 out / f"traces_{kind}_case{case}.png", bound,
                                 f"{kind.upper()}, {plotting.CASE_LABELS[case]}")
    plotting.body_loss_figure(sc.config.body, out / "body_loss.png")


# ---------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args) -> int:
    sc = _scenario(args.scenario, args.seed)
    out = _writable(Path(args.out))
    ids = _parse_links(args.links, sc.n_links) or tuple(range(sc.n_links))
    if args.references is None and args.self_reference is None:
        raise ScenarioError("calibrate needs --references FILE or --self-reference EPS")
    refs = None
    if args.references is not None:
        refs = io.read_references(args.references)
        missing = [i for i in ids if i not in refs]
        if len(missing) == len(ids):
            raise ScenarioError("reference file covers none of the selected links")
        if missing:
            log.warning("%d selected links have no reference and are skipped", len(missing))
        ids = tuple(i for i in ids if i in refs)
    t0 = time.perf_counter()
    env = sc.environment
    links = [trace_geometry(env, sc.bs, sc.ms_points[i], sc.max_order) for i in ids]
    bw, f = sc.config.bandwidth, sc.config.frequency
    if refs is not None:
        reference = np.array([refs[i] for i in ids])
    else:
        reference = simulated_delay_spreads(env, links, args.self_reference, bw, f)
        if args.noise:
            rng = np.random.default_rng(sc.config.seed)
            reference = reference * (1.0 + rng.uniform(-args.noise, args.noise, reference.size))
        io.write_references(out / "references.csv", ids, reference)
    if not ids:
        raise ScenarioError("empty link set")
    res = calibrate_permittivity(env, links, reference, bandwidth=bw, frequency=f)
    io.write_csv(out / "calibration_objective.csv", io.CALIBRATION_COLUMNS, zip(res.grid, res.objective))
    rows = []
    for i, paths, ref in zip(ids, links, reference):
        p = link_params(paths, env, res.eps_r, bw, f)
        rows.append([i, classify(paths), p.pathloss, p.mean_delay, p.rms_delay_spread, ref])
    io.write_csv(out / "calibration_links.csv", io.LINK_PARAM_COLUMNS, rows)
    for eps, obj in zip(res.grid, res.objective):
        print(f"eps_r {eps:4.1f}  rms error {obj * 1e9:9.4f} ns")
    note = " (degenerate objective)" if res.degenerate else ""
    print(f"best eps_r = {res.eps_r:.1f}{note}  [{len(ids)} links, {time.perf_counter() - t0:.1f} s]")
    if not args.no_plots:
        plotting.calibration_objective(res.grid, res.objective, res.eps_r, out / "calibration.png")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pattern


def _grid(step_deg: float):
    step = np.deg2rad(step_deg)
    if not 0 < step_deg <= 30 or abs(180.0 / step_deg - round(180.0 / step_deg)) > 1e-9:
        raise ValueError("grid step must divide 180 deg")
    return step, *sphere_grid(step)


def _pattern_generate(args) -> int:
    step, t, p = _grid(args.step)
    spec = PatchElementSpec(args.gain, args.front_to_back, np.deg2rad(args.tilt))
    pat = patch_pattern(spec, t, p, tuple(args.boresight), args.frequency, step)
    io.write_pattern(args.out, pat)
    print(f"wrote {len(pat)} directions to {args.out}")
    return EXIT_OK


def _pattern_decompose(args) -> int:
    pat = io.read_pattern(args.input)
    if args.n_max:
        c = swe.decompose(pat, args.n_max)
    else:
        c = swe.decompose_adaptive(pat, tol=args.tol)
    io.write_coefficients(args.out, c, pat.frequency)
    print(f"N = {c.n_max}, {swe.n_modes(c.n_max)} modes, residual {c.residual:.3e}, "
          f"condition {c.condition:.3g}")
    return EXIT_OK


def _pattern_rotate(args) -> int:
    c, freq = io.read_coefficients(args.coefficients)
    step, t, p = _grid(args.step)
    o = EulerOrientation.from_degrees(*args.orientation)
    pat = swe.rotate_basis(c, o, t, p, freq)
    io.write_pattern(args.out, RadiationPattern(t, p, pat.e_v, pat.e_h, freq, step))
    print(f"rotated by (phi0, theta0, chi0) = {tuple(args.orientation)} deg -> {args.out}")
    return EXIT_OK


def _pattern_show(args) -> int:
    if (args.input is None) == (args.coefficients is None):
        raise ValueError("show needs exactly one of --input or --coefficients")
    if args.input is not None:
        pat = io.read_pattern(args.input)
    else:
        c, freq = io.read_coefficients(args.coefficients)
        step, t, p = _grid(args.step)
        ev, eh = swe.reconstruct(c, t, p)
        pat = RadiationPattern(t, p, ev, eh, freq, step)
    g = pat.gain_dbi
    with np.errstate(divide="ignore"):
        ev_db = 10 * np.log10(np.abs(pat.e_v) ** 2)
        eh_db = 10 * np.log10(np.abs(pat.e_h) ** 2)
    io.write_csv(args.out, ["theta_deg", "phi_deg", "gain_dbi", "gain_v_dbi", "gain_h_dbi"],
                 zip(np.rad2deg(pat.theta), np.rad2deg(pat.phi), g, ev_db, eh_db))
    k = int(np.argmax(g))
    print(f"max gain {g[k]:.2f} dBi at theta {np.rad2deg(pat.theta[k]):.1f}, "
          f"phi {np.rad2deg(pat.phi[k]):.1f} deg")
    if not args.no_plots:
        phi_cut = float(pat.phi[k])
        th, gg = _cut(pat, phi_cut)
        plotting.pattern_cut(th, gg, Path(args.out).with_suffix(".png"),
                             f"cut through phi = {np.rad2deg(phi_cut):.0f} deg")
    return EXIT_OK


def _cut(pat: RadiationPattern, phi: float):
    """Polar cut through ``phi`` and ``phi + 180``, unrolled to 0..360 deg."""
    near = lambda a: np.isclose(np.mod(pat.phi - a + np.pi, 2 * np.pi) - np.pi, 0.0, atol=1e-9)
    a, b = near(phi), near(phi + np.pi)
    th_a, g_a = np.rad2deg(pat.theta[a]), pat.gain_dbi[a]
    th_b, g_b = 360.0 - np.rad2deg(pat.theta[b]), pat.gain_dbi[b]
    th = np.concatenate([th_a, th_b])
    order = np.argsort(th)
    return th[order], np.concatenate([g_a, g_b])[order]


def cmd_pattern(args) -> int:
    return {"generate": _pattern_generate, "decompose": _pattern_decompose,
            "rotate": _pattern_rotate, "show": _pattern_show}[args.action](args)


# ---------------------------------------------------------------------------
# stats


def cmd_stats(args) -> int:
    groups = report.read_stats_groups(args.results)
    rows = report.stats_rows(groups)
    print(report.format_table(rows))
    if args.out:
        io.write_stats(args.out, rows)
    if args.histogram:
        io.write_histogram(args.histogram, report.histogram_rows(groups, args.bin_width))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmwgain", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="gains for every link, orientation, array and case")
    s.add_argument("--scenario", type=Path, default=None, help="scenario INI (default: shipped demo)")
    s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    s.add_argument("--out", type=Path, default=Path("out"))
    s.add_argument("--case", type=int, action="append", choices=sorted(CASES), dest="cases")
    s.add_argument("--array", action="append", choices=ARRAY_KINDS, dest="arrays")
    s.add_argument("--realizations", type=int, default=None, help="small-scale phase draws (mc)")
    s.add_argument("--method", choices=("closed", "mc"), default="closed",
                   help="closed-form phase average or explicit Monte-Carlo")
    s.add_argument("--reference", choices=("matched", "frobenius"), default="matched",
                   help="isotropic reference power")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--links", default=None, help="subset, e.g. 0-19 or 3,5,9")
    s.add_argument("--verify", action="store_true", help="rerun and compare outputs byte for byte")
    s.add_argument("--no-plots", action="store_true")

    c = sub.add_parser("calibrate", help="grid-search the surface permittivity")
    c.add_argument("--scenario", type=Path, default=None)
    c.add_argument("--references", type=Path, default=None,
                   help="CSV with link_id, rms_delay_spread_s")
    c.add_argument("--self-reference", type=float, default=None, metavar="EPS",
                   help="generate references from the simulator at this permittivity")
    c.add_argument("--noise", type=float, default=0.0,
                   help="relative uniform noise on self-generated references, e.g. 0.05")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--links", default=None)
    c.add_argument("--out", type=Path, default=Path("out"))
    c.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("pattern", help="pattern files: generate, decompose, rotate, show")
    psub = p.add_subparsers(dest="action", required=True)
    g = psub.add_parser("generate", help="sample the analytic patch element")
    g.add_argument("--boresight", type=float, nargs=3, default=(0.0, 0.0, 1.0))
    g.add_argument("--gain", type=float, default=8.0, help="broadside gain, dBi")
    g.add_argument("--front-to-back", type=float, default=20.0)
    g.add_argument("--tilt", type=float, default=-45.0, help="slant, deg")
    g.add_argument("--frequency", type=float, default=60e9)
    g.add_argument("--step", type=float, default=2.0, help="grid step, deg")
    g.add_argument("--out", type=Path, required=True)
    d = psub.add_parser("decompose", help="pattern file to SWE coefficients")
    d.add_argument("--input", type=Path, required=True)
    d.add_argument("--n-max", type=int, default=None, help="fixed N (default: adaptive)")
    d.add_argument("--tol", type=float, default=1e-3)
    d.add_argument("--out", type=Path, required=True)
    r = psub.add_parser("rotate", help="rotate coefficients and sample the pattern")
    r.add_argument("--coefficients", type=Path, required=True)
    r.add_argument("--orientation", type=float, nargs=3, required=True,
                   metavar=("PHI0", "THETA0", "CHI0"), help="deg")
    r.add_argument("--step", type=float, default=2.0)
    r.add_argument("--out", type=Path, required=True)
    sh = psub.add_parser("show", help="gain grid CSV and a pattern cut figure")
    sh.add_argument("--input", type=Path, default=None)
    sh.add_argument("--coefficients", type=Path, default=None)
    sh.add_argument("--step", type=float, default=2.0)
    sh.add_argument("--out", type=Path, required=True)
    sh.add_argument("--no-plots", action="store_true")

    st = sub.add_parser("stats", help="recompute the statistics table from results CSVs")
    st.add_argument("--results", type=Path, nargs="+", required=True)
    st.add_argument("--out", type=Path, default=None)
    st.add_argument("--histogram", type=Path, default=None)
    st.add_argument("--bin-width", type=float, default=1.0)
    return ap


def _dispatch(args) -> int:
    if args.command == "simulate":
        scenario = args.scenario or demo_scenario_path()
        n = load_scenario(scenario).n_links
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        if args.realizations is not None and args.realizations < 1:
            raise ValueError("--realizations must be >= 1")
        m = RunManifest(scenario, tuple(args.arrays or ARRAY_KINDS),
                        tuple(sorted(set(args.cases or CASES))), args.seed, args.out,
                        args.realizations, args.method, args.jobs, _parse_links(args.links, n),
                        args.reference, not args.no_plots)
        return cmd_simulate(m, args.verify)
    if args.command == "calibrate":
        args.scenario = args.scenario or demo_scenario_path()
        return cmd_calibrate(args)
    if args.command == "pattern":
        return cmd_pattern(args)
    return cmd_stats(args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (swe.SweError, np.linalg.LinAlgError, FloatingPointError, VerifyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ScenarioError, GeometryError, io.FormatError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
