from __future__ import annotations

import csv

import numpy as np
import pytest

from mmwgain import io, swe
from mmwgain.cli import main
from mmwgain.core import sphere_grid

from .oracles import percentile_linear


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_dicts(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


# --- simulate ------------------------------------------------------------------

def test_room_scenario_counts(capsys, tmp_path, room_scenario):
    out = tmp_path / "run"
    code, text, _ = run(capsys, "simulate", "--scenario", room_scenario, "--array", "ula",
                        "--case", 1, "--out", out, "--no-plots")
    assert code == 0 and "ula" in text
    stats = read_dicts(out / "stats.csv")
    assert {int(r["count"]) for r in stats} == {24}
    assert {r["class"] for r in stats} == {"LOS", "all"}
    assert len(read_dicts(out / "results_ula.csv")) == 24
    assert not (out / "results_da.csv").exists()


def test_simulate_is_byte_identical(capsys, tmp_path, room_scenario):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(capsys, "simulate", "--scenario", room_scenario, "--out", d, "--no-plots")[0] == 0
    names = sorted(p.name for p in a.glob("*.csv"))
    assert "histogram.csv" in names and "mpcs.csv" in names
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_verify_flag(capsys, tmp_path):
    code, text, _ = run(capsys, "simulate", "--links", "3,40", "--jobs", 2, "--verify",
                        "--out", tmp_path, "--no-plots")
    assert code == 0 and "byte-identical" in text


def test_stats_table_matches_results(capsys, tmp_path):
    assert run(capsys, "simulate", "--links", "0-2", "--out", tmp_path, "--no-plots")[0] == 0
    results = {k: read_dicts(tmp_path / f"results_{k}.csv") for k in ("ula", "da")}
    for row in read_dicts(tmp_path / "stats.csv"):
        v = [float(r["gain_db"]) for r in results[row["array"]]
             if r["case"] == row["case"] and row["class"] in (r["class"], "all")]
        q = {"peak": 98, "median": 50, "outage": 2}[row["stat"]]
        assert float(row["value_db"]) == pytest.approx(percentile_linear(v, q), abs=1e-6)
    # the stats subcommand reproduces the file
    code, _, _ = run(capsys, "stats", "--results", tmp_path / "results_ula.csv",
                     tmp_path / "results_da.csv", "--out", tmp_path / "again.csv",
                     "--histogram", tmp_path / "hist_again.csv")
    assert code == 0
    # recomputed from the 9-digit file, so equal up to the last printed digit
    for a, b in zip(read_dicts(tmp_path / "again.csv"), read_dicts(tmp_path / "stats.csv")):
        assert float(a["value_db"]) == pytest.approx(float(b["value_db"]), abs=1e-6)
        assert (a["array"], a["case"], a["class"], a["stat"], a["count"]) == \
            (b["array"], b["case"], b["class"], b["stat"], b["count"])
    assert (tmp_path / "hist_again.csv").read_bytes() == (tmp_path / "histogram.csv").read_bytes()


def test_simulate_writes_figures(capsys, tmp_path, room_scenario):
    assert run(capsys, "simulate", "--scenario", room_scenario, "--case", 1, "--out", tmp_path)[0] == 0
    assert (tmp_path / "histogram.png").stat().st_size > 0
    assert (tmp_path / "traces_ula_case1.png").exists() and (tmp_path / "body_loss.png").exists()


@pytest.mark.parametrize("argv", [
    ["simulate", "--scenario", "missing.ini"],
    ["simulate", "--links", "500"],
    ["simulate", "--jobs", "0"],
    ["stats", "--results", "missing.csv"],
])
def test_config_errors_exit_2(capsys, tmp_path, argv):
    code, _, err = run(capsys, *argv, *([] if argv[0] == "stats" else ["--out", tmp_path]))
    assert code == 2 and err.startswith("error:")


def test_unwritable_output(capsys, tmp_path, room_scenario):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "simulate", "--scenario", room_scenario, "--out", blocker / "sub")
    assert code == 2 and "writable" in err


# --- pattern -------------------------------------------------------------------

@pytest.fixture(scope="module")
def patch_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("pattern")
    assert main(["pattern", "generate", "--step", "5", "--out", str(d / "patch.csv")]) == 0
    return d / "patch.csv"


def test_show_peak_is_8dbi(capsys, tmp_path, patch_file):
    code, text, _ = run(capsys, "pattern", "show", "--input", patch_file, "--out", tmp_path / "g.csv")
    assert code == 0 and "max gain" in text
    g = max(float(r["gain_dbi"]) for r in read_dicts(tmp_path / "g.csv"))
    assert abs(g - 8.0) < 0.1
    assert (tmp_path / "g.png").exists()


def test_rotate_identity_equals_reconstruction(capsys, tmp_path, patch_file):
    coef = tmp_path / "c.csv"
    assert run(capsys, "pattern", "decompose", "--input", patch_file, "--n-max", 12, "--out", coef)[0] == 0
    assert run(capsys, "pattern", "rotate", "--coefficients", coef, "--orientation", 0, 0, 0,
               "--step", 5, "--out", tmp_path / "r.csv")[0] == 0
    c, _ = io.read_coefficients(coef)
    rot = io.read_pattern(tmp_path / "r.csv")
    ev, eh = swe.reconstruct(c, rot.theta, rot.phi)
    assert np.abs(rot.e_v - ev).max() < 1e-6 and np.abs(rot.e_h - eh).max() < 1e-6


def test_decompose_rotate_decompose_keeps_norm(capsys, tmp_path, patch_file):
    c1, c2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    assert run(capsys, "pattern", "decompose", "--input", patch_file, "--n-max", 12, "--out", c1)[0] == 0
    assert run(capsys, "pattern", "rotate", "--coefficients", c1, "--orientation", 30, 60, 10,
               "--step", 5, "--out", tmp_path / "r.csv")[0] == 0
    assert run(capsys, "pattern", "decompose", "--input", tmp_path / "r.csv", "--n-max", 12,
               "--out", c2)[0] == 0
    q1 = io.read_coefficients(c1)[0].q
    q2 = io.read_coefficients(c2)[0].q
    assert abs(np.linalg.norm(q2) / np.linalg.norm(q1) - 1) < 1e-6


def test_coarse_grid_is_numerical_failure(capsys, tmp_path):
    p = tmp_path / "coarse.csv"
    assert main(["pattern", "generate", "--step", "30", "--out", str(p)]) == 0
    code, _, err = run(capsys, "pattern", "decompose", "--input", p, "--n-max", 12, "--out", tmp_path / "c.csv")
    assert code == 3 and "coarse" in err


def test_malformed_pattern_is_config_error(capsys, tmp_path, patch_file):
    bad = tmp_path / "bad.csv"
    lines = patch_file.read_text().splitlines()
    bad.write_text("\n".join(lines[:-5]) + "\n")
    code, _, err = run(capsys, "pattern", "decompose", "--input", bad, "--out", tmp_path / "c.csv")
    assert code == 2 and "rows" in err


def test_show_needs_one_source(capsys, tmp_path, patch_file):
    assert run(capsys, "pattern", "show", "--out", tmp_path / "g.csv")[0] == 2


def test_show_from_coefficients(capsys, tmp_path):
    t, p = sphere_grid(np.deg2rad(10))
    c = swe.SweCoefficients(1, np.array([0, 1, 0, 0, 0, 0], complex))
    io.write_coefficients(tmp_path / "c.csv", c, 60e9)
    code, _, _ = run(capsys, "pattern", "show", "--coefficients", tmp_path / "c.csv", "--step", 10,
                     "--out", tmp_path / "g.csv", "--no-plots")
    assert code == 0 and len(read_dicts(tmp_path / "g.csv")) == t.size


# --- calibrate -----------------------------------------------------------------

def test_calibrate_self_reference_subset(capsys, tmp_path):
    code, text, _ = run(capsys, "calibrate", "--links", "0-39", "--self-reference", 3.6,
                        "--out", tmp_path, "--no-plots")
    assert code == 0 and "best eps_r = 3.6" in text
    obj = read_dicts(tmp_path / "calibration_objective.csv")
    assert len(obj) == 41 and float(obj[0]["eps_r"]) == 2.0
    links = read_dicts(tmp_path / "calibration_links.csv")
    assert len(links) == 40
    for r in links:
        assert float(r["rms_delay_spread_s"]) == pytest.approx(float(r["reference_rms_delay_spread_s"]),
                                                               rel=1e-8)


def test_calibrate_from_reference_file(capsys, tmp_path):
    io.write_references(tmp_path / "refs.csv", [0, 1, 2], [5e-9, 6e-9, 7e-9])
    code, text, _ = run(capsys, "calibrate", "--references", tmp_path / "refs.csv", "--links", "0-5",
                        "--out", tmp_path / "o", "--no-plots")
    assert code == 0 and "[3 links" in text


def test_calibrate_errors(capsys, tmp_path):
    assert run(capsys, "calibrate", "--out", tmp_path, "--links", "0")[0] == 2
    assert run(capsys, "calibrate", "--references", tmp_path / "none.csv", "--out", tmp_path)[0] == 2
    io.write_references(tmp_path / "refs.csv", [900], [5e-9])
    code, _, err = run(capsys, "calibrate", "--references", tmp_path / "refs.csv", "--out", tmp_path)
    assert code == 2 and "none of the selected links" in err
