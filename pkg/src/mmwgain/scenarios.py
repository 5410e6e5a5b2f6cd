"""Scenario files: base station, mobile routes, model parameters, environment.

A scenario is an INI file read with :mod:`configparser`::

    [scenario]
    name = box hall demo
    environment = box_hall.env   ; relative to this file
    frequency = 60e9
    bandwidth = 4e9
    seed = 20180101
    n_phase_realizations = 100
    max_order = 2
    ms_height = 1.5
    route_step = 0.6

    [base_station]
    position = 1.0 12.0 5.7

    [route A]                    ; any number of [route ...] sections
    start = 3 8
    end = 45 8

    [body]       width, separation, L_b
    [finger]     covered_element, main_attenuation, neighbor_attenuation,
                 neighbor_cone_halfwidth_deg, offset (m)
    [element]    broadside_gain, front_to_back, polarization_tilt_deg
    [xpr]        alpha2, beta2, sigma2

Routes are sampled every ``route_step`` metres from start to end at
``ms_height``; links are numbered route by route in file order.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .antenna import FingerSpec, PatchElementSpec
from .blockage import body_model
from .core import ScenarioConfig
from .propagation import Environment, XprModel, load_environment
from .propagation.geometry import box_room, format_environment, pillar, vertical_panel


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    config: ScenarioConfig
    environment: Environment
    bs: np.ndarray
    ms_points: np.ndarray  # (n_links, 3)
    max_order: int = 2
    finger: FingerSpec = FingerSpec()
    element: PatchElementSpec = PatchElementSpec()
    xpr: XprModel = XprModel()
    source: str = ""
    routes: tuple = field(default_factory=tuple)

    @property
    def n_links(self) -> int:
        return len(self.ms_points)


def route_points(start, end, step: float, height: float) -> np.ndarray:
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = float(np.linalg.norm(end - start))
    n = int(np.floor(length / step + 1e-9)) + 1
    u = (end - start) / length if length > 0 else np.zeros(2)
    xy = start + np.outer(np.arange(n) * step, u)
    return np.column_stack([xy, np.full(n, height)])


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ScenarioError(f"{what}: expected {n} numbers, got {text!r}") from exc
    if len(vals) != n:
        raise ScenarioError(f"{what}: expected {n} numbers, got {text!r}")
    return vals


def parse_scenario(text: str, base_dir: Path, source: str = "") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source or "<scenario>")
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from exc
    if not cp.has_section("scenario"):
        raise ScenarioError("missing [scenario] section")
    s = cp["scenario"]
    try:
        body = cp["body"] if cp.has_section("body") else {}
        bm = body_model(float(body.get("width", 0.5)), float(body.get("separation", 0.3)),
                        float(body.get("L_b", 20.0)))
        env_path = base_dir / s.get("environment", "")
        if not s.get("environment"):
            raise ScenarioError("[scenario] needs an environment file")
        if not env_path.is_file():
            raise ScenarioError(f"environment file not found: {env_path}")
        env = load_environment(env_path)
        if not cp.has_section("base_station"):
            raise ScenarioError("missing [base_station] section")
        bs = np.array(_floats(cp["base_station"].get("position", ""), 3, "base_station.position"))
        cfg = ScenarioConfig(
            frequency=s.getfloat("frequency", 60e9),
            bandwidth=s.getfloat("bandwidth", 4e9),
            bs_height=float(bs[2]),
            ms_height=s.getfloat("ms_height", 1.5),
            route_step=s.getfloat("route_step", 0.6),
            n_phase_realizations=s.getint("n_phase_realizations", 100),
            seed=s.getint("seed", 20180101),
            L_a=env.L_a,
            body=bm,
        )
        routes = [name for name in cp.sections() if name.lower().startswith("route")]
        pts = []
        for name in routes:
            r = cp[name]
            step = r.getfloat("step", cfg.route_step)
            pts.append(route_points(_floats(r.get("start", ""), 2, f"{name}.start"),
                                    _floats(r.get("end", ""), 2, f"{name}.end"), step, cfg.ms_height))
        ms = np.vstack(pts) if pts else np.empty((0, 3))
        f = cp["finger"] if cp.has_section("finger") else {}
        finger = FingerSpec(int(f.get("covered_element", 0)), float(f.get("main_attenuation", 20.0)),
                            float(f.get("neighbor_attenuation", 6.0)),
                            np.deg2rad(float(f.get("neighbor_cone_halfwidth_deg", 30.0))),
                            float(f.get("offset", 0.009)))
        e = cp["element"] if cp.has_section("element") else {}
        element = PatchElementSpec(float(e.get("broadside_gain", 8.0)),
                                   float(e.get("front_to_back", 20.0)),
                                   np.deg2rad(float(e.get("polarization_tilt_deg", -45.0))))
        x = cp["xpr"] if cp.has_section("xpr") else {}
        xpr = XprModel(float(x.get("alpha2", -0.6)), float(x.get("beta2", 35.0)),
                       float(x.get("sigma2", 4.0)))
        max_order = s.getint("max_order", 2)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc
    return Scenario(s.get("name", source), cfg, env, bs, ms, max_order, finger, element, xpr,
                    source, tuple(routes))


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), path.parent, str(path))


def demo_scenario_path() -> Path:
    """Path of the shipped box-hall demo scenario."""
    return Path(str(resources.files("mmwgain") / "data" / "box_hall.ini"))


# ---------------------------------------------------------------------------
# Demo geometry (used to regenerate data/box_hall.env)

HALL_SIZE = (48.0, 24.0, 8.0)
PANEL_HEIGHT = 2.5
PANELS = [
    # (x0, y0, x1, y1): free-standing boards beside the walkways, base-station side
    (6.0, 8.7, 11.0, 8.7),
    (20.0, 8.7, 25.0, 8.7),
    (34.0, 8.7, 39.0, 8.7),
    (10.0, 15.3, 15.0, 15.3),
    (27.0, 15.3, 32.0, 15.3),
    (11.3, 3.0, 11.3, 8.0),
    (23.2, 15.0, 23.2, 20.0),
]
PILLARS = [(16.0, 4.0), (32.0, 20.0)]


def box_hall_environment(eps_r: float = 3.6) -> Environment:
    facets = list(box_room(HALL_SIZE, eps_r))
    for i, (x, y) in enumerate(PILLARS):
        facets += pillar(x, y, 0.8, HALL_SIZE[2], eps_r, name=f"pillar {i}")
    for i, (x0, y0, x1, y1) in enumerate(PANELS):
        facets.append(vertical_panel(x0, y0, x1, y1, PANEL_HEIGHT, eps_r, name=f"panel {i}"))
    return Environment(tuple(facets), 20.0)


def write_box_hall_environment(path) -> None:
    header = "# Box-hall demo: 48 x 24 x 8 m hall, two pillars, seven 2.5 m boards\n"
    Path(path).write_text(header + format_environment(box_hall_environment()))
