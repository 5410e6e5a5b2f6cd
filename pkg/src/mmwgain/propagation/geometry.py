"""Planar polygon facets, environments, and the environment file format.

Environment file grammar (line oriented, ``#`` starts a comment)::

    [environment]
    L_a = 20                 # small-object obstruction loss, dB

    [facet]
    name = north wall        # optional
    kind = structural        # structural | small_object
    eps_r = 3.6
    vertices = 0 0 0; 40 0 0; 40 0 8; 0 0 8

``[facet]`` may repeat; vertices are x y z triples in metres separated by
``;`` and must describe a planar convex polygon.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

PLANAR_TOL = 1e-9
STRUCTURAL_LOSS_DB = 100.0
FACET_KINDS = ("structural", "small_object")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Facet:
    vertices: np.ndarray
    eps_r: float = 3.6
    kind: str = "structural"
    name: str = ""
    normal: np.ndarray = field(init=False, repr=False)
    offset: float = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
            raise GeometryError(f"facet {self.name!r}: need >= 3 vertices in 3-D")
        if self.kind not in FACET_KINDS:
            raise GeometryError(f"facet {self.name!r}: kind must be one of {FACET_KINDS}")
        if not self.eps_r > 1:
            raise GeometryError(f"facet {self.name!r}: eps_r must exceed 1")
        # Newell's method is robust for any planar polygon
        n = np.zeros(3)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            n += np.array([(a[1] - b[1]) * (a[2] + b[2]),
                           (a[2] - b[2]) * (a[0] + b[0]),
                           (a[0] - b[0]) * (a[1] + b[1])])
        norm = np.linalg.norm(n)
        if norm == 0:
            raise GeometryError(f"facet {self.name!r}: degenerate polygon")
        n /= norm
        off = float(n @ v.mean(axis=0))
        if np.max(np.abs(v @ n - off)) > PLANAR_TOL:
            raise GeometryError(f"facet {self.name!r}: vertices not coplanar to {PLANAR_TOL} m")
        v.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", off)

    def signed_distance(self, p) -> np.ndarray:
        return np.asarray(p) @ self.normal - self.offset

    def mirror(self, p: np.ndarray) -> np.ndarray:
        return p - 2.0 * self.signed_distance(p) * self.normal

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        """True if a point on the facet plane lies inside the (convex) polygon."""
        v = self.vertices
        edges = np.roll(v, -1, axis=0) - v
        side = np.cross(edges, p - v) @ self.normal
        return bool(np.all(side >= -tol))

    def segment_parameter(self, p: np.ndarray, q: np.ndarray) -> float | None:
        """Parameter t in (0, 1) where segment p->q meets the polygon, else None."""
        dp, dq = self.signed_distance(p), self.signed_distance(q)
        if dp * dq >= 0 or dp == dq:
            return None
        t = dp / (dp - dq)
        return t if self.contains(p + t * (q - p)) else None


@dataclass(frozen=True)
class Environment:
    facets: tuple[Facet, ...] = ()
    L_a: float = 20.0

    def with_permittivity(self, eps_r: float) -> "Environment":
        return Environment(tuple(replace(f, eps_r=eps_r) for f in self.facets), self.L_a)

    def obstruction_db(self, p: np.ndarray, q: np.ndarray, skip=()) -> tuple[float, int, int]:
        """Total crossing loss of segment p->q and the (small, structural) crossing counts."""
        n_small = n_struct = 0
        for i, f in enumerate(self.facets):
            if i in skip:
                continue
            t = f.segment_parameter(p, q)
            if t is None or t < 1e-9 or t > 1 - 1e-9:
                continue
            if f.kind == "small_object":
                n_small += 1
            else:
                n_struct += 1
        return n_small * self.L_a + n_struct * STRUCTURAL_LOSS_DB, n_small, n_struct


def rectangle(corner, u, v, eps_r: float = 3.6, kind: str = "structural", name: str = "") -> Facet:
    """Parallelogram facet spanned by edge vectors ``u`` and ``v`` from ``corner``."""
    c, u, v = (np.asarray(x, dtype=float) for x in (corner, u, v))
    return Facet(np.array([c, c + u, c + u + v, c + v]), eps_r, kind, name)


def box_room(size, eps_r: float = 3.6, origin=(0.0, 0.0, 0.0)) -> list[Facet]:
    """Six structural facets of an axis-aligned room (floor, ceiling, four walls)."""
    lx, ly, lz = size
    o = np.asarray(origin, dtype=float)
    ex, ey, ez = np.eye(3)
    return [
        rectangle(o, lx * ex, ly * ey, eps_r, name="floor"),
        rectangle(o + lz * ez, lx * ex, ly * ey, eps_r, name="ceiling"),
        rectangle(o, lx * ex, lz * ez, eps_r, name="wall y=0"),
        rectangle(o + ly * ey, lx * ex, lz * ez, eps_r, name="wall y=max"),
        rectangle(o, ly * ey, lz * ez, eps_r, name="wall x=0"),
        rectangle(o + lx * ex, ly * ey, lz * ez, eps_r, name="wall x=max"),
    ]


def vertical_panel(x0, y0, x1, y1, height, eps_r: float = 3.6, kind: str = "small_object",
                   name: str = "", z0: float = 0.0) -> Facet:
    return rectangle((x0, y0, z0), (x1 - x0, y1 - y0, 0.0), (0.0, 0.0, height), eps_r, kind, name)


def pillar(x, y, width, height, eps_r: float = 3.6, name: str = "pillar") -> list[Facet]:
    """Four structural side faces of a square pillar centred at (x, y)."""
    h = width / 2
    c = [(x - h, y - h), (x + h, y - h), (x + h, y + h), (x - h, y + h)]
    return [vertical_panel(*c[i], *c[(i + 1) % 4], height, eps_r, "structural", f"{name} side {i}")
            for i in range(4)]


# ---------------------------------------------------------------------------
# File format


def _parse_vertices(text: str) -> np.ndarray:
    rows = [r.split() for r in text.split(";") if r.strip()]
    try:
        return np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise GeometryError(f"bad vertex list {text!r}") from exc


def parse_environment(text: str, default_eps_r: float = 3.6) -> Environment:
    L_a = 20.0
    facets = []
    section = None
    current: dict[str, str] = {}

    def flush():
        if section == "facet":
            if "vertices" not in current:
                raise GeometryError("[facet] without vertices")
            facets.append(Facet(_parse_vertices(current["vertices"]),
                                float(current.get("eps_r", default_eps_r)),
                                current.get("kind", "structural"), current.get("name", "")))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            section, current = line[1:-1].strip().lower(), {}
            if section not in ("environment", "facet"):
                raise GeometryError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line or section is None:
            raise GeometryError(f"line {lineno}: expected 'key = value' inside a section")
        key, value = (s.strip() for s in line.split("=", 1))
        if section == "environment":
            if key != "L_a":
                raise GeometryError(f"line {lineno}: unknown key {key!r}")
            L_a = float(value)
        else:
            current[key] = value
    flush()
    return Environment(tuple(facets), L_a)


def load_environment(path, default_eps_r: float = 3.6) -> Environment:
    return parse_environment(Path(path).read_text(), default_eps_r)


def format_environment(env: Environment) -> str:
    lines = ["[environment]", f"L_a = {env.L_a:g}", ""]
    for f in env.facets:
        verts = "; ".join(" ".join(f"{x:.9g}" for x in v) for v in f.vertices)
        lines += ["[facet]"]
        if f.name:
            lines += [f"name = {f.name}"]
        lines += [f"kind = {f.kind}", f"eps_r = {f.eps_r:g}", f"vertices = {verts}", ""]
    return "\n".join(lines)
