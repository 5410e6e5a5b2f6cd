from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from mmwgain.antenna import build_array
from mmwgain.scenarios import demo_scenario_path, load_scenario

# one slow core: keep example counts modest and drop per-example deadlines
settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 11


@pytest.fixture()
def criterion(request):
    """Record one acceptance verdict; the summary prints them in order."""
    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash.setdefault(ACCEPTANCE, {})[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(lines.get(n, f"criterion {n:2d}: ----  no verdict (deselected or errored)"))


@pytest.fixture(scope="session")
def demo():
    return load_scenario(demo_scenario_path())


@pytest.fixture(scope="session")
def ula():
    return build_array("ula")


@pytest.fixture(scope="session")
def da():
    return build_array("da")


ROOM_ENV = """\
[environment]
L_a = 20

[facet]
name = floor
vertices = 0 0 0; 10 0 0; 10 8 0; 0 8 0
[facet]
name = ceiling
vertices = 0 0 4; 10 0 4; 10 8 4; 0 8 4
[facet]
name = wall y=0
vertices = 0 0 0; 10 0 0; 10 0 4; 0 0 4
[facet]
name = wall y=8
vertices = 0 8 0; 10 8 0; 10 8 4; 0 8 4
[facet]
name = wall x=0
vertices = 0 0 0; 0 8 0; 0 8 4; 0 0 4
[facet]
name = wall x=10
vertices = 10 0 0; 10 8 0; 10 8 4; 10 0 4
"""

ROOM_SCENARIO = """\
[scenario]
name = empty room
environment = room.env
seed = 7
max_order = 2

[base_station]
position = 1.0 4.0 3.0

[route A]
start = 6 3
end = 6 3
"""


@pytest.fixture()
def room_scenario(tmp_path) -> Path:
    """Empty 10 x 8 x 4 m room with a single mobile position."""
    (tmp_path / "room.env").write_text(ROOM_ENV)
    path = tmp_path / "room.ini"
    path.write_text(ROOM_SCENARIO)
    return path
