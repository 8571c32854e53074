from __future__ import annotations

import re

import numpy as np
import pytest

from skinforge.cutout import extract_cutout, extrude, smooth_cutout
from skinforge.heatmap import uniform_map
from skinforge.mesh import TriMesh
from skinforge.shapes import cylinder_patch, flat_plate, icosphere, v_groove


@pytest.fixture
def square2() -> TriMesh:
    """Unit square in the xy plane, two triangles."""
    return TriMesh(
        vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                           [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
        faces=np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64))


@pytest.fixture
def plate() -> TriMesh:
    return flat_plate(0.1, 10)


@pytest.fixture
def cube() -> TriMesh:
    """Unit cube, 8 vertices, 12 faces, outward normals."""
    v = np.array([[x, y, z] for x in (0.0, 1.0)
                  for y in (0.0, 1.0) for z in (0.0, 1.0)])
    f = np.array([
        [0, 1, 3], [0, 3, 2],          # x = 0, normal -x
        [4, 6, 7], [4, 7, 5],          # x = 1, normal +x
        [0, 4, 5], [0, 5, 1],          # y = 0, normal -y
        [2, 3, 7], [2, 7, 6],          # y = 1, normal +y
        [0, 2, 6], [0, 6, 4],          # z = 0, normal -z
        [1, 5, 7], [1, 7, 3],          # z = 1, normal +z
    ], dtype=np.int64)
    return TriMesh(vertices=v, faces=f)


@pytest.fixture
def sphere() -> TriMesh:
    return icosphere(0.05, 2)


@pytest.fixture
def groove() -> TriMesh:
    return v_groove(half_width=0.01, length=0.06, bands=6, rings=2)


@pytest.fixture
def cyl() -> TriMesh:
    return cylinder_patch()


def shell_of(mesh: TriMesh, thickness: float, clearance: float = 0.0,
             ratio: float | None = 0.5, cutoff: float = 0.5):
    """Full-coverage shell used wherever a test just needs some shell.

    ratio=None skips rim smoothing; on coarse rims heavy resampling can
    distort cells, which fixtures probing extrusion alone must avoid.
    """
    skin = uniform_map(mesh, 1.0, "skin")
    sub = extract_cutout(mesh, skin, cutoff)
    splines = ()
    if ratio is not None:
        sub, splines = smooth_cutout(sub, ratio)
    return extrude(sub, thickness, clearance, tuple(splines))


@pytest.fixture
def plate_shell(plate):
    return shell_of(plate, 0.003)


# ---------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per numbered criterion.
# ---------------------------------------------------------------------------

_CRITERION = re.compile(r"test_criterion_(\d+)")
_acceptance_outcomes: dict[int, str] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    n = int(m.group(1))
    if report.failed:
        _acceptance_outcomes[n] = "FAIL"
    elif report.skipped:
        _acceptance_outcomes.setdefault(n, "SKIP")
    elif report.when == "call":
        _acceptance_outcomes.setdefault(n, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(_acceptance_outcomes):
        terminalreporter.write_line(f"criterion {n}: {_acceptance_outcomes[n]}")
