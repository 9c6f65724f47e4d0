import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from teichmap import meshgen
from teichmap.parameterize import harmonic_rect

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def unit_square(n):
    """Unit-square grid as a rectangle chart with its four corners designated."""
    return harmonic_rect(meshgen.grid_square(n), meshgen.square_corners(n))


@pytest.fixture(scope="session")
def square8():
    return unit_square(8)


@pytest.fixture(scope="session")
def disk8():
    from teichmap.parameterize import disk_chart
    return disk_chart(meshgen.disk_mesh(8))


def jittered_square(n, amount=0.25, seed=0):
    """Grid with interior vertices moved by up to ``amount`` of a cell."""
    m = meshgen.grid_square(n)
    rng = np.random.default_rng(seed)
    v = m.vertices.copy()
    inner = ~m.is_boundary_vertex
    v[inner, :2] += rng.uniform(-amount, amount, (inner.sum(), 2)) / n
    return m.with_vertices(v)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        ok, detail = verdicts[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
