import numpy as np
import pytest

from hpadapt.mesh import load_mesh
from hpadapt.presets import L_SHAPE, UNIT_SQUARE

SINGLE = """\
3 1 3
0 0
1 0
0 1
0 1 2
0 1 1
1 2 1
2 0 1
"""

# both triangles have their longest edge on the boundary
BOUNDARY_REF = """\
4 2 4
0 0
2 0
0 1
-1 0
0 1 2
0 2 3
0 1 1
1 2 1
2 3 1
3 0 1
"""


@pytest.fixture
def single():
    return load_mesh(SINGLE)


@pytest.fixture
def square():
    return load_mesh(UNIT_SQUARE)


@pytest.fixture
def lshape():
    return load_mesh(L_SHAPE)


@pytest.fixture
def boundary_ref():
    return load_mesh(BOUNDARY_REF)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
