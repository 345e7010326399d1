"""Built-in model problems on two-dimensional domains.

square-smooth
    Unit square, ``u = sin(pi x) sin(pi y)``, ``f = 2 pi^2 u``, ``g = 0``.
lshape-smooth
    ``(-1, 1)^2`` minus ``[0, 1) x (-1, 0]``, ``u = cos(2 pi x) cos(2 pi y)``,
    ``f = 8 pi^2 u``, ``g`` the trace of ``u``.
lshape-corner
    Same domain, ``u = r^(2/3) sin(2 theta / 3)`` about the reentrant corner
    with ``theta`` in ``[0, 3 pi / 2]``, ``f = 0``, ``g`` the trace of ``u``.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import load_mesh

UNIT_SQUARE = """\
# unit square, diagonal (0,0)-(1,1)
4 2 4
0 0
1 0
1 1
0 1
0 1 2
0 2 3
0 1 1
1 2 1
2 3 1
3 0 1
"""

L_SHAPE = """\
# (-1,1)^2 minus the fourth quadrant, three squares split through the corner
8 6 8
-1 -1
0 -1
-1 0
0 0
1 0
-1 1
0 1
1 1
0 1 3
0 3 2
2 3 6
2 6 5
3 4 7
3 7 6
0 1 1
1 3 1
3 4 1
4 7 1
7 6 1
6 5 1
5 2 1
2 0 1
"""


@dataclass
class Problem:
    name: str
    mesh_text: str
    f: Callable
    g: Callable
    exact: Optional[Callable] = None
    grad: Optional[Callable] = None
    singular_point: Optional[tuple] = None

    def mesh(self):
        return load_mesh(self.mesh_text)

    @property
    def has_exact(self):
        return self.grad is not None


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _square_smooth():
    pi = np.pi

    def u(x, y):
        return np.sin(pi * x) * np.sin(pi * y)

    def f(x, y):
        return 2.0 * pi ** 2 * u(x, y)

    def grad(x, y):
        return (pi * np.cos(pi * x) * np.sin(pi * y), pi * np.sin(pi * x) * np.cos(pi * y))

    return Problem("square-smooth", UNIT_SQUARE, f, _zero, u, grad)


def _lshape_smooth():
    w = 2.0 * np.pi

    def u(x, y):
        return np.cos(w * x) * np.cos(w * y)

    def f(x, y):
        return 2.0 * w ** 2 * u(x, y)

    def grad(x, y):
        return (-w * np.sin(w * x) * np.cos(w * y), -w * np.cos(w * x) * np.sin(w * y))

    return Problem("lshape-smooth", L_SHAPE, f, u, u, grad)


def corner_angle(x, y):
    """Polar angle in ``[0, 2 pi)``; the domain occupies ``[0, 3 pi / 2]``."""
    theta = np.arctan2(y, x)
    return np.where(theta < 0.0, theta + 2.0 * np.pi, theta)


def _lshape_corner():
    def u(x, y):
        r = np.hypot(x, y)
        return r ** (2.0 / 3.0) * np.sin(2.0 * corner_angle(x, y) / 3.0)

    def grad(x, y):
        r = np.hypot(x, y)
        theta = corner_angle(x, y)
        with np.errstate(divide="ignore"):
            scale = (2.0 / 3.0) * r ** (-1.0 / 3.0)
        return (-scale * np.sin(theta / 3.0), scale * np.cos(theta / 3.0))

    return Problem("lshape-corner", L_SHAPE, _zero, u, u, grad, singular_point=(0.0, 0.0))


PRESETS = {
    "square-smooth": _square_smooth,
    "lshape-smooth": _lshape_smooth,
    "lshape-corner": _lshape_corner,
}


def get_problem(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PRESETS)}") from None


def linear_problem(name, a=0.3, b=-0.7, c=0.2):
    """Preset geometry with exact solution ``a x + b y + c`` and ``f = 0``."""
    base = get_problem(name)

    def u(x, y):
        return a * x + b * y + c

    def grad(x, y):
        shape = np.broadcast(x, y).shape
        return (np.full(shape, a), np.full(shape, b))

    return Problem(f"{name}-linear", base.mesh_text, _zero, u, u, grad)
