import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpadapt import presets
from hpadapt.mesh import bisect
from hpadapt.probes import brute_conformity, check_genealogy, dense_solve, fine_energy_norm, min_angle
from hpadapt.space import build_space, uniform_degrees


def test_dense_identity():
    b = np.array([3.0, -1.0, 2.0])
    np.testing.assert_array_equal(dense_solve(np.eye(3), b), b)


def test_dense_two_by_two():
    np.testing.assert_allclose(dense_solve([[4, 1], [1, 3]], [1, 2]), [1 / 11, 7 / 11], rtol=1e-15)


def test_dense_scalar():
    assert dense_solve([[4.0]], [2.0])[0] == 0.5


def test_dense_needs_pivoting():
    x = dense_solve([[0.0, 1.0], [1.0, 0.0]], [2.0, 3.0])
    np.testing.assert_array_equal(x, [3.0, 2.0])


def test_dense_errors():
    with pytest.raises(np.linalg.LinAlgError):
        dense_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        dense_solve(np.eye(2), np.ones(3))
    with pytest.raises(ValueError):
        dense_solve(np.eye(501), np.ones(501))


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 60), seed=st.integers(0, 10_000))
def test_dense_residual(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    x = dense_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(A) * np.linalg.norm(x) + 1e-300


@pytest.mark.parametrize("name", sorted(presets.PRESETS))
def test_fresh_presets_conform(name):
    mesh = presets.get_problem(name).mesh()
    assert brute_conformity(mesh)
    assert check_genealogy(mesh)


def test_deactivated_child_breaks_conformity(square):
    bisect(square, {0})
    child = next(e for e in sorted(square.active_set) if square.elements[e].parent is not None)
    square.elements[child].active = False
    square.active_set.discard(child)
    assert not brute_conformity(square)
    assert not check_genealogy(square)


def test_hanging_node_detected(square):
    # split one triangle by hand, leaving its neighbour untouched
    bisect(square, {0, 1})
    parent = 1
    kids = square.elements[parent].children
    for k in kids:
        square.elements[k].active = False
        square.active_set.discard(k)
    square.elements[parent].active = True
    square.elements[parent].children = None
    square.active_set.add(parent)
    assert not brute_conformity(square)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), rounds=st.integers(1, 5))
def test_random_marking_keeps_conformity(seed, rounds):
    rng = np.random.default_rng(seed)
    mesh = presets.get_problem("lshape-corner").mesh()
    for _ in range(rounds):
        active = sorted(mesh.active_set)
        mesh.bisect(set(rng.choice(active, size=int(rng.integers(1, len(active) + 1)), replace=False).tolist()))
    assert brute_conformity(mesh)
    assert check_genealogy(mesh)


def test_fine_energy_norm_linear_exact(square):
    space = build_space(square, uniform_degrees(square, 2))
    u = np.zeros(space.n_dof)
    u[:4] = square.coords @ np.array([1.5, -0.5])
    assert fine_energy_norm(space, u, lambda x, y: (1.5 + 0 * x, -0.5 + 0 * y)) < 1e-12


def test_fine_energy_norm_zero_vs_x(lshape):
    space = build_space(lshape, uniform_degrees(lshape, 1))
    err = fine_energy_norm(space, np.zeros(space.n_dof), lambda x, y: (np.ones_like(x), 0 * y))
    assert err == pytest.approx(math.sqrt(3.0), abs=1e-13)


def test_min_angle_square(square):
    assert min_angle(square) == pytest.approx(math.pi / 4)
