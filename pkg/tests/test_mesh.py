import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpadapt.mesh import MeshError, bisect, edge_diameter, element_diameter, load_mesh, uniform_refine
from hpadapt.presets import L_SHAPE, UNIT_SQUARE
from hpadapt.probes import brute_conformity, check_genealogy, min_angle


def total_area(mesh):
    return sum(mesh.area(e) for e in mesh.active_set)


def test_load_unit_square(square):
    assert square.n_vertices == 4
    assert len(square.active_set) == 2
    assert all(square.elements[e].generation == 0 for e in square.active_set)


def test_load_lshape(lshape):
    assert lshape.n_vertices == 8
    assert len(lshape.active_set) == 6
    assert brute_conformity(lshape)


def test_initial_refinement_edge_is_longest(square):
    for e in square.active_set:
        el = square.elements[e]
        a, b = el.refinement_key
        assert square.edge_diameter((a, b)) == pytest.approx(math.sqrt(2))


def test_refinement_edge_tie_break():
    # equilateral: all edges tie, pick the edge opposite the smallest vertex index
    text = f"3 1 0\n0 0\n1 0\n0.5 {math.sqrt(3) / 2!r}\n2 0 1\n"
    mesh = load_mesh(text)
    el = mesh.elements[0]
    assert el.vertex_ids[el.refinement_edge] == 0


@pytest.mark.parametrize("text", [
    "3 1 0\n0 0\n1 0\n0 1\n0 0 2\n",          # duplicated vertex
    "3 1 0\n0 0\n1 0\n2 0\n0 1 2\n",          # zero area
    "3 1 0\n0 0\n1 0\n",                      # truncated
    "3 1 0\n0 0\n1 zero\n0 1\n0 1 2\n",       # parse failure
    "3 0 0\n0 0\n1 0\n0 1\n",                 # no triangles
    "3 1 0\n0 0\n1 0\n0 1\n0 1 5\n",          # vertex index out of range
])
def test_load_rejects_bad_documents(text):
    with pytest.raises(MeshError):
        load_mesh(text)


def test_load_rejects_nonconforming():
    # a vertex in the middle of the neighbour's edge
    text = "5 3 0\n0 0\n2 0\n0 2\n1 1\n2 2\n0 1 2\n1 4 3\n3 4 2\n"
    with pytest.raises(MeshError):
        load_mesh(text)


def test_comments_are_ignored():
    mesh = load_mesh("# header\n3 1 0 # counts\n0 0\n1 0\n0 1 # last vertex\n0 1 2\n")
    assert len(mesh.active_set) == 1


def test_bisect_single(single):
    area = single.area(0)
    report = bisect(single, {0})
    assert len(report.created) == 2
    assert not single.elements[0].active
    for c in report.created:
        assert single.area(c) == pytest.approx(area / 2, rel=1e-14)
        assert report.parent[c] == 0
        assert single.elements[c].generation == 1


def test_bisect_closure_on_square(square):
    report = bisect(square, {0})
    assert len(square.active_set) == 4
    assert square.n_vertices == 5
    assert report.bisected == {0, 1}
    assert brute_conformity(square)


def test_bisect_empty_set(square):
    report = bisect(square, set())
    assert report.created == [] and report.parent == {}
    assert len(square.active_set) == 2 and square.n_vertices == 4


def test_bisect_inactive_rejected(single):
    bisect(single, {0})
    with pytest.raises(MeshError):
        bisect(single, {0})


def test_boundary_refinement_edge_needs_no_closure(boundary_ref):
    bisect(boundary_ref, {0})
    assert len(boundary_ref.active_set) == 3
    assert brute_conformity(boundary_ref)


def test_midpoints_are_shared(square):
    bisect(square, {0})
    xy = square.coords
    assert len({tuple(p) for p in xy}) == square.n_vertices


def test_boundary_markers_follow_splits(single):
    uniform_refine(single)
    uniform_refine(single)
    assert all(m == 1 for m in single.boundary.values())
    length = sum(single.edge_diameter(k) for k in single.boundary)
    assert length == pytest.approx(2 + math.sqrt(2))


@pytest.mark.parametrize("coords, expected", [
    ([(0, 0), (1, 0), (0, 1)], math.sqrt(2)),
    ([(0, 0), (2, 0), (1, math.sqrt(3))], 2.0),
])
def test_element_diameter(coords, expected):
    text = "3 1 0\n" + "\n".join(f"{x!r} {y!r}" for x, y in coords) + "\n0 1 2\n"
    mesh = load_mesh(text)
    assert element_diameter(mesh, 0) == pytest.approx(expected, rel=1e-14)


def test_child_diameter(single):
    report = bisect(single, {0})
    # children (0,0),(1,0),(.5,.5) and (0,0),(.5,.5),(0,1): longest edge 1
    for c in report.created:
        assert element_diameter(single, c) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("a, b, expected", [
    ((0, 0), (1, 0), 1.0),
    ((0, 0), (1, 1), math.sqrt(2)),
    ((0.5, 0), (0.5, 0.5), 0.5),
])
def test_edge_diameter(a, b, expected):
    text = f"3 1 0\n{a[0]} {a[1]}\n{b[0]} {b[1]}\n-3 7\n0 1 2\n"
    mesh = load_mesh(text)
    assert edge_diameter(mesh, (0, 1)) == pytest.approx(expected, rel=1e-14)


def test_uniform_refine_counts(square, single):
    uniform_refine(square)
    assert len(square.active_set) == 4
    uniform_refine(single)
    assert len(single.active_set) == 2
    uniform_refine(single)
    assert len(single.active_set) == 4


@pytest.mark.parametrize("text", [UNIT_SQUARE, L_SHAPE])
def test_uniform_refinement_keeps_shape_classes(text):
    mesh = load_mesh(text)
    early = [min_angle(mesh)]
    for sweep in range(10):
        uniform_refine(mesh)
        if sweep < 4:
            early.append(min_angle(mesh))
        assert brute_conformity(mesh) if sweep < 4 else mesh.is_conforming()
    assert min_angle(mesh) == pytest.approx(min(early), rel=1e-9)
    assert check_genealogy(mesh)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), rounds=st.integers(1, 6))
def test_random_marking_keeps_invariants(seed, rounds):
    rng = np.random.default_rng(seed)
    mesh = load_mesh(L_SHAPE)
    area = total_area(mesh)
    for _ in range(rounds):
        active = sorted(mesh.active_set)
        k = int(rng.integers(1, max(2, len(active) // 3)))
        marked = set(rng.choice(active, size=k, replace=False).tolist())
        before = set(mesh.active_set)
        report = bisect(mesh, marked)
        assert marked <= report.bisected <= before
        assert brute_conformity(mesh)
        assert check_genealogy(mesh)
        assert total_area(mesh) == pytest.approx(area, rel=1e-12)
        for c, p in report.parent.items():
            assert mesh.elements[c].generation == mesh.elements[p].generation + 1


def test_conformity_probe_detects_hole(square):
    uniform_refine(square)
    child = max(square.active_set)
    square.elements[child].active = False
    square.active_set.discard(child)
    assert not brute_conformity(square)
    assert not square.is_conforming()
