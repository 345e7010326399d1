import os
import subprocess
import sys

import numpy as np
import pytest

from hpadapt import cli, presets
from hpadapt.estimator import IndicatorField
from hpadapt.export import export_mesh, read_vtk_cells, vtk_text
from hpadapt.mesh import bisect
from hpadapt.numerics import triangle_rule
from hpadapt.space import build_space, uniform_degrees
from hpadapt.strategy import ConvergenceLog, LogRow, Status

HEADER = "iter,n_elem,n_dof,eta,energy_error,n_h,n_p,n_hp,pcg_iters,seconds"


def run_cli(tmp_path, *flags, name="out"):
    out = tmp_path / name
    code = cli.main(["--out", str(out), *flags])
    return code, out


# -- CSV and exit codes --------------------------------------------------------

def test_csv_header_and_tolerance_exit(tmp_path):
    code, out = run_cli(tmp_path, "--problem", "square-smooth", "--strategy", "hp", "--tol", "1e-6")
    rows = cli.read_csv(out / "convergence.csv")
    assert (out / "convergence.csv").read_text().splitlines()[0] == HEADER
    nd = [int(r["n_dof"]) for r in rows]
    assert all(b > a for a, b in zip(nd, nd[1:]))
    if code == 0:
        assert float(rows[-1]["eta"]) <= 1e-6
    else:
        assert code == 2
    assert all(r["energy_error"] for r in rows)
    assert all(r["seconds"] == "" for r in rows)


def test_h_strategy_has_no_p(tmp_path):
    code, out = run_cli(tmp_path, "--problem", "lshape-corner", "--strategy", "h",
                        "--max-dof", "2000")
    assert code == 2
    rows = cli.read_csv(out / "convergence.csv")
    assert all(r["n_p"] == "0" and r["n_hp"] == "0" for r in rows)
    assert int(rows[-1]["n_dof"]) >= 2000


def test_iteration_budget_exit(tmp_path):
    code, _ = run_cli(tmp_path, "--problem", "lshape-smooth", "--max-iters", "2", "--tol", "1e-12")
    assert code == 2


@pytest.mark.parametrize("flags", [
    ["--problem", "no-such-problem"],
    ["--problem", "square-smooth", "--alpha", "1.5"],
    ["--problem", "square-smooth", "--initial-degree", "0"],
    ["--problem", "square-smooth", "--d", "4"],
    ["--problem", "square-smooth", "--max-dof", "ten"],
    [],
])
def test_error_exit(tmp_path, flags, capsys):
    assert cli.main(["--out", str(tmp_path / "e"), *flags]) == 1
    assert "error" in capsys.readouterr().err


def test_record_time_fills_seconds(tmp_path):
    _, out = run_cli(tmp_path, "--problem", "square-smooth", "--max-iters", "2", "--record-time")
    rows = cli.read_csv(out / "convergence.csv")
    assert all(float(r["seconds"]) >= 0.0 for r in rows)


def test_missing_exact_solution_leaves_column_empty(tmp_path):
    rows = [LogRow(1, 2, 9, 0.5, None, 0, 2, 0, 3, 0.1)]
    path = cli.write_csv(ConvergenceLog(rows, Status.TOLERANCE), tmp_path / "c.csv")
    lines = open(path).read().splitlines()
    assert lines == [HEADER, "1,2,9,0.5,,0,2,0,3,"]


def test_cli_is_deterministic(tmp_path):
    flags = ["--problem", "lshape-corner", "--strategy", "hp", "--max-iters", "8", "--tol", "1e-9"]
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run([sys.executable, "-m", "hpadapt", "--out", str(out), *flags],
                              capture_output=True, text=True)
        assert proc.returncode == 2, proc.stderr
        outs.append((out / "convergence.csv").read_bytes())
    assert outs[0] == outs[1]


def test_plot_script_written_and_valid(tmp_path):
    _, out = run_cli(tmp_path, "--problem", "square-smooth", "--max-iters", "3")
    script = (out / "plot_convergence.py").read_text()
    compile(script, "plot_convergence.py", "exec")
    assert "** (1/3)" in script
    assert "convergence.csv" in script


def test_export_mesh_flag(tmp_path):
    _, out = run_cli(tmp_path, "--problem", "lshape-corner", "--max-iters", "3", "--export-mesh")
    files = sorted(f for f in os.listdir(out) if f.endswith(".vtk"))
    assert files == ["mesh_001.vtk", "mesh_002.vtk", "mesh_003.vtk"]
    _, cells, arrays = read_vtk_cells((out / "mesh_001.vtk").read_text())
    assert len(cells) == 6 and set(arrays) == {"degree", "eta"}


# -- VTK export ----------------------------------------------------------------

def test_vtk_two_triangles(square, tmp_path):
    space = build_space(square, {0: 2, 1: 3})
    field = IndicatorField.from_mapping({0: 0.25, 1: 0.5})
    path = export_mesh(square, space, field, tmp_path / "m.vtk")
    text = open(path).read()
    assert text.startswith("# vtk DataFile Version 2.0\n")
    points, cells, arrays = read_vtk_cells(text)
    assert points.shape == (4, 3)
    assert len(cells) == 2
    assert arrays == {"degree": [2, 3], "eta": [0.25, 0.5]}


def test_vtk_only_leaves(boundary_ref):
    bisect(boundary_ref, {0})
    space = build_space(boundary_ref, uniform_degrees(boundary_ref, 2))
    _, cells, arrays = read_vtk_cells(vtk_text(boundary_ref, space))
    assert len(cells) == 3
    assert arrays["degree"] == [2, 2, 2]


# -- presets -------------------------------------------------------------------

def _edge_flux(grad, a, b, n=12):
    t, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (t + 1.0)
    pts = a + np.outer(s, b - a)
    gx, gy = grad(pts[:, 0], pts[:, 1])
    tangent = b - a
    normal = np.array([tangent[1], -tangent[0]])  # outward for CCW, scaled by length
    return 0.5 * float(w @ (gx * normal[0] + gy * normal[1]))


def _distance_to_origin(tri):
    best = np.inf
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        s = np.clip(-(a @ (b - a)) / ((b - a) @ (b - a)), 0.0, 1.0)
        best = min(best, np.hypot(*(a + s * (b - a))))
    return best


@pytest.mark.parametrize("name", sorted(presets.PRESETS))
def test_preset_pde_residual(name):
    # int_K (-Lap u - f) = -(flux of grad u through dK) - int_K f
    problem = presets.get_problem(name)
    rng = np.random.default_rng(11)
    rule = triangle_rule(24)
    checked = 0
    while checked < 10:
        tri = rng.uniform(-1, 1, (3, 2))
        if name == "square-smooth":
            tri = 0.5 * (tri + 1.0)
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
        if abs(area) < 1e-3:
            continue
        if area < 0:
            tri = tri[[0, 2, 1]]
        if name.startswith("lshape") and np.any((tri[:, 0] > 0) & (tri[:, 1] < 0)):
            continue
        if name == "lshape-corner":
            # stay on one side of the branch cut and away from the corner
            if _distance_to_origin(tri) < 0.2 or not (np.all(tri[:, 1] > 0) or np.all(tri[:, 0] < 0)):
                continue
        J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        xy = tri[0] + rule.points @ J.T
        load = abs(np.linalg.det(J)) * float(rule.weights @ problem.f(xy[:, 0], xy[:, 1]))
        flux = sum(_edge_flux(problem.grad, tri[i], tri[(i + 1) % 3], 100) for i in range(3))
        assert abs(-flux - load) <= 1e-8 * max(1.0, abs(load))
        checked += 1


@pytest.mark.parametrize("name", sorted(presets.PRESETS))
def test_preset_boundary_data_is_trace(name):
    problem = presets.get_problem(name)
    mesh = problem.mesh()
    xy = mesh.coords
    for (a, b), marker in mesh.boundary.items():
        assert marker == 1
        s = np.linspace(0.0, 1.0, 7)
        pts = xy[a] + np.outer(s, xy[b] - xy[a])
        np.testing.assert_allclose(problem.g(pts[:, 0], pts[:, 1]),
                                   problem.exact(pts[:, 0], pts[:, 1]), atol=1e-14)


def test_corner_gradient_matches_difference_quotient():
    problem = presets.get_problem("lshape-corner")
    x, y, h = np.array([-0.3, 0.4, -0.2]), np.array([0.5, 0.2, -0.6]), 1e-6
    gx, gy = problem.grad(x, y)
    fx = (problem.exact(x + h, y) - problem.exact(x - h, y)) / (2 * h)
    fy = (problem.exact(x, y + h) - problem.exact(x, y - h)) / (2 * h)
    np.testing.assert_allclose(gx, fx, rtol=1e-7)
    np.testing.assert_allclose(gy, fy, rtol=1e-7)


def test_unknown_preset():
    with pytest.raises(KeyError):
        presets.get_problem("cube")
