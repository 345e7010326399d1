"""Independent oracles for testing.

Nothing here reuses the quadrature tables, assembly or solvers of the main
path; only vertex coordinates and the shape-function evaluator are shared.
"""
import math

import numpy as np

from .shapes import EDGE_VERTS, reference_basis


def dense_solve(A, b):
    """Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError("matrix and right-hand side do not match")
    if n > 500:
        raise ValueError("dense oracle is limited to n <= 500")
    M = np.column_stack([A, b])
    scale = np.abs(A).max() if n else 0.0
    for k in range(n):
        piv = k + int(np.argmax(np.abs(M[k:, k])))
        if abs(M[piv, k]) <= 1e-14 * scale:
            raise np.linalg.LinAlgError("matrix is singular")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
        M[k + 1:] -= np.outer(M[k + 1:, k] / M[k, k], M[k])
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (M[k, n] - M[k, k + 1:n] @ x[k + 1:]) / M[k, k]
    return x


def _point_on_open_segment(p, a, b, tol=1e-12):
    ab = b - a
    ap = p - a
    length2 = ab @ ab
    cross = ab[0] * ap[1] - ab[1] * ap[0]
    if abs(cross) > tol * length2:
        return False
    s = (ap @ ab) / length2
    return tol < s < 1.0 - tol


def brute_conformity(mesh):
    """Exhaustive audit: every active edge has a matching neighbour or is on the boundary,
    and no vertex sits inside an active edge (no hanging nodes)."""
    active = [e for e, el in enumerate(mesh.elements) if el.active]
    xy = np.array([[v.x, v.y] for v in mesh.vertices])
    used = sorted({v for e in active for v in mesh.elements[e].vertex_ids})
    for e in active:
        v = mesh.elements[e].vertex_ids
        for a, b in EDGE_VERTS:
            pair = {v[a], v[b]}
            partners = [o for o in active if o != e and pair <= set(mesh.elements[o].vertex_ids)]
            if len(partners) > 1:
                return False
            if not partners and tuple(sorted(pair)) not in mesh.boundary:
                return False
            for w in used:
                if w not in pair and _point_on_open_segment(xy[w], xy[v[a]], xy[v[b]]):
                    return False
    return True


def check_genealogy(mesh, rel_tol=1e-12):
    """Binary forest, leaves are exactly the active elements, children tile parents."""
    for e, el in enumerate(mesh.elements):
        if el.active:
            if el.children is not None:
                return False
            continue
        if el.children is None or len(el.children) != 2:
            return False
        kids = [mesh.elements[c] for c in el.children]
        if any(k.parent != e or k.generation != el.generation + 1 for k in kids):
            return False
        area = mesh.area(e)
        if abs(sum(mesh.area(c) for c in el.children) - area) > rel_tol * area:
            return False
    leaves = {e for e, el in enumerate(mesh.elements) if el.children is None}
    return leaves == set(mesh.active_set)


def _duffy_gauss(order):
    """Tensor Gauss-Legendre on the collapsed square, exact to ``order``."""
    n = order // 2 + 2
    t, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (t + 1.0)
    wu = 0.5 * w
    pts, wts = [], []
    for ui, wi in zip(u, wu):
        for vj, wj in zip(u, wu):
            pts.append((ui, vj * (1.0 - ui)))
            wts.append(wi * wj * (1.0 - ui))
    return np.array(pts), np.array(wts)


def fine_energy_norm(space, u, grad_exact, degree_boost=4):
    """Energy norm of ``u_exact - u_hp`` with rules of degree ``2 p + 6 + boost``."""
    if degree_boost < 4:
        raise ValueError("degree_boost must be >= 4")
    mesh = space.mesh
    total = 0.0
    for e in space.elements:
        sig = space.signature(e)
        pts, wts = _duffy_gauss(2 * sig[0] + 6 + degree_boost)
        _, g, _ = reference_basis(*sig, pts)
        v = mesh.elements[e].vertex_ids
        p0, p1, p2 = (np.array([mesh.vertices[i].x, mesh.vertices[i].y]) for i in v)
        J = np.column_stack([p1 - p0, p2 - p0])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        Jinv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
        coef = u[space.local_dofs(e)]
        grad_h = np.einsum("i,iqa->qa", coef, g) @ Jinv
        x = p0[0] + pts @ J[0]
        y = p0[1] + pts @ J[1]
        gx, gy = grad_exact(x, y)
        total += abs(det) * float(wts @ ((gx - grad_h[:, 0]) ** 2 + (gy - grad_h[:, 1]) ** 2))
    return math.sqrt(total)


def min_angle(mesh):
    """Smallest interior angle (radians) over the active elements."""
    best = math.pi
    for e in mesh.active_set:
        xy = mesh.element_coords(e)
        for i in range(3):
            a = xy[(i + 1) % 3] - xy[i]
            b = xy[(i + 2) % 3] - xy[i]
            c = np.clip(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0)
            best = min(best, math.acos(c))
    return best
