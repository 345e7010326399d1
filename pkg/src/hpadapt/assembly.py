"""Stiffness matrix and load vector for ``-Laplace(u) = f``, Dirichlet elimination."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .numerics import affine_map, triangle_rule
from .shapes import tabulate


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_dofs: np.ndarray

    @property
    def n(self):
        return len(self.rhs)


def geometry(space, elems):
    """Origins, Jacobians, inverse Jacobians and |det J| for ``elems``."""
    mesh = space.mesh
    v = np.array([mesh.elements[e].vertex_ids for e in elems], dtype=int)
    x0, J = affine_map(mesh.coords[v])
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / det
    Jinv[:, 1, 1] = J[:, 0, 0] / det
    Jinv[:, 0, 1] = -J[:, 0, 1] / det
    Jinv[:, 1, 0] = -J[:, 1, 0] / det
    return x0, J, Jinv, np.abs(det)


@lru_cache(maxsize=None)
def _reference_stiffness(sig):
    """``S[a, b] = int dphi_i/dxi_a dphi_j/dxi_b`` over the reference triangle."""
    p = sig[0]
    rule = triangle_rule(2 * p)
    _, g, _ = tabulate(*sig, rule.key)
    S = np.einsum("q,iqa,jqb->abij", rule.weights, g, g, optimize=True)
    S.setflags(write=False)
    return S


def element_matrices(space, sig, elems):
    S = _reference_stiffness(sig)
    _, _, Jinv, det = geometry(space, elems)
    # grad_x = Jinv^T grad_xi, so the metric is Jinv Jinv^T
    C = np.einsum("eak,ebk->eab", Jinv, Jinv) * det[:, None, None]
    m = S.shape[-1]
    return (C.reshape(-1, 4) @ S.reshape(4, m * m)).reshape(-1, m, m)


def element_loads(space, sig, elems, f):
    p = sig[0]
    rule = triangle_rule(2 * p + 4)
    vals, _, _ = tabulate(*sig, rule.key)
    x0, J, _, det = geometry(space, elems)
    xy = x0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
    fv = np.broadcast_to(np.asarray(f(xy[..., 0], xy[..., 1]), dtype=float), xy.shape[:2])
    return ((fv * rule.weights) @ vals.T) * det[:, None]


def assemble(space, f):
    """Global stiffness matrix (CSR, all DOFs) and load vector."""
    rows, cols, data = [], [], []
    rhs = np.zeros(space.n_dof)
    for sig, (elems, dofs) in space.groups.items():
        K = element_matrices(space, sig, elems)
        m = dofs.shape[1]
        rows.append(np.repeat(dofs, m, axis=1).ravel())
        cols.append(np.tile(dofs, (1, m)).ravel())
        data.append(K.ravel())
        b = element_loads(space, sig, elems, f)
        np.add.at(rhs, dofs.ravel(), b.ravel())
    A = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.n_dof, space.n_dof)).tocsr()
    A.sum_duplicates()
    return SparseSystem(A, rhs, np.arange(space.n_dof))


def apply_dirichlet(system, space, g_values):
    """Eliminate the constrained DOFs, moving their contribution to the rhs."""
    g_values = np.asarray(g_values, dtype=float)
    if g_values.shape != space.dirichlet_dofs.shape:
        raise ValueError(f"expected {len(space.dirichlet_dofs)} Dirichlet values, "
                         f"got {g_values.shape}")
    free = space.free_dofs
    A = system.matrix
    A_ff = A[free][:, free].tocsr()
    rhs = system.rhs[free] - A[free][:, space.dirichlet_dofs] @ g_values
    return SparseSystem(A_ff, rhs, free)
