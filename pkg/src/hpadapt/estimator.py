"""Residual a posteriori indicator and exact energy error.

For an active element ``K`` of degree ``p``::

    eta_K^2 = h_K^2 / p^2 * ||f_{p-1} + Lap u_hp||_K^2
              + sum_{interior edges e of K} h_e / (2 p_e) * ||[du_hp/dn]||_e^2

with ``f_{p-1}`` the L2(K) projection of ``f`` onto polynomials of degree
``p - 1`` and ``p_e`` the larger degree of the two elements sharing ``e``.
Each adjacent element receives the full half-weighted edge term, so
``eta^2`` is the plain sum of the ``eta_K^2``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .assembly import geometry
from .numerics import edge_rule, project_batch, triangle_rule
from .shapes import EDGE_VERTS, REF_VERTICES, reference_basis, tabulate


@dataclass
class IndicatorField:
    """Per-element indicators ``eta_K`` in ascending element order."""

    elements: list
    values: np.ndarray
    volume: np.ndarray | None = None
    jump: np.ndarray | None = None

    @classmethod
    def from_mapping(cls, eta):
        elems = sorted(eta)
        return cls(elems, np.array([eta[e] for e in elems], dtype=float))

    @property
    def eta(self):
        return dict(zip(self.elements, self.values.tolist()))

    @property
    def eta_global(self):
        return global_indicator(self)

    def __getitem__(self, elem):
        return self.eta[elem]

    def __len__(self):
        return len(self.elements)


def global_indicator(field):
    values = field.values if isinstance(field, IndicatorField) else np.asarray(list(field), float)
    return float(np.sqrt(np.sum(np.square(values))))


@lru_cache(maxsize=None)
def _edge_trace_gradients(sig, j, degree):
    """Reference gradients on local edge ``j`` at edge-rule points in global orientation."""
    a, b = EDGE_VERTS[j]
    if sig[2][j]:
        a, b = b, a
    t = edge_rule(degree).points
    pts = REF_VERTICES[a] + np.outer(t, REF_VERTICES[b] - REF_VERTICES[a])
    _, g, _ = reference_basis(*sig, pts)
    g.setflags(write=False)
    return g


def _physical_gradient(coef, g, Jinv):
    """``grad u`` at the points of ``g`` for coefficients ``coef`` (elements x local)."""
    ref = (coef @ g.reshape(g.shape[0], -1)).reshape(len(coef), -1, 2)
    # grad_x = Jinv^T grad_xi, i.e. row vector times Jinv
    return ref @ Jinv


def _metric(Jinv):
    return np.einsum("eak,ebk->eab", Jinv, Jinv)


def _volume_residuals(space, u, f):
    """``h_K^2/p^2 ||f_{p-1} + Lap u_hp||^2`` per element (dict)."""
    mesh = space.mesh
    out = {}
    for sig, (elems, dofs) in space.groups.items():
        p = sig[0]
        rule = triangle_rule(2 * p + 4)
        _, _, H = tabulate(*sig, rule.key)
        x0, J, Jinv, det = geometry(space, elems)
        xy = x0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
        fv = np.broadcast_to(np.asarray(f(xy[..., 0], xy[..., 1]), dtype=float), xy.shape[:2])
        fq = project_batch(fv, p - 1, rule)
        uH = (u[dofs] @ H.reshape(H.shape[0], -1)).reshape(len(elems), -1, 2, 2)
        lap = np.einsum("eab,eqab->eq", _metric(Jinv), uH)
        res2 = det * ((fq + lap) ** 2 @ rule.weights)
        h = np.array([mesh.element_diameter(e) for e in elems])
        out.update(zip(elems, (h ** 2 / p ** 2 * res2).tolist()))
    return out


def _jump_terms(space, u):
    """``h_e/(2 p_e) ||[du/dn]||_e^2`` per element, and per interior edge."""
    mesh = space.mesh
    pmax = max(space.element_degree.values())
    degree = 2 * pmax + 2
    rule = edge_rule(degree)
    traces = {}
    for sig, (elems, dofs) in space.groups.items():
        _, _, Jinv, _ = geometry(space, elems)
        for j in range(3):
            g = _edge_trace_gradients(sig, j, degree)
            # physical gradient: Jinv^T grad_ref
            gu = _physical_gradient(u[dofs], g, Jinv)
            for e, val in zip(elems, gu):
                traces[(e, j)] = val
    per_elem = dict.fromkeys(space.elements, 0.0)
    per_edge = {}
    xy = mesh.coords
    for key, owners in space.edge_owners.items():
        if len(owners) != 2:
            continue
        (e1, j1), (e2, j2) = owners
        a, b = key
        tangent = xy[b] - xy[a]
        h_e = float(np.hypot(*tangent))
        normal = np.array([tangent[1], -tangent[0]]) / h_e
        jump = (traces[(e1, j1)] - traces[(e2, j2)]) @ normal
        p_e = max(space.element_degree[e1], space.element_degree[e2])
        term = h_e / (2.0 * p_e) * h_e * float(rule.weights @ jump ** 2)
        per_edge[key] = term
        per_elem[e1] += term
        per_elem[e2] += term
    return per_elem, per_edge


def indicators(space, u, f):
    """:class:`IndicatorField` for the full coefficient vector ``u``."""
    vol = _volume_residuals(space, u, f)
    jmp, _ = _jump_terms(space, u)
    elems = list(space.elements)
    v = np.array([vol[e] for e in elems])
    jv = np.array([jmp[e] for e in elems])
    return IndicatorField(elems, np.sqrt(v + jv), v, jv)


def element_indicator(space, u, f, elem):
    if elem not in space.element_degree:
        raise KeyError(f"element {elem} is not active")
    return indicators(space, u, f)[elem]


def energy_error(space, u, grad_exact, boost=6):
    """``sqrt(sum_K int_K |grad u - grad u_hp|^2)`` with rules of degree ``2 p + boost``."""
    total = 0.0
    for sig, (elems, dofs) in space.groups.items():
        rule = triangle_rule(2 * sig[0] + boost)
        _, g, _ = tabulate(*sig, rule.key)
        x0, J, Jinv, det = geometry(space, elems)
        xy = x0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
        gu = _physical_gradient(u[dofs], g, Jinv)
        gx, gy = grad_exact(xy[..., 0], xy[..., 1])
        diff2 = (np.broadcast_to(gx, gu.shape[:2]) - gu[..., 0]) ** 2 \
            + (np.broadcast_to(gy, gu.shape[:2]) - gu[..., 1]) ** 2
        total += float(det @ (diff2 @ rule.weights))
    return float(np.sqrt(total))
