"""Variable-degree hierarchical H1 space over the active elements of a mesh.

Global numbering: vertex ``i`` owns DOF ``i``; then each edge (sorted by key)
owns ``q_e - 1`` consecutive DOFs; then each active element (ascending id)
owns its ``(p - 1)(p - 2) / 2`` bubbles.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import DIRICHLET
from .numerics import edge_rule
from .shapes import EDGE_VERTS, legendre_table, n_interior, reference_basis


class SpaceError(ValueError):
    pass


@dataclass
class BasisEval:
    values: np.ndarray
    gradients: np.ndarray

    def __len__(self):
        return len(self.values)


class HpSpace:
    """Immutable hp space; use :func:`increase_degree` to derive a new one."""

    def __init__(self, mesh, degrees):
        self.mesh = mesh
        active = mesh.active_elements()
        self.elements = active
        deg = {}
        for e in active:
            if e not in degrees:
                raise SpaceError(f"no degree given for active element {e}")
            p = int(degrees[e])
            if p < 1:
                raise SpaceError(f"degree of element {e} is {p}, must be >= 1")
            deg[e] = p
        self.element_degree = deg

        edge_owners = mesh.edge_elements()
        self.edge_owners = edge_owners
        edge_degree = {}
        for k, owners in edge_owners.items():
            edge_degree[k] = min(deg[e] for e, _ in owners)
        self.edge_degree = edge_degree

        nv = mesh.n_vertices
        offset = nv
        edge_dofs = {}
        for k in sorted(edge_degree):
            n = edge_degree[k] - 1
            edge_dofs[k] = np.arange(offset, offset + n)
            offset += n
        self.edge_dofs = edge_dofs
        bubble_dofs = {}
        for e in active:
            n = n_interior(deg[e])
            bubble_dofs[e] = np.arange(offset, offset + n)
            offset += n
        self.bubble_dofs = bubble_dofs
        self.n_dof = offset

        dirichlet = set()
        for k, marker in mesh.boundary.items():
            if marker == DIRICHLET:
                dirichlet.update(k)
                dirichlet.update(edge_dofs[k].tolist())
        self.dirichlet_dofs = np.array(sorted(dirichlet), dtype=int)

    # -- per-element data ------------------------------------------------------
    def signature(self, elem):
        """``(p, edge degrees, edge flips)`` identifying the local basis."""
        el = self.mesh.elements[elem]
        v = el.vertex_ids
        qs, flips = [], []
        for a, b in EDGE_VERTS:
            qs.append(self.edge_degree[(v[a], v[b]) if v[a] < v[b] else (v[b], v[a])])
            flips.append(v[a] > v[b])
        return self.element_degree[elem], tuple(qs), tuple(flips)

    def local_dofs(self, elem):
        """Global indices of the local shape functions, in local order."""
        el = self.mesh.elements[elem]
        v = el.vertex_ids
        parts = [np.array(v, dtype=int)]
        for k in el.edges():
            parts.append(self.edge_dofs[k])
        parts.append(self.bubble_dofs[elem])
        return np.concatenate(parts)

    @cached_property
    def groups(self):
        """Active elements grouped by signature: ``{sig: (elems, dof array)}``."""
        table = {}
        for e in self.elements:
            table.setdefault(self.signature(e), []).append(e)
        return {sig: (els, np.array([self.local_dofs(e) for e in els], dtype=int))
                for sig, els in table.items()}

    @cached_property
    def free_dofs(self):
        mask = np.ones(self.n_dof, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    def entity_blocks(self):
        """DOF index arrays per mesh entity (vertices, edges, element interiors)."""
        blocks = [np.array([i]) for i in range(self.mesh.n_vertices)]
        blocks += [d for _, d in sorted(self.edge_dofs.items()) if len(d)]
        blocks += [self.bubble_dofs[e] for e in self.elements if len(self.bubble_dofs[e])]
        return blocks

    def count_formula(self):
        """``#vertices + sum(q_e - 1) + sum((p - 1)(p - 2) / 2)``."""
        return (self.mesh.n_vertices
                + sum(q - 1 for q in self.edge_degree.values())
                + sum(n_interior(p) for p in self.element_degree.values()))


def build_space(mesh, degrees):
    return HpSpace(mesh, degrees)


def uniform_degrees(mesh, p):
    return {e: p for e in mesh.active_set}


def increase_degree(space, elems):
    elems = set(elems)
    bad = [e for e in elems if e not in space.element_degree]
    if bad:
        raise SpaceError(f"cannot raise degree of inactive elements {sorted(bad)}")
    degrees = dict(space.element_degree)
    for e in elems:
        degrees[e] += 1
    return HpSpace(space.mesh, degrees)


def eval_basis(space, elem, point):
    """Local shape values and reference gradients at one reference point."""
    if elem not in space.element_degree:
        raise SpaceError(f"element {elem} is not active")
    xi, eta = float(point[0]), float(point[1])
    tol = 1e-14
    if xi < -tol or eta < -tol or xi + eta > 1.0 + tol:
        raise SpaceError(f"point {point!r} lies outside the reference triangle")
    vals, grads, _ = reference_basis(*space.signature(elem), np.array([[xi, eta]]))
    return BasisEval(vals[:, 0], grads[:, 0, :])


def _edge_kernels(q, t):
    """Traces ``t (1 - t) P_k(2 t - 1)`` of the ``q - 1`` edge functions."""
    P, _, _ = legendre_table(q - 2, 2.0 * t - 1.0)
    return t * (1.0 - t) * P


def interpolate_dirichlet(space, g):
    """Values of the constrained DOFs for boundary data ``g(x, y)``.

    Vertex DOFs take ``g`` at the vertex; edge DOFs are the L2(edge)
    projection of ``g`` minus its linear interpolant onto the edge functions.
    Returned in the order of ``space.dirichlet_dofs``.
    """
    xy = space.mesh.coords
    full = np.zeros(space.n_dof)
    vertex_dofs = space.dirichlet_dofs[space.dirichlet_dofs < space.mesh.n_vertices]
    full[vertex_dofs] = g(xy[vertex_dofs, 0], xy[vertex_dofs, 1])
    for k, marker in space.mesh.boundary.items():
        if marker != DIRICHLET:
            continue
        q = space.edge_degree[k]
        if q < 2:
            continue
        rule = edge_rule(2 * q + 8)
        t = rule.points
        a, b = k
        pts = xy[a] + np.outer(t, xy[b] - xy[a])
        resid = g(pts[:, 0], pts[:, 1]) - ((1.0 - t) * full[a] + t * full[b])
        phi = _edge_kernels(q, t)
        mass = (phi * rule.weights) @ phi.T
        rhs = phi @ (rule.weights * resid)
        full[space.edge_dofs[k]] = np.linalg.solve(mass, rhs)
    return full[space.dirichlet_dofs]


def expand(space, free_values, dirichlet_values):
    """Full coefficient vector from free and constrained parts."""
    u = np.zeros(space.n_dof)
    u[space.free_dofs] = free_values
    u[space.dirichlet_dofs] = dirichlet_values
    return u
