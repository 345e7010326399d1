"""Conforming triangular meshes refined by newest-vertex bisection.

Each element stores its vertices counter-clockwise and the local index of its
refinement edge (the edge opposite local vertex ``refinement_edge``).  Bisection
inserts the midpoint of the refinement edge; the midpoint becomes the newest
vertex of both children and each child's refinement edge is the edge opposite
it.  Conformity is restored by propagating edge marks until every element with
a marked edge also has its refinement edge marked.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .shapes import EDGE_VERTS

DIRICHLET = 1


class MeshError(ValueError):
    """Invalid mesh input or refinement request."""


def edge_key(a, b):
    return (a, b) if a < b else (b, a)


@dataclass
class Vertex:
    x: float
    y: float


@dataclass
class Element:
    vertex_ids: tuple
    refinement_edge: int
    parent: int | None = None
    children: tuple | None = None
    generation: int = 0
    active: bool = True

    def edges(self):
        """Sorted vertex pairs of the local edges 0, 1, 2."""
        v = self.vertex_ids
        return [edge_key(v[a], v[b]) for a, b in EDGE_VERTS]

    @property
    def refinement_key(self):
        return self.edges()[self.refinement_edge]


@dataclass
class RefinementReport:
    """Outcome of a :func:`bisect` call.

    ``parent`` maps every newly created element to the element it was split
    from; ``ancestor`` maps every new *active* element to the element that was
    active before the call.
    """

    created: list = field(default_factory=list)
    parent: dict = field(default_factory=dict)
    ancestor: dict = field(default_factory=dict)

    @property
    def bisected(self):
        """Previously active elements that were refined."""
        return set(self.ancestor.values())


class Mesh:
    def __init__(self, vertices, elements, boundary_edges):
        self.vertices = [Vertex(float(x), float(y)) for x, y in vertices]
        self.elements = []
        self.boundary = {}
        self.active_set = set()
        self._midpoints = {}
        self._coords = None
        for (a, b), marker in boundary_edges:
            self.boundary[edge_key(a, b)] = int(marker)
        for tri in elements:
            self._add_initial(tri)
        self._check_initial()

    # -- construction -------------------------------------------------------
    def _add_initial(self, tri):
        v = [int(i) for i in tri]
        if len(set(v)) != 3:
            raise MeshError(f"triangle {tuple(v)} has repeated vertices")
        for i in v:
            if not 0 <= i < len(self.vertices):
                raise MeshError(f"vertex index {i} out of range")
        area = self._signed_area(v)
        if area == 0.0:
            raise MeshError(f"triangle {tuple(v)} has zero area")
        if area < 0.0:
            v = [v[0], v[2], v[1]]
        xy = self.coords[v]
        lengths = [np.hypot(*(xy[b] - xy[a])) for a, b in EDGE_VERTS]
        longest = max(lengths)
        tol = 1e-12 * longest
        # tie-break: smallest opposite (global) vertex index
        ref = min((i for i in range(3) if lengths[i] >= longest - tol), key=lambda i: v[i])
        self.elements.append(Element(tuple(v), ref))
        self.active_set.add(len(self.elements) - 1)

    def _check_initial(self):
        if not self.elements:
            raise MeshError("mesh has no triangles")
        count = {}
        for e in self.active_elements():
            for k in self.elements[e].edges():
                count[k] = count.get(k, 0) + 1
        for k, n in count.items():
            if n > 2:
                raise MeshError(f"edge {k} shared by {n} triangles")
        for k in self.boundary:
            if count.get(k, 0) != 1:
                raise MeshError(f"boundary edge {k} is not a mesh boundary edge")
        xy = self.coords
        for k, n in count.items():
            if n != 1:
                continue
            a, b = xy[k[0]], xy[k[1]]
            ab = b - a
            rel = xy - a
            cross = ab[0] * rel[:, 1] - ab[1] * rel[:, 0]
            s = rel @ ab / (ab @ ab)
            inside = (np.abs(cross) <= 1e-12 * (ab @ ab)) & (s > 1e-12) & (s < 1 - 1e-12)
            if inside.any():
                raise MeshError(f"hanging vertex {int(np.flatnonzero(inside)[0])} on edge {k}")
            self.boundary.setdefault(k, 0)
        if not self.is_conforming():
            raise MeshError("mesh is not conforming")

    @property
    def coords(self):
        """Vertex coordinates as an ``(nv, 2)`` array."""
        if self._coords is None or len(self._coords) != len(self.vertices):
            self._coords = np.array([[v.x, v.y] for v in self.vertices], dtype=float)
        return self._coords

    def _signed_area(self, v):
        xy = self.coords[list(v)]
        d1 = xy[1] - xy[0]
        d2 = xy[2] - xy[0]
        return 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])

    # -- queries -----------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    def active_elements(self):
        """Active element ids in ascending order."""
        return sorted(self.active_set)

    def area(self, elem):
        return self._signed_area(self.elements[elem].vertex_ids)

    def element_coords(self, elem):
        return self.coords[list(self.elements[elem].vertex_ids)]

    def element_diameter(self, elem):
        xy = self.element_coords(elem)
        return max(math.dist(xy[a], xy[b]) for a, b in EDGE_VERTS)

    def edge_diameter(self, edge):
        a, b = edge
        return math.dist(self.coords[a], self.coords[b])

    def edge_elements(self):
        """Map sorted vertex pair -> list of (active element id, local edge)."""
        table = {}
        for e in self.active_elements():
            for j, k in enumerate(self.elements[e].edges()):
                table.setdefault(k, []).append((e, j))
        return table

    def is_conforming(self):
        """Every active edge has two owners, or one owner and lies on the boundary."""
        for k, owners in self.edge_elements().items():
            if len(owners) == 2:
                continue
            if len(owners) != 1 or k not in self.boundary:
                return False
        return True

    def boundary_marker(self, edge):
        return self.boundary.get(edge_key(*edge), 0)

    # -- refinement --------------------------------------------------------
    def _midpoint(self, key):
        m = self._midpoints.get(key)
        if m is None:
            a, b = key
            va, vb = self.vertices[a], self.vertices[b]
            self.vertices.append(Vertex(0.5 * (va.x + vb.x), 0.5 * (va.y + vb.y)))
            m = len(self.vertices) - 1
            self._midpoints[key] = m
            marker = self.boundary.pop(key, None)
            if marker is not None:
                self.boundary[edge_key(a, m)] = marker
                self.boundary[edge_key(m, b)] = marker
        return m

    def _split(self, elem):
        el = self.elements[elem]
        i = el.refinement_edge
        v = el.vertex_ids
        peak, left, right = v[i], v[(i + 1) % 3], v[(i + 2) % 3]
        m = self._midpoint(edge_key(left, right))
        first = Element((peak, left, m), 2, parent=elem, generation=el.generation + 1)
        second = Element((peak, m, right), 1, parent=elem, generation=el.generation + 1)
        ids = []
        for child in (first, second):
            self.elements.append(child)
            ids.append(len(self.elements) - 1)
        el.children = tuple(ids)
        el.active = False
        self.active_set.discard(elem)
        self.active_set.update(ids)
        return ids

    def bisect(self, marked):
        """Bisect ``marked`` elements and close the mesh; see module docstring."""
        marked = set(marked)
        bad = [e for e in marked if e not in self.active_set]
        if bad:
            raise MeshError(f"cannot bisect inactive elements {sorted(bad)}")
        report = RefinementReport()
        if not marked:
            return report

        owners = {}
        for e in self.active_set:
            for k in self.elements[e].edges():
                owners.setdefault(k, []).append(e)

        edge_marks = set()
        stack = sorted(marked)
        while stack:
            e = stack.pop()
            key = self.elements[e].refinement_key
            if key in edge_marks:
                continue
            edge_marks.add(key)
            for nb in owners[key]:
                if self.elements[nb].refinement_key not in edge_marks:
                    stack.append(nb)

        to_split = sorted(e for e in self.active_set
                          if any(k in edge_marks for k in self.elements[e].edges()))
        for e in to_split:
            for child in self._split(e):
                report.created.append(child)
                report.parent[child] = e
                c = self.elements[child]
                if c.refinement_key in edge_marks:
                    for grandchild in self._split(child):
                        report.created.append(grandchild)
                        report.parent[grandchild] = child
                        report.ancestor[grandchild] = e
                else:
                    report.ancestor[child] = e
        return report

    def uniform_refine(self):
        return self.bisect(self.active_set)

    def copy(self):
        import copy
        return copy.deepcopy(self)


def element_diameter(mesh, elem):
    return mesh.element_diameter(elem)


def edge_diameter(mesh, edge):
    return mesh.edge_diameter(edge)


def bisect(mesh, marked):
    return mesh.bisect(marked)


def uniform_refine(mesh):
    return mesh.uniform_refine()


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def load_mesh(text):
    """Parse the ASCII mesh format.

    Line 1 holds ``nv nt nb``; then ``nv`` lines ``x y``, ``nt`` lines
    ``v0 v1 v2`` and ``nb`` lines ``v0 v1 marker``.  ``#`` starts a comment;
    indices are 0-based.
    """
    lines = list(_data_lines(text))
    try:
        nv, nt, nb = (int(t) for t in lines[0].split())
        body = lines[1:]
        if len(body) < nv + nt + nb:
            raise MeshError("mesh document is truncated")
        verts = [tuple(float(t) for t in body[i].split()) for i in range(nv)]
        tris = [tuple(int(t) for t in body[nv + i].split()) for i in range(nt)]
        bnd = []
        for i in range(nb):
            a, b, marker = (int(t) for t in body[nv + nt + i].split())
            bnd.append(((a, b), marker))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"cannot parse mesh document: {exc}") from exc
    if any(len(v) != 2 for v in verts) or any(len(t) != 3 for t in tris):
        raise MeshError("malformed vertex or triangle line")
    if any(not all(math.isfinite(c) for c in v) for v in verts):
        raise MeshError("non-finite vertex coordinate")
    if nt < 1:
        raise MeshError("mesh has no triangles")
    return Mesh(verts, tris, bnd)


def dump_mesh(mesh):
    """Write the active mesh in the format read by :func:`load_mesh`."""
    act = mesh.active_elements()
    lines = [f"{mesh.n_vertices} {len(act)} {len(mesh.boundary)}"]
    lines += [f"{v.x!r} {v.y!r}" for v in mesh.vertices]
    lines += [" ".join(str(i) for i in mesh.elements[e].vertex_ids) for e in act]
    lines += [f"{a} {b} {m}" for (a, b), m in sorted(mesh.boundary.items())]
    return "\n".join(lines) + "\n"
