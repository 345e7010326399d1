"""Legacy ASCII VTK output of the active mesh with per-cell degree and indicator."""
import numpy as np

VTK_TRIANGLE = 5


def vtk_text(mesh, space=None, field=None, title="hpadapt mesh"):
    elems = mesh.active_elements()
    xy = mesh.coords
    out = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(xy)} double",
    ]
    out += [f"{float(x)!r} {float(y)!r} 0.0" for x, y in xy]
    out.append(f"CELLS {len(elems)} {4 * len(elems)}")
    out += ["3 " + " ".join(str(v) for v in mesh.elements[e].vertex_ids) for e in elems]
    out.append(f"CELL_TYPES {len(elems)}")
    out += [str(VTK_TRIANGLE)] * len(elems)

    arrays = []
    if space is not None:
        arrays.append(("degree", "int", [str(space.element_degree[e]) for e in elems]))
    if field is not None:
        eta = field.eta
        arrays.append(("eta", "double", [repr(float(eta[e])) for e in elems]))
    if arrays:
        out.append(f"CELL_DATA {len(elems)}")
        for name, dtype, values in arrays:
            out.append(f"SCALARS {name} {dtype} 1")
            out.append("LOOKUP_TABLE default")
            out += values
    return "\n".join(out) + "\n"


def export_mesh(mesh, space, field, path):
    """Write ``path`` and return it."""
    with open(path, "w") as fh:
        fh.write(vtk_text(mesh, space, field))
    return path


def read_vtk_cells(text):
    """Minimal reader for files written here: points, cells and cell arrays."""
    lines = text.splitlines()
    i = 0
    points, cells, arrays = None, None, {}
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] == "POINTS":
            n = int(head[1])
            points = np.array([[float(t) for t in lines[i + 1 + k].split()] for k in range(n)])
            i += n + 1
        elif head[0] == "CELLS":
            n = int(head[1])
            cells = [[int(t) for t in lines[i + 1 + k].split()[1:]] for k in range(n)]
            i += n + 1
        elif head[0] == "SCALARS":
            name, dtype = head[1], head[2]
            n = len(cells)
            cast = int if dtype == "int" else float
            arrays[name] = [cast(lines[i + 2 + k]) for k in range(n)]
            i += n + 2
        else:
            i += 1
    return points, cells, arrays
