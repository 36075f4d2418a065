"""Legacy-ASCII VTK unstructured-grid export/import for tagged meshes.

Volume elements are written as hexahedra (type 12) or wedges (type 13);
surface tag membership travels as named FIELD arrays in CELL_DATA, one
0/1 array per tag, so the file round-trips without side channels and stays
readable by standard VTK tools.
"""

from __future__ import annotations

import numpy as np

from .errors import IoFailure
from .geometry import Mesh

_HEADER = "# vtk DataFile Version 3.0"
VTK_HEX = 12
VTK_WEDGE = 13
VTK_QUAD = 9


def export_mesh(mesh: Mesh, path) -> None:
    """Write the mesh with region and surface tags as cell data."""
    if mesh.n_elements == 0 or mesh.n_nodes == 0:
        raise IoFailure("refusing to export an empty mesh")

    tag_names = sorted(mesh.surface_tags)
    face_arrays = [mesh.surface_tags[t] for t in tag_names]
    n_faces = sum(len(f) for f in face_arrays)
    n_cells = mesh.n_elements + n_faces

    lines = [_HEADER, f"hcmsim mesh h={mesh.characteristic_size!r}", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    for p in mesh.node_coords:
        lines.append(f"{p[0]!r} {p[1]!r} {p[2]!r}")

    n_conn = mesh.n_elements * 9 + n_faces * 5
    lines.append(f"CELLS {n_cells} {n_conn}")
    for el in mesh.elements:
        lines.append("8 " + " ".join(str(int(n)) for n in el))
    for faces in face_arrays:
        for quad in faces:
            lines.append("4 " + " ".join(str(int(n)) for n in quad))
    lines.append(f"CELL_TYPES {n_cells}")
    lines.extend([str(VTK_HEX)] * mesh.n_elements)
    lines.extend([str(VTK_QUAD)] * n_faces)

    lines.append(f"CELL_DATA {n_cells}")
    lines.append("SCALARS region_tag int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(r)) for r in mesh.region_tag)
    lines.extend(["-1"] * n_faces)

    if tag_names:
        lines.append(f"FIELD surface_tags {len(tag_names)}")
        offset = mesh.n_elements
        for name, faces in zip(tag_names, face_arrays):
            member = np.zeros(n_cells, dtype=int)
            member[offset:offset + len(faces)] = 1
            offset += len(faces)
            lines.append(f"tag_{name} 1 {n_cells} int")
            lines.extend(_chunk_ints(member))

    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as err:
        raise IoFailure(f"cannot write {path}: {err}") from None


def _chunk_ints(values, per_line: int = 20):
    vals = [str(int(v)) for v in values]
    return [" ".join(vals[i:i + per_line]) for i in range(0, len(vals), per_line)]


class _Tokens:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def line(self) -> str:
        while self.pos < len(self.lines):
            ln = self.lines[self.pos].strip()
            self.pos += 1
            if ln:
                return ln
        raise IoFailure("unexpected end of VTK file")

    def numbers(self, count: int, dtype=float) -> np.ndarray:
        out = []
        while len(out) < count:
            out.extend(self.lines[self.pos].split())
            self.pos += 1
        if len(out) != count:
            # trailing values spill onto the same physical line block
            pass
        return np.asarray(out[:count], dtype=dtype)


def import_mesh(path) -> Mesh:
    """Read a mesh previously written by :func:`export_mesh`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise IoFailure(f"cannot read {path}: {err}") from None

    tk = _Tokens(text)
    if not tk.line().startswith("# vtk DataFile"):
        raise IoFailure("not a legacy VTK file")
    title = tk.line()
    h = 0.0
    if "h=" in title:
        h = float(title.split("h=")[1].split()[0])
    if tk.line() != "ASCII":
        raise IoFailure("only ASCII VTK files are supported")
    if tk.line() != "DATASET UNSTRUCTURED_GRID":
        raise IoFailure("expected DATASET UNSTRUCTURED_GRID")

    head = tk.line().split()
    if head[0] != "POINTS":
        raise IoFailure("expected POINTS")
    n_pts = int(head[1])
    coords = tk.numbers(3 * n_pts).reshape(n_pts, 3)

    head = tk.line().split()
    if head[0] != "CELLS":
        raise IoFailure("expected CELLS")
    n_cells, n_conn = int(head[1]), int(head[2])
    raw = tk.numbers(n_conn, dtype=np.int64)
    cells = []
    i = 0
    for _ in range(n_cells):
        cnt = int(raw[i])
        cells.append(raw[i + 1:i + 1 + cnt])
        i += cnt + 1

    head = tk.line().split()
    if head[0] != "CELL_TYPES":
        raise IoFailure("expected CELL_TYPES")
    ctypes = tk.numbers(n_cells, dtype=int)

    vol_idx = [i for i, t in enumerate(ctypes) if t in (VTK_HEX, VTK_WEDGE)]
    quad_idx = [i for i, t in enumerate(ctypes) if t == VTK_QUAD]
    if len(vol_idx) + len(quad_idx) != n_cells:
        raise IoFailure("unsupported cell types present")
    elements = np.array([cells[i] for i in vol_idx], dtype=np.int64)

    region = np.zeros(len(vol_idx), dtype=np.int8)
    surface_tags: dict[str, np.ndarray] = {}
    while tk.pos < len(tk.lines):
        ln = tk.lines[tk.pos].strip()
        tk.pos += 1
        if not ln:
            continue
        parts = ln.split()
        if parts[0] == "CELL_DATA":
            continue
        if parts[0] == "SCALARS" and parts[1] == "region_tag":
            tk.line()  # LOOKUP_TABLE
            vals = tk.numbers(n_cells, dtype=int)
            region = vals[vol_idx].astype(np.int8)
        elif parts[0] == "FIELD":
            n_arrays = int(parts[2])
            for _ in range(n_arrays):
                name_line = tk.line().split()
                name = name_line[0]
                n_tuples = int(name_line[2])
                member = tk.numbers(n_tuples, dtype=int)
                if name.startswith("tag_"):
                    faces = np.array([cells[i] for i in quad_idx if member[i]],
                                     dtype=np.int64)
                    surface_tags[name[4:]] = faces.reshape(-1, 4)
        # other attributes are ignored

    coords = np.ascontiguousarray(coords)
    return Mesh(node_coords=coords, elements=elements, region_tag=region,
                surface_tags=surface_tags, characteristic_size=h, meta=None)


def export_point_vectors(mesh: Mesh, vectors: np.ndarray, name: str, path) -> None:
    """Write the mesh plus one point vector field (e.g. a mode shape)."""
    if vectors.shape != (mesh.n_nodes, 3):
        raise IoFailure("vector field shape must be (n_nodes, 3)")
    export_mesh(mesh, path)
    with open(path, "a") as fh:
        fh.write(f"POINT_DATA {mesh.n_nodes}\n")
        fh.write(f"VECTORS {name} double\n")
        for v in vectors:
            fh.write(f"{v[0]!r} {v[1]!r} {v[2]!r}\n")
