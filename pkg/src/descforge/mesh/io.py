"""OBJ and PLY readers/writers.

Supported surface: ASCII OBJ (``v``/``f`` records, 1-based indices), PLY in
ASCII or binary little-endian form with float32/float64 ``x,y,z`` vertex
properties and a ``vertex_indices``/``vertex_index`` face list. Binary PLY is
written with float64 coordinates so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..errors import IndexOutOfRange, ParseError
from .core import TriangleMesh

_PLY_SCALAR = {
    "char": "b", "int8": "b",
    "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h",
    "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i",
    "uint": "I", "uint32": "I",
    "float": "f", "float32": "f",
    "double": "d", "float64": "d",
}


def load_mesh(path: Union[str, Path], format: Optional[str] = None) -> TriangleMesh:
    """Load a triangle mesh; the format defaults to the file extension."""
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format == "obj":
        return _load_obj(path)
    if format == "ply":
        return _load_ply(path)
    raise ParseError(f"unsupported mesh format {format!r}")


def save_mesh(mesh: TriangleMesh, path: Union[str, Path], format: Optional[str] = None,
              binary: bool = True) -> None:
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format == "obj":
        _save_obj(mesh, path)
    elif format == "ply":
        _save_ply(mesh, path, binary=binary)
    else:
        raise ParseError(f"unsupported mesh format {format!r}")


# -- OBJ ---------------------------------------------------------------------

def _load_obj(path: Path) -> TriangleMesh:
    vertices: list = []
    faces: list = []
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not an ASCII OBJ file") from exc
    for ln, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError(f"{path}:{ln}: vertex needs 3 coordinates")
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: bad vertex coordinate") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError(f"{path}:{ln}: face needs at least 3 indices")
            idx = []
            for tok in parts[1:]:
                head = tok.split("/")[0]
                try:
                    i = int(head)
                except ValueError as exc:
                    raise ParseError(f"{path}:{ln}: bad face index {tok!r}") from exc
                if i < 0:
                    i = len(vertices) + 1 + i  # OBJ negative indices are relative
                if i < 1:
                    raise ParseError(f"{path}:{ln}: face index {tok!r} out of range")
                idx.append(i - 1)
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                faces.append([idx[0], idx[k], idx[k + 1]])
        # other records (vn, vt, o, g, s, usemtl, ...) are ignored
    if not vertices:
        raise ParseError(f"{path}: no vertices")
    faces_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces_arr.size and faces_arr.max() >= len(vertices):
        raise IndexOutOfRange(
            f"{path}: face references vertex {int(faces_arr.max()) + 1} "
            f"but only {len(vertices)} vertices exist"
        )
    return TriangleMesh(np.asarray(vertices), faces_arr)


def _save_obj(mesh: TriangleMesh, path: Path) -> None:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    path.write_text("\n".join(lines) + "\n")


# -- PLY ---------------------------------------------------------------------

def _load_ply(path: Path) -> TriangleMesh:
    raw = path.read_bytes()
    if not raw.startswith(b"ply"):
        raise ParseError(f"{path}: missing 'ply' magic")
    end = raw.find(b"end_header\n")
    if end < 0:
        raise ParseError(f"{path}: no end_header")
    header = raw[: end + len(b"end_header\n")]
    body = raw[len(header):]

    fmt = None
    elements: list = []  # (name, count, [(prop_name, kind, spec)])
    for line in header.decode("ascii", errors="replace").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before any element")
            if parts[1] == "list":
                count_t, item_t, name = parts[2], parts[3], parts[4]
                elements[-1][2].append((name, "list", (count_t, item_t)))
            else:
                elements[-1][2].append((parts[2], "scalar", parts[1]))
    if fmt == "binary_big_endian":
        raise ParseError(f"{path}: big-endian PLY is not supported")
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"{path}: unknown format {fmt!r}")

    vertices = None
    faces: list = []
    if fmt == "ascii":
        tokens = body.decode("ascii").split()
        pos = 0
        for name, count, props in elements:
            if name == "vertex":
                cols = {p[0]: k for k, (p) in enumerate(props)}
                if not {"x", "y", "z"} <= set(cols):
                    raise ParseError(f"{path}: vertex element lacks x/y/z")
                width = len(props)
                data = tokens[pos: pos + count * width]
                pos += count * width
                arr = np.asarray(data, dtype=np.float64).reshape(count, width)
                vertices = arr[:, [cols["x"], cols["y"], cols["z"]]]
            elif name == "face":
                for _ in range(count):
                    n = int(tokens[pos]); pos += 1
                    idx = [int(t) for t in tokens[pos: pos + n]]; pos += n
                    for k in range(1, n - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
            else:
                for _ in range(count):  # skip unknown fixed-width elements
                    pos += len(props)
    else:
        off = 0
        for name, count, props in elements:
            if name == "vertex":
                fields = []
                for pname, kind, sp in props:
                    if kind != "scalar":
                        raise ParseError(f"{path}: list property in vertex element")
                    fields.append((pname, "<" + _PLY_SCALAR[sp]))
                if not {"x", "y", "z"} <= {pname for pname, _ in fields}:
                    raise ParseError(f"{path}: vertex element lacks x/y/z")
                dt = np.dtype(fields)
                arr = np.frombuffer(body, dtype=dt, count=count, offset=off)
                off += dt.itemsize * count
                vertices = np.stack(
                    [arr["x"], arr["y"], arr["z"]], axis=1
                ).astype(np.float64)
            elif name == "face":
                lists = [p for p in props if p[1] == "list"]
                if len(props) != 1 or not lists:
                    raise ParseError(f"{path}: face element must be a single index list")
                count_c = _PLY_SCALAR[props[0][2][0]]
                item_c = _PLY_SCALAR[props[0][2][1]]
                item_sz = struct.calcsize(item_c)
                for _ in range(count):
                    (n,) = struct.unpack_from("<" + count_c, body, off)
                    off += struct.calcsize(count_c)
                    idx = struct.unpack_from("<" + item_c * n, body, off)
                    off += item_sz * n
                    for k in range(1, n - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
            else:
                raise ParseError(f"{path}: cannot skip unknown binary element {name!r}")
    if vertices is None:
        raise ParseError(f"{path}: no vertex element")
    faces_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces_arr.size and faces_arr.max() >= len(vertices):
        raise IndexOutOfRange(
            f"{path}: face references vertex {int(faces_arr.max())} "
            f"but only {len(vertices)} vertices exist"
        )
    return TriangleMesh(vertices, faces_arr)


def _save_ply(mesh: TriangleMesh, path: Path, binary: bool = True) -> None:
    n, f = mesh.n_vertices, mesh.n_faces
    fmt = "binary_little_endian" if binary else "ascii"
    coord_type = "double" if binary else "float"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {n}\n"
        f"property {coord_type} x\n"
        f"property {coord_type} y\n"
        f"property {coord_type} z\n"
        f"element face {f}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(mesh.vertices.astype("<f8").tobytes())
            face_rec = np.empty(f, dtype=np.dtype([("n", "u1"), ("idx", "<i4", 3)]))
            face_rec["n"] = 3
            face_rec["idx"] = mesh.faces
            fh.write(face_rec.tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(header)
            for v in mesh.vertices:
                fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
            for face in mesh.faces:
                fh.write(f"3 {face[0]} {face[1]} {face[2]}\n")
