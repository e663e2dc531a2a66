"""Readers and writers for clouds (XYZ, ASCII PLY), meshes (ASCII OFF),
and the flat key=value run configuration."""

import numpy as np

from .errors import MalformedFileError, UnsupportedFormatError
from .metrics import TriangleMesh
from .validation import check_points

XYZ = "xyz"
PLY = "ply"

_FLOAT_FORMAT = "%.9g"  # nine significant digits


def read_cloud(path):
    """Read a point cloud; the format is chosen by file extension.

    ``.xyz``: one point per line, exactly three whitespace-separated
    reals. ``.ply``: ASCII PLY with float x, y, z vertex properties;
    other properties and elements are ignored.
    """
    path = str(path)
    if path.lower().endswith(".xyz"):
        return _read_xyz(path)
    if path.lower().endswith(".ply"):
        return _read_ply(path)
    raise UnsupportedFormatError(f"unsupported cloud format: {path} (use .xyz or .ply)")


def write_cloud(points, path, fmt=None):
    """Write a cloud with nine significant digits per coordinate.

    Row order is preserved; a read of the written file reproduces each
    coordinate within 1e-8 for unit-frame clouds.
    """
    points = check_points(points)
    path = str(path)
    if fmt is None:
        if path.lower().endswith(".xyz"):
            fmt = XYZ
        elif path.lower().endswith(".ply"):
            fmt = PLY
        else:
            raise UnsupportedFormatError(f"cannot infer format for {path}")
    if fmt == XYZ:
        body = "\n".join(" ".join(_FLOAT_FORMAT % v for v in row) for row in points)
        _write_text(path, body + "\n")
    elif fmt == PLY:
        header = (
            "ply\nformat ascii 1.0\n"
            f"element vertex {points.shape[0]}\n"
            "property float x\nproperty float y\nproperty float z\n"
            "end_header\n"
        )
        body = "\n".join(" ".join(_FLOAT_FORMAT % v for v in row) for row in points)
        _write_text(path, header + body + "\n")
    else:
        raise UnsupportedFormatError(f"unsupported cloud format: {fmt!r}")


def _write_text(path, text):
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write(text)


def _read_xyz(path):
    rows = []
    with open(path, "r", encoding="ascii") as handle:
        for lineno, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise MalformedFileError(
                    f"expected 3 coordinates, found {len(fields)}", path=path, line=lineno
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise MalformedFileError("non-numeric coordinate", path=path, line=lineno) from None
    if not rows:
        raise MalformedFileError("file contains no points", path=path)
    return np.asarray(rows, dtype=np.float64)


def _read_ply(path):
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MalformedFileError("missing 'ply' magic", path=path, line=1)

    vertex_count = None
    properties = []           # property names of the vertex element, in order
    in_vertex_element = False
    header_end = None
    saw_format = False
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if not fields:
            continue
        keyword = fields[0]
        if keyword == "format":
            if fields[1:3] != ["ascii", "1.0"]:
                raise MalformedFileError(
                    "only 'format ascii 1.0' is supported", path=path, line=lineno
                )
            saw_format = True
        elif keyword == "element":
            in_vertex_element = fields[1] == "vertex"
            if in_vertex_element:
                try:
                    vertex_count = int(fields[2])
                except (IndexError, ValueError):
                    raise MalformedFileError("bad vertex element", path=path, line=lineno) from None
        elif keyword == "property" and in_vertex_element:
            properties.append(fields[-1])
        elif keyword == "end_header":
            header_end = lineno
            break
    if not saw_format or header_end is None or vertex_count is None:
        raise MalformedFileError("incomplete PLY header", path=path)
    missing = [axis for axis in ("x", "y", "z") if axis not in properties]
    if missing:
        raise MalformedFileError(f"vertex element lacks properties {missing}", path=path)
    columns = [properties.index(axis) for axis in ("x", "y", "z")]

    rows = []
    data_lines = lines[header_end:]
    for offset in range(vertex_count):
        lineno = header_end + 1 + offset
        if offset >= len(data_lines):
            raise MalformedFileError("fewer vertex rows than declared", path=path, line=lineno)
        fields = data_lines[offset].split()
        if len(fields) < len(properties):
            raise MalformedFileError(
                f"expected {len(properties)} vertex fields, found {len(fields)}",
                path=path,
                line=lineno,
            )
        try:
            rows.append([float(fields[c]) for c in columns])
        except ValueError:
            raise MalformedFileError("non-numeric coordinate", path=path, line=lineno) from None
    if not rows:
        raise MalformedFileError("PLY declares zero vertices", path=path)
    return np.asarray(rows, dtype=np.float64)


def read_off_mesh(path):
    """Read a triangle mesh from an ASCII OFF file."""
    path = str(path)
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        raw = [
            (lineno, line.strip())
            for lineno, line in enumerate(handle, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
    if not raw or raw[0][1] != "OFF":
        raise MalformedFileError("missing 'OFF' magic", path=path, line=1)
    if len(raw) < 2:
        raise MalformedFileError("missing OFF counts line", path=path)
    counts_line, counts_text = raw[1]
    try:
        n_vertices, n_faces = [int(v) for v in counts_text.split()[:2]]
    except ValueError:
        raise MalformedFileError("bad OFF counts line", path=path, line=counts_line) from None
    body = raw[2:]
    if len(body) < n_vertices + n_faces:
        raise MalformedFileError(
            f"expected {n_vertices} vertices and {n_faces} faces", path=path
        )
    vertices = []
    for lineno, text in body[:n_vertices]:
        fields = text.split()
        if len(fields) != 3:
            raise MalformedFileError("vertex line must hold 3 coordinates", path=path, line=lineno)
        try:
            vertices.append([float(f) for f in fields])
        except ValueError:
            raise MalformedFileError("non-numeric vertex coordinate", path=path, line=lineno) from None
    faces = []
    for lineno, text in body[n_vertices : n_vertices + n_faces]:
        fields = text.split()
        try:
            arity = int(fields[0])
            indices = [int(f) for f in fields[1 : 1 + arity]]
        except (ValueError, IndexError):
            raise MalformedFileError("bad face line", path=path, line=lineno) from None
        if arity != 3 or len(indices) != 3:
            raise MalformedFileError("only triangular faces are supported", path=path, line=lineno)
        faces.append(indices)
    try:
        return TriangleMesh(vertices=np.asarray(vertices), triangles=np.asarray(faces))
    except ValueError as exc:
        raise MalformedFileError(str(exc), path=path) from exc


def write_off_mesh(mesh, path):
    """Write a triangle mesh as ASCII OFF."""
    lines = ["OFF", f"{mesh.vertices.shape[0]} {mesh.triangles.shape[0]} 0"]
    lines += [" ".join(_FLOAT_FORMAT % v for v in row) for row in mesh.vertices]
    lines += [f"3 {t[0]} {t[1]} {t[2]}" for t in mesh.triangles]
    _write_text(str(path), "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

def _sigma_scales(value):
    return tuple(float(part) for part in value.split(",") if part.strip())


_CONFIG_SCHEMA = {
    # training
    "epochs": int,
    "difficulty_threshold": float,
    "learning_rate": float,
    "batch_size": int,
    "queries_per_patch": int,
    "query_sigma": float,
    "query_sigma_scales": _sigma_scales,
    "seed": int,
    "feature_dim": int,
    "hidden": int,
    "sampling_steps": int,
    "curvature_k": int,
    "normals_k": int,
    # projection
    "step_size": float,
    "iterations": int,
    "seed_sigma": float,
    # synthetic dataset
    "shapes": str,
    "patches_per_shape": int,
    "sparse_n": int,
    "rate": int,
}

DEFAULT_SHAPES = "sphere:r=1;torus:R=1,r=0.3;box:hx=0.8,hy=0.8,hz=0.8"

_CONFIG_DEFAULTS = {
    "shapes": DEFAULT_SHAPES,
    "patches_per_shape": 8,
    "sparse_n": 256,
    "rate": 4,
}


def parse_config(path):
    """Parse a flat ``key = value`` config file into a dict.

    Blank lines and ``#`` comments are allowed. Unknown keys, repeated
    keys, and unparseable values are rejected with the key and line
    number. ``seed`` is required; everything else has a default.
    """
    values = {}
    with open(path, "r", encoding="ascii") as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, eq, value = text.partition("=")
            key = key.strip()
            value = value.strip()
            if not eq or not key or not value:
                raise MalformedFileError(
                    f"expected 'key = value', got {text!r}", path=path, line=lineno
                )
            if key not in _CONFIG_SCHEMA:
                raise MalformedFileError(f"unknown key {key!r}", path=path, line=lineno)
            if key in values:
                raise MalformedFileError(f"duplicate key {key!r}", path=path, line=lineno)
            try:
                values[key] = _CONFIG_SCHEMA[key](value)
            except ValueError:
                raise MalformedFileError(
                    f"bad value {value!r} for key {key!r}", path=path, line=lineno
                ) from None
    if "seed" not in values:
        raise MalformedFileError("config must set 'seed' explicitly", path=path)
    merged = dict(_CONFIG_DEFAULTS)
    merged.update(values)
    return merged


def split_config(values):
    """Split a parsed config dict into (TrainConfig, ProjectionParams, dataset).

    ``dataset`` holds the synthetic-dataset keys (shapes, patches_per_shape,
    sparse_n, rate).
    """
    from .training import TrainConfig
    from .upsampling import ProjectionParams

    dataset = {k: values[k] for k in ("shapes", "patches_per_shape", "sparse_n", "rate")}
    projection = ProjectionParams(
        step_size=values.get("step_size", 0.02),
        iterations=values.get("iterations", 10),
        seed_sigma=values.get("seed_sigma", 0.02),
    )
    train_kwargs = {
        k: v for k, v in values.items() if k in TrainConfig.__dataclass_fields__
    }
    return TrainConfig(**train_kwargs).validate(), projection, dataset
