"""File formats: tensor specifications, field CSV + JSON sidecar, reports.

Floats are written with 17 significant digits everywhere so values
round-trip exactly.
"""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .coefficients import (
    EXAMPLE_DIAGONAL_11,
    EXAMPLE_DIAGONAL_22,
    ExampleTensorSpec,
    build_example_tensor,
    constant_offdiag_tensor,
    constant_tensor,
    diagonal_tensor,
    identity_tensor,
)
from .mesh_field import DiscreteField, build_box_mesh

TENSOR_KINDS = ("example4", "identity", "diagonal", "constant_blocks", "constant_offdiag")


class FormatError(ValueError):
    pass


def fmt(v):
    return f"{v:.17g}"


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return fmt(v)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits and a fixed key order."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    if not Path(path).exists():
        raise FormatError(f"{path} not found")
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc})") from None


# -- tensors ---------------------------------------------------------------

def tensor_from_spec(spec):
    """Build a tensor from a name or a ``{"kind": ..., ...}`` mapping."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise FormatError("tensor specification needs a 'kind'")
    kind = spec["kind"]
    if kind == "example4":
        return build_example_tensor(ExampleTensorSpec(bump_radius=float(spec.get("bump_radius", 0.25))))
    if kind == "identity":
        return identity_tensor(int(spec.get("n", 3)), int(spec.get("N", 2)))
    if kind == "diagonal":
        blocks = spec.get("blocks", [EXAMPLE_DIAGONAL_11.tolist(), EXAMPLE_DIAGONAL_22.tolist()])
        return diagonal_tensor(blocks)
    if kind == "constant_blocks":
        if "blocks" not in spec:
            raise FormatError("constant_blocks needs 'blocks' of shape (N, N, n, n)")
        try:
            return constant_tensor(spec["blocks"])
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    if kind == "constant_offdiag":
        return constant_offdiag_tensor(int(spec.get("n", 3)), int(spec.get("N", 2)),
                                       float(spec.get("value", 1.0)))
    raise FormatError(f"unknown tensor kind {kind!r}; expected one of {TENSOR_KINDS}")


def load_tensor(name_or_path):
    p = Path(name_or_path)
    if name_or_path not in TENSOR_KINDS and p.suffix == ".json":
        if not p.exists():
            raise FormatError(f"tensor file {p} not found")
        return tensor_from_spec(read_json(p))
    return tensor_from_spec(name_or_path)


# -- fields ----------------------------------------------------------------

def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def write_field(path, field, extra=None):
    """Write ``x1..xn,u1..uN`` rows plus the mesh sidecar next to ``path``."""
    path = Path(path)
    mesh = field.mesh
    header = [f"x{i + 1}" for i in range(mesh.n)] + [f"u{a + 1}" for a in range(field.N)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for x, u in zip(mesh.vertices, field.values):
            writer.writerow([fmt(v) for v in x] + [fmt(v) for v in u])
    meta = {
        "n": mesh.n,
        "N": field.N,
        "box": [mesh.lower.tolist(), mesh.upper.tolist()],
        "cells_per_axis": mesh.cells_per_axis,
    }
    if extra:
        meta.update(extra)
    write_json(sidecar_path(path), meta)


def read_field(path):
    """Read a field CSV, regenerating its mesh from the sidecar."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"field file {path} not found")
    side = sidecar_path(path)
    if not side.exists():
        raise FormatError(f"mesh sidecar {side} not found")
    meta = read_json(side)
    mesh = build_box_mesh(int(meta["n"]), tuple(meta["box"]), int(meta["cells_per_axis"]))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = mesh.n
    if data.shape[0] != mesh.n_vertices or data.shape[1] < n + 1:
        raise FormatError(f"{path}: expected {mesh.n_vertices} rows with >= {n + 1} columns")
    if not np.allclose(data[:, :n], mesh.vertices, rtol=0, atol=1e-12):
        raise FormatError(f"{path}: vertex coordinates do not match the regenerated mesh")
    return DiscreteField(mesh, data[:, n:])


def write_rows(path, header, rows, comments=()):
    with Path(path).open("w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(float(v))
    return str(v)
