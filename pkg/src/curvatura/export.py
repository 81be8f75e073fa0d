"""Deterministic PLY / OBJ / CSV / JSON writers.

Every float is written with 17 significant digits, so files round-trip
exactly and identical inputs give byte-identical output.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameter
from .stereo import StereoMap, SurfaceMesh, stereo_project

FORMATS = ("ply", "obj", "csv", "json")
CSV_HEADER = "x,y,u,v,sx,sy,sz,foliation,closed"
JSON_SCHEMA = "curvatura.report/1"


@dataclass(frozen=True)
class Polyline:
    """Anything with vertices in R^4; traces and separatrix loops both fit."""

    vertices: np.ndarray
    closed: bool
    foliation: str = ""


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _as_polylines(traces) -> list[Polyline]:
    out = []
    for t in traces:
        out.append(t if isinstance(t, Polyline) else Polyline(np.asarray(t.vertices), bool(t.closed), str(t.foliation)))
    return out


def _split(items):
    """Separate an optional mesh from a list of polylines."""
    if isinstance(items, SurfaceMesh):
        return items, []
    if hasattr(items, "vertices") and hasattr(items, "closed"):
        return None, _as_polylines([items])
    mesh, lines = None, []
    for it in items:
        if isinstance(it, SurfaceMesh):
            if mesh is not None:
                raise InvalidParameter("at most one mesh per file")
            mesh = it
        else:
            lines.extend(_as_polylines([it]))
    return mesh, lines


def _polyline_edges(lines, offset: int) -> list[tuple[int, int]]:
    edges = []
    for ln in lines:
        k = len(ln.vertices)
        idx = np.arange(offset, offset + k)
        edges.extend(zip(idx[:-1].tolist(), idx[1:].tolist()))
        if ln.closed and k > 2:
            edges.append((int(idx[-1]), int(idx[0])))
        offset += k
    return edges


def _project(stereo: StereoMap, pts) -> np.ndarray:
    pts = np.asarray(pts, float).reshape(-1, 4)
    return stereo_project(stereo, pts) if len(pts) else np.zeros((0, 3))


def ply_text(items, stereo: StereoMap) -> str:
    mesh, lines = _split(items)
    blocks = ([mesh.vertices] if mesh is not None else []) + [ln.vertices for ln in lines]
    V = _project(stereo, np.concatenate(blocks) if blocks else np.zeros((0, 4)))
    n_mesh = 0 if mesh is None else len(mesh.vertices)
    faces = np.zeros((0, 3), int) if mesh is None else mesh.faces
    edges = _polyline_edges(lines, n_mesh)
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(V)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        f"element edge {len(edges)}",
        "property int vertex1",
        "property int vertex2",
        "end_header",
    ]
    out += [" ".join(fmt(c) for c in v) for v in V]
    out += [f"3 {a} {b} {c}" for a, b, c in faces]
    out += [f"{a} {b}" for a, b in edges]
    return "\n".join(out) + "\n"


def obj_text(items, stereo: StereoMap) -> str:
    mesh, lines = _split(items)
    out = []
    offset = 1
    if mesh is not None:
        out += ["v " + " ".join(fmt(c) for c in v) for v in _project(stereo, mesh.vertices)]
        out += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
        offset += len(mesh.vertices)
    for ln in lines:
        k = len(ln.vertices)
        out += ["v " + " ".join(fmt(c) for c in v) for v in _project(stereo, ln.vertices)]
        idx = list(range(offset, offset + k))
        if ln.closed and k > 2:
            idx.append(offset)
        if k > 1:
            out.append("l " + " ".join(map(str, idx)))
        offset += k
    return "\n".join(out) + "\n" if out else ""


def csv_text(items, stereo: StereoMap) -> str:
    mesh, lines = _split(items)
    rows = [CSV_HEADER]
    groups = ([(mesh.vertices, "", "")] if mesh is not None else []) + [
        (ln.vertices, ln.foliation, "true" if ln.closed else "false") for ln in lines
    ]
    for pts, fol, closed in groups:
        for X, Y in zip(np.asarray(pts).reshape(-1, 4), _project(stereo, pts)):
            rows.append(",".join([*(fmt(c) for c in X), *(fmt(c) for c in Y), fol, closed]))
    return "\n".join(rows) + "\n"


def _json_value(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise InvalidParameter("non-finite number in JSON output")
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_json_value(v, indent, level) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _json_value(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if hasattr(obj, "to_dict"):
        return _json_value(obj.to_dict(), indent, level)
    raise InvalidParameter(f"cannot serialise {type(obj).__name__}")


def json_text(payload, indent: int = 2) -> str:
    return _json_value(payload, indent, 0) + "\n"


def cw_summary(cw) -> dict:
    v, e, f = cw.counts
    return {
        "vertices": v,
        "edges": e,
        "faces": f,
        "euler_characteristic": cw.euler_characteristic,
        "betti_z2": list(cw.betti_z2()),
    }


def report_payload(radius: float | None, umbilics=(), cw=None, extra: dict | None = None) -> dict:
    """The JSON document: umbilic records plus optional CW counts."""
    doc = {"schema": JSON_SCHEMA}
    if radius is not None:
        doc["radius"] = float(radius)
    doc["umbilics"] = [u.to_dict() for u in umbilics]
    if cw is not None:
        doc["cw"] = cw if isinstance(cw, dict) else cw_summary(cw)
    if extra:
        doc.update(extra)
    return doc


def export_geometry(items, fmt_name: str, path, stereo: StereoMap | None = None, radius: float | None = None) -> Path:
    """Write ``items`` in one of ``FORMATS``.

    Geometry formats take a mesh and/or polylines and need ``stereo``; JSON
    takes either a payload dict or a sequence of umbilic reports (then
    ``radius`` is recorded alongside).
    """
    name = fmt_name.lower()
    if name not in FORMATS:
        raise InvalidParameter(f"unknown format {fmt_name!r}; choose from {', '.join(FORMATS)}")
    if name == "json":
        payload = items if isinstance(items, dict) else report_payload(radius, list(items))
        text = json_text(payload)
    else:
        if stereo is None:
            raise InvalidParameter("geometry export needs a stereographic map")
        text = {"ply": ply_text, "obj": obj_text, "csv": csv_text}[name](items, stereo)
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path
