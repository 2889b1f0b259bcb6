"""File formats: ModeSet containers, VTK legacy fields, provenance blocks.

ModeSet container layout (all little-endian)::

    b"ELMODES1"                 8-byte magic
    uint64                      header length in bytes
    header                      UTF-8 JSON (counts, tolerances, mesh fingerprint)
    float64[count]              eigenvalues
    float64[n_dofs * count]     mode entries, column-major
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .mesh import Mesh
from .solver import ModeSet

MAGIC = b"ELMODES1"


class FormatError(ValueError):
    pass


def _header(ms: ModeSet) -> dict:
    return {
        "format": "elasmodes-modeset",
        "version": 1,
        "count": ms.count,
        "n_dofs": ms.n_dofs,
        "tolerances": {k: ms.tolerances[k] for k in sorted(ms.tolerances)},
        "mesh_fingerprint": ms.mesh_fingerprint,
    }


def write_modeset(ms: ModeSet, path) -> None:
    header = json.dumps(_header(ms), sort_keys=True, separators=(",", ":")).encode()
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(np.asarray(ms.lambdas, dtype="<f8").tobytes())
        fh.write(np.asarray(ms.modes, dtype="<f8").tobytes(order="F"))


def read_modeset(path) -> ModeSet:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not a ModeSet container")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen])
    count, n = header["count"], header["n_dofs"]
    body = np.frombuffer(data, dtype="<f8", offset=16 + hlen)
    if len(body) != count * (n + 1):
        raise FormatError(f"{path}: expected {count * (n + 1)} floats, found {len(body)}")
    lam = body[:count].astype(float)
    modes = body[count:].reshape((n, count), order="F").astype(float)
    return ModeSet(lam, modes, header.get("tolerances", {}), header.get("mesh_fingerprint"))


def write_modeset_json(ms: ModeSet, path) -> None:
    doc = _header(ms)
    doc["lambdas"] = ms.lambdas.tolist()
    doc["modes"] = ms.modes.T.tolist()
    with open(Path(path), "w") as fh:
        json.dump(doc, fh)


def read_modeset_json(path) -> ModeSet:
    with open(Path(path)) as fh:
        doc = json.load(fh)
    modes = np.array(doc["modes"], dtype=float).reshape(doc["count"], doc["n_dofs"]).T
    return ModeSet(doc["lambdas"], modes, doc.get("tolerances", {}), doc.get("mesh_fingerprint"))


def write_vtk(path, mesh: Mesh, fields: dict, title: str = "elasmodes field") -> None:
    """Legacy ASCII unstructured grid with POINT_DATA vector fields.

    ``fields`` maps names to (n_nodes, 3) real arrays.
    """
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.nodes.tolist()]
    lines.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    lines += ["4 %d %d %d %d" % tuple(t) for t in mesh.tets.tolist()]
    lines.append(f"CELL_TYPES {mesh.n_tets}")
    lines += ["10"] * mesh.n_tets
    if fields:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes, 3):
            raise FormatError(f"field {name!r} has shape {values.shape}")
        lines.append(f"VECTORS {name.replace(' ', '_')} double")
        lines += ["%.17g %.17g %.17g" % tuple(v) for v in values.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_vectors(path) -> dict:
    """Vector fields of a file written by :func:`write_vtk` (for tests)."""
    lines = Path(path).read_text().splitlines()
    n = None
    out = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts and parts[0] == "POINT_DATA":
            n = int(parts[1])
        elif parts and parts[0] == "VECTORS":
            out[parts[1]] = np.array([[float(v) for v in row.split()]
                                      for row in lines[i + 1:i + 1 + n]])
            i += n
        i += 1
    return out


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(inputs: dict, tolerances: dict, outputs=()) -> dict:
    """Input hashes, tolerances, tool version and output hashes."""
    return {
        "tool": "elasmodes",
        "version": __version__,
        "inputs": {k: {"path": str(v), "sha256": sha256_file(v)}
                   for k, v in sorted(inputs.items()) if v is not None},
        "tolerances": dict(sorted(tolerances.items())),
        "outputs": {Path(p).name: sha256_file(p) for p in sorted(map(str, outputs))},
    }


def write_json(path, doc) -> None:
    with open(Path(path), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
