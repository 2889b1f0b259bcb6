import json
import struct

import numpy as np
import pytest

from elasmodes.io import (
    MAGIC, FormatError, provenance, read_modeset, read_modeset_json, read_vtk_vectors,
    sha256_file, write_modeset, write_modeset_json, write_vtk,
)
from elasmodes.mesh import generate_box
from elasmodes.solver import ModeSet


@pytest.fixture
def modeset():
    rng = np.random.default_rng(7)
    return ModeSet(np.array([0.5, 1.25, 3.0]), rng.standard_normal((11, 3)),
                   {"eig_tol": 1e-8, "shift": 0.0}, "ab" * 32)


def test_container_round_trip_is_exact(tmp_path, modeset):
    path = tmp_path / "m.bin"
    write_modeset(modeset, path)
    back = read_modeset(path)
    assert back.lambdas.tobytes() == modeset.lambdas.tobytes()
    assert back.modes.tobytes() == modeset.modes.tobytes()
    assert back.mesh_fingerprint == modeset.mesh_fingerprint
    assert back.tolerances == modeset.tolerances


def test_container_layout(tmp_path, modeset):
    path = tmp_path / "m.bin"
    write_modeset(modeset, path)
    data = path.read_bytes()
    assert data[:8] == MAGIC
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen])
    assert (header["count"], header["n_dofs"]) == (3, 11)
    body = np.frombuffer(data[16 + hlen:], dtype="<f8")
    np.testing.assert_array_equal(body[:3], modeset.lambdas)
    # column-major: the first mode is contiguous
    np.testing.assert_array_equal(body[3:14], modeset.modes[:, 0])


def test_container_is_byte_stable(tmp_path, modeset):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    write_modeset(modeset, a)
    write_modeset(modeset, b)
    assert sha256_file(a) == sha256_file(b)


def test_container_rejects_garbage(tmp_path, modeset):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTMODES" + bytes(16))
    with pytest.raises(FormatError, match="not a ModeSet"):
        read_modeset(bad)
    good = tmp_path / "m.bin"
    write_modeset(modeset, good)
    truncated = tmp_path / "t.bin"
    truncated.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(FormatError, match="expected"):
        read_modeset(truncated)


def test_json_export_round_trip(tmp_path, modeset):
    path = tmp_path / "m.json"
    write_modeset_json(modeset, path)
    back = read_modeset_json(path)
    np.testing.assert_array_equal(back.lambdas, modeset.lambdas)
    np.testing.assert_array_equal(back.modes, modeset.modes)
    assert json.loads(path.read_text())["mesh_fingerprint"] == modeset.mesh_fingerprint


def test_vtk_structure_and_values(tmp_path):
    mesh = generate_box(2, 1, 1, 2.0, 1.0, 1.0)
    rng = np.random.default_rng(0)
    u = rng.standard_normal((mesh.n_nodes, 3))
    path = tmp_path / "f.vtk"
    write_vtk(path, mesh, {"displacement": u, "zero": np.zeros_like(u)}, title="t")
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2:4] == ["ASCII", "DATASET UNSTRUCTURED_GRID"]
    assert f"CELLS {mesh.n_tets} {5 * mesh.n_tets}" in lines
    assert lines.count("10") >= mesh.n_tets
    fields = read_vtk_vectors(path)
    # %.17g round-trips doubles exactly
    np.testing.assert_array_equal(fields["displacement"], u)
    assert not np.any(fields["zero"])


def test_vtk_rejects_bad_shape(tmp_path):
    mesh = generate_box(1, 1, 1)
    with pytest.raises(FormatError, match="shape"):
        write_vtk(tmp_path / "f.vtk", mesh, {"u": np.zeros((3, 3))})


def test_provenance_hashes(tmp_path):
    src = tmp_path / "in.json"
    src.write_text("{}")
    out = tmp_path / "out.txt"
    out.write_text("x")
    prov = provenance({"mesh": src}, {"tol_cg": 1e-10}, [out])
    assert prov["inputs"]["mesh"]["sha256"] == sha256_file(src)
    assert prov["outputs"] == {"out.txt": sha256_file(out)}
    assert prov["tolerances"] == {"tol_cg": 1e-10}
    assert prov["version"]
