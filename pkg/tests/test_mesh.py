import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elasmodes.assembly import build_dofmap
from elasmodes.mesh import (
    EmptyDirichletError, Mesh, MeshError, OrientationError, PartitionError,
    UnsupportedElementError, facet_geometry, generate_box, load_gmsh_msh2, load_mesh_json,
    write_gmsh_msh2,
)

TET_NODES = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
# faces of tet (0,1,2,3): z=0 face first
TET_FACETS = [[0, 1, 2, "dir"], [0, 1, 3, "neu"], [0, 2, 3, "neu"], [1, 2, 3, "neu"]]


def write(tmp_path, doc, name="mesh.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_unit_cube_combinatorics():
    m = generate_box(1, 1, 1, 1, 1, 1, dirichlet="xmin")
    assert (m.n_nodes, m.n_tets, len(m.facets), int(m.dirichlet.sum())) == (8, 6, 12, 2)


def test_box_volume_partition():
    m = generate_box(3, 4, 5, 2, 1, 1)
    assert abs(m.volumes.sum() - 2.0) <= 1e-12
    assert np.all(m.volumes > 0)


def test_empty_dirichlet_rejected():
    with pytest.raises(EmptyDirichletError):
        generate_box(2, 2, 2, dirichlet=())
    with pytest.raises(MeshError):
        generate_box(2, 2, 2, dirichlet=("wmin",))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4),
       st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5),
       st.sampled_from(["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"]))
def test_generated_box_invariants(nx, ny, nz, lx, ly, lz, plane):
    m = generate_box(nx, ny, nz, lx, ly, lz, dirichlet=(plane,))
    assert abs(m.volumes.sum() - lx * ly * lz) <= 1e-12 * max(1.0, lx * ly * lz)
    closed = (m.facet_areas[:, None] * m.facet_normals).sum(axis=0)
    assert np.abs(closed).max() <= 1e-12 * m.facet_areas.sum()
    np.testing.assert_allclose(np.linalg.norm(m.facet_normals, axis=1), 1.0, atol=1e-14)
    # dofmap-constrained nodes all lie on Dirichlet facets
    dm = build_dofmap(m)
    on_dir = set(m.facets[m.dirichlet].ravel().tolist())
    assert set(dm.constrained_nodes.tolist()) == on_dir


def test_normals_point_outward():
    m = generate_box(2, 3, 2, 1.0, 2.0, 0.5)
    centroid = m.nodes.mean(axis=0)
    fc = m.nodes[m.facets].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", fc - centroid, m.facet_normals) > 0)


def test_facet_geometry_right_triangle(tmp_path):
    m = load_mesh_json(write(tmp_path, {"nodes": TET_NODES, "tets": [[0, 1, 2, 3, 0]],
                                        "facets": TET_FACETS}))
    g = facet_geometry(m, 0)
    assert g.area == pytest.approx(0.5, rel=1e-15)
    np.testing.assert_allclose(g.normal, [0, 0, -1], atol=1e-15)


def test_load_single_tet(tmp_path):
    m = load_mesh_json(write(tmp_path, {"nodes": TET_NODES, "tets": [[0, 1, 2, 3, 0]],
                                        "facets": TET_FACETS}))
    assert m.n_nodes == 4 and m.n_tets == 1
    assert m.dirichlet.tolist() == [True, False, False, False]


def test_inverted_tet_names_tet_0(tmp_path):
    doc = {"nodes": TET_NODES, "tets": [[0, 2, 1, 3, 0]], "facets": TET_FACETS}
    with pytest.raises(OrientationError, match="tet 0"):
        load_mesh_json(write(tmp_path, doc))


def test_untagged_boundary_face(tmp_path):
    doc = {"nodes": TET_NODES, "tets": [[0, 1, 2, 3, 0]], "facets": TET_FACETS[:3]}
    with pytest.raises(PartitionError, match="no Dirichlet/Neumann tag"):
        load_mesh_json(write(tmp_path, doc))


def test_schema_and_dirichlet_errors(tmp_path):
    with pytest.raises(MeshError, match="tets"):
        load_mesh_json(write(tmp_path, {"nodes": TET_NODES, "facets": TET_FACETS}))
    bad_tag = [f[:3] + ["free"] for f in TET_FACETS]
    with pytest.raises(MeshError, match="tag"):
        load_mesh_json(write(tmp_path, {"nodes": TET_NODES, "tets": [[0, 1, 2, 3, 0]],
                                        "facets": bad_tag}))
    all_neu = [f[:3] + ["neu"] for f in TET_FACETS]
    with pytest.raises(EmptyDirichletError):
        load_mesh_json(write(tmp_path, {"nodes": TET_NODES, "tets": [[0, 1, 2, 3, 0]],
                                        "facets": all_neu}))


def test_interior_face_tagged_is_rejected():
    m = generate_box(2, 1, 1)
    # the cube split has interior faces; add one of them as a facet
    local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    faces = m.tets[:, local].reshape(-1, 3)
    keys = {tuple(sorted(f)) for f in m.facets.tolist()}
    interior = next(f for f in faces.tolist() if tuple(sorted(f)) not in keys)
    with pytest.raises(PartitionError, match="interior"):
        Mesh(m.nodes, m.tets, m.regions, np.vstack([m.facets, interior]),
             np.append(m.dirichlet, False))


def test_json_round_trip_and_fingerprint(tmp_path):
    m = generate_box(2, 2, 1, 1.0, 0.5, 0.25)
    path = write(tmp_path, m.to_json_dict())
    m2 = load_mesh_json(path)
    assert m2.fingerprint() == m.fingerprint()
    assert generate_box(2, 2, 1, 1.0, 0.5, 0.3).fingerprint() != m.fingerprint()


def test_gmsh_round_trip(tmp_path):
    m = generate_box(2, 2, 2, dirichlet=("xmin",))
    path = tmp_path / "cube.msh"
    write_gmsh_msh2(m, path, dirichlet_tag=1, neumann_tag=2)
    m2 = load_gmsh_msh2(path, {1}, {2})
    np.testing.assert_array_equal(m2.nodes, m.nodes)
    np.testing.assert_array_equal(m2.tets, m.tets)
    np.testing.assert_array_equal(m2.dirichlet, m.dirichlet)


def test_gmsh_quadratic_tets_rejected(tmp_path):
    m = generate_box(1, 1, 1)
    path = tmp_path / "cube.msh"
    write_gmsh_msh2(m, path)
    text = path.read_text().replace(" 4 2 0 0 ", " 11 2 0 0 ", 1)
    path.write_text(text)
    with pytest.raises(UnsupportedElementError, match="type 11"):
        load_gmsh_msh2(path, {1}, {2})


def test_gmsh_unknown_tag_listed(tmp_path):
    m = generate_box(1, 1, 1)
    path = tmp_path / "cube.msh"
    write_gmsh_msh2(m, path, dirichlet_tag=1, neumann_tag=3)
    with pytest.raises(PartitionError, match=r"\[3\]"):
        load_gmsh_msh2(path, {1}, {2})


def test_gmsh_rejects_binary_or_v4(tmp_path):
    path = tmp_path / "v4.msh"
    path.write_text("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    with pytest.raises(MeshError, match="2.2"):
        load_gmsh_msh2(path, {1}, {2})


def test_plane_selectors():
    m = generate_box(2, 3, 4, 1.0, 1.0, 1.0)
    for plane, expect in (("xmax", 2 * 3 * 4), ("zmin", 2 * 2 * 3)):
        assert len(m.facets_on_plane(plane)) == expect
