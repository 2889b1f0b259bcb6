"""P1 finite element assembly of stiffness, mass and load vectors.

Dirichlet conditions are imposed by elimination: matrices and vectors live on
the free degrees of freedom only.  Sparse matrices are ``scipy.sparse``
CSR arrays with both triangles stored.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .material import MaterialField
from .mesh import Mesh, MeshError


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global dof id per (node, component), -1 where the node is clamped."""

    node_dofs: np.ndarray
    n_free: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_dofs)

    @property
    def constrained_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_dofs[:, 0] < 0)

    def to_nodal(self, u) -> np.ndarray:
        """Scatter a free-dof vector to an (n_nodes, 3) field, zero on clamped nodes."""
        u = np.asarray(u)
        out = np.zeros((self.n_nodes, 3), dtype=u.dtype)
        free = self.node_dofs >= 0
        out[free] = u[self.node_dofs[free]]
        return out

    def from_nodal(self, field) -> np.ndarray:
        field = np.asarray(field)
        out = np.zeros(self.n_free, dtype=field.dtype)
        free = self.node_dofs >= 0
        out[self.node_dofs[free]] = field[free]
        return out

    @classmethod
    def unconstrained(cls, mesh: Mesh) -> "DofMap":
        """All 3 n_nodes dofs free; for kernel checks only."""
        return cls(np.arange(3 * mesh.n_nodes).reshape(-1, 3), 3 * mesh.n_nodes)


def build_dofmap(mesh: Mesh) -> DofMap:
    clamped = np.zeros(mesh.n_nodes, dtype=bool)
    clamped[mesh.dirichlet_nodes] = True
    n_free_nodes = int((~clamped).sum())
    ids = np.full((mesh.n_nodes, 3), -1, dtype=np.int64)
    ids[~clamped] = np.arange(3 * n_free_nodes).reshape(-1, 3)
    ids.setflags(write=False)
    return DofMap(ids, 3 * n_free_nodes)


def shape_gradients(nodes: np.ndarray, tets: np.ndarray):
    """Constant P1 shape-function gradients (m, 4, 3) and volumes (m,)."""
    x = nodes[tets]
    edges = x[:, 1:] - x[:, :1]
    det = np.linalg.det(edges)
    if np.any(np.abs(det) <= 0):
        raise AssemblyError("degenerate element Jacobian")
    # rows of inv(edges).T are the gradients of barycentrics 1..3
    g123 = np.linalg.inv(edges).transpose(0, 2, 1)
    grads = np.concatenate([-g123.sum(axis=1, keepdims=True), g123], axis=1)
    return grads, det / 6.0


def strain_displacement(grads: np.ndarray) -> np.ndarray:
    """B matrices (m, 6, 12) mapping nodal displacements to engineering strain."""
    m = len(grads)
    B = np.zeros((m, 6, 12))
    dx, dy, dz = grads[:, :, 0], grads[:, :, 1], grads[:, :, 2]
    cx, cy, cz = slice(0, 12, 3), slice(1, 12, 3), slice(2, 12, 3)
    B[:, 0, cx] = dx
    B[:, 1, cy] = dy
    B[:, 2, cz] = dz
    B[:, 3, cy] = dz
    B[:, 3, cz] = dy
    B[:, 4, cx] = dz
    B[:, 4, cz] = dx
    B[:, 5, cx] = dy
    B[:, 5, cy] = dx
    return B


def element_dofs(mesh: Mesh, dofmap: DofMap) -> np.ndarray:
    return dofmap.node_dofs[mesh.tets].reshape(-1, 12)


def _scatter(blocks: np.ndarray, edofs: np.ndarray, n: int):
    rows = np.broadcast_to(edofs[:, :, None], blocks.shape)
    cols = np.broadcast_to(edofs[:, None, :], blocks.shape)
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_array((blocks[keep], (rows[keep], cols[keep])), shape=(n, n))
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _check_material(mesh: Mesh, material: MaterialField):
    if len(material) != mesh.n_tets:
        raise AssemblyError(
            f"material has {len(material)} elements but the mesh has {mesh.n_tets}"
        )


def element_stiffness(mesh: Mesh, material: MaterialField) -> np.ndarray:
    grads, vol = shape_gradients(mesh.nodes, mesh.tets)
    B = strain_displacement(grads)
    C = material.voigt_stack()
    return vol[:, None, None] * np.einsum("eai,eab,ebj->eij", B, C, B, optimize=True)


def assemble_stiffness(mesh: Mesh, material: MaterialField, dofmap: DofMap):
    """K = sum_e V_e B_e^T C_e B_e over free dofs."""
    _check_material(mesh, material)
    return _scatter(element_stiffness(mesh, material), element_dofs(mesh, dofmap),
                    dofmap.n_free)


def element_mass(mesh: Mesh, material: MaterialField) -> np.ndarray:
    w = (np.ones((4, 4)) + np.eye(4)) / 20.0
    blocks = np.kron(w, np.eye(3))
    return (material.density * mesh.volumes)[:, None, None] * blocks


def assemble_mass(mesh: Mesh, material: MaterialField, dofmap: DofMap):
    """Consistent P1 mass: rho_e V_e (1 + delta_ab) / 20 per component."""
    _check_material(mesh, material)
    return _scatter(element_mass(mesh, material), element_dofs(mesh, dofmap),
                    dofmap.n_free)


def _add_nodal(dofmap: DofMap, conn: np.ndarray, contrib: np.ndarray) -> np.ndarray:
    # contrib: (n_entities, 3) value given to every node of the entity
    out = np.zeros(dofmap.n_free, dtype=contrib.dtype)
    for a in range(conn.shape[1]):
        ids = dofmap.node_dofs[conn[:, a]]
        keep = ids >= 0
        np.add.at(out, ids[keep], contrib[keep])
    return out


def assemble_body_load(mesh: Mesh, dofmap: DofMap, f) -> np.ndarray:
    """Each node of element e receives f_e V_e / 4 (f constant or (m, 3))."""
    f = np.asarray(f)
    if not np.issubdtype(f.dtype, np.complexfloating):
        f = f.astype(float)
    f = np.broadcast_to(f, (mesh.n_tets, 3))
    if not np.all(np.isfinite(f)):
        raise AssemblyError("body force must be finite")
    return _add_nodal(dofmap, mesh.tets, f * (mesh.volumes / 4.0)[:, None])


def assemble_traction_load(mesh: Mesh, dofmap: DofMap, g, facets=None) -> np.ndarray:
    """Each node of a Neumann facet receives g area / 3.

    ``g`` is a constant 3-vector or one row per selected facet.  Without
    ``facets`` a constant ``g`` covers every Neumann facet and a per-facet
    array must have one row per mesh facet (rows on Dirichlet facets must be
    zero).
    """
    g = np.asarray(g)
    if not np.issubdtype(g.dtype, np.complexfloating):
        g = g.astype(float)
    if facets is None:
        if g.shape == (3,):
            facets = np.flatnonzero(~mesh.dirichlet)
            g = np.broadcast_to(g, (len(facets), 3))
        else:
            if g.shape != (len(mesh.facets), 3):
                raise AssemblyError("per-facet traction needs one row per facet")
            loaded = np.flatnonzero(np.any(g != 0, axis=1) & mesh.dirichlet)
            if len(loaded):
                raise AssemblyError(f"traction given on Dirichlet facet {loaded[0]}")
            facets = np.flatnonzero(~mesh.dirichlet)
            g = g[facets]
    else:
        facets = np.asarray(facets, dtype=np.int64).reshape(-1)
        bad = facets[mesh.dirichlet[facets]]
        if len(bad):
            raise AssemblyError(f"traction given on Dirichlet facet {bad[0]}")
        g = np.broadcast_to(g, (len(facets), 3))
    if not np.all(np.isfinite(g)):
        raise AssemblyError("traction must be finite")
    return _add_nodal(dofmap, mesh.facets[facets], g * (mesh.facet_areas[facets] / 3.0)[:, None])


def resolve_facets(mesh: Mesh, selector: str) -> np.ndarray:
    """Facet ids for a selector: 'neu', a plane such as 'xmax', or a facet id."""
    if selector in ("neu", "all"):
        return np.flatnonzero(~mesh.dirichlet)
    if selector.lstrip("-").isdigit():
        fid = int(selector)
        if not 0 <= fid < len(mesh.facets):
            raise AssemblyError(f"facet id {fid} out of range")
        return np.array([fid])
    try:
        return mesh.facets_on_plane(selector)
    except MeshError as exc:
        raise AssemblyError(str(exc)) from None


def _vector(value, where, complex_ok=False):
    arr = np.asarray(value)
    if complex_ok and not np.iscomplexobj(arr) and arr.ndim >= 2 and arr.shape[-1] == 2:
        arr = arr[..., 0] + 1j * arr[..., 1]
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    if arr.shape[-1:] != (3,):
        raise AssemblyError(f"{where}: expected 3-component vectors")
    return arr


def loads_from_dict(doc: dict, mesh: Mesh, dofmap: DofMap, complex_ok=False):
    """(F_body, F_traction) from a source document.

    Keys: ``body_force`` (3-vector or one per element) and ``traction``
    mapping facet selectors to 3-vectors.  With ``complex_ok`` each component
    may be an ``[re, im]`` pair.
    """
    body = doc.get("body_force", doc.get("body"))
    F_body = np.zeros(dofmap.n_free)
    if body is not None:
        F_body = assemble_body_load(mesh, dofmap, _vector(body, "body_force", complex_ok))
    F_trac = np.zeros(dofmap.n_free)
    for selector, value in (doc.get("traction") or {}).items():
        ids = resolve_facets(mesh, str(selector))
        F_trac = F_trac + assemble_traction_load(
            mesh, dofmap, _vector(value, f"traction[{selector}]", complex_ok), facets=ids)
    if np.iscomplexobj(F_body) or np.iscomplexobj(F_trac):
        F_body, F_trac = F_body.astype(complex), F_trac.astype(complex)
    return F_body, F_trac


def load_sources_json(path, mesh: Mesh, dofmap: DofMap, complex_ok: bool = False):
    with open(Path(path)) as fh:
        doc = json.load(fh)
    return loads_from_dict(doc, mesh, dofmap, complex_ok=complex_ok)


def symmetry_error(A) -> float:
    """max |A - A^T| / max |A|."""
    diff = abs(A - A.T)
    scale = abs(A).max()
    return float(diff.max() / scale) if scale else 0.0
