"""Linear tetrahedral meshes with Dirichlet/Neumann boundary facets."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

DIR, NEU = "dir", "neu"

PLANES = {
    "xmin": (0, min), "xmax": (0, max),
    "ymin": (1, min), "ymax": (1, max),
    "zmin": (2, min), "zmax": (2, max),
}


class MeshError(ValueError):
    pass


class SchemaError(MeshError):
    pass


class OrientationError(MeshError):
    pass


class PartitionError(MeshError):
    pass


class EmptyDirichletError(MeshError):
    pass


class DegenerateFacetError(MeshError):
    pass


class UnsupportedElementError(MeshError):
    pass


@dataclass(frozen=True)
class FacetGeometry:
    area: float
    normal: np.ndarray


def _face_keys(tri: np.ndarray, n_nodes: int) -> np.ndarray:
    s = np.sort(tri, axis=1).astype(np.int64)
    return (s[:, 0] * n_nodes + s[:, 1]) * n_nodes + s[:, 2]


def signed_volumes(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    x = nodes[tets]
    edges = x[:, 1:] - x[:, :1]
    return np.linalg.det(edges) / 6.0


@dataclass(frozen=True, eq=False)
class Mesh:
    """Nodes (m), P1 tets with region tags, and tagged boundary facets.

    Construction validates every invariant; an invalid mesh never exists.
    """

    nodes: np.ndarray
    tets: np.ndarray
    regions: np.ndarray
    facets: np.ndarray
    dirichlet: np.ndarray  # bool per facet

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        facets = np.ascontiguousarray(self.facets, dtype=np.int64).reshape(-1, 3)
        regions = np.ascontiguousarray(self.regions, dtype=np.int64).reshape(-1)
        dirichlet = np.ascontiguousarray(self.dirichlet, dtype=bool).reshape(-1)
        for name, arr in (("nodes", nodes), ("tets", tets), ("facets", facets),
                          ("regions", regions), ("dirichlet", dirichlet)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self._validate()

    def _validate(self):
        nodes, tets, facets = self.nodes, self.tets, self.facets
        n = len(nodes)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or n == 0:
            raise SchemaError("nodes must be a non-empty list of 3D points")
        if not np.all(np.isfinite(nodes)):
            raise SchemaError("node coordinates must be finite")
        if tets.ndim != 2 or tets.shape[1] != 4 or len(tets) == 0:
            raise SchemaError("tets must be a non-empty list of 4 node indices")
        if len(self.regions) != len(tets):
            raise SchemaError("one region tag per tet is required")
        if len(self.dirichlet) != len(facets):
            raise SchemaError("one boundary tag per facet is required")
        for name, idx in (("tet", tets), ("facet", facets)):
            bad = np.flatnonzero(((idx < 0) | (idx >= n)).any(axis=1))
            if len(bad):
                raise SchemaError(f"{name} {bad[0]} references a missing node")

        vol = signed_volumes(nodes, tets)
        scale = np.ptp(nodes, axis=0).max() ** 3
        bad = np.flatnonzero(vol <= 1e-14 * scale)
        if len(bad):
            raise OrientationError(
                f"tet {bad[0]} has non-positive signed volume {vol[bad[0]]:.3e}"
            )

        local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
        faces = tets[:, local].reshape(-1, 3)
        keys = _face_keys(faces, n)
        uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if counts.max() > 2:
            raise MeshError("a face is shared by more than two tets (non-manifold)")
        boundary = counts == 1

        fkeys = _face_keys(facets, n)
        pos = np.searchsorted(uniq, fkeys)
        pos_c = np.minimum(pos, len(uniq) - 1)
        found = uniq[pos_c] == fkeys
        bad = np.flatnonzero(~found)
        if len(bad):
            raise PartitionError(f"facet {bad[0]} is not a face of any tet")
        bad = np.flatnonzero(~boundary[pos_c])
        if len(bad):
            raise PartitionError(f"facet {bad[0]} is an interior face, not on the boundary")
        _, first, fcount = np.unique(fkeys, return_index=True, return_counts=True)
        if fcount.max() > 1:
            dup = np.flatnonzero(fkeys == fkeys[first[np.argmax(fcount)]])
            raise PartitionError(f"boundary face tagged more than once (facets {dup.tolist()})")
        if len(facets) != boundary.sum():
            missing = np.flatnonzero(boundary & ~np.isin(uniq, fkeys))[0]
            owner = np.flatnonzero(inv == missing)[0]
            tri = faces[owner]
            raise PartitionError(
                f"boundary face {tri.tolist()} of tet {owner // 4} carries no "
                "Dirichlet/Neumann tag"
            )
        if not self.dirichlet.any():
            raise EmptyDirichletError("the Dirichlet facet set is empty")

        # owner tet and its opposite vertex, for outward normals
        order = np.argsort(keys, kind="stable")
        owner_face = order[np.searchsorted(keys[order], fkeys)]
        object.__setattr__(self, "_facet_owner", owner_face // 4)
        object.__setattr__(self, "_facet_opposite", tets[owner_face // 4, owner_face % 4])

        x = nodes[facets]
        cross = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        area = 0.5 * np.linalg.norm(cross, axis=1)
        bad = np.flatnonzero(area <= 1e-14 * np.ptp(nodes, axis=0).max() ** 2)
        if len(bad):
            raise DegenerateFacetError(f"facet {bad[0]} is degenerate (zero area)")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @cached_property
    def volumes(self) -> np.ndarray:
        return signed_volumes(self.nodes, self.tets)

    @cached_property
    def facet_areas(self) -> np.ndarray:
        return self._facet_frames()[0]

    @cached_property
    def facet_normals(self) -> np.ndarray:
        return self._facet_frames()[1]

    def _facet_frames(self):
        x = self.nodes[self.facets]
        cross = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        norm = np.linalg.norm(cross, axis=1)
        normal = cross / norm[:, None]
        inward = np.einsum("ij,ij->i", normal, self.nodes[self._facet_opposite] - x[:, 0])
        normal[inward > 0] *= -1
        return 0.5 * norm, normal

    @property
    def facet_owner(self) -> np.ndarray:
        return self._facet_owner

    @cached_property
    def dirichlet_nodes(self) -> np.ndarray:
        """Sorted node ids lying on at least one Dirichlet facet."""
        return np.unique(self.facets[self.dirichlet])

    def to_json_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "tets": [t + [r] for t, r in zip(self.tets.tolist(), self.regions.tolist())],
            "facets": [f + [DIR if d else NEU]
                       for f, d in zip(self.facets.tolist(), self.dirichlet.tolist())],
        }

    def fingerprint(self) -> str:
        """sha256 of the canonical mesh JSON."""
        text = json.dumps(self.to_json_dict(), separators=(",", ":"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def facets_on_plane(self, plane: str, tol: float = 1e-12) -> np.ndarray:
        """Facet ids whose three nodes lie on a bounding-box plane like 'xmax'."""
        try:
            axis, pick = PLANES[plane]
        except KeyError:
            raise MeshError(f"unknown plane selector {plane!r}; use one of {sorted(PLANES)}") from None
        coord = self.nodes[:, axis]
        value = pick(coord)
        span = max(np.ptp(self.nodes, axis=0).max(), 1.0)
        on = np.abs(coord[self.facets] - value) <= tol * span
        return np.flatnonzero(on.all(axis=1))


def facet_geometry(mesh: Mesh, facet_id: int) -> FacetGeometry:
    return FacetGeometry(float(mesh.facet_areas[facet_id]), mesh.facet_normals[facet_id].copy())


def boundary_faces(nodes, tets) -> np.ndarray:
    """All faces belonging to exactly one tet, in tet order."""
    tets = np.asarray(tets)
    local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    faces = tets[:, local].reshape(-1, 3)
    keys = _face_keys(faces, len(nodes))
    _, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
    return faces[counts[inv] == 1]


# Kuhn split of a hexahedron: one tet per path 0 -> 7 along the axes
_CORNER = {c: (c & 1, (c >> 1) & 1, (c >> 2) & 1) for c in range(8)}
_KUHN = []
for perm in itertools.permutations(range(3)):
    path, c = [0], 0
    for axis in perm:
        c |= 1 << axis
        path.append(c)
    _KUHN.append(path)


def generate_box(nx, ny, nz, lx=1.0, ly=1.0, lz=1.0, dirichlet=("xmin",),
                 region: int = 0) -> Mesh:
    """Structured box [0,lx]x[0,ly]x[0,lz], 6 tets per cell.

    ``dirichlet`` lists bounding planes ('xmin', 'xmax', ...) whose faces are
    clamped; every other boundary face is Neumann.
    """
    if min(nx, ny, nz) < 1:
        raise MeshError("cell counts must be >= 1")
    if min(lx, ly, lz) <= 0:
        raise MeshError("box lengths must be positive")
    if isinstance(dirichlet, str):
        dirichlet = (dirichlet,)
    for plane in dirichlet:
        if plane not in PLANES:
            raise MeshError(f"unknown plane selector {plane!r}")
    if not dirichlet:
        raise EmptyDirichletError("dirichlet selection is empty")

    ii, jj, kk = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1),
                             indexing="ij")
    grid = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    nodes = grid * np.array([lx / nx, ly / ny, lz / nz])
    nodes[grid[:, 0] == nx, 0] = lx
    nodes[grid[:, 1] == ny, 1] = ly
    nodes[grid[:, 2] == nz, 2] = lz

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    ci, cj, ck = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()
    corner = np.stack([nid(ci + dx, cj + dy, ck + dz) for dx, dy, dz in
                       (_CORNER[c] for c in range(8))], axis=1)
    tets = np.concatenate([corner[:, path] for path in _KUHN], axis=0)
    # cell-major ordering keeps neighbouring tets close in memory
    n_cells = len(ci)
    tets = tets.reshape(6, n_cells, 4).transpose(1, 0, 2).reshape(-1, 4)
    vol = signed_volumes(nodes, tets)
    neg = vol < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]

    faces = boundary_faces(nodes, tets)
    is_dir = np.zeros(len(faces), dtype=bool)
    limits = {"xmin": (0, 0), "xmax": (0, nx), "ymin": (1, 0), "ymax": (1, ny),
              "zmin": (2, 0), "zmax": (2, nz)}
    for plane in dirichlet:
        axis, value = limits[plane]
        is_dir |= (grid[faces][:, :, axis] == value).all(axis=1)
    if not is_dir.any():
        raise EmptyDirichletError("dirichlet selection matched no boundary face")
    return Mesh(nodes, tets, np.full(len(tets), region), faces, is_dir)


def mesh_from_json_dict(doc) -> Mesh:
    if not isinstance(doc, dict):
        raise SchemaError("mesh document must be a JSON object")
    for key in ("nodes", "tets", "facets"):
        if key not in doc or not isinstance(doc[key], list):
            raise SchemaError(f"mesh document needs a list '{key}'")
    try:
        nodes = np.array(doc["nodes"], dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("nodes must be [x, y, z] numeric triples") from None
    if nodes.ndim != 2 or nodes.shape[1] != 3:
        raise SchemaError("nodes must be [x, y, z] numeric triples")
    tets, regions = [], []
    for t, row in enumerate(doc["tets"]):
        if not isinstance(row, list) or len(row) != 5 or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in row):
            raise SchemaError(f"tet {t} must be [a, b, c, d, region] integers")
        tets.append(row[:4])
        regions.append(row[4])
    facets, tags = [], []
    for f, row in enumerate(doc["facets"]):
        if (not isinstance(row, list) or len(row) != 4
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in row[:3])):
            raise SchemaError(f"facet {f} must be [a, b, c, \"dir\"|\"neu\"]")
        if row[3] not in (DIR, NEU):
            raise SchemaError(f"facet {f} has tag {row[3]!r}; expected 'dir' or 'neu'")
        facets.append(row[:3])
        tags.append(row[3] == DIR)
    return Mesh(nodes, np.array(tets, dtype=np.int64).reshape(-1, 4),
                np.array(regions, dtype=np.int64),
                np.array(facets, dtype=np.int64).reshape(-1, 3), np.array(tags, dtype=bool))


def load_mesh_json(path) -> Mesh:
    try:
        with open(Path(path)) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return mesh_from_json_dict(doc)


def save_mesh_json(mesh: Mesh, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(mesh.to_json_dict(), fh)


def _sections(lines):
    out, name, body = {}, None, []
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("$End"):
            out[name] = body
            name, body = None, []
        elif line.startswith("$") and name is None:
            name = line[1:]
        elif name is not None:
            body.append(line)
    return out


def load_gmsh_msh2(path, dirichlet_tags, neumann_tags) -> Mesh:
    """Read an ASCII Gmsh 2.2 file containing only 4-node tets and triangles.

    Tets take their physical tag as region; triangles are tagged Dirichlet or
    Neumann by physical tag.
    """
    dirichlet_tags, neumann_tags = set(dirichlet_tags), set(neumann_tags)
    with open(Path(path)) as fh:
        sec = _sections(fh.readlines())
    fmt = sec.get("MeshFormat")
    if not fmt:
        raise SchemaError(f"{path}: missing $MeshFormat")
    version, ftype = fmt[0].split()[:2]
    if not version.startswith("2.2") or ftype != "0":
        raise SchemaError(f"{path}: only ASCII MSH 2.2 is supported (got {version}, type {ftype})")
    if "Nodes" not in sec or "Elements" not in sec:
        raise SchemaError(f"{path}: missing $Nodes or $Elements")

    node_lines = sec["Nodes"]
    count = int(node_lines[0])
    ids, coords = [], []
    for line in node_lines[1:1 + count]:
        parts = line.split()
        ids.append(int(parts[0]))
        coords.append([float(v) for v in parts[1:4]])
    index = {gid: i for i, gid in enumerate(ids)}

    tets, regions, facets, is_dir = [], [], [], []
    unknown = set()
    names = {2: "3-node triangle", 4: "4-node tetrahedron"}
    elem_lines = sec["Elements"]
    for line in elem_lines[1:1 + int(elem_lines[0])]:
        parts = [int(v) for v in line.split()]
        eid, etype, ntags = parts[:3]
        tags = parts[3:3 + ntags]
        conn = [index[v] for v in parts[3 + ntags:]]
        phys = tags[0] if tags else 0
        if etype == 4:
            tets.append(conn)
            regions.append(phys)
        elif etype == 2:
            if phys in dirichlet_tags:
                facets.append(conn)
                is_dir.append(True)
            elif phys in neumann_tags:
                facets.append(conn)
                is_dir.append(False)
            else:
                unknown.add(phys)
        else:
            raise UnsupportedElementError(
                f"{path}: element {eid} has unsupported type {etype}; only "
                f"{', '.join(names.values())} are accepted"
            )
    if unknown:
        raise PartitionError(
            f"{path}: triangle physical tags {sorted(unknown)} are in neither the "
            "Dirichlet nor the Neumann set"
        )
    return Mesh(np.array(coords), np.array(tets, dtype=np.int64).reshape(-1, 4),
                np.array(regions), np.array(facets, dtype=np.int64).reshape(-1, 3),
                np.array(is_dir, dtype=bool))


def write_gmsh_msh2(mesh: Mesh, path, dirichlet_tag=1, neumann_tag=2) -> None:
    """Export as ASCII MSH 2.2 (used for round-trip tests and examples)."""
    with open(Path(path), "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{mesh.n_nodes}\n")
        for i, (x, y, z) in enumerate(mesh.nodes.tolist(), start=1):
            fh.write(f"{i} {x!r} {y!r} {z!r}\n")
        fh.write("$EndNodes\n")
        n_el = len(mesh.facets) + mesh.n_tets
        fh.write(f"$Elements\n{n_el}\n")
        eid = 1
        for f, d in zip(mesh.facets.tolist(), mesh.dirichlet.tolist()):
            tag = dirichlet_tag if d else neumann_tag
            fh.write(f"{eid} 2 2 {tag} {tag} {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
            eid += 1
        for t, r in zip(mesh.tets.tolist(), mesh.regions.tolist()):
            fh.write(f"{eid} 4 2 {r} {r} {' '.join(str(v + 1) for v in t)}\n")
            eid += 1
        fh.write("$EndElements\n")
