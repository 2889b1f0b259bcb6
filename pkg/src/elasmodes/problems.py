"""Reference problems used by the scripts and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DofMap, assemble_mass, assemble_stiffness, build_dofmap
from .material import ElasticTensor, MaterialField, isotropic
from .mesh import Mesh, generate_box


@dataclass
class Problem:
    mesh: Mesh
    material: MaterialField
    dofmap: DofMap
    K: object
    M: object


def build_problem(mesh: Mesh, material: MaterialField) -> Problem:
    dofmap = build_dofmap(mesh)
    return Problem(mesh, material, dofmap,
                   assemble_stiffness(mesh, material, dofmap),
                   assemble_mass(mesh, material, dofmap))


def random_anisotropic(rng, floor: float = 0.5, scale: float = 1.0) -> ElasticTensor:
    """Random fully anisotropic tensor with Mandel spectrum above ``floor``."""
    A = rng.standard_normal((6, 6))
    mandel = scale * (A @ A.T / 6.0) + floor * np.eye(6)
    w = np.array([1, 1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2)])
    return ElasticTensor(mandel / np.outer(w, w))


def rod(nx: int, ny: int = 1, nz: int = 1, length: float = 1.0, width: float = 0.25,
        young: float = 1.0, rho: float = 1.0) -> Problem:
    """Fixed-free rod along x with zero Poisson ratio, clamped at x = 0."""
    mesh = generate_box(nx, ny, nz, length, width, width, dirichlet=("xmin",))
    # lambda = 0, mu = E / 2 gives Young's modulus E and nu = 0
    mat = MaterialField.homogeneous(isotropic(0.0, young / 2.0), rho, mesh.n_tets)
    return build_problem(mesh, mat)


def rod_axial_eigenvalue(k: int = 0, length: float = 1.0, young: float = 1.0,
                         rho: float = 1.0) -> float:
    return ((2 * k + 1) * np.pi / (2 * length)) ** 2 * young / rho


def axial_mode_index(problem: Problem, modeset, length: float = 1.0) -> tuple[int, float]:
    """Index of the computed mode closest to the first longitudinal rod mode.

    Bending and torsion modes of a slender rod lie below the first axial
    eigenvalue, so the longitudinal mode is picked by its M-projection on
    sin(pi x / 2L) e_x.  Returns (index, normalized overlap).
    """
    x = problem.mesh.nodes[:, 0]
    shape = np.zeros((problem.mesh.n_nodes, 3))
    shape[:, 0] = np.sin(np.pi * x / (2 * length))
    ref = problem.dofmap.from_nodal(shape)
    Mref = problem.M @ ref
    overlap = np.abs(modeset.modes.T @ Mref) / np.sqrt(ref @ Mref)
    j = int(np.argmax(overlap))
    return j, float(overlap[j])
