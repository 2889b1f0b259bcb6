import numpy as np
import pytest

from elasmodes.material import MaterialField, isotropic
from elasmodes.mesh import generate_box
from elasmodes.problems import build_problem, random_anisotropic

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# --- independent oracles -------------------------------------------------

def contract_full(c, s):
    """(C:S)_ij by explicit 81-term summation."""
    out = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    out[i, j] += c[i, j, k, l] * s[k, l]
    return out


def p1_gradients(x):
    """Barycentric gradients from the inverse of [1 x y z] (rows: nodes)."""
    A = np.hstack([np.ones((4, 1)), x])
    inv = np.linalg.inv(A)
    return inv[1:, :].T, abs(np.linalg.det(A)) / 6.0


def dense_stiffness(mesh, material, dofmap):
    """Triple-loop assembly with the 4-index tensor, no Voigt B matrices."""
    n = dofmap.n_free
    K = np.zeros((n, n))
    for e, tet in enumerate(mesh.tets):
        grads, vol = p1_gradients(mesh.nodes[tet])
        c = material.tensors[e].full()
        ke = vol * np.einsum("ijkl,aj,bl->aibk", c, grads, grads)
        for a in range(4):
            for i in range(3):
                r = dofmap.node_dofs[tet[a], i]
                if r < 0:
                    continue
                for b in range(4):
                    for k in range(3):
                        s = dofmap.node_dofs[tet[b], k]
                        if s >= 0:
                            K[r, s] += ke[a, i, b, k]
    return K


GAUSS4_A, GAUSS4_B = 0.5854101966249685, 0.1381966011250105


def quadrature_mass(mesh, material, dofmap):
    """Mass matrix from the degree-2 exact 4-point rule."""
    n = dofmap.n_free
    M = np.zeros((n, n))
    pts = np.full((4, 4), GAUSS4_B) + np.eye(4) * (GAUSS4_A - GAUSS4_B)
    for e, tet in enumerate(mesh.tets):
        _, vol = p1_gradients(mesh.nodes[tet])
        me = np.zeros((4, 4))
        for q in range(4):
            N = pts[q]
            me += material.density[e] * vol / 4 * np.outer(N, N)
        for a in range(4):
            for b in range(4):
                for i in range(3):
                    r, s = dofmap.node_dofs[tet[a], i], dofmap.node_dofs[tet[b], i]
                    if r >= 0 and s >= 0:
                        M[r, s] += me[a, b]
    return M


def principal_angles(A, B, M):
    """Largest principal angle between column spans in the M inner product."""
    from scipy.linalg import cholesky, orth, subspace_angles
    Md = M.toarray() if hasattr(M, "toarray") else M
    R = cholesky(Md)
    return float(np.max(subspace_angles(orth(R @ A), orth(R @ B))))


# --- fixtures ------------------------------------------------------------

@pytest.fixture(scope="session")
def small_iso():
    """144 free dofs, isotropic, non-cubic box."""
    mesh = generate_box(4, 2, 3, 1.3, 0.7, 0.9)
    return build_problem(mesh, MaterialField.homogeneous(isotropic(1.0, 1.0), 1.0, mesh.n_tets))


@pytest.fixture(scope="session")
def small_aniso():
    """Heterogeneous anisotropic body, 2 clamped planes."""
    rng = np.random.default_rng(7)
    mesh = generate_box(3, 2, 2, 1.1, 0.8, 0.6, dirichlet=("xmin", "zmin"))
    tensors = [random_anisotropic(rng) for _ in range(4)]
    per_elem = [tensors[e % 4] for e in range(mesh.n_tets)]
    rho = rng.uniform(0.5, 2.0, mesh.n_tets)
    return build_problem(mesh, MaterialField(tuple(per_elem), rho, beta=0.5))
