"""Static solves and the generalized eigenproblem K u = lambda M u."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolveOptions:
    cg_tol: float = 1e-10
    max_iter: int = 20000
    shift: float = 0.0
    eig_tol: float = 1e-8
    reorth: str = "full"
    inner: str = "lu"  # 'lu' or 'cg' for the shift-invert solves
    ncv: int | None = None
    max_restarts: int = 200
    oracle_cap: int = 600
    seed: int = 0

    def __post_init__(self):
        for name in ("cg_tol", "eig_tol"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.reorth != "full":
            raise ValueError("only full reorthogonalization is supported")
        if self.inner not in ("lu", "cg"):
            raise ValueError("inner must be 'lu' or 'cg'")


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Ascending eigenvalues and M-orthonormal eigenvectors (columns)."""

    lambdas: np.ndarray
    modes: np.ndarray
    tolerances: dict = field(default_factory=dict)
    mesh_fingerprint: str | None = None
    dofmap: object = None

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float).reshape(-1)
        modes = np.array(self.modes, dtype=float)
        if modes.ndim != 2 or modes.shape[1] != len(lam):
            raise ValueError("modes must have one column per eigenvalue")
        lam.setflags(write=False)
        modes.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "modes", modes)

    @property
    def count(self) -> int:
        return len(self.lambdas)

    @property
    def n_dofs(self) -> int:
        return self.modes.shape[0]

    def truncated(self, n_modes: int) -> "ModeSet":
        return ModeSet(self.lambdas[:n_modes], self.modes[:, :n_modes],
                       self.tolerances, self.mesh_fingerprint, self.dofmap)

    def orthonormality_error(self, M) -> float:
        G = self.modes.T @ (M @ self.modes)
        return float(np.abs(G - np.eye(self.count)).max()) if self.count else 0.0


def pcg(A, b, tol=1e-10, max_iter=20000, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, iterations, relative_residual)``; raises ConvergenceError if
    ``||b - A x|| <= tol ||b||`` is not reached.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0, 0.0
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        step = rz / (p @ Ap)
        x += step * p
        r -= step * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            # recursive residual drifts; confirm with the true one
            true = np.linalg.norm(b - A @ x)
            if true <= tol * bnorm:
                return x, it, true / bnorm
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {res:.3e})",
        residual=res,
    )


def solve_static(K, F, opts: SolveOptions | None = None, method: str = "cg"):
    """Displacement u with K u = F on the free dofs.

    ``method='cholesky'`` uses a dense factorization (capped at
    ``opts.oracle_cap`` dofs) and serves as the reference path.
    """
    opts = opts or SolveOptions()
    F = np.asarray(F)
    if np.iscomplexobj(F):
        return (solve_static(K, F.real, opts, method)
                + 1j * solve_static(K, F.imag, opts, method))
    n = K.shape[0]
    if F.shape != (n,):
        raise ValueError(f"load has shape {F.shape}, expected ({n},)")
    if not np.any(F):
        return np.zeros(n)
    if method == "cholesky":
        if n > opts.oracle_cap:
            raise SolverError(f"dense path limited to {opts.oracle_cap} dofs (got {n})")
        Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
        return sla.cho_solve(sla.cho_factor(Kd), F)
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    u, it, res = pcg(K, F, tol=opts.cg_tol, max_iter=opts.max_iter)
    log.debug("pcg converged in %d iterations, residual %.2e", it, res)
    return u


def _sign_fix(V):
    V = np.array(V, dtype=float)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def dense_eig_oracle(K, M, cap: int = 600):
    """All eigenpairs by Cholesky reduction of M and a symmetric eigensolve."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    n = Kd.shape[0]
    if n > cap:
        raise SolverError(f"dense oracle limited to {cap} dofs (got {n})")
    L = np.linalg.cholesky(Md)
    Linv_K = sla.solve_triangular(L, Kd, lower=True)
    A = sla.solve_triangular(L, Linv_K.T, lower=True)
    A = 0.5 * (A + A.T)
    lam, W = np.linalg.eigh(A)
    V = sla.solve_triangular(L.T, W, lower=False)
    return lam, _sign_fix(V)


def residual_report(K, M, modeset: ModeSet) -> np.ndarray:
    """||K u_n - lambda_n M u_n|| / ||K u_n|| per mode."""
    U = modeset.modes
    KU = K @ U
    R = KU - (M @ U) * modeset.lambdas
    return np.linalg.norm(R, axis=0) / np.linalg.norm(KU, axis=0)


def _shift_invert_solver(K, M, sigma, opts):
    A = (K - sigma * M) if sigma else K
    if opts.inner == "lu":
        lu = spla.splu(sp.csc_matrix(A))
        return lambda b: lu.solve(b)

    def solve(b):
        x, _, _ = pcg(A, b, tol=min(opts.cg_tol, 1e-12), max_iter=opts.max_iter)
        return x
    return solve


def eigs_smallest(K, M, k: int, opts: SolveOptions | None = None,
                  mesh_fingerprint=None, dofmap=None) -> ModeSet:
    """The k eigenpairs of K u = lambda M u nearest the shift (default 0).

    Thick-restart Lanczos on (K - sigma M)^{-1} M in the M-inner product with
    full (two-pass) reorthogonalization.  Converged Ritz vectors are locked
    and kept M-orthogonal to the active basis.  Once k pairs are locked, a
    fresh random start deflated against them checks that no eigenvalue
    nearer the shift was missed (multiplicities).
    """
    opts = opts or SolveOptions()
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"requested {k} modes but only {n} free dofs exist")
    sigma = float(opts.shift)
    try:
        inner = _shift_invert_solver(K, M, sigma, opts)
    except RuntimeError as exc:
        raise SolverError(f"factorization of K - sigma M failed: {exc}") from exc

    def op(x):
        y = inner(M @ x)
        if not np.all(np.isfinite(y)):
            raise SolverError("inner solve produced non-finite values")
        return y

    rng = np.random.default_rng(opts.seed)
    ncv = opts.ncv or max(2 * k + 10, 40)
    X = np.zeros((n, 0))  # locked vectors
    MX = np.zeros((n, 0))
    x_lam = []

    def orthogonalize(v, V, MV):
        for _ in range(2):
            if X.shape[1]:
                v = v - X @ (MX.T @ v)
            if V.shape[1]:
                v = v - V @ (MV.T @ v)
        Mv = M @ v
        return v, Mv, float(np.sqrt(max(v @ Mv, 0.0)))

    def random_start(V, MV):
        for _ in range(5):
            v0 = rng.standard_normal(n)
            v0 /= np.sqrt(v0 @ (M @ v0))
            v, Mv, nrm = orthogonalize(v0, V, MV)
            if nrm > 1e-8:
                return v / nrm, Mv / nrm
        return None, None

    V = np.zeros((n, 0))
    MV = np.zeros((n, 0))
    W = np.zeros((n, 0))
    pending = None  # continuation vector (unnormalized)
    verifying = False
    breakdowns = 0

    for cycle in range(opts.max_restarts):
        room = n - X.shape[1]
        target = min(ncv, room)
        # extend the Krylov basis
        while V.shape[1] < target:
            if pending is None:
                q, Mq = random_start(V, MV)
                if q is None:
                    break
            else:
                before = float(np.sqrt(max(pending @ (M @ pending), 0.0)))
                q, Mq, nrm = orthogonalize(pending, V, MV)
                if nrm <= 1e-10 * max(before, 1e-300):
                    breakdowns += 1
                    if breakdowns > 10 * opts.max_restarts:
                        raise SolverError("Lanczos breakdown: repeated invariant subspaces")
                    q, Mq = random_start(V, MV)
                    if q is None:
                        break
                else:
                    q, Mq = q / nrm, Mq / nrm
            V = np.column_stack([V, q])
            MV = np.column_stack([MV, Mq])
            w = op(q)
            W = np.column_stack([W, w])
            pending = w

        if V.shape[1] == 0:
            break
        H = MV.T @ W
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        order = np.argsort(-np.abs(theta), kind="stable")
        theta, S = theta[order], S[:, order]
        Y = V @ S
        MY = MV @ S
        WY = W @ S
        ritz_lam = sigma + 1.0 / theta

        # how many Ritz values still matter
        if len(x_lam) < k:
            wanted = k - len(x_lam)
        else:
            kth = np.sort(np.abs(np.array(x_lam) - sigma))[k - 1]
            wanted = int(np.sum(np.abs(ritz_lam - sigma) < kth * (1 - 1e-12)))
        wanted = min(wanted, len(theta))

        KY = K @ Y[:, :wanted]
        rq = np.einsum("ij,ij->j", Y[:, :wanted], KY)
        res = np.linalg.norm(KY - MY[:, :wanted] * rq, axis=0) / np.linalg.norm(KY, axis=0)
        converged = np.flatnonzero(res <= opts.eig_tol)
        exhausted = X.shape[1] + V.shape[1] >= n
        if exhausted:
            converged = np.arange(wanted)

        if len(converged):
            X = np.column_stack([X, Y[:, converged]])
            MX = np.column_stack([MX, MY[:, converged]])
            x_lam.extend(rq[converged].tolist())
        log.debug("cycle %d: basis %d, locked %d, wanted %d, worst residual %.2e",
                  cycle, V.shape[1], X.shape[1], wanted, res.max() if wanted else 0.0)

        if len(x_lam) >= k and wanted == len(converged):
            if exhausted or X.shape[1] >= n or (verifying and not len(converged)):
                break
            # deflated restart from a fresh vector to expose missed copies
            verifying = True
            V, MV, W = np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((n, 0))
            pending = None
            continue

        # continuation vector is orthogonal to the whole old basis
        nxt = pending
        if nxt is not None:
            nxt, _, _ = orthogonalize(nxt, V, MV)
        keep_idx = np.setdiff1d(np.arange(len(theta)), converged)
        n_keep = min(len(keep_idx), max(wanted - len(converged), 1) + max(k // 2, 5),
                     max(target - 5, 1))
        keep_idx = keep_idx[:n_keep]
        V, MV, W = Y[:, keep_idx], MY[:, keep_idx], WY[:, keep_idx]
        pending = nxt
    else:
        raise SolverError(
            f"Lanczos failed to converge {k} modes in {opts.max_restarts} restarts "
            f"({len(x_lam)} locked)"
        )

    if len(x_lam) < k:
        raise SolverError(f"only {len(x_lam)} of {k} modes converged")
    lam = np.array(x_lam)
    order = np.argsort(np.abs(lam - sigma), kind="stable")[:k]
    order = order[np.argsort(lam[order], kind="stable")]
    U = _sign_fix(X[:, order])
    lam = np.einsum("ij,ij->j", U, K @ U) / np.einsum("ij,ij->j", U, M @ U)
    tolerances = {"eig_tol": opts.eig_tol, "cg_tol": opts.cg_tol, "shift": sigma}
    return ModeSet(lam, U, tolerances, mesh_fingerprint, dofmap)
