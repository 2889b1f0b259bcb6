"""Modal superposition for static, time-harmonic and time-domain responses.

Coefficients follow from projecting the load vectors on M-orthonormal modes:
static ``alpha_n = (f_n + g_n) / lambda_n`` and harmonic
``alpha_n(w) = (f_n + g_n) / (lambda_n - w**2)``.  Time signals use the
``exp(+i w t)`` convention and are the real part of a finite frequency sum.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import DofMap, loads_from_dict
from .mesh import Mesh
from .solver import ModeSet

DEFAULT_GUARD = 1e-6


class ResonanceError(ArithmeticError):
    def __init__(self, mode: int, gap: float, omega: float, lam: float):
        super().__init__(
            f"omega={omega:.9g} rad/s is resonant with mode {mode} "
            f"(lambda={lam:.9g}, |lambda - omega^2| = {gap:.3e})"
        )
        self.mode = mode
        self.gap = gap
        self.omega = omega


@dataclass(frozen=True)
class ModalCoefficients:
    alpha: np.ndarray
    f_n: np.ndarray
    g_n: np.ndarray
    omega: float | None = None

    def __post_init__(self):
        for name in ("alpha", "f_n", "g_n"):
            arr = np.asarray(getattr(self, name))
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if not (len(self.alpha) == len(self.f_n) == len(self.g_n)):
            raise ValueError("alpha, f_n, g_n must have equal length")

    def __len__(self):
        return len(self.alpha)


@dataclass(frozen=True)
class FrequencyComponent:
    """One spectral line: angular frequency and complex source amplitudes.

    ``body`` is a 3-vector or one row per element; ``traction`` maps facet
    selectors to 3-vectors.
    """

    omega: float
    body: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=complex))
    traction: dict = field(default_factory=dict)

    def scaled(self, factor) -> "FrequencyComponent":
        return FrequencyComponent(
            self.omega, np.asarray(self.body) * factor,
            {k: np.asarray(v) * factor for k, v in self.traction.items()})

    def loads(self, mesh: Mesh, dofmap: DofMap):
        doc = {"body_force": np.asarray(self.body, dtype=complex),
               "traction": {k: np.asarray(v, dtype=complex) for k, v in self.traction.items()}}
        return loads_from_dict(doc, mesh, dofmap, complex_ok=False)


@dataclass(frozen=True)
class FrequencySpectrum:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        omegas = [c.omega for c in comps]
        if len(set(omegas)) != len(omegas):
            raise ValueError("spectrum frequencies must be distinct")
        for c in comps:
            if not np.isfinite(c.omega) or not np.all(np.isfinite(np.asarray(c.body))):
                raise ValueError(f"non-finite amplitude at omega={c.omega}")
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def shifted(self, delta: float) -> "FrequencySpectrum":
        """Amplitudes multiplied by exp(i w delta)."""
        return FrequencySpectrum(tuple(c.scaled(np.exp(1j * c.omega * delta))
                                       for c in self.components))


def project_sources(modeset: ModeSet, F_body, F_trac):
    """f_n = u_n . F_body and g_n = u_n . F_trac."""
    F_body, F_trac = np.asarray(F_body), np.asarray(F_trac)
    for name, F in (("body", F_body), ("traction", F_trac)):
        if F.shape != (modeset.n_dofs,):
            raise ValueError(
                f"{name} load has shape {F.shape}; modes live on {modeset.n_dofs} dofs"
            )
    U = modeset.modes
    return U.T @ F_body, U.T @ F_trac


def static_coefficients(modeset: ModeSet, f_n, g_n) -> ModalCoefficients:
    f_n, g_n = np.asarray(f_n), np.asarray(g_n)
    lam = modeset.lambdas[:len(f_n)]
    return ModalCoefficients((f_n + g_n) / lam, f_n, g_n)


def harmonic_coefficients(modeset: ModeSet, f_n, g_n, omega: float,
                          guard: float = DEFAULT_GUARD) -> ModalCoefficients:
    """alpha_n(w) = (f_n + g_n) / (lambda_n - w^2); resonance raises."""
    f_n, g_n = np.asarray(f_n), np.asarray(g_n)
    lam = modeset.lambdas[:len(f_n)]
    gap = lam - omega * omega
    bad = np.flatnonzero(np.abs(gap) <= guard * lam)
    if len(bad):
        n = int(bad[0])
        raise ResonanceError(n, float(abs(gap[n])), omega, float(lam[n]))
    return ModalCoefficients((f_n + g_n) / gap, f_n, g_n, omega=float(omega))


def synthesize(modeset: ModeSet, coeffs, dofmap: DofMap | None = None):
    """Truncated series sum_n alpha_n u_n.

    Returns the free-dof vector, or an (n_nodes, 3) field with zeros on
    clamped nodes when ``dofmap`` is given.
    """
    alpha = coeffs.alpha if isinstance(coeffs, ModalCoefficients) else np.asarray(coeffs)
    if len(alpha) > modeset.count:
        raise ValueError(f"{len(alpha)} coefficients but only {modeset.count} modes")
    u = modeset.modes[:, :len(alpha)] @ alpha
    return dofmap.to_nodal(u) if dofmap is not None else u


def harmonic_fields(modeset: ModeSet, spectrum: FrequencySpectrum, mesh: Mesh,
                    dofmap: DofMap, guard: float = DEFAULT_GUARD):
    """Per-frequency complex free-dof fields and their coefficients."""
    fields, coeffs = [], []
    for comp in spectrum:
        F_body, F_trac = comp.loads(mesh, dofmap)
        f_n, g_n = project_sources(modeset, F_body, F_trac)
        c = harmonic_coefficients(modeset, f_n, g_n, comp.omega, guard)
        coeffs.append(c)
        fields.append(synthesize(modeset, c))
    return fields, coeffs


def dynamic_synthesize(modeset: ModeSet, spectrum: FrequencySpectrum, times,
                       mesh: Mesh, dofmap: DofMap, guard: float = DEFAULT_GUARD):
    """U(t) = Re sum_j exp(i w_j t) sum_n alpha_n(w_j) u_n, one row per time."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if len(spectrum) == 0:
        return np.zeros((len(times), modeset.n_dofs))
    fields, _ = harmonic_fields(modeset, spectrum, mesh, dofmap, guard)
    Z = np.column_stack(fields)  # (n_dofs, n_freq)
    omegas = np.array([c.omega for c in spectrum])
    phase = np.exp(1j * np.outer(times, omegas))  # (n_times, n_freq)
    return (phase @ Z.T).real


@dataclass
class TruncationReport:
    tail: np.ndarray
    energy_fraction: np.ndarray
    relative_error: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {"tail": self.tail.tolist(), "energy_fraction": self.energy_fraction.tolist()}
        if self.relative_error is not None:
            out["relative_error"] = self.relative_error.tolist()
        return out


def truncation_report(modeset: ModeSet, coeffs, direct=None, M=None) -> TruncationReport:
    """Empirical truncation data for N = 0 .. len(coeffs) - 1.

    ``energy_fraction[N]`` is sum_{n<=N} |alpha_n|^2 over the total, taken as
    1 when every coefficient vanishes.  With a direct solution and the mass
    matrix, ``relative_error[N]`` is the M-norm error of the N-truncated
    series relative to the direct solution.
    """
    alpha = coeffs.alpha if isinstance(coeffs, ModalCoefficients) else np.asarray(coeffs)
    energy = np.abs(alpha) ** 2
    total = energy.sum()
    fraction = np.cumsum(energy) / total if total > 0 else np.ones(len(alpha))
    err = None
    if direct is not None:
        if M is None:
            raise ValueError("the mass matrix is needed to measure the error")
        direct = np.asarray(direct)
        partial = np.cumsum(modeset.modes[:, :len(alpha)] * alpha, axis=1)
        diff = direct[:, None] - partial
        num = np.sqrt(np.abs(np.einsum("ij,ij->j", diff.conj(), M @ diff)))
        den = np.sqrt(abs(np.vdot(direct, M @ direct)))
        err = num / den if den > 0 else num
    return TruncationReport(np.abs(alpha), fraction, err)


def m_norm(M, u) -> float:
    return float(np.sqrt(abs(np.vdot(u, M @ u))))


def coefficient_table(modeset: ModeSet, coeffs: ModalCoefficients) -> list:
    rows = []
    for n in range(len(coeffs)):
        a, f, g = complex(coeffs.alpha[n]), complex(coeffs.f_n[n]), complex(coeffs.g_n[n])
        rows.append({"n": n, "lambda": float(modeset.lambdas[n]),
                     "f_n": [f.real, f.imag], "g_n": [g.real, g.imag],
                     "alpha": [a.real, a.imag]})
    return rows


def _complex_vec(value, where):
    arr = np.asarray(value, dtype=float)
    if arr.ndim >= 2 and arr.shape[-1] == 2:
        arr = arr[..., 0] + 1j * arr[..., 1]
    if arr.shape[-1:] != (3,):
        raise ValueError(f"{where}: expected 3 components, each real or [re, im]")
    return arr.astype(complex)


def spectrum_from_list(doc) -> FrequencySpectrum:
    if not isinstance(doc, list):
        raise ValueError("spectrum document must be a JSON list")
    comps = []
    for j, item in enumerate(doc):
        if "omega" not in item:
            raise ValueError(f"spectrum entry {j} lacks 'omega'")
        body = _complex_vec(item.get("body", [0, 0, 0]), f"entry {j} body")
        trac = {str(k): _complex_vec(v, f"entry {j} traction[{k}]")
                for k, v in (item.get("traction") or {}).items()}
        comps.append(FrequencyComponent(float(item["omega"]), body, trac))
    return FrequencySpectrum(tuple(comps))


def load_spectrum_json(path) -> FrequencySpectrum:
    with open(Path(path)) as fh:
        return spectrum_from_list(json.load(fh))
