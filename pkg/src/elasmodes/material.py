"""Elastic tensors, densities and the hypotheses they must satisfy.

Voigt ordering is (11, 22, 33, 23, 13, 12) everywhere.  Strains are stored
with *tensor* shear components (eps_23, not gamma_23 = 2 eps_23); the
factor-2 conversion to engineering shear lives in this module only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# Mandel weights: sqrt(2) on shear rows/columns
_MANDEL = np.array([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])


def _voigt_index(i, j):
    if i == j:
        return i
    return 6 - i - j


class MaterialError(ValueError):
    """Raised for material parameters that break the elastic hypotheses."""


@dataclass(frozen=True)
class ElasticTensor:
    """Fourth-order elastic tensor in symmetric 6x6 Voigt storage (Pa)."""

    voigt: np.ndarray

    def __post_init__(self):
        v = np.array(self.voigt, dtype=float)
        if v.shape != (6, 6):
            raise MaterialError(f"Voigt matrix must be 6x6, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise MaterialError("elastic moduli must be finite")
        scale = max(np.abs(v).max(), 1e-300)
        if np.abs(v - v.T).max() > 1e-12 * scale:
            raise MaterialError("Voigt matrix is not symmetric")
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "voigt", v)

    @property
    def mandel(self) -> np.ndarray:
        """Mandel-scaled 6x6 matrix whose spectrum is that of S -> C:S."""
        return self.voigt * np.outer(_MANDEL, _MANDEL)

    def full(self) -> np.ndarray:
        """Expand to the 3x3x3x3 component array."""
        c = np.empty((3, 3, 3, 3))
        for i in range(3):
            for j in range(3):
                a = _voigt_index(i, j)
                for k in range(3):
                    for l in range(3):
                        c[i, j, k, l] = self.voigt[a, _voigt_index(k, l)]
        return c


@dataclass(frozen=True)
class SymStrain:
    """Symmetric 3x3 tensor stored as six Voigt components with tensor shear.

    Used for strains and, as the output of :func:`apply`, for stresses.
    """

    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float).reshape(6)
        if not np.all(np.isfinite(c)):
            raise MaterialError("strain components must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @classmethod
    def from_matrix(cls, s) -> "SymStrain":
        s = np.asarray(s, dtype=float)
        if np.abs(s - s.T).max() > 1e-12 * max(np.abs(s).max(), 1e-300):
            raise MaterialError("strain matrix is not symmetric")
        return cls([s[i, j] for i, j in VOIGT_PAIRS])

    @classmethod
    def from_engineering(cls, e) -> "SymStrain":
        """Build from Voigt components whose shear entries are gamma = 2 eps."""
        e = np.asarray(e, dtype=float).copy()
        e[3:] *= 0.5
        return cls(e)

    def engineering(self) -> np.ndarray:
        e = self.components.copy()
        e[3:] *= 2.0
        return e

    def matrix(self) -> np.ndarray:
        s = np.empty((3, 3))
        for a, (i, j) in enumerate(VOIGT_PAIRS):
            s[i, j] = s[j, i] = self.components[a]
        return s

    def __add__(self, other):
        return SymStrain(self.components + other.components)

    def __mul__(self, scalar):
        return SymStrain(self.components * scalar)

    __rmul__ = __mul__


def double_dot(s, t) -> float:
    """S:T for two symmetric tensors (SymStrain or 3x3 arrays)."""
    s = s.matrix() if isinstance(s, SymStrain) else np.asarray(s)
    t = t.matrix() if isinstance(t, SymStrain) else np.asarray(t)
    return float(np.sum(s * t))


def isotropic(lam: float, mu: float) -> ElasticTensor:
    """Isotropic tensor C_ijkl = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)."""
    if not (mu > 0 and 3 * lam + 2 * mu > 0):
        raise MaterialError(
            f"isotropic moduli lambda={lam}, mu={mu} are not positive definite "
            "(need mu > 0 and 3 lambda + 2 mu > 0)"
        )
    v = np.zeros((6, 6))
    v[:3, :3] = lam
    v[[0, 1, 2], [0, 1, 2]] = lam + 2 * mu
    v[[3, 4, 5], [3, 4, 5]] = mu
    return ElasticTensor(v)


def from_young_poisson(young: float, poisson: float) -> ElasticTensor:
    lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
    mu = young / (2 * (1 + poisson))
    return isotropic(lam, mu)


def from_full_tensor(c, tol: float = 1e-12) -> ElasticTensor:
    """Collapse a 3x3x3x3 array to Voigt form after checking all symmetries.

    ``tol`` is relative to the largest entry magnitude.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (3, 3, 3, 3):
        raise MaterialError(f"expected a 3x3x3x3 tensor, got shape {c.shape}")
    scale = max(np.abs(c).max(), 1e-300)
    worst, where = 0.0, None
    for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
        diff = np.abs(c - c.transpose(perm))
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        if diff[idx] > worst:
            worst, where = diff[idx], idx
    if worst > tol * scale:
        i, j, k, l = (int(x) + 1 for x in where)
        raise MaterialError(
            f"tensor symmetry violated at C_{i}{j}{k}{l} "
            f"(relative deviation {worst / scale:.3e} > {tol:.1e})"
        )
    v = np.empty((6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            v[a, b] = c[i, j, k, l]
    return ElasticTensor(v)


def apply(C: ElasticTensor, S) -> SymStrain:
    """Stress C:S for a symmetric strain S."""
    if not isinstance(S, SymStrain):
        S = SymStrain.from_matrix(S)
    return SymStrain(C.voigt @ S.engineering())


def coercivity_constant(C: ElasticTensor) -> float:
    """Tight alpha with S:C:S >= alpha |S|_F^2 over symmetric S.

    Returned as-is when non-positive so callers can reject the material.
    """
    lo = float(np.linalg.eigvalsh(C.mandel)[0])
    # eigvalsh of the zero matrix can return -0.0
    return lo + 0.0


@dataclass(frozen=True)
class MaterialField:
    """Piecewise-constant elastic tensor and density, one entry per element."""

    tensors: tuple
    density: np.ndarray
    beta: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        rho = np.array(self.density, dtype=float).reshape(-1)
        if len(rho) != len(self.tensors):
            raise MaterialError(
                f"{len(self.tensors)} tensors but {len(rho)} densities"
            )
        rho.setflags(write=False)
        object.__setattr__(self, "density", rho)
        object.__setattr__(self, "tensors", tuple(self.tensors))

    @classmethod
    def homogeneous(cls, C: ElasticTensor, rho: float, n_elements: int,
                    beta=0.0, alpha=0.0) -> "MaterialField":
        return cls((C,) * n_elements, np.full(n_elements, float(rho)),
                   beta=beta, alpha=alpha)

    def __len__(self):
        return len(self.tensors)

    def voigt_stack(self) -> np.ndarray:
        # (n_elem, 6, 6); shared tensor objects are expanded once each
        cache = {}
        out = np.empty((len(self.tensors), 6, 6))
        for e, C in enumerate(self.tensors):
            key = id(C)
            if key not in cache:
                cache[key] = C.voigt
            out[e] = cache[key]
        return out

    def scaled_density(self, factor: float) -> "MaterialField":
        return MaterialField(self.tensors, self.density * factor,
                             beta=self.beta * factor, alpha=self.alpha)


@dataclass
class ValidationReport:
    element_alpha: np.ndarray
    alpha: float
    beta: float
    alpha_floor: float
    beta_floor: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "alpha": self.alpha,
            "beta": self.beta,
            "alpha_floor": self.alpha_floor,
            "beta_floor": self.beta_floor,
            "failures": list(self.failures),
        }


def validate_field(mf: MaterialField) -> ValidationReport:
    """Check positive definiteness and the density floor element by element."""
    cache = {}
    elem_alpha = np.empty(len(mf))
    for e, C in enumerate(mf.tensors):
        if id(C) not in cache:
            cache[id(C)] = coercivity_constant(C)
        elem_alpha[e] = cache[id(C)]
    rho = mf.density
    failures = []
    for e in np.flatnonzero(~(elem_alpha > 0)):
        failures.append(f"element {e}: tensor not positive definite "
                        f"(min Mandel eigenvalue {elem_alpha[e]:.6g} Pa)")
    for e in np.flatnonzero((elem_alpha > 0) & (elem_alpha < mf.alpha)):
        failures.append(f"element {e}: coercivity {elem_alpha[e]:.6g} Pa "
                        f"below declared alpha {mf.alpha:.6g}")
    for e in np.flatnonzero(~np.isfinite(rho) | ~(rho > 0) | (rho < mf.beta)):
        failures.append(
            f"element {e}: density {rho[e]:.6g} violates rho >= beta = "
            f"{mf.beta:.6g} > 0"
        )
    return ValidationReport(
        element_alpha=elem_alpha,
        alpha=float(elem_alpha.min()) if len(mf) else float("nan"),
        beta=float(rho.min()) if len(mf) else float("nan"),
        alpha_floor=mf.alpha,
        beta_floor=mf.beta,
        failures=failures,
    )


def _tensor_from_entry(entry: dict, where: str) -> ElasticTensor:
    if "isotropic" in entry:
        iso = entry["isotropic"]
        try:
            return isotropic(float(iso["lambda"]), float(iso["mu"]))
        except KeyError as exc:
            raise MaterialError(f"{where}: isotropic entry missing {exc}") from None
    if "voigt" in entry:
        return ElasticTensor(np.asarray(entry["voigt"], dtype=float))
    raise MaterialError(f"{where}: need an 'isotropic' or 'voigt' entry")


def _tensor_from_entry_unchecked(entry: dict, where: str) -> ElasticTensor:
    # isotropic() rejects indefinite moduli; validation wants to see them
    if "isotropic" in entry:
        iso = entry["isotropic"]
        lam, mu = float(iso["lambda"]), float(iso["mu"])
        v = np.zeros((6, 6))
        v[:3, :3] = lam
        v[[0, 1, 2], [0, 1, 2]] = lam + 2 * mu
        v[[3, 4, 5], [3, 4, 5]] = mu
        return ElasticTensor(v)
    return _tensor_from_entry(entry, where)


def load_material_json(path, region_tags, strict: bool = False) -> MaterialField:
    """Read a material file and map its regions onto per-element tags.

    With ``strict=False`` indefinite isotropic moduli are accepted here so that
    :func:`validate_field` can report them per element.
    """
    with open(Path(path)) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "regions" not in doc:
        raise MaterialError(f"{path}: expected an object with a 'regions' map")
    make = _tensor_from_entry if strict else _tensor_from_entry_unchecked
    regions = {}
    for tag, entry in doc["regions"].items():
        where = f"{path}: region {tag}"
        if "density" not in entry:
            raise MaterialError(f"{where}: missing 'density'")
        regions[int(tag)] = (make(entry, where), float(entry["density"]))
    tensors, rho = [], []
    for e, tag in enumerate(np.asarray(region_tags, dtype=int)):
        if int(tag) not in regions:
            raise MaterialError(f"{path}: no material for region {tag} (element {e})")
        C, r = regions[int(tag)]
        tensors.append(C)
        rho.append(r)
    return MaterialField(tuple(tensors), np.array(rho),
                         beta=float(doc.get("beta", 0.0)),
                         alpha=float(doc.get("alpha", 0.0)))
