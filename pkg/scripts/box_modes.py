"""Lowest eigenmodes of a clamped anisotropic box, timed, with diagnostics."""
import argparse
import time
from dataclasses import dataclass

import numpy as np

from elasmodes.material import MaterialField, isotropic
from elasmodes.mesh import generate_box
from elasmodes.problems import build_problem, random_anisotropic
from elasmodes.solver import SolveOptions, eigs_smallest, residual_report


@dataclass
class BoxConfig:
    cells: tuple = (16, 7, 7)
    size: tuple = (2.0, 1.0, 1.0)
    modes: int = 20
    anisotropic: bool = False
    seed: int = 0
    inner: str = "lu"


def run(cfg: BoxConfig):
    mesh = generate_box(*cfg.cells, *cfg.size, dirichlet=("xmin",))
    if cfg.anisotropic:
        rng = np.random.default_rng(cfg.seed)
        mat = MaterialField(tuple(random_anisotropic(rng) for _ in range(mesh.n_tets)),
                            rng.uniform(0.5, 2.0, mesh.n_tets))
    else:
        mat = MaterialField.homogeneous(isotropic(1.0, 1.0), 1.0, mesh.n_tets)
    p = build_problem(mesh, mat)
    t0 = time.perf_counter()
    ms = eigs_smallest(p.K, p.M, cfg.modes, SolveOptions(inner=cfg.inner))
    elapsed = time.perf_counter() - t0
    res = residual_report(p.K, p.M, ms)
    print(f"{p.dofmap.n_free} free dofs, {cfg.modes} modes in {elapsed:.2f}s")
    print(f"orthonormality deviation {ms.orthonormality_error(p.M):.2e}, "
          f"max residual {res.max():.2e}")
    for n, lam in enumerate(ms.lambdas):
        print(f"  {n:3d}  lambda={lam:.10g}  omega={np.sqrt(lam):.6g}  res={res[n]:.1e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, nargs=3, default=list(BoxConfig.cells))
    ap.add_argument("--modes", type=int, default=BoxConfig.modes)
    ap.add_argument("--anisotropic", action="store_true")
    ap.add_argument("--inner", choices=("lu", "cg"), default="lu")
    a = ap.parse_args()
    run(BoxConfig(cells=tuple(a.cells), modes=a.modes, anisotropic=a.anisotropic,
                  inner=a.inner))
