"""Frequency sweep of the modal harmonic response of a clamped box.

Prints the tip displacement amplitude against omega and the truncation
error of the modal series against a direct sparse solve.
"""
import argparse
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from elasmodes.assembly import assemble_traction_load
from elasmodes.material import MaterialField, isotropic
from elasmodes.mesh import generate_box
from elasmodes.modal import (ResonanceError, harmonic_coefficients, m_norm, project_sources,
                             synthesize)
from elasmodes.problems import build_problem
from elasmodes.solver import eigs_smallest


@dataclass
class SweepConfig:
    cells: tuple = (8, 2, 2)
    modes: int = 30
    points: int = 40
    max_ratio: float = 1.5  # sweep up to max_ratio * sqrt(lambda_max retained / 4)


def run(cfg: SweepConfig):
    mesh = generate_box(*cfg.cells, 2.0, 0.5, 0.5, dirichlet=("xmin",))
    p = build_problem(mesh, MaterialField.homogeneous(isotropic(1.0, 1.0), 1.0, mesh.n_tets))
    ms = eigs_smallest(p.K, p.M, cfg.modes)
    Ft = assemble_traction_load(mesh, p.dofmap, [0.0, 0.0, 1.0],
                                facets=mesh.facets_on_plane("xmax"))
    f_n, g_n = project_sources(ms, np.zeros_like(Ft), Ft)
    tip = np.isclose(mesh.nodes[:, 0], 2.0)
    top = cfg.max_ratio * np.sqrt(ms.lambdas[-1] / 4)
    print(f"{'omega':>10} {'|u_z| tip':>12} {'rel err':>10}")
    for w in np.linspace(0.05, top, cfg.points):
        try:
            u = synthesize(ms, harmonic_coefficients(ms, f_n, g_n, w))
        except ResonanceError as exc:
            print(f"{w:10.4f} {'resonant':>12} (mode {exc.mode})")
            continue
        direct = spla.spsolve((p.K - w * w * p.M).tocsc(), Ft)
        err = m_norm(p.M, u - direct) / m_norm(p.M, direct)
        amp = np.abs(p.dofmap.to_nodal(u)[tip, 2]).mean()
        print(f"{w:10.4f} {amp:12.4e} {err:10.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, default=SweepConfig.modes)
    ap.add_argument("--points", type=int, default=SweepConfig.points)
    a = ap.parse_args()
    run(SweepConfig(modes=a.modes, points=a.points))
