"""Convergence of the first longitudinal eigenvalue of a fixed-free rod.

Refines the rod along its axis and reports the relative error against
(pi / 2L)^2 E / rho together with the observed convergence order.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from elasmodes.problems import axial_mode_index, rod, rod_axial_eigenvalue
from elasmodes.solver import eigs_smallest


@dataclass
class RodStudy:
    levels: tuple = (4, 8, 16, 32, 64)
    width: float = 0.25
    modes: int = 12


def run(cfg: RodStudy):
    exact = rod_axial_eigenvalue()
    print(f"exact axial eigenvalue {exact:.10f}")
    print(f"{'nx':>5} {'dofs':>7} {'index':>5} {'lambda':>14} {'rel err':>10} {'order':>6}")
    prev = None
    for nx in cfg.levels:
        p = rod(nx, width=cfg.width)
        ms = eigs_smallest(p.K, p.M, cfg.modes)
        j, _ = axial_mode_index(p, ms)
        err = abs(ms.lambdas[j] - exact) / exact
        order = "" if prev is None else f"{np.log2(prev / err):6.2f}"
        print(f"{nx:5d} {p.dofmap.n_free:7d} {j:5d} {ms.lambdas[j]:14.10f} {err:10.2e} {order}")
        prev = err


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=list(RodStudy.levels))
    ap.add_argument("--width", type=float, default=RodStudy.width)
    a = ap.parse_args()
    run(RodStudy(levels=tuple(a.levels), width=a.width))
