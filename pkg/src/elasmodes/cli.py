"""Command-line front end: validate, modes, static, harmonic, dynamic.

Exit codes: 0 success, 2 usage / bad input, 3 material validation failure,
4 solver failure, 5 resonance, 6 invalid mesh.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import io
from .assembly import (AssemblyError, assemble_mass, assemble_stiffness, build_dofmap,
                       load_sources_json)
from .material import MaterialError, load_material_json, validate_field
from .mesh import MeshError, load_gmsh_msh2, load_mesh_json
from .modal import (ResonanceError, coefficient_table, harmonic_coefficients,
                    harmonic_fields, load_spectrum_json, m_norm, project_sources,
                    static_coefficients, synthesize, truncation_report)
from .solver import SolveOptions, SolverError, eigs_smallest, residual_report, solve_static

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_SOLVER, EXIT_RESONANCE, EXIT_MESH = 0, 2, 3, 4, 5, 6

log = logging.getLogger("elasmodes")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _require_file(path, flag):
    if path is None:
        raise CliError(f"{flag} is required", EXIT_USAGE)
    if not Path(path).is_file():
        raise CliError(f"{flag}: no such file {path}", EXIT_USAGE)
    return Path(path)


def _load_mesh(args):
    path = _require_file(args.mesh, "--mesh")
    try:
        if path.suffix == ".msh":
            return load_gmsh_msh2(path, args.dirichlet_tags, args.neumann_tags)
        return load_mesh_json(path)
    except MeshError as exc:
        raise CliError(f"invalid mesh: {exc}", EXIT_MESH) from None
    except (ValueError, KeyError, IndexError) as exc:
        raise CliError(f"cannot parse mesh {path}: {exc}", EXIT_MESH) from None


def _load_material(args, mesh):
    path = _require_file(args.material, "--material")
    try:
        return load_material_json(path, mesh.regions)
    except (MaterialError, ValueError, KeyError) as exc:
        raise CliError(f"invalid material file: {exc}", EXIT_INVALID) from None


def _options(args) -> SolveOptions:
    try:
        return SolveOptions(cg_tol=args.tol_cg, eig_tol=args.tol_eig)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _inputs(args):
    names = ("mesh", "material", "sources", "spectrum", "modes_file")
    return {n: getattr(args, n, None) for n in names if getattr(args, n, None)}


def _tolerances(args, opts=None):
    tol = {"tol_cg": args.tol_cg, "tol_eig": args.tol_eig, "guard": args.guard}
    if opts is not None:
        tol["shift"] = opts.shift
    return tol


def _finish(args, out, outputs):
    prov = io.provenance(_inputs(args), _tolerances(args), outputs)
    io.write_json(out / "provenance.json", prov)


def _problem(args):
    mesh = _load_mesh(args)
    material = _load_material(args, mesh)
    report = validate_field(material)
    if not report.passed:
        raise CliError("material validation failed: " + "; ".join(report.failures[:5]),
                       EXIT_INVALID)
    dofmap = build_dofmap(mesh)
    K = assemble_stiffness(mesh, material, dofmap)
    M = assemble_mass(mesh, material, dofmap)
    return mesh, material, dofmap, K, M


def cmd_validate(args) -> int:
    _require_file(args.mesh, "--mesh")
    _require_file(args.material, "--material")
    out = _out_dir(args)
    doc = {"provenance": io.provenance(_inputs(args), _tolerances(args))}
    try:
        mesh = _load_mesh(args)
    except CliError as exc:
        if exc.code == EXIT_MESH:
            doc["mesh"] = {"passed": False, "error": str(exc)}
            io.write_json(out / "validation.json", doc)
        raise
    doc["mesh"] = {
        "passed": True,
        "fingerprint": mesh.fingerprint(),
        "n_nodes": mesh.n_nodes,
        "n_tets": mesh.n_tets,
        "n_facets": len(mesh.facets),
        "n_dirichlet_facets": int(mesh.dirichlet.sum()),
        "volume": float(mesh.volumes.sum()),
        "free_dofs": build_dofmap(mesh).n_free,
    }
    material = _load_material(args, mesh)
    report = validate_field(material)
    doc["material"] = report.to_dict()
    io.write_json(out / "validation.json", doc)
    print(f"mesh ok ({mesh.n_tets} tets); alpha={report.alpha:.6g} Pa, "
          f"beta={report.beta:.6g} kg/m^3: {'PASS' if report.passed else 'FAIL'}")
    for line in report.failures:
        print("  " + line, file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_modes(args) -> int:
    out = _out_dir(args)
    opts = _options(args)
    mesh, _, dofmap, K, M = _problem(args)
    k = args.num_modes
    if not 1 <= k <= dofmap.n_free:
        raise CliError(f"--num-modes {k} must lie in [1, {dofmap.n_free}] (free dofs)",
                       EXIT_USAGE)
    ms = eigs_smallest(K, M, k, opts, mesh_fingerprint=mesh.fingerprint())
    res = residual_report(K, M, ms)
    outputs = [out / "modes.bin"]
    io.write_modeset(ms, outputs[0])
    if dofmap.n_free * k <= args.json_export_limit:
        outputs.append(out / "modes.json")
        io.write_modeset_json(ms, outputs[-1])
    for n in range(k):
        path = out / f"mode_{n:03d}.vtk"
        io.write_vtk(path, mesh, {"mode": dofmap.to_nodal(ms.modes[:, n])},
                     title=f"mode {n} lambda={ms.lambdas[n]:.12g}")
        outputs.append(path)
    summary = {
        "lambdas": ms.lambdas.tolist(),
        "omegas": np.sqrt(ms.lambdas).tolist(),
        "residuals": res.tolist(),
        "orthonormality_deviation": ms.orthonormality_error(M),
        "free_dofs": dofmap.n_free,
        "mesh_fingerprint": ms.mesh_fingerprint,
        "provenance": io.provenance(_inputs(args), _tolerances(args, opts)),
    }
    io.write_json(out / "modes_summary.json", summary)
    outputs.append(out / "modes_summary.json")
    _finish(args, out, outputs)
    for n, lam in enumerate(ms.lambdas):
        print(f"mode {n:3d}  lambda={lam:.10g}  residual={res[n]:.2e}")
    return EXIT_OK


def _modeset_for(args, mesh, dofmap):
    path = _require_file(args.modes_file, "--modes-file")
    try:
        ms = io.read_modeset(path)
    except (io.FormatError, ValueError, KeyError) as exc:
        raise CliError(f"unreadable ModeSet container: {exc}", EXIT_USAGE) from None
    if ms.mesh_fingerprint != mesh.fingerprint():
        raise CliError(
            f"mesh fingerprint mismatch: modes were computed on {ms.mesh_fingerprint}, "
            f"mesh is {mesh.fingerprint()}", EXIT_USAGE)
    if ms.n_dofs != dofmap.n_free:
        raise CliError("ModeSet dof count does not match the mesh", EXIT_USAGE)
    if args.num_modes is not None:
        if not 1 <= args.num_modes <= ms.count:
            raise CliError(f"--num-modes must lie in [1, {ms.count}]", EXIT_USAGE)
        ms = ms.truncated(args.num_modes)
    return ms


def _sources(args, mesh, dofmap, complex_ok=False):
    path = _require_file(args.sources, "--sources")
    try:
        return load_sources_json(path, mesh, dofmap, complex_ok)
    except (AssemblyError, ValueError, KeyError) as exc:
        raise CliError(f"invalid sources: {exc}", EXIT_USAGE) from None


def cmd_static(args) -> int:
    out = _out_dir(args)
    opts = _options(args)
    mesh, _, dofmap, K, M = _problem(args)
    F_body, F_trac = _sources(args, mesh, dofmap)
    F = F_body + F_trac
    doc = {"provenance": io.provenance(_inputs(args), _tolerances(args, opts))}
    outputs = []
    direct = None
    if args.direct or args.compare_direct:
        direct = solve_static(K, F, opts)
        doc["work_balance"] = abs(direct @ (K @ direct) - direct @ F) / max(direct @ (K @ direct), 1e-300)
    if args.direct:
        path = out / "static_direct.vtk"
        io.write_vtk(path, mesh, {"displacement": dofmap.to_nodal(direct)})
        outputs.append(path)
    else:
        ms = _modeset_for(args, mesh, dofmap)
        f_n, g_n = project_sources(ms, F_body, F_trac)
        coeffs = static_coefficients(ms, f_n, g_n)
        u = synthesize(ms, coeffs)
        fields = {"displacement": dofmap.to_nodal(u)}
        doc["coefficients"] = coefficient_table(ms, coeffs)
        doc["truncation"] = truncation_report(ms, coeffs, direct, M).to_dict()
        if direct is not None:
            fields["direct"] = dofmap.to_nodal(direct)
            doc["relative_error"] = m_norm(M, u - direct) / max(m_norm(M, direct), 1e-300)
        path = out / "static.vtk"
        io.write_vtk(path, mesh, fields)
        outputs.append(path)
    io.write_json(out / "static.json", doc)
    outputs.append(out / "static.json")
    _finish(args, out, outputs)
    if "relative_error" in doc:
        print(f"relative L2_rho error vs direct solve: {doc['relative_error']:.3e}")
    return EXIT_OK


def _direct_harmonic(K, M, omega, F):
    A = (K - omega * omega * M).tocsc()
    return spla.spsolve(A.astype(complex), F.astype(complex))


def cmd_harmonic(args) -> int:
    out = _out_dir(args)
    opts = _options(args)
    if not args.omega:
        raise CliError("--omega is required", EXIT_USAGE)
    mesh, _, dofmap, K, M = _problem(args)
    F_body, F_trac = _sources(args, mesh, dofmap, complex_ok=True)
    ms = None if args.direct else _modeset_for(args, mesh, dofmap)
    doc = {"provenance": io.provenance(_inputs(args), _tolerances(args, opts)),
           "frequencies": []}
    outputs = []
    for j, omega in enumerate(args.omega):
        entry = {"omega": omega}
        fields = {}
        direct = None
        if args.direct or args.compare_direct:
            direct = _direct_harmonic(K, M, omega, F_body + F_trac)
            fields.update(direct_real=dofmap.to_nodal(direct.real),
                          direct_imag=dofmap.to_nodal(direct.imag))
        if ms is not None:
            f_n, g_n = project_sources(ms, F_body, F_trac)
            coeffs = harmonic_coefficients(ms, f_n, g_n, omega, args.guard)
            u = synthesize(ms, coeffs)
            fields.update(real=dofmap.to_nodal(u.real), imag=dofmap.to_nodal(u.imag))
            entry["coefficients"] = coefficient_table(ms, coeffs)
            if direct is not None:
                entry["relative_error"] = m_norm(M, u - direct) / max(m_norm(M, direct), 1e-300)
                print(f"omega={omega:.6g}: relative error vs direct {entry['relative_error']:.3e}")
        path = out / f"harmonic_{j:03d}.vtk"
        io.write_vtk(path, mesh, fields, title=f"harmonic omega={omega!r}")
        outputs.append(path)
        doc["frequencies"].append(entry)
    io.write_json(out / "harmonic.json", doc)
    outputs.append(out / "harmonic.json")
    _finish(args, out, outputs)
    return EXIT_OK


def _parse_times(text):
    if text is None:
        raise CliError("--times is required", EXIT_USAGE)
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise CliError("--times takes 't0,t1,...' or 'start:stop:count'", EXIT_USAGE) from None


def cmd_dynamic(args) -> int:
    out = _out_dir(args)
    opts = _options(args)
    times = _parse_times(args.times)
    mesh, _, dofmap, K, M = _problem(args)
    spectrum_path = _require_file(args.spectrum, "--spectrum")
    try:
        spectrum = load_spectrum_json(spectrum_path)
        spectrum_loads = [c.loads(mesh, dofmap) for c in spectrum]
    except (AssemblyError, ValueError, KeyError) as exc:
        raise CliError(f"invalid spectrum: {exc}", EXIT_USAGE) from None
    omegas = np.array([c.omega for c in spectrum])
    phase = np.exp(1j * np.outer(times, omegas)) if len(spectrum) else None
    doc = {"provenance": io.provenance(_inputs(args), _tolerances(args, opts)),
           "times": times.tolist(), "omegas": omegas.tolist()}
    signal = direct_signal = None
    if not args.direct:
        ms = _modeset_for(args, mesh, dofmap)
        fields, coeffs = harmonic_fields(ms, spectrum, mesh, dofmap, args.guard)
        doc["coefficients"] = [coefficient_table(ms, c) for c in coeffs]
        signal = (phase @ np.column_stack(fields).T).real if fields else \
            np.zeros((len(times), dofmap.n_free))
    if args.direct or args.compare_direct:
        fields_d = [_direct_harmonic(K, M, w, Fb + Ft) for w, (Fb, Ft) in zip(omegas, spectrum_loads)]
        direct_signal = (phase @ np.column_stack(fields_d).T).real if fields_d else \
            np.zeros((len(times), dofmap.n_free))
    if signal is not None and direct_signal is not None:
        doc["max_nodal_difference"] = float(np.abs(signal - direct_signal).max())
        print(f"max nodal difference vs direct recombination: {doc['max_nodal_difference']:.3e}")
    outputs = []
    for i, t in enumerate(times):
        fields = {}
        if signal is not None:
            fields["displacement"] = dofmap.to_nodal(signal[i])
        if direct_signal is not None:
            fields["direct"] = dofmap.to_nodal(direct_signal[i])
        path = out / f"dynamic_{i:04d}.vtk"
        io.write_vtk(path, mesh, fields, title=f"dynamic t={t!r}")
        outputs.append(path)
    io.write_json(out / "dynamic.json", doc)
    outputs.append(out / "dynamic.json")
    _finish(args, out, outputs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", help="mesh JSON or ASCII Gmsh 2.2 .msh file")
    common.add_argument("--material", help="material JSON file")
    common.add_argument("--dirichlet-tags", type=int, nargs="+", default=[1],
                        help="Gmsh physical tags of clamped triangles")
    common.add_argument("--neumann-tags", type=int, nargs="+", default=[2],
                        help="Gmsh physical tags of traction triangles")
    common.add_argument("--out-dir", default="out")
    common.add_argument("--tol-cg", type=float, default=1e-10)
    common.add_argument("--tol-eig", type=float, default=1e-8)
    common.add_argument("--guard", type=float, default=1e-6,
                        help="relative resonance gap |lambda_n - omega^2| / lambda_n")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="elasmodes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check mesh and material hypotheses")
    p = sub.add_parser("modes", parents=[common], help="compute M-orthonormal eigenmodes")
    p.add_argument("--num-modes", type=int, required=True)
    p.add_argument("--json-export-limit", type=int, default=200_000,
                   help="also write modes.json when free dofs x modes is at most this")
    for name, helptext in (("static", "modal static solution"),
                           ("harmonic", "modal time-harmonic solution"),
                           ("dynamic", "time signal from a finite spectrum")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--modes-file")
        p.add_argument("--num-modes", type=int, help="keep only the first N modes")
        p.add_argument("--direct", action="store_true", help="skip modes, solve directly")
        p.add_argument("--compare-direct", action="store_true")
        if name in ("static", "harmonic"):
            p.add_argument("--sources")
        if name == "harmonic":
            p.add_argument("--omega", type=float, nargs="+")
        if name == "dynamic":
            p.add_argument("--spectrum")
            p.add_argument("--times", help="'t0,t1,...' or 'start:stop:count'")
    return parser


COMMANDS = {"validate": cmd_validate, "modes": cmd_modes, "static": cmd_static,
            "harmonic": cmd_harmonic, "dynamic": cmd_dynamic}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ResonanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
