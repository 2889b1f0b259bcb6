"""Write a small set of CLI input files (mesh, material, sources, spectrum)."""
import argparse
import json
from pathlib import Path

from elasmodes.mesh import generate_box, save_mesh_json, write_gmsh_msh2


def main(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    mesh = generate_box(6, 2, 2, 2.0, 0.5, 0.5, dirichlet=("xmin",))
    save_mesh_json(mesh, out / "beam.json")
    write_gmsh_msh2(mesh, out / "beam.msh", dirichlet_tag=1, neumann_tag=2)
    material = {"regions": {"0": {"isotropic": {"lambda": 1.0, "mu": 1.0}, "density": 1.0}},
                "beta": 0.5}
    sources = {"body_force": [0.0, 0.0, -0.1], "traction": {"xmax": [0.0, 0.0, 1.0]}}
    spectrum = [{"omega": 0.05, "traction": {"xmax": [0.0, 0.0, 1.0]}},
                {"omega": 0.4, "body": [[0.0, 0.0], [0.1, 0.05], [0.0, 0.0]]}]
    for name, doc in (("material.json", material), ("sources.json", sources),
                      ("spectrum.json", spectrum)):
        (out / name).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote demo inputs to {out}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", nargs="?", default="demo")
    main(Path(ap.parse_args().out))
