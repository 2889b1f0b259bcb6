"""Elastic eigenmodes of anisotropic bodies and modal solution synthesis."""

__version__ = "0.1.0"

from .material import (  # noqa: E402
    ElasticTensor, MaterialField, SymStrain, apply, coercivity_constant,
    from_full_tensor, isotropic, validate_field,
)
from .mesh import Mesh, facet_geometry, generate_box, load_gmsh_msh2, load_mesh_json  # noqa: E402
from .assembly import (  # noqa: E402
    DofMap, assemble_body_load, assemble_mass, assemble_stiffness,
    assemble_traction_load, build_dofmap,
)
from .solver import (  # noqa: E402
    ModeSet, SolveOptions, dense_eig_oracle, eigs_smallest, residual_report, solve_static,
)
from .modal import (  # noqa: E402
    FrequencyComponent, FrequencySpectrum, ModalCoefficients, ResonanceError,
    dynamic_synthesize, harmonic_coefficients, project_sources, static_coefficients,
    synthesize, truncation_report,
)
