"""Time-domain acoustic scattering from impedance-type boundary conditions.

Galerkin boundary elements in space, BDF convolution quadrature in time,
with a semi-analytic spherical reference solution for validation.
"""

__version__ = "0.1.0"

from .assembly import (
    BemMatrixSet,
    assemble_boundary_ops,
    eval_double_layer,
    eval_representation,
    eval_single_layer,
)
from .calderon import (
    BlockSystem,
    CauchyData,
    assemble_block_system,
    build_b_imp,
    cauchy_identity_residual,
)
from .channel_mesh import build_channel_mesh, write_channel_off
from .cq import (
    CQScheme,
    apply_convolution,
    bdf_delta,
    frequency_apply,
    marching_cq_solve,
    operator_cq_solve,
    operator_weights,
    scalar_weights,
)
from .mesh import (
    MeshError,
    SurfaceMesh,
    enclosed_volume,
    load_mesh,
    make_icosphere,
    points_inside,
    save_mesh,
)
from .quadrature import QuadratureConfig
from .scattering import (
    DensityHistory,
    FieldHistory,
    PlaneGaussianWave,
    ScatterRun,
    SphericalGaussianWave,
    evaluate_field,
    incident_traces,
    scattered_field,
    solve_densities,
)
from .spaces import BoundarySpaces, build_spaces, estimate_vertex_curvature
from .sphere_reference import (
    SphereReferenceResult,
    reference_field_at,
    solve_reference_density,
)
from .transfer import (
    CurvatureMode,
    TransferKind,
    TransferSpec,
    principal_sqrt,
    sigma0,
    transfer_matrix,
)

__all__ = [name for name in dir() if not name.startswith("_")]
