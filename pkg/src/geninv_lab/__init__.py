"""Generalized-inverse perturbation, fixed-rank operator charts and Frobenius integration on dense matrices."""
__version__ = "0.1.0"

from .charts import (
    OperatorPoint,
    OperatorSubspace,
    chart_derivative,
    chart_forward,
    chart_inverse,
    complement_space_basis,
    decompose_operator,
    tangent_space_basis,
    verify_chart_maps_manifold,
)
from .conjugacy import (
    ConjugacyPair,
    SmoothMap,
    build_phi,
    build_psi,
    invert_phi,
    local_conjugacy,
    verify_conjugacy,
)
from .exceptions import (
    ComplementError,
    DimensionError,
    DomainError,
    GenInvLabError,
    NeighborhoodError,
    NoConvergence,
    NotAGenInverse,
    NotCofinal,
    ParseError,
    SingularJacobian,
    StepError,
    UnknownExperiment,
)
from .frobenius import (
    DistributionFamily,
    GraphOperator,
    IntegralPatch,
    SplitFrame,
    alpha_field,
    cofinal_membership,
    graph_operator,
    integrability_residual,
    integrate_patch,
    split_frame,
    verify_tangency,
)
from .geninv import (
    ConditionReport,
    GenInverse,
    SampledFamily,
    check_equivalent_conditions,
    gen_inverse_from_complements,
    is_locally_fine,
    mp_convergence_experiment,
    mp_inverse,
    nashed_chen_inverse,
    transfer_radius,
)
from .subspace import (
    Projector,
    Subspace,
    adjoint_projector,
    is_direct_sum,
    null_space,
    column_space,
    oblique_projector,
    orthogonal_complement,
    principal_angles,
    rank_of,
    subspace_intersection,
)

__all__ = [
    "ComplementError",
    "ConditionReport",
    "ConjugacyPair",
    "DimensionError",
    "DistributionFamily",
    "DomainError",
    "GenInvLabError",
    "GenInverse",
    "GraphOperator",
    "IntegralPatch",
    "NeighborhoodError",
    "NoConvergence",
    "NotAGenInverse",
    "NotCofinal",
    "OperatorPoint",
    "OperatorSubspace",
    "ParseError",
    "Projector",
    "SampledFamily",
    "SingularJacobian",
    "SmoothMap",
    "SplitFrame",
    "StepError",
    "Subspace",
    "UnknownExperiment",
    "adjoint_projector",
    "alpha_field",
    "build_phi",
    "build_psi",
    "chart_derivative",
    "chart_forward",
    "chart_inverse",
    "check_equivalent_conditions",
    "cofinal_membership",
    "column_space",
    "complement_space_basis",
    "decompose_operator",
    "gen_inverse_from_complements",
    "graph_operator",
    "integrability_residual",
    "integrate_patch",
    "invert_phi",
    "is_direct_sum",
    "is_locally_fine",
    "local_conjugacy",
    "mp_convergence_experiment",
    "mp_inverse",
    "nashed_chen_inverse",
    "null_space",
    "oblique_projector",
    "orthogonal_complement",
    "principal_angles",
    "rank_of",
    "split_frame",
    "subspace_intersection",
    "tangent_space_basis",
    "transfer_radius",
    "verify_chart_maps_manifold",
    "verify_conjugacy",
    "verify_tangency",
]
