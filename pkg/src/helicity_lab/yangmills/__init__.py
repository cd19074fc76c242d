"""su(2) fields on the torus and the Yang-Mills-Poisson problem on the half-space."""
from .action import (
    duality_residual_ym,
    energy_balance,
    horizontality,
    stack_scale,
    ym_poisson_action,
    ym_poisson_residual,
    ym_poisson_residual_field,
)
from .algebra import (
    bracket_hook,
    bracket_wedge,
    covariant_d,
    covariant_d_star,
    curvature3,
    embed_abelian,
    random_lie_form,
)
from .derivatives import (
    HFlowResult,
    HessianReport,
    action_gradient,
    action_hessian_form,
    curl_a_quadratic_form,
    h_field,
    h_flow,
    horizontal_vertical_split,
    riemannian_norm,
)
from .gauge import GaugeFunction, gauge_transform, random_gauge
from .instanton import instanton_fixture
from .sgrid import HalfSpaceField, SGrid, default_sgrid
from .solver import SolverError, SolverParams, variational_solve, ym_poisson_solve
