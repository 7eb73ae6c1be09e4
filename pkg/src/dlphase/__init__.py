"""State-evolution analysis of Bayes-optimal sparse dictionary learning."""

from .channel import (
    ChannelParams,
    QuadratureSpec,
    denoiser,
    denoiser_oracle,
    double_average,
    xi_parts,
)
from .entropy import PhiValue, binary_entropy, dominant_branch, phi_failure, phi_general, phi_success
from .exceptions import (
    ConvergenceError,
    DegenerateDenominator,
    DenominatorVanishes,
    DlphaseError,
    IntegrationError,
    SuccessBranchAbsent,
    UndefinedBoundary,
)
from .solver import (
    Branch,
    ConjugateParams,
    FixedPoint,
    ModelParams,
    OrderParams,
    SuccessSusceptibilities,
    general_extremize,
    nishimori_update,
    solve_all_branches,
    solve_branch,
    success_susceptibilities,
)

__version__ = "0.1.0"
