"""Volterra square-root processes with jumps.

Numerical library and CLI around one object of study: the nonnegative
convolution equation X = g0 + K * dZ driven by an affine jump semimartingale.
The package solves the associated complex and real Riccati-Volterra equations,
builds convolution resolvents of both kinds, simulates trajectories, and
cross-verifies the transform, comparison, martingale-bound and
affine-in-the-past identities the model satisfies.
"""

from .errors import (
    CapabilityError,
    ConfigError,
    ContractError,
    DomainError,
    PropertyViolation,
    SolverError,
    VoljumpError,
)
from .grid import Grid
from .jumps import ExponentialJumps, NoJumps, PointMassJumps, TabulatedJumps
from .kernels import (
    Constant,
    Exponential,
    Fractional,
    GammaKernel,
    Tabulated,
    cell_weights,
    convolve_increments,
    convolve_kernel,
    convolve_samples,
    eval_kernel,
    shifted_kernel_derivative,
)
from .resolvents import (
    FirstKindResolvent,
    SecondKindResolvent,
    first_kind_identity_residuals,
    resolvent_first_kind,
    resolvent_second_kind,
)
from .riccati import (
    ConstantPlusKTheta,
    EnvelopeBounds,
    ModelSpec,
    MonotoneTable,
    RiccatiSolution,
    TestFunction,
    classical_riccati_oracle,
    comparison_check,
    compute_phi,
    envelope_bounds,
    eval_F,
    eval_F_bar,
    solve,
    solve_psi,
    solve_psi_bar,
    v0,
    v0_bar,
)
from .pastform import (
    BoundConstants,
    PiFunction,
    bound_constant,
    check_bound,
    compute_pi_tilde,
    gap_increments,
    make_past_context,
    pi_tilde_double_quadrature,
    v_past,
)
from .simulate import (
    PathEnsemble,
    TransformReport,
    adjusted_forward,
    forward_mean,
    forward_mean_curve,
    make_forward_context,
    mc_transform,
    simulate_paths,
    v_forward,
)

__version__ = "0.1.0"
