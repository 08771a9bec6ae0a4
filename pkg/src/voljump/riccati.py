"""Complex and real Riccati-Volterra equations on the grid.

The driving function is
    F(t, u) = f(t) + b u + (c/2) u^2 + J(u)
with J the jump transform, and the equation solved is psi = K * F(., psi).
The real companion replaces f by Re f and psi by a real unknown; its solution
psi_bar dominates Re psi, which is the comparison property the martingale
bound rests on.

The solver is an explicit product-integration predictor (exact kernel cells,
left-point generator values) followed by damped fixed-point correctors on the
implicit trapezoid form at each node.  Solutions must stay in the closed left
half plane: a real part above tolerance is an error, never clamped.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, PropertyViolation, SolverError
from .grid import Grid, cumulative_trapezoid, trapezoid
from .jumps import LevyMeasure, NoJumps
from .kernels import Constant, Fractional, Kernel, convolve_kernel

CORRECTOR_TOL = 1e-12
CORRECTOR_MAX_ITER = 50
HALF_PLANE_TOL = 1e-10
COMPARISON_TOL = 1e-10


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantPlusKTheta:
    """Input curve g0(t) = x0 + (K * theta)(t), theta >= 0 locally bounded."""

    x0: float
    theta: float | np.ndarray = 0.0

    def __post_init__(self):
        if self.x0 < 0.0:
            raise DomainError("x0 must be >= 0")
        th = np.asarray(self.theta, dtype=float)
        if np.any(th < 0.0):
            raise DomainError("theta must be >= 0")

    def values(self, kernel: Kernel, grid: Grid):
        th = np.asarray(self.theta, dtype=float)
        if th.ndim == 0:
            th = np.full(grid.n + 1, float(th))
        elif th.shape != (grid.n + 1,):
            raise ContractError("theta samples must match the grid")
        return self.x0 + convolve_kernel(kernel, th, grid)


@dataclass(frozen=True)
class MonotoneTable:
    """Continuous nondecreasing input curve sampled on the grid, g0(0) = 0."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ContractError("monotone table must be one-dimensional")
        if s[0] != 0.0:
            raise DomainError("monotone input curve must start at 0")
        if np.any(np.diff(s) < -1e-12):
            raise DomainError("monotone input curve must be nondecreasing")
        object.__setattr__(self, "samples", s)

    def values(self, kernel: Kernel, grid: Grid):
        if self.samples.shape != (grid.n + 1,):
            raise ContractError("monotone table length must match the grid")
        return self.samples.copy()


@dataclass(frozen=True)
class ModelSpec:
    """Affine triplet b(x) = b x, a(x) = c x, eta(x, .) = x nu plus the kernel
    and admissible input curve.  The optional constant coefficients (b0, a0,
    nu0) only enter the drift correction phi and the forward-mean formula; the
    square-root model of interest has them all zero."""

    kernel: Kernel
    b: float
    c: float
    jumps: LevyMeasure = field(default_factory=NoJumps)
    g0: ConstantPlusKTheta | MonotoneTable = field(
        default_factory=lambda: ConstantPlusKTheta(x0=0.0))
    b0: float = 0.0
    a0: float = 0.0
    nu0: LevyMeasure | None = None

    def __post_init__(self):
        if self.c < 0.0:
            raise DomainError("diffusion slope c must be >= 0")
        if self.a0 < 0.0:
            raise DomainError("constant diffusion a0 must be >= 0")

    def g0_values(self, grid: Grid):
        return self.g0.values(self.kernel, grid)


# ---------------------------------------------------------------------------
# test functions f : R+ -> C_-
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Grid samples of the continuous input f with Re f <= 0.

    ``constant`` is set when f is a constant function, which the classical ODE
    oracle needs for off-grid evaluation.
    """

    samples: np.ndarray
    constant: complex | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if np.any(s.real > 1e-14):
            raise DomainError("test function must map into the left half plane (Re f <= 0)")
        object.__setattr__(self, "samples", s)

    @classmethod
    def zero(cls, grid: Grid):
        return cls(np.zeros(grid.n + 1, dtype=complex), constant=0.0 + 0.0j)

    @classmethod
    def imag_const(cls, u: float, grid: Grid):
        return cls(np.full(grid.n + 1, 1j * u, dtype=complex), constant=1j * u)

    @classmethod
    def complex_const(cls, w: complex, grid: Grid):
        return cls(np.full(grid.n + 1, w, dtype=complex), constant=complex(w))

    @property
    def is_real(self):
        return bool(np.all(self.samples.imag == 0.0))


# ---------------------------------------------------------------------------
# generator functions
# ---------------------------------------------------------------------------

def eval_F(model: ModelSpec, f_value, u):
    """F(t, u) = f(t) + b u + (c/2) u^2 + J(u) for u in the left half plane."""
    u = np.asarray(u)
    if np.any(u.real > 1e-14):
        raise DomainError("generator argument must satisfy Re(u) <= 0")
    return f_value + model.b * u + 0.5 * model.c * u * u + model.jumps.transform(u)


def eval_F_bar(model: ModelSpec, ref_value, u):
    """Real companion of eval_F: coincides with it on real inputs."""
    u = np.asarray(u, dtype=float)
    if np.any(u > 1e-14):
        raise DomainError("real generator argument must be <= 0")
    out = ref_value + model.b * u + 0.5 * model.c * u * u + model.jumps.transform(u + 0j).real
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Volterra solver
# ---------------------------------------------------------------------------

@dataclass
class SolverDiagnostics:
    total_iterations: int = 0
    max_iterations: int = 0
    max_update: float = 0.0


def _solve_volterra(weights, rhs, y0, n, dtype, damping=0.5):
    """March the product-trapezoid scheme for y = K * rhs(., y).

    ``rhs(i, y)`` evaluates the generator at node i.  Returns node values of y
    and of rhs along the solution.
    """
    y = np.zeros(n + 1, dtype=dtype)
    g = np.zeros(n + 1, dtype=dtype)
    y[0] = y0
    g[0] = rhs(0, y[0])
    w0 = weights[0]
    diag = SolverDiagnostics()
    for i in range(1, n + 1):
        base = 0.5 * w0 * g[i - 1]
        if i > 1:
            base += np.dot(weights[i - 1:0:-1], 0.5 * (g[: i - 1] + g[1:i]))
        # predictor: left-point value for the newest cell
        x = base + 0.5 * w0 * g[i - 1]
        prev_step = np.inf
        for it in range(CORRECTOR_MAX_ITER):
            xn = base + 0.5 * w0 * rhs(i, x)
            step = abs(xn - x)
            if step > prev_step:
                xn = x + damping * (xn - x)
                step = abs(xn - x)
            diag.total_iterations += 1
            if step <= CORRECTOR_TOL:
                x = xn
                diag.max_iterations = max(diag.max_iterations, it + 1)
                break
            prev_step = step
            x = xn
        else:
            raise SolverError(
                f"corrector failed to converge at node {i} (last update {step:.3e})",
                residual=float(step))
        diag.max_update = max(diag.max_update, float(step))
        y[i] = x
        g[i] = rhs(i, x)
    return y, g, diag


def solve_psi(model: ModelSpec, f: TestFunction, grid: Grid):
    """Solve psi = K * F(., psi) on the grid.

    Returns (psi, F(., psi) node values, diagnostics).  Real f is routed
    through real arithmetic (the solution is then real), so solve_psi and
    solve_psi_bar coincide exactly in that case.
    """
    if f.samples.shape != (grid.n + 1,):
        raise ContractError("test function length must match the grid")
    w = model.kernel.cell_weights(grid)
    if f.is_real:
        psi, g, diag = _solve_volterra(
            w, lambda i, u: eval_F_bar(model, f.samples[i].real, u), 0.0, grid.n, float)
        _check_half_plane(psi, "Re psi")
        return psi.astype(complex), g.astype(complex), diag
    psi, g, diag = _solve_volterra(
        w, lambda i, u: eval_F(model, f.samples[i], u), 0.0 + 0.0j, grid.n, complex)
    _check_half_plane(psi.real, "Re psi")
    return psi, g, diag


def solve_psi_bar(model: ModelSpec, f: TestFunction, grid: Grid):
    """Solve the real companion psi_bar = K * F_bar(., psi_bar) driven by Re f."""
    if f.samples.shape != (grid.n + 1,):
        raise ContractError("test function length must match the grid")
    w = model.kernel.cell_weights(grid)
    ref = f.samples.real
    psi_bar, g, diag = _solve_volterra(
        w, lambda i, u: eval_F_bar(model, ref[i], u), 0.0, grid.n, float)
    _check_half_plane(psi_bar, "psi_bar")
    return psi_bar, g, diag


def _check_half_plane(values, label):
    worst = float(np.max(values))
    if worst > HALF_PLANE_TOL:
        raise PropertyViolation(
            f"{label} left the closed left half plane by {worst:.3e} "
            "(solution range violation or too-coarse grid)",
            magnitude=worst, where=int(np.argmax(values)))


def compute_phi(model: ModelSpec, psi, grid: Grid):
    """phi(t) = int_0^t [b0 psi + (a0/2) psi^2 + J_nu0(psi)] ds by trapezoid.

    Identically zero in the square-root model (b0 = a0 = 0, nu0 absent).
    """
    psi = np.asarray(psi)
    if model.b0 == 0.0 and model.a0 == 0.0 and model.nu0 is None:
        return np.zeros(grid.n + 1, dtype=complex)
    integrand = model.b0 * psi + 0.5 * model.a0 * psi * psi
    if model.nu0 is not None:
        integrand = integrand + model.nu0.transform(psi)
    return cumulative_trapezoid(integrand.astype(complex), grid.dt)


@dataclass(frozen=True)
class RiccatiSolution:
    """Bundled grid solution: psi, its real companion, phi, cached generator
    values along both solutions, and solver diagnostics."""

    grid: Grid
    psi: np.ndarray
    psi_bar: np.ndarray
    phi: np.ndarray
    F_psi: np.ndarray
    F_bar_psi_bar: np.ndarray
    diagnostics: dict


def solve(model: ModelSpec, f: TestFunction, grid: Grid):
    psi, F_psi, d1 = solve_psi(model, f, grid)
    psi_bar, F_bar, d2 = solve_psi_bar(model, f, grid)
    phi = compute_phi(model, psi, grid)
    return RiccatiSolution(
        grid=grid, psi=psi, psi_bar=psi_bar, phi=phi, F_psi=F_psi,
        F_bar_psi_bar=F_bar,
        diagnostics={"psi": d1, "psi_bar": d2},
    )


# ---------------------------------------------------------------------------
# transform exponent at time zero
# ---------------------------------------------------------------------------

def v0(model: ModelSpec, sol: RiccatiSolution, g0_values=None):
    """V_0^T = phi(T) + int_0^T F(T-s, psi(T-s)) g0(s) ds (trapezoid)."""
    grid = sol.grid
    g0 = model.g0_values(grid) if g0_values is None else g0_values
    integrand = sol.F_psi[::-1] * g0
    return complex(sol.phi[-1] + trapezoid(integrand, grid.dt))


def v0_bar(model: ModelSpec, sol: RiccatiSolution, g0_values=None):
    """Real-system counterpart of v0."""
    grid = sol.grid
    g0 = model.g0_values(grid) if g0_values is None else g0_values
    return float(trapezoid(sol.F_bar_psi_bar[::-1] * g0, grid.dt))


# ---------------------------------------------------------------------------
# classical (constant-kernel) ODE oracle
# ---------------------------------------------------------------------------

def classical_riccati_oracle(model: ModelSpec, f: TestFunction, grid: Grid, refine=4):
    """Fourth-order integration of psi' = F(t, psi) for the K == 1 limit.

    Independent of the Volterra machinery; requires the constant-one kernel
    and a constant f (needed off the grid).  Returns psi at the grid nodes and
    the corresponding V_0^T.
    """
    k = model.kernel
    is_const_one = isinstance(k, Constant) and k.k0 == 1.0
    is_frac_one = isinstance(k, Fractional) and k.alpha == 1.0
    if not (is_const_one or is_frac_one):
        raise ContractError("classical oracle needs the constant kernel K == 1")
    if f.constant is None:
        raise ContractError("classical oracle needs a constant test function")
    fval = complex(f.constant)
    n = grid.n * refine
    dt = grid.horizon / n
    psi = 0.0 + 0.0j
    fine = np.zeros(n + 1, dtype=complex)
    for i in range(n):
        t = i * dt
        k1 = eval_F(model, fval, psi)
        k2 = eval_F(model, fval, psi + 0.5 * dt * k1)
        k3 = eval_F(model, fval, psi + 0.5 * dt * k2)
        k4 = eval_F(model, fval, psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        fine[i + 1] = psi
    psi_nodes = fine[::refine].copy()
    # V_0 on the fine grid: phi + int F(T-s, psi(T-s)) g0(s) ds
    fine_grid = Grid(grid.horizon, n)
    g0_fine = model.g0.values(model.kernel, fine_grid)
    F_fine = eval_F(model, fval, fine)
    phi_fine = compute_phi(model, fine, fine_grid)
    v0_ode = complex(phi_fine[-1] + trapezoid(F_fine[::-1] * g0_fine, dt))
    return psi_nodes, v0_ode


# ---------------------------------------------------------------------------
# envelopes and comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeBounds:
    """Solutions of the two linear Volterra envelope equations:
    upper >= |Im psi| and lower <= Re psi <= 0."""

    upper: np.ndarray
    lower: np.ndarray


def envelope_bounds(model: ModelSpec, f: TestFunction, grid: Grid):
    """Solve u = K*(|Im f| + b u) and l = K*(Re f + b l - q u^2) with
    q = (c + m2) / 2, m2 the jump second moment."""
    w = model.kernel.cell_weights(grid)
    af = np.abs(f.samples.imag)
    upper, _, _ = _solve_volterra(
        w, lambda i, u: af[i] + model.b * u, 0.0, grid.n, float)
    upper = np.maximum(upper, 0.0)
    q = 0.5 * (model.c + model.jumps.second_moment())
    ref = f.samples.real
    u2 = upper * upper
    lower, _, _ = _solve_volterra(
        w, lambda i, v: ref[i] + model.b * v - q * u2[i], 0.0, grid.n, float)
    return EnvelopeBounds(upper=upper, lower=np.minimum(lower, 0.0))


@dataclass(frozen=True)
class ComparisonReport:
    max_gap: float
    worst_node: int
    generator_violation: float


def comparison_check(model: ModelSpec, sol: RiccatiSolution, n_random=1000,
                     seed=0, tol=COMPARISON_TOL):
    """Verify Re psi <= psi_bar on the grid and Re F(t,u) <= F_bar(t, Re u) at
    random points of the left half plane.  Raises PropertyViolation beyond
    ``tol``."""
    gap = sol.psi.real - sol.psi_bar
    max_gap = float(np.max(gap))
    worst = int(np.argmax(gap))
    if max_gap > tol:
        raise PropertyViolation(
            f"comparison failed: Re psi - psi_bar = {max_gap:.3e} at node {worst}",
            magnitude=max_gap, where=worst)
    rng = np.random.default_rng(seed)
    re = -rng.exponential(1.0, n_random)
    im = rng.normal(0.0, 2.0, n_random)
    u = re + 1j * im
    fv = rng.normal(0.0, 1.0, n_random)
    lhs = eval_F(model, -np.abs(fv), u).real
    rhs = eval_F_bar(model, -np.abs(fv), re)
    gen_violation = float(np.max(lhs - rhs))
    if gen_violation > tol:
        raise PropertyViolation(
            f"generator inequality failed by {gen_violation:.3e}",
            magnitude=gen_violation)
    return ComparisonReport(max_gap=max_gap, worst_node=worst,
                            generator_violation=gen_violation)
