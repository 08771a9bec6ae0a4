"""Property suite: every verifiable consequence of the model, one claim each.

Claims are small named checks that report a worst-case magnitude against a
pinned tolerance.  ``fast`` claims are deterministic kernel/Riccati checks
(seconds); ``mc`` claims run the Monte Carlo pipeline on the configured model
(minutes at production path counts).  The whole suite is deterministic given
(config, seed).
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import PropertyViolation, VoljumpError
from .grid import Grid
from .jumps import ExponentialJumps, NoJumps, PointMassJumps
from .kernels import Constant, Exponential, Fractional
from .pastform import (
    bound_constant,
    check_bound,
    gap_increments,
    make_past_context,
    pi_tilde_double_quadrature,
    v_past,
)
from .resolvents import (
    first_kind_identity_residuals,
    resolvent_first_kind,
    resolvent_second_kind,
)
from .riccati import (
    ConstantPlusKTheta,
    ModelSpec,
    TestFunction,
    classical_riccati_oracle,
    comparison_check,
    envelope_bounds,
    solve,
    v0,
)
from .simulate import (
    make_forward_context,
    mc_transform,
    simulate_paths,
    v_forward,
)

FAST_CLAIMS = (
    "resolvent-identity",
    "resolvent-refinement",
    "second-kind-closed-form",
    "classical-oracle",
    "comparison-sweep",
    "envelope-sweep",
    "pitilde-cross-check",
    "pitilde-gap-monotone",
    "past-classical-reduction",
)
MC_CLAIMS = (
    "transform-mc",
    "martingale-flatness",
    "martingale-flatness-real",
    "past-vs-forward",
    "pathwise-bound",
    "forward-mean",
    "refinement",
)
TRANSFORM_U_VALUES = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class PropertyReport:
    claim: str
    status: str       # pass | fail | skipped
    magnitude: float
    tolerance: float
    runtime: float

    @property
    def failed(self):
        return self.status == "fail"


def _report(claim, magnitude, tolerance, started):
    status = "pass" if magnitude <= tolerance else "fail"
    return PropertyReport(claim, status, float(magnitude), float(tolerance),
                          time.perf_counter() - started)


# ---------------------------------------------------------------------------
# randomized admissible models for the sweep claims
# ---------------------------------------------------------------------------

def random_admissible_models(count, seed):
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        pick = rng.integers(0, 3)
        if pick == 0:
            kernel = Fractional(float(rng.uniform(0.55, 1.0)))
        elif pick == 1:
            kernel = Exponential(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.0, 2.0)))
        else:
            kernel = Constant(float(rng.uniform(0.5, 2.0)))
        jp = rng.integers(0, 3)
        if jp == 0:
            jumps = NoJumps()
        elif jp == 1:
            jumps = ExponentialJumps(float(rng.uniform(0.1, 1.0)), float(rng.uniform(2.0, 20.0)))
        else:
            jumps = PointMassJumps(float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.05, 0.5)))
        model = ModelSpec(kernel=kernel, b=float(rng.uniform(-1.0, 0.5)),
                          c=float(rng.uniform(0.0, 0.5)), jumps=jumps,
                          g0=ConstantPlusKTheta(x0=float(rng.uniform(0.0, 1.0)),
                                                theta=float(rng.uniform(0.0, 0.5))))
        u = float(rng.uniform(0.25, 4.0))
        models.append((model, u))
    return models


# ---------------------------------------------------------------------------
# fast claims
# ---------------------------------------------------------------------------

def claim_resolvent_identity(ctx):
    started = time.perf_counter()
    worst = 0.0
    for alpha in (0.6, 0.75):
        grid = Grid(1.0, 2000)
        res = resolvent_first_kind(Fractional(alpha), grid)
        worst = max(worst, float(np.max(np.abs(first_kind_identity_residuals(res)))))
    return _report("resolvent-identity", worst, 1e-3, started)


def claim_resolvent_refinement(ctx):
    """Identity residual at the fixed times {T/4, T/2, 3T/4, T} must drop as
    the grid is refined."""
    started = time.perf_counter()
    worst_increase = -np.inf
    for alpha in (0.6, 0.75):
        prev = None
        for n in (250, 500, 1000, 2000):
            grid = Grid(1.0, n)
            res = resolvent_first_kind(Fractional(alpha), grid)
            r = np.abs(first_kind_identity_residuals(res))
            fam = max(r[n // 4 - 1], r[n // 2 - 1], r[3 * n // 4 - 1], r[n - 1])
            if prev is not None:
                worst_increase = max(worst_increase, fam - prev)
            prev = fam
    return _report("resolvent-refinement", worst_increase, 0.0, started)


def claim_second_kind_closed_form(ctx):
    started = time.perf_counter()
    grid = Grid(1.0, 1000)
    worst = 0.0
    for b in (-0.3, 0.5):
        rsk = resolvent_second_kind(Constant(1.0), b, grid)
        exact = np.exp(b * grid.nodes)
        worst = max(worst, float(np.max(np.abs(rsk.e_nodes - exact))))
    return _report("second-kind-closed-form", worst, 1e-6, started)


def claim_classical_oracle(ctx):
    started = time.perf_counter()
    grid = Grid(1.0, 1000)
    model = ModelSpec(kernel=Constant(1.0), b=-0.3, c=0.09,
                      jumps=ExponentialJumps(0.5, 10.0),
                      g0=ConstantPlusKTheta(x0=0.3))
    f = TestFunction.imag_const(1.0, grid)
    sol = solve(model, f, grid)
    psi_ode, _ = classical_riccati_oracle(model, f, grid)
    worst = float(np.max(np.abs(sol.psi - psi_ode)))
    return _report("classical-oracle", worst, 1e-5, started)


def claim_comparison_sweep(ctx):
    started = time.perf_counter()
    worst = -np.inf
    grid = Grid(1.0, 256)
    for k, (model, u) in enumerate(random_admissible_models(20, ctx.seed + 1)):
        f = TestFunction.imag_const(u, grid)
        sol = solve(model, f, grid)
        try:
            rep = comparison_check(model, sol, n_random=1000, seed=ctx.seed + 100 + k)
            worst = max(worst, rep.max_gap, rep.generator_violation)
        except PropertyViolation as exc:
            worst = max(worst, float(exc.magnitude))
    return _report("comparison-sweep", worst, 1e-10, started)


def claim_envelope_sweep(ctx):
    started = time.perf_counter()
    worst = -np.inf
    grid = Grid(1.0, 256)
    for model, u in random_admissible_models(20, ctx.seed + 1):
        f = TestFunction.imag_const(u, grid)
        sol = solve(model, f, grid)
        env = envelope_bounds(model, f, grid)
        worst = max(worst, float(np.max(np.abs(sol.psi.imag) - env.upper)))
        worst = max(worst, float(np.max(env.lower - sol.psi.real)))
        worst = max(worst, float(np.max(sol.psi.real)))
    return _report("envelope-sweep", worst, 1e-8, started)


def claim_pitilde_cross_check(ctx):
    started = time.perf_counter()
    grid, model, f = ctx.grid, ctx.model, ctx.f(1.0)
    sol = ctx.sol(1.0)
    res = ctx.first_kind
    rng = np.random.default_rng(ctx.seed + 7)
    worst = 0.0
    from .pastform import compute_pi_tilde

    for _ in range(5):
        m = int(rng.integers(grid.n // 4, 3 * grid.n // 4))
        k = int(rng.integers(1, grid.n - m))
        pi = compute_pi_tilde(res, sol.psi, sol.F_psi, m, grid)
        other = pi_tilde_double_quadrature(res, model.kernel, sol.psi, sol.F_psi, m, k, grid)
        worst = max(worst, float(abs(pi.values[k] - other)))
    return _report("pitilde-cross-check", worst, 1e-3, started)


def claim_pitilde_gap_monotone(ctx):
    started = time.perf_counter()
    pctx = ctx.past_context(1.0)
    worst = -np.inf
    for i in pctx.checkpoint_indices:
        worst = max(worst, float(np.max(-gap_increments(pctx, i))))
    return _report("pitilde-gap-monotone", worst, 1e-8, started)


def claim_past_classical_reduction(ctx):
    """For K == 1 and constant g0 the past formula must equal the classical
    exponent phi(T-t) + int_0^t f X + psi(T-t) X_t to roundoff."""
    started = time.perf_counter()
    grid = Grid(1.0, 200)
    model = ModelSpec(kernel=Constant(1.0), b=-0.3, c=0.09,
                      jumps=ExponentialJumps(0.5, 10.0),
                      g0=ConstantPlusKTheta(x0=0.3))
    f = TestFunction.imag_const(1.0, grid)
    sol = solve(model, f, grid)
    res = resolvent_first_kind(model.kernel, grid)
    cps = [grid.n // 4, grid.n // 2, 3 * grid.n // 4]
    pctx = make_past_context(model, f, sol, res, cps, grid)
    ens = simulate_paths(model, grid, 64, ctx.seed + 11)
    worst = 0.0
    dt = grid.dt
    f_rev = f.samples[::-1]
    for i in cps:
        m = grid.n - i
        w = np.full(i + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        running = ens.X[:, : i + 1] @ (w * f_rev[: i + 1])
        classical = sol.phi[m] + running + sol.psi[m] * ens.X[:, i]
        worst = max(worst, float(np.max(np.abs(v_past(ens, pctx, i) - classical))))
    return _report("past-classical-reduction", worst, 1e-8, started)


# ---------------------------------------------------------------------------
# mc claims
# ---------------------------------------------------------------------------

def claim_transform_mc(ctx):
    started = time.perf_counter()
    worst, tol = -np.inf, np.inf
    for u in TRANSFORM_U_VALUES:
        rep = ctx.transform_report(u)
        worst = max(worst, rep.gap - rep.tolerance)
    return _report("transform-mc", worst, 0.0, started)


def claim_martingale_flatness(ctx):
    started = time.perf_counter()
    worst = -np.inf
    for u in TRANSFORM_U_VALUES:
        for row in ctx.transform_report(u).flatness:
            worst = max(worst, row.gap - row.tolerance)
    return _report("martingale-flatness", worst, 0.0, started)


def claim_martingale_flatness_real(ctx):
    started = time.perf_counter()
    worst = -np.inf
    for u in TRANSFORM_U_VALUES:
        for row in ctx.transform_report(u).flatness_bar:
            worst = max(worst, row.gap - row.tolerance)
    return _report("martingale-flatness-real", worst, 0.0, started)


def claim_past_vs_forward(ctx):
    started = time.perf_counter()
    ens = ctx.small_ensemble()
    pctx = ctx.past_context(1.0)
    fctx = make_forward_context(ctx.model, ctx.f(1.0), ctx.sol(1.0), ctx.grid)
    worst = 0.0
    for i in pctx.checkpoint_indices:
        gap = np.abs(v_past(ens, pctx, i) - v_forward(ens, fctx, i))
        worst = max(worst, float(np.max(gap)))
    return _report("past-vs-forward", worst, ctx.two_formula_tol, started)


def claim_pathwise_bound(ctx):
    started = time.perf_counter()
    ens = ctx.small_ensemble()
    pctx = ctx.past_context(1.0)
    sol = ctx.sol(1.0)
    consts = bound_constant(ctx.model, sol, ctx.first_kind, ctx.grid)
    worst_ratio = 0.0
    for i in pctx.checkpoint_indices:
        v = v_past(ens, pctx, i)
        vb = v_past(ens, pctx, i, real_system=True)
        rep = check_bound(v, vb, consts, slack=ctx.bound_slack)
        worst_ratio = max(worst_ratio, rep.worst_ratio)
    return _report("pathwise-bound", worst_ratio, 1.0 + ctx.bound_slack, started)


def claim_forward_mean(ctx):
    started = time.perf_counter()
    rep = ctx.transform_report(1.0)
    worst = rep.forward_mean_gap - rep.forward_mean_tolerance
    # closed-form check in the constant-kernel limit
    grid = Grid(1.0, 1000)
    model = ModelSpec(kernel=Constant(1.0), b=-0.3, c=0.0,
                      g0=ConstantPlusKTheta(x0=0.3))
    from .simulate import forward_mean

    exact = 0.3 * np.exp(-0.3 * grid.horizon)
    closed = abs(forward_mean(model, grid) - exact)
    worst = max(worst, closed - 1e-6)
    return _report("forward-mean", worst, 0.0, started)


def claim_refinement(ctx):
    """Transform, flatness and two-formula gaps must shrink as the grid is
    refined (half, nominal, double), and so must the clipped fraction."""
    started = time.perf_counter()
    gaps5, gaps6, gaps7, clips = [], [], [], []
    for n in (ctx.grid.n // 2, ctx.grid.n, 2 * ctx.grid.n):
        rep, two_formula = ctx.refinement_level(n)
        gaps5.append(rep.gap)
        gaps6.append(max(row.gap for row in rep.flatness))
        gaps7.append(two_formula)
        clips.append(rep.clipped_fraction)
    worst = -np.inf
    for seq in (gaps5, gaps6, gaps7, clips):
        worst = max(worst, max(np.diff(seq)))
    return _report("refinement", worst, 0.0, started)


# ---------------------------------------------------------------------------
# context shared across claims
# ---------------------------------------------------------------------------

class VerifyContext:
    """Lazily computed shared state so claims reuse solves and ensembles."""

    def __init__(self, config):
        self.config = config
        self.grid = config.grid()
        self.model = config.model(self.grid)
        self.n_paths, self.seed, self.block_size = config.mc_settings()
        self.checkpoints = config.checkpoints()
        self.slack = config._float("tolerances.mc_slack")
        self.two_formula_tol = config._float("tolerances.two_formula")
        self.bound_slack = config._float("tolerances.bound_slack")
        self._sols = {}
        self._reports = {}
        self._first_kind = None
        self._small_ens = None
        self._past_ctx = {}
        self._refinement = {}

    def f(self, u):
        return TestFunction.imag_const(u, self.grid)

    def sol(self, u):
        if u not in self._sols:
            self._sols[u] = solve(self.model, self.f(u), self.grid)
        return self._sols[u]

    @property
    def first_kind(self):
        if self._first_kind is None:
            self._first_kind = resolvent_first_kind(self.model.kernel, self.grid)
        return self._first_kind

    def checkpoint_indices(self, grid=None):
        grid = grid or self.grid
        return [int(round(c * grid.n)) for c in self.checkpoints]

    def past_context(self, u):
        if u not in self._past_ctx:
            self._past_ctx[u] = make_past_context(
                self.model, self.f(u), self.sol(u), self.first_kind,
                self.checkpoint_indices(), self.grid)
        return self._past_ctx[u]

    def small_ensemble(self):
        if self._small_ens is None:
            self._small_ens = simulate_paths(
                self.model, self.grid, min(1000, self.n_paths), self.seed + 1)
        return self._small_ens

    def transform_report(self, u):
        if u not in self._reports:
            self._reports[u] = mc_transform(
                self.model, self.f(u), self.grid, self.n_paths, self.seed,
                checkpoints=self.checkpoints, slack=self.slack,
                block_size=self.block_size, sol=self.sol(u))
        return self._reports[u]

    def refinement_level(self, n):
        if n not in self._refinement:
            grid = Grid(self.grid.horizon, n)
            f = TestFunction.imag_const(1.0, grid)
            sol = solve(self.model, f, grid)
            rep = mc_transform(self.model, f, grid, self.n_paths, self.seed,
                               checkpoints=self.checkpoints, slack=self.slack,
                               block_size=self.block_size, sol=sol)
            res = resolvent_first_kind(self.model.kernel, grid)
            cps = self.checkpoint_indices(grid)
            pctx = make_past_context(self.model, f, sol, res, cps, grid)
            fctx = make_forward_context(self.model, f, sol, grid)
            ens = simulate_paths(self.model, grid, min(1000, self.n_paths), self.seed + 1)
            two_formula = 0.0
            for i in cps:
                gap = np.abs(v_past(ens, pctx, i) - v_forward(ens, fctx, i))
                two_formula = max(two_formula, float(np.max(gap)))
            self._refinement[n] = (rep, two_formula)
        return self._refinement[n]


_CLAIM_RUNNERS = {
    "resolvent-identity": claim_resolvent_identity,
    "resolvent-refinement": claim_resolvent_refinement,
    "second-kind-closed-form": claim_second_kind_closed_form,
    "classical-oracle": claim_classical_oracle,
    "comparison-sweep": claim_comparison_sweep,
    "envelope-sweep": claim_envelope_sweep,
    "pitilde-cross-check": claim_pitilde_cross_check,
    "pitilde-gap-monotone": claim_pitilde_gap_monotone,
    "past-classical-reduction": claim_past_classical_reduction,
    "transform-mc": claim_transform_mc,
    "martingale-flatness": claim_martingale_flatness,
    "martingale-flatness-real": claim_martingale_flatness_real,
    "past-vs-forward": claim_past_vs_forward,
    "pathwise-bound": claim_pathwise_bound,
    "forward-mean": claim_forward_mean,
    "refinement": claim_refinement,
}


def resolve_claims(selection):
    names = []
    for token in selection:
        if token == "all":
            names.extend(FAST_CLAIMS + MC_CLAIMS)
        elif token == "fast":
            names.extend(FAST_CLAIMS)
        elif token == "mc":
            names.extend(MC_CLAIMS)
        elif token in _CLAIM_RUNNERS:
            names.append(token)
        else:
            raise VoljumpError(f"unknown claim {token!r}")
    seen, ordered = set(), []
    for name in names:
        if name not in seen:
            seen.add(name)
            ordered.append(name)
    return ordered


def run_suite(config, log=None):
    """Execute the selected claims in order; returns one report per claim."""
    ctx = VerifyContext(config)
    reports = []
    for name in resolve_claims(config.claims()):
        if name in MC_CLAIMS and not ctx.model.jumps.samplable:
            reports.append(PropertyReport(name, "skipped", 0.0, 0.0, 0.0))
            continue
        report = _CLAIM_RUNNERS[name](ctx)
        reports.append(report)
        if log is not None:
            log(f"[{report.status.upper():>4}] {report.claim}: "
                f"magnitude={report.magnitude:.3e} tolerance={report.tolerance:.3e} "
                f"({report.runtime:.2f}s)")
    return reports
