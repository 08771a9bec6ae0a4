"""Affine-in-the-past representation of the transform exponent.

For a checkpoint t with lag h = T - t, the exponent V_t^T can be rewritten as
an affine functional of the observed piece {X_s : s <= t} through the function

    PiTilde_h(r) = - int_0^h psi(h - s) l(r + s) ds + int_0^h F(s, psi(s)) ds,

where l is the density of the first-kind resolvent (the point mass at zero
enters separately through psi(h) L({0})).  Only Stieltjes increments of
PiTilde over grid cells are ever used, so the singular resolvent density is
integrated (exact cell masses), never differentiated or sampled at 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .grid import Grid, trapezoid
from .kernels import convolve_increments
from .resolvents import FirstKindResolvent
from .riccati import ModelSpec, RiccatiSolution, TestFunction, compute_phi

GAP_MONOTONE_TOL = 1e-8
BOUND_SLACK = 1e-8


@dataclass(frozen=True)
class PiFunction:
    """PiTilde table for one checkpoint lag h = t_m.

    ``values[k]`` samples PiTilde_h(t_k); ``increments`` are the cell
    differences driving the Stieltjes convolutions; ``atom_coeff`` is
    psi(h) * L({0}), the coefficient of the instantaneous term in the
    past formula.
    """

    lag_index: int
    lag: float
    values: np.ndarray
    increments: np.ndarray
    atom_coeff: complex


def compute_pi_tilde(resolvent: FirstKindResolvent, psi, F_vals, lag_index, grid: Grid):
    """Build the PiTilde table for lag h = t_m from psi and cached F values.

    The s-integral pairs exact density masses of (r + t_j, r + t_{j+1}] with
    psi averaged at cell midpoints, which keeps the r = 0 singular corner
    integrated rather than sampled.
    """
    m = int(lag_index)
    if not 0 <= m <= grid.n:
        raise ContractError("lag index outside the grid")
    psi = np.asarray(psi)
    F_vals = np.asarray(F_vals)
    t = grid.nodes
    h = t[m]
    head = trapezoid(F_vals[: m + 1], grid.dt) if m >= 1 else 0.0 * F_vals[0]

    values = np.full(grid.n + 1, head, dtype=psi.dtype)
    has_density = resolvent.alpha is not None or bool(np.any(resolvent.cell_masses > 0.0))
    if m >= 1 and has_density:
        # psi(h - s) averaged per s-cell j = 0..m-1
        psi_seg = psi[m::-1]
        psi_mid = 0.5 * (psi_seg[:-1] + psi_seg[1:])
        # masses of (r_k + t_j, r_k + t_{j+1}] for all k, j at once
        a = t[:, None] + t[None, :m]
        masses = resolvent.mass(a, a + grid.dt)
        values = head - masses @ psi_mid
    atom_coeff = psi[m] * resolvent.atom
    return PiFunction(lag_index=m, lag=float(h), values=values,
                      increments=np.diff(values), atom_coeff=atom_coeff)


def pi_tilde_double_quadrature(resolvent: FirstKindResolvent, kernel, psi, F_vals,
                               lag_index, r_index, grid: Grid):
    """Independent evaluation of PiTilde_h(r) through its defining double
    integral int_0^h F(s, psi(s)) (Delta_{h-s} K * L)(r) ds.

    Midpoint rule in s keeps the inner kernel argument h - s >= dt/2 away from
    the singularity; the inner convolution uses exact density masses at their
    centroids plus the atom.  Used as a cross-check oracle only.
    """
    m, k = int(lag_index), int(r_index)
    t = grid.nodes
    r = t[k]
    if m < 1:
        return 0.0 * np.asarray(psi)[0]
    F_mid = 0.5 * (F_vals[:m] + F_vals[1 : m + 1])
    s_mid = 0.5 * (t[:m] + t[1 : m + 1])
    u = t[m] - s_mid  # kernel shifts, all >= dt/2
    inner = resolvent.atom * kernel(u + r)
    if k >= 1:
        a = t[:k]
        masses = resolvent.mass(a, a + grid.dt)
        cents = resolvent.density_centroid(a, a + grid.dt)
        inner = inner + np.sum(masses[None, :] * kernel(u[:, None] + r - cents[None, :]), axis=1)
    return grid.dt * np.sum(F_mid * inner)


# ---------------------------------------------------------------------------
# past-form evaluation context
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PastFormContext:
    """Everything deterministic the past formula needs at fixed checkpoints,
    for both the complex system (f, psi) and its real companion."""

    grid: Grid
    checkpoint_indices: tuple
    f_rev: np.ndarray
    g0: np.ndarray
    phi: np.ndarray
    phi_bar: np.ndarray
    psi: np.ndarray
    psi_bar: np.ndarray
    atom: float
    tail: dict            # cp -> int_0^{T-t} F(s,psi) g0(T-s) ds
    tail_bar: dict
    pi: dict              # cp -> PiFunction (complex system)
    pi_bar: dict          # cp -> PiFunction (real system)
    pi_g0: dict           # cp -> (d PiTilde * g0)(t_cp), scalar
    pi_bar_g0: dict


def make_past_context(model: ModelSpec, f: TestFunction, sol: RiccatiSolution,
                      resolvent: FirstKindResolvent, checkpoint_indices, grid: Grid):
    g0 = model.g0_values(grid)
    g0_rev = g0[::-1]
    tail, tail_bar, pis, pis_bar, pig, pibg = {}, {}, {}, {}, {}, {}
    for i in checkpoint_indices:
        i = int(i)
        if not 0 < i < grid.n:
            raise ContractError("checkpoints must be interior grid nodes")
        m = grid.n - i
        tail[i] = complex(trapezoid(sol.F_psi[: m + 1] * g0_rev[: m + 1], grid.dt))
        tail_bar[i] = float(trapezoid(sol.F_bar_psi_bar[: m + 1] * g0_rev[: m + 1], grid.dt))
        pi = compute_pi_tilde(resolvent, sol.psi, sol.F_psi, m, grid)
        pi_bar = compute_pi_tilde(resolvent, sol.psi_bar, sol.F_bar_psi_bar, m, grid)
        pis[i], pis_bar[i] = pi, pi_bar
        pig[i] = complex(convolve_increments(pi.increments, g0, grid)[i])
        pibg[i] = float(convolve_increments(pi_bar.increments, g0, grid)[i])
    phi_bar = compute_phi(model, sol.psi_bar.astype(complex), grid).real
    return PastFormContext(
        grid=grid, checkpoint_indices=tuple(int(i) for i in checkpoint_indices),
        f_rev=f.samples[::-1].copy(), g0=g0, phi=sol.phi, phi_bar=phi_bar,
        psi=sol.psi, psi_bar=sol.psi_bar, atom=resolvent.atom,
        tail=tail, tail_bar=tail_bar, pi=pis, pi_bar=pis_bar,
        pi_g0=pig, pi_bar_g0=pibg)


def _running_f_integral(f_rev, X, i, dt):
    """int_0^{t_i} f(T-s) X_s ds by trapezoid, vectorized over paths."""
    w = np.full(i + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return X[:, : i + 1] @ (w * f_rev[: i + 1])


def v_past(ens, ctx: PastFormContext, checkpoint_index, real_system=False):
    """V_t^T for every path of ``ens`` at one checkpoint, via the past formula.

    With ``real_system`` the real companion (Re f, psi_bar) is evaluated
    instead.
    """
    i = int(checkpoint_index)
    if i not in ctx.checkpoint_indices:
        raise ContractError(f"node {i} is not a registered checkpoint")
    grid = ctx.grid
    m = grid.n - i
    X = ens.X
    if real_system:
        psi, phi = ctx.psi_bar, ctx.phi_bar
        f_rev = ctx.f_rev.real
        tail, pi, pig = ctx.tail_bar[i], ctx.pi_bar[i], ctx.pi_bar_g0[i]
    else:
        psi, phi = ctx.psi, ctx.phi
        f_rev = ctx.f_rev
        tail, pi, pig = ctx.tail[i], ctx.pi[i], ctx.pi_g0[i]
    out = phi[m] + tail + _running_f_integral(f_rev, X, i, grid.dt)
    out = out + psi[m] * ctx.atom * (X[:, i] - ctx.g0[i])
    out = out - pig
    out = out + convolve_increments(pi.increments, X, grid)[:, i]
    return out


# ---------------------------------------------------------------------------
# martingale bound constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    c1: float
    c2: float
    c3: float
    c: float


def bound_constant(model: ModelSpec, sol: RiccatiSolution,
                   resolvent: FirstKindResolvent, grid: Grid, g0_values=None):
    """Constants of the pathwise domination |exp V| <= C exp V_bar:

        C1 = ||g0||_L2 ||Re F(., psi) - F_bar(., psi_bar)||_L2
        C2 = max_t (psi_bar - Re psi)(T - t) g0(t)
        C3 = 2 max |psi_bar - Re psi| * L([0, T])
        C  = exp(C1 + L({0}) C2 + C3 max |g0|)

    All norms are grid norms on [0, T].
    """
    g0 = model.g0_values(grid) if g0_values is None else g0_values
    dt = grid.dt
    gap = sol.psi_bar - sol.psi.real
    diff = sol.F_psi.real - sol.F_bar_psi_bar
    c1 = float(np.sqrt(trapezoid(g0 * g0, dt)) * np.sqrt(trapezoid(diff * diff, dt)))
    c2 = float(np.max(gap[::-1] * g0))
    c3 = float(2.0 * np.max(np.abs(gap)) * resolvent.total(grid.horizon))
    c = float(np.exp(c1 + resolvent.atom * c2 + c3 * np.max(np.abs(g0))))
    return BoundConstants(c1=c1, c2=c2, c3=c3, c=c)


@dataclass(frozen=True)
class BoundReport:
    constant: float
    worst_ratio: float
    violations: int


def check_bound(v_values, v_bar_values, constants: BoundConstants, slack=BOUND_SLACK):
    """Check |exp V| <= C exp(V_bar) (1 + slack) elementwise.

    Returns the worst ratio |exp V| / (C exp V_bar) over everything supplied.
    """
    v = np.asarray(v_values)
    vb = np.asarray(v_bar_values, dtype=float)
    log_ratio = v.real - np.log(constants.c) - vb
    worst = float(np.exp(np.max(log_ratio)))
    violations = int(np.sum(log_ratio > np.log1p(slack)))
    return BoundReport(constant=constants.c, worst_ratio=worst, violations=violations)


def gap_increments(ctx: PastFormContext, checkpoint_index):
    """Increments of r -> (PiTildeBar - Re PiTilde)(r) for one checkpoint.

    Nondecreasing within tolerance when the resolvent density carries no atom
    on (0, inf); the theory needs exactly this monotonicity.
    """
    i = int(checkpoint_index)
    gap = ctx.pi_bar[i].values - ctx.pi[i].values.real
    return np.diff(gap)
