"""Monte Carlo simulation of the Volterra square-root process with jumps.

Discrete scheme, per step j with state X_j (clipped at 0 in coefficients):

    dZ_j = b X_j dt  +  sqrt(c X_j dt) xi_j  +  S_j,
    X_{i} = g0(t_i) + sum_{j<i} (w_{i-1-j} / dt) dZ_j,

where xi_j are standard normals, S_j a compound-Poisson sum with local
intensity lambda X_j dt, and w the integrated kernel cell weights (midpoint
consistent, so singular kernels never get point-evaluated at lag 0).  Raw
updates below zero are counted and clipped for storage; the clipped fraction
is a reported bias diagnostic.

Randomness: paths are processed in fixed-size blocks; block k draws from a
counter-based Philox stream keyed (seed, k), consuming, per step, first the
normals, then the Poisson counts, then the jump-size sums.  Results therefore
depend only on (config, seed), never on scheduling.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ContractError
from .grid import Grid, trapezoid
from .kernels import convolve_increments
from .resolvents import SecondKindResolvent, resolvent_second_kind
from .riccati import (
    ModelSpec,
    RiccatiSolution,
    TestFunction,
    compute_phi,
    solve,
    v0,
    v0_bar,
)

DEFAULT_BLOCK_SIZE = 8192
DEFAULT_CHECKPOINTS = (0.25, 0.5, 0.75)
MC_SLACK = 0.01


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated trajectories plus the decomposed driving increments.

    ``dz_jump`` holds the raw compound-Poisson sums; the driving increments of
    Z subtract their predictable compensator (the jump part of Z is a
    compensated martingale), which is recomputed from the stored state in
    ``dz`` rather than stored again.
    """

    grid: Grid
    X: np.ndarray         # (M, n+1), clipped at 0
    dz_drift: np.ndarray  # (M, n): b X dt
    dz_diff: np.ndarray   # (M, n): sqrt(c X dt) xi
    dz_jump: np.ndarray   # (M, n): raw jump sums, compensator NOT subtracted
    jump_rate: float      # total_intensity * mean_size of the jump measure
    seed: int
    path_offset: int
    clipped: int          # raw updates below zero (over all paths and steps)

    @property
    def n_paths(self):
        return self.X.shape[0]

    @property
    def dz(self):
        """Z increments: drift + diffusion + compensated jumps."""
        comp = self.jump_rate * self.grid.dt * self.X[:, :-1]
        return self.dz_drift + self.dz_diff + self.dz_jump - comp

    def z_values(self):
        """Z at the nodes by prefix sums of the increments."""
        z = np.zeros_like(self.X)
        np.cumsum(self.dz, axis=1, out=z[:, 1:])
        return z

    @property
    def clipped_fraction(self):
        return self.clipped / (self.X.shape[0] * (self.X.shape[1] - 1))


def _block_stream(seed, block_index):
    key = np.array([np.uint64(seed), np.uint64(block_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _simulate_block(model: ModelSpec, grid: Grid, g0, kavg, count, seed, block_index):
    rng = _block_stream(seed, block_index)
    n = grid.n
    dt = grid.dt
    sqdt = np.sqrt(dt)
    X = np.empty((count, n + 1))
    dz_drift = np.empty((count, n))
    dz_diff = np.empty((count, n))
    dz_jump = np.empty((count, n))
    dz = np.empty((count, n))   # compensated Z increments driving the recursion
    X[:, 0] = g0[0]
    clipped = 0
    jumps = model.jumps
    has_jumps = jumps.total_intensity() > 0.0
    jump_rate = jumps.total_intensity() * jumps.mean_size()
    for j in range(n):
        xj = X[:, j]
        xi = rng.standard_normal(count)
        dz_drift[:, j] = model.b * xj * dt
        dz_diff[:, j] = np.sqrt(model.c * xj) * sqdt * xi
        dz_jump[:, j] = jumps.sample_sums(xj * dt, rng) if has_jumps else 0.0
        dz[:, j] = (dz_drift[:, j] + dz_diff[:, j]
                    + dz_jump[:, j] - jump_rate * dt * xj)
        raw = g0[j + 1] + dz[:, : j + 1] @ kavg[j::-1]
        clipped += int(np.count_nonzero(raw < 0.0))
        X[:, j + 1] = np.maximum(raw, 0.0)
    return PathEnsemble(grid=grid, X=X, dz_drift=dz_drift, dz_diff=dz_diff,
                        dz_jump=dz_jump, jump_rate=jump_rate, seed=seed,
                        path_offset=block_index * DEFAULT_BLOCK_SIZE,
                        clipped=clipped)


def simulate_paths(model: ModelSpec, grid: Grid, n_paths, seed,
                   block_size=DEFAULT_BLOCK_SIZE):
    """Simulate ``n_paths`` trajectories; bitwise reproducible per (config, seed)."""
    if not model.jumps.samplable:
        raise CapabilityError("jump measure is quadrature-only; it cannot be sampled")
    if n_paths < 1:
        raise ContractError("need at least one path")
    g0 = model.g0_values(grid)
    kavg = model.kernel.cell_weights(grid) / grid.dt
    blocks = []
    for b, start in enumerate(range(0, n_paths, block_size)):
        count = min(block_size, n_paths - start)
        blocks.append(_simulate_block(model, grid, g0, kavg, count, seed, b))
    if len(blocks) == 1:
        return blocks[0]
    return PathEnsemble(
        grid=grid,
        X=np.concatenate([e.X for e in blocks]),
        dz_drift=np.concatenate([e.dz_drift for e in blocks]),
        dz_diff=np.concatenate([e.dz_diff for e in blocks]),
        dz_jump=np.concatenate([e.dz_jump for e in blocks]),
        jump_rate=blocks[0].jump_rate, seed=seed, path_offset=0,
        clipped=sum(e.clipped for e in blocks))


def iter_path_blocks(model: ModelSpec, grid: Grid, n_paths, seed,
                     block_size=DEFAULT_BLOCK_SIZE):
    """Yield the same blocks simulate_paths would concatenate (streaming API)."""
    if not model.jumps.samplable:
        raise CapabilityError("jump measure is quadrature-only; it cannot be sampled")
    g0 = model.g0_values(grid)
    kavg = model.kernel.cell_weights(grid) / grid.dt
    for b, start in enumerate(range(0, n_paths, block_size)):
        count = min(block_size, n_paths - start)
        yield _simulate_block(model, grid, g0, kavg, count, seed, b)


# ---------------------------------------------------------------------------
# forward mean
# ---------------------------------------------------------------------------

def forward_mean_curve(model: ModelSpec, grid: Grid, rsk: SecondKindResolvent = None):
    """E[X_{t_i}] = (g0 - R_B * g0 + E_B * b0)(t_i) on the whole grid."""
    if rsk is None:
        rsk = resolvent_second_kind(model.kernel, model.b, grid)
    g0 = model.g0_values(grid)
    curve = g0 - convolve_increments(rsk.r_cells, g0, grid)
    if model.b0 != 0.0:
        curve = curve + model.b0 * np.concatenate([[0.0], np.cumsum(rsk.e_cells)])
    return curve


def forward_mean(model: ModelSpec, grid: Grid, rsk: SecondKindResolvent = None):
    """E[X_T] from the variation-of-constants formula."""
    return float(forward_mean_curve(model, grid, rsk)[-1])


# ---------------------------------------------------------------------------
# adjusted forward curve and the forward-form exponent
# ---------------------------------------------------------------------------

def adjusted_forward(model: ModelSpec, ens: PathEnsemble, path_index, t_index, s_index):
    """g_t(s) = g0(s) + sum_{t_j < t} K-cell-avg(s - t_j) dZ_j at grid nodes s > t."""
    i, k = int(t_index), int(s_index)
    grid = ens.grid
    if not (0 <= i < k <= grid.n):
        raise ContractError("adjusted forward needs grid nodes with s > t")
    g0 = model.g0_values(grid)
    if i == 0:
        return float(g0[k])
    kavg = model.kernel.cell_weights(grid) / grid.dt
    dz = ens.dz[path_index, :i]
    return float(g0[k] + dz @ kavg[k - i : k][::-1])


@dataclass(frozen=True)
class ForwardContext:
    """Deterministic inputs for the forward-form exponent at any node."""

    grid: Grid
    f_rev: np.ndarray
    g0: np.ndarray
    kavg: np.ndarray
    phi: np.ndarray
    phi_bar: np.ndarray
    F_rev: np.ndarray      # F(T - t_k, psi(T - t_k)) over k = 0..n
    F_bar_rev: np.ndarray


def make_forward_context(model: ModelSpec, f: TestFunction, sol: RiccatiSolution,
                         grid: Grid):
    g0 = model.g0_values(grid)
    kavg = model.kernel.cell_weights(grid) / grid.dt
    phi_bar = compute_phi(model, sol.psi_bar.astype(complex), grid).real
    return ForwardContext(grid=grid, f_rev=f.samples[::-1].copy(), g0=g0, kavg=kavg,
                          phi=sol.phi, phi_bar=phi_bar,
                          F_rev=sol.F_psi[::-1].copy(),
                          F_bar_rev=sol.F_bar_psi_bar[::-1].copy())


def v_forward(ens: PathEnsemble, ctx: ForwardContext, t_index, real_system=False):
    """Forward-form exponent at node t_index for every path:

        V_t^T = phi(T-t) + int_0^t f(T-s) X_s ds
                + int_t^T F(T-s, psi(T-s)) g_t(s) ds.
    """
    grid = ctx.grid
    i = int(t_index)
    if not 0 <= i <= grid.n:
        raise ContractError("node outside the grid")
    dt = grid.dt
    if real_system:
        phi, f_rev, F_rev = ctx.phi_bar, ctx.f_rev.real, ctx.F_bar_rev
    else:
        phi, f_rev, F_rev = ctx.phi, ctx.f_rev, ctx.F_rev
    m = grid.n - i
    X = ens.X
    if i > 0:
        w_run = np.full(i + 1, dt)
        w_run[0] = w_run[-1] = 0.5 * dt
        running = X[:, : i + 1] @ (w_run * f_rev[: i + 1])
        # adjusted forward curve on the tail nodes k = i..n
        G = ctx.g0[i:][None, :] + ens.dz[:, :i] @ _forward_weight_matrix(ctx.kavg, i, grid.n)
    else:
        running = np.zeros(ens.n_paths)
        G = np.broadcast_to(ctx.g0[None, :], (ens.n_paths, grid.n + 1))
    w_tail = np.full(m + 1, dt)
    w_tail[0] = w_tail[-1] = 0.5 * dt
    # F(T - t_k, psi(T - t_k)) indexed by k is exactly F_rev[k]
    tail = G @ (w_tail * F_rev[i:])
    return phi[m] + running + tail


def _forward_weight_matrix(kavg, i, n):
    """W[j, col] = kavg[(i + col) - 1 - j] for j < i, col = 0..n-i."""
    cols = n - i + 1
    W = np.empty((i, cols))
    for col in range(cols):
        k = i + col
        W[:, col] = kavg[k - i : k][::-1]
    return W


# ---------------------------------------------------------------------------
# Monte Carlo transform report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatnessRow:
    t: float
    estimate: complex
    stderr: float
    gap: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class TransformReport:
    theory: complex
    theory_bar: float
    estimate: complex
    stderr: float
    gap: float
    tolerance: float
    passed: bool
    flatness: tuple
    flatness_bar: tuple
    forward_mean_theory: float
    forward_mean_estimate: float
    forward_mean_stderr: float
    forward_mean_gap: float
    forward_mean_tolerance: float
    forward_mean_passed: bool
    clipped_fraction: float
    n_paths: int
    seed: int

    @property
    def all_passed(self):
        rows = list(self.flatness) + list(self.flatness_bar)
        return self.passed and self.forward_mean_passed and all(r.passed for r in rows)


class _MeanAccumulator:
    """Streaming mean / variance of a complex statistic, block order fixed."""

    def __init__(self):
        self.n = 0
        self.s = 0.0 + 0.0j
        self.s2 = 0.0  # sum of |x|^2

    def add(self, values):
        v = np.asarray(values)
        self.n += v.size
        self.s += complex(np.sum(v))
        self.s2 += float(np.sum(np.abs(v) ** 2))

    @property
    def mean(self):
        return self.s / self.n

    @property
    def stderr(self):
        m = self.mean
        var = max(self.s2 / self.n - abs(m) ** 2, 0.0)
        return float(np.sqrt(var / self.n))


def mc_transform(model: ModelSpec, f: TestFunction, grid: Grid, n_paths, seed,
                 checkpoints=DEFAULT_CHECKPOINTS, slack=MC_SLACK,
                 block_size=DEFAULT_BLOCK_SIZE, sol: RiccatiSolution = None):
    """Estimate E[exp(int_0^T f(T-s) X_s ds)], its flatness across checkpoints,
    and the terminal forward mean; compare each against its theoretical value.

    Paths are streamed in blocks, so memory stays bounded for large n_paths.
    """
    sol = solve(model, f, grid) if sol is None else sol
    ctx = make_forward_context(model, f, sol, grid)
    theory = np.exp(v0(model, sol, g0_values=ctx.g0))
    theory_bar = float(np.exp(v0_bar(model, sol, g0_values=ctx.g0)))
    fm_theory = forward_mean(model, grid)

    cp_idx = [int(round(c * grid.n)) for c in checkpoints]
    for i in cp_idx:
        if not 0 < i < grid.n:
            raise ContractError("checkpoints must map to interior nodes")

    acc = _MeanAccumulator()
    acc_cp = [_MeanAccumulator() for _ in cp_idx]
    acc_cp_bar = [_MeanAccumulator() for _ in cp_idx]
    acc_xt = _MeanAccumulator()
    clipped = 0
    total_steps = 0
    w_full = np.full(grid.n + 1, grid.dt)
    w_full[0] = w_full[-1] = 0.5 * grid.dt
    for ens in iter_path_blocks(model, grid, n_paths, seed, block_size):
        integral = ens.X @ (w_full * ctx.f_rev)
        acc.add(np.exp(integral))
        for pos, i in enumerate(cp_idx):
            acc_cp[pos].add(np.exp(v_forward(ens, ctx, i)))
            acc_cp_bar[pos].add(np.exp(v_forward(ens, ctx, i, real_system=True)))
        acc_xt.add(ens.X[:, -1] + 0.0j)
        clipped += ens.clipped
        total_steps += ens.n_paths * grid.n

    gap = abs(acc.mean - theory)
    tol = 3.0 * acc.stderr + slack
    flat, flat_bar = [], []
    for pos, i in enumerate(cp_idx):
        t = grid.nodes[i]
        a = acc_cp[pos]
        g = abs(a.mean - theory)
        tol_i = 3.0 * a.stderr + slack
        flat.append(FlatnessRow(t, a.mean, a.stderr, float(g), tol_i, g <= tol_i))
        ab = acc_cp_bar[pos]
        gb = abs(ab.mean - theory_bar)
        tol_b = 3.0 * ab.stderr + slack
        flat_bar.append(FlatnessRow(t, ab.mean, ab.stderr, float(gb), tol_b, gb <= tol_b))
    fm_est = acc_xt.mean.real
    fm_gap = abs(fm_est - fm_theory)
    fm_tol = 3.0 * acc_xt.stderr + slack
    return TransformReport(
        theory=complex(theory), theory_bar=theory_bar,
        estimate=acc.mean, stderr=acc.stderr, gap=float(gap), tolerance=float(tol),
        passed=bool(gap <= tol),
        flatness=tuple(flat), flatness_bar=tuple(flat_bar),
        forward_mean_theory=fm_theory, forward_mean_estimate=float(fm_est),
        forward_mean_stderr=acc_xt.stderr, forward_mean_gap=float(fm_gap),
        forward_mean_tolerance=float(fm_tol), forward_mean_passed=bool(fm_gap <= fm_tol),
        clipped_fraction=clipped / total_steps if total_steps else 0.0,
        n_paths=n_paths, seed=seed)
