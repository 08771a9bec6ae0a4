"""Resolvents of the first and second kind for grid convolution kernels.

First kind: the measure L with K * L = L * K = 1, represented as a point mass
at zero plus a density (possibly singular at 0, held as exact cell integrals).
Analytic branches exist for the constant kernel (pure atom) and the fractional
kernel (pure power density); every other variant is obtained by a
lower-triangular discrete deconvolution.

Second kind: R solving Kt * R = Kt - R for Kt = -b K, plus the canonical
resolvent E = K - R * K used by the forward-mean formula.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DomainError, SolverError
from .grid import Grid
from .kernels import Constant, Fractional, Kernel

ANALYTIC_IDENTITY_TOL = 1e-3
DISCRETE_IDENTITY_TOL = 1e-8
SECOND_KIND_TOL = 1e-8

# quadrature knobs for the singular identity check (see _identity_residuals)
_BOUNDARY_CELLS = 8
_CELL_SPLIT = 6
_DYADIC_LEVELS = 18
_DYADIC_SPLIT = 4


@dataclass(frozen=True)
class FirstKindResolvent:
    """Atom-plus-density representation of the first-kind resolvent.

    ``cell_masses[j]`` holds the density mass over (t_j, t_{j+1}];
    ``density_nodes`` are point values (inf at 0 for singular densities).
    ``alpha`` is set only on the analytic fractional branch and enables exact
    sub-cell masses and centroids.
    """

    kernel: Kernel
    grid: Grid
    atom: float
    cell_masses: np.ndarray
    density_nodes: np.ndarray
    provenance: str  # "analytic" | "discrete-deconvolution"
    identity_residual: float
    alpha: float | None = None

    def density(self, s):
        """Density value l(s); piecewise constant on the discrete branch."""
        s = np.asarray(s, dtype=float)
        if self.alpha is not None:
            with np.errstate(divide="ignore"):
                return np.where(s > 0.0, s, np.nan) ** (-self.alpha) / gamma_fn(1.0 - self.alpha)
        dt = self.grid.dt
        idx = np.clip((s / dt).astype(int), 0, self.grid.n - 1)
        out = self.cell_masses[idx] / dt
        return np.where(s <= self.grid.horizon, out, 0.0)

    def mass(self, a, b):
        """Exact density mass of (a, b]; zero beyond the grid horizon."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.alpha is not None:
            g = gamma_fn(2.0 - self.alpha)
            return (b ** (1.0 - self.alpha) - a ** (1.0 - self.alpha)) / g
        return self._cum_interp(b) - self._cum_interp(a)

    def _cum_interp(self, s):
        cum = np.concatenate([[0.0], np.cumsum(self.cell_masses)])
        return np.interp(s, self.grid.nodes, cum, right=cum[-1])

    def density_centroid(self, a, b):
        """Mass centroid of the density on [a, b] (analytic branch only)."""
        if self.alpha is None:
            return 0.5 * (np.asarray(a) + np.asarray(b))
        al = self.alpha
        num = (b ** (2.0 - al) - a ** (2.0 - al)) / (2.0 - al)
        den = (b ** (1.0 - al) - a ** (1.0 - al)) / (1.0 - al)
        return num / den

    def total(self, upto=None):
        """L([0, upto]) = atom + density mass."""
        upto = self.grid.horizon if upto is None else upto
        return self.atom + float(self.mass(0.0, upto))


def resolvent_first_kind(kernel: Kernel, grid: Grid,
                         analytic_tol=ANALYTIC_IDENTITY_TOL,
                         discrete_tol=DISCRETE_IDENTITY_TOL):
    """Build the first-kind resolvent of ``kernel`` on ``grid``.

    The K * L = 1 identity is re-evaluated after construction and a residual
    above tolerance raises SolverError: a wrong resolvent must never flow
    downstream.
    """
    w = kernel.cell_weights(grid)
    if not np.all(w >= 0.0) or w[0] <= 0.0:
        raise DomainError("first-kind resolvent needs a nonnegative, nonvanishing kernel")

    if isinstance(kernel, Constant) or (isinstance(kernel, Fractional) and kernel.alpha == 1.0):
        k0 = kernel.k0 if isinstance(kernel, Constant) else 1.0
        res = FirstKindResolvent(
            kernel, grid, atom=1.0 / k0,
            cell_masses=np.zeros(grid.n),
            density_nodes=np.zeros(grid.n + 1),
            provenance="analytic", identity_residual=0.0,
        )
        return res

    if isinstance(kernel, Fractional):
        al = kernel.alpha
        nodes = grid.nodes
        masses = np.diff(nodes ** (1.0 - al)) / gamma_fn(2.0 - al)
        with np.errstate(divide="ignore"):
            dens = np.concatenate([[np.inf], nodes[1:] ** (-al)]) / gamma_fn(1.0 - al)
        res = FirstKindResolvent(kernel, grid, atom=0.0, cell_masses=masses,
                                 density_nodes=dens, provenance="analytic",
                                 identity_residual=0.0, alpha=al)
        residual = float(np.max(np.abs(_identity_residuals(res))))
        if residual > analytic_tol:
            raise SolverError(
                f"first-kind resolvent identity residual {residual:.3e} exceeds {analytic_tol:.1e}",
                residual=residual)
        return FirstKindResolvent(kernel, grid, atom=0.0, cell_masses=masses,
                                  density_nodes=dens, provenance="analytic",
                                  identity_residual=residual, alpha=al)

    # discrete deconvolution: piecewise-constant density solving, node by node,
    #   sum_{j<i} (m_j / dt) w_{i-1-j} = 1
    # with the first cell weight as the diagonal pivot.
    n, dt = grid.n, grid.dt
    kavg = w / dt
    masses = np.zeros(n)
    conv = np.zeros(n + 1)
    for i in range(1, n + 1):
        acc = np.dot(masses[: i - 1], kavg[i - 1:0:-1]) if i > 1 else 0.0
        masses[i - 1] = (1.0 - acc) / kavg[0]
        conv[i] = acc + masses[i - 1] * kavg[0]
    residual = float(np.max(np.abs(conv[1:] - 1.0)))
    if not np.all(masses >= -discrete_tol):
        raise SolverError("discrete first-kind deconvolution produced a negative density",
                          residual=float(masses.min()))
    if residual > discrete_tol:
        raise SolverError(
            f"discrete first-kind identity residual {residual:.3e} exceeds {discrete_tol:.1e}",
            residual=residual)
    dens = np.concatenate([[masses[0]], 0.5 * (masses[1:] + masses[:-1]), [masses[-1]]]) / dt
    return FirstKindResolvent(kernel, grid, atom=0.0, cell_masses=np.maximum(masses, 0.0),
                              density_nodes=dens, provenance="discrete-deconvolution",
                              identity_residual=residual)


def first_kind_identity_residuals(res: FirstKindResolvent):
    """Residuals (K*L)(t_i) - 1 at every node i >= 1.

    For the analytic singular branch this is a genuine product-integration
    evaluation with graded refinement at both singular ends; for the atom and
    discrete branches it recomputes the defining sums.
    """
    return _identity_residuals(res)


def _identity_residuals(res: FirstKindResolvent):
    grid, kernel = res.grid, res.kernel
    n, dt = grid.n, grid.dt
    t = grid.nodes
    w = kernel.cell_weights(grid)
    kavg = w / dt
    if res.alpha is None:
        # atom and/or piecewise-constant density: the discrete sums are exact
        conv = np.concatenate([[0.0], np.convolve(res.cell_masses, kavg)[:n]])
        if res.atom > 0.0:
            conv[1:] += res.atom * kernel(t[1:])
        return conv[1:] - 1.0

    # analytic singular branch: average-pairing base plus boundary refinements
    m = min(_BOUNDARY_CELLS, max(1, n // 4))
    lam = res.cell_masses
    base = np.concatenate([[0.0], np.convolve(lam, kavg)[:n]])

    def graded_cell(width, origin):
        g = np.concatenate([[0.0], width * 0.5 ** np.arange(_DYADIC_LEVELS, 0, -1)])
        fine = [np.linspace(a, b, _DYADIC_SPLIT + 1)[:-1] for a, b in zip(g[:-1], g[1:])]
        return origin + np.concatenate(fine + [[width]])

    left_sub = []   # density-exact refinement of cells j = 0..m-1
    for j in range(m):
        bp = graded_cell(dt, t[j]) if j == 0 else np.linspace(t[j], t[j + 1], 7)
        left_sub.append((res.mass(bp[:-1], bp[1:]), res.density_centroid(bp[:-1], bp[1:])))
    right_sub = []  # kernel-exact refinement of lag cells k = 0..m-1
    for k in range(m):
        bp = graded_cell(dt, t[k]) if k == 0 else np.linspace(t[k], t[k + 1], 7)
        right_sub.append((kernel.mass(bp[:-1], bp[1:]), kernel.centroid(bp[:-1], bp[1:])))

    out = np.zeros(n)
    for i in range(1, n + 1):
        ti = t[i]
        if i <= 2 * m:
            out[i - 1] = _singular_pair_integral(res, kernel, ti) - 1.0
            continue
        v = base[i]
        for j in range(m):
            mass_j, cent_j = left_sub[j]
            v += np.sum(mass_j * kernel(ti - cent_j)) - lam[j] * kavg[i - 1 - j]
        for k in range(m):
            kmass, kcent = right_sub[k]
            v += np.sum(kmass * res.density(ti - kcent)) - lam[i - 1 - k] * kavg[k]
        out[i - 1] = v - 1.0
    return out


def _singular_pair_integral(res, kernel, ti):
    """int_0^ti K(ti - s) l(s) ds with both endpoint singularities graded."""
    g = np.concatenate([[0.0], 0.5 * ti * 0.5 ** np.arange(_DYADIC_LEVELS, 0, -1)])
    fine = [np.linspace(a, b, _CELL_SPLIT + 1)[:-1] for a, b in zip(g[:-1], g[1:])]
    fine = np.concatenate(fine + [[0.25 * ti]])
    mid = np.linspace(0.25 * ti, 0.75 * ti, 49)
    pts = np.unique(np.concatenate([fine, mid, ti - fine[::-1]]))
    lo, hi = pts[:-1], pts[1:]
    mids = 0.5 * (lo + hi)
    left = mids < 0.5 * ti
    total = 0.0
    if np.any(left):
        total += np.sum(res.mass(lo[left], hi[left])
                        * kernel(ti - res.density_centroid(lo[left], hi[left])))
    r = ~left
    if np.any(r):
        ua, ub = ti - hi[r], ti - lo[r]
        total += np.sum(kernel.mass(ua, ub) * res.density(ti - kernel.centroid(ua, ub)))
    return total


@dataclass(frozen=True)
class SecondKindResolvent:
    """R with Kt * R = Kt - R for Kt = -b K, and the canonical E = K - R * K.

    ``r_cells`` / ``e_cells`` are exact-in-kernel cell integrals of R and E,
    used to convolve against smooth curves without sampling R near its
    (possibly singular) origin.
    """

    kernel: Kernel
    grid: Grid
    b: float
    r_nodes: np.ndarray
    e_nodes: np.ndarray
    r_cells: np.ndarray
    e_cells: np.ndarray
    residual: float


def resolvent_second_kind(kernel: Kernel, b: float, grid: Grid, tol=SECOND_KIND_TOL):
    """Solve the second-kind resolvent equation in cell-integrated form.

    Working with the cell integrals WR_j = int_{t_j}^{t_{j+1}} R (instead of
    node values) keeps singular kernels integrated rather than sampled:
    R inherits the kernel's singularity at 0.  The discretization pairs exact
    Kt cells with piecewise-constant R and is lower triangular with diagonal
    1 + wt_0 / 2 (wt_0 = -b w_0), which never vanishes on admissible grids.
    """
    n, dt = grid.n, grid.dt
    w = kernel.cell_weights(grid)
    k_nodes = _kernel_nodes(kernel, grid)
    if b == 0.0:
        return SecondKindResolvent(kernel, grid, 0.0, np.zeros(n + 1), k_nodes,
                                   np.zeros(n), w.copy(), 0.0)

    wt = -b * w
    kt_nodes = -b * k_nodes
    wr = np.zeros(n)        # cell integrals of R
    s = np.zeros(n + 1)     # (Kt * R)(t_i)
    diag = 1.0 + 0.5 * wt[0]
    for i in range(n):
        p = np.dot(wt[i:0:-1], wr[:i]) / dt if i > 0 else 0.0  # part of S_{i+1}
        wr[i] = (wt[i] - 0.5 * dt * (s[i] + p)) / diag
        s[i + 1] = p + wt[0] * wr[i] / dt
    r_nodes = kt_nodes - s
    residual = float(np.max(np.abs(kt_nodes[1:] - r_nodes[1:] - s[1:])))
    if residual > tol:
        raise SolverError(f"second-kind resolvent residual {residual:.3e} exceeds {tol:.1e}",
                          residual=residual)

    # E = K - R * K with exact kernel cells against piecewise-constant R
    rk = np.zeros(n + 1)
    for i in range(1, n + 1):
        rk[i] = np.dot(w[i - 1::-1], wr[:i]) / dt
    e_nodes = k_nodes - rk
    e_cells = w - 0.5 * dt * (rk[:-1] + rk[1:])
    return SecondKindResolvent(kernel, grid, b, r_nodes, e_nodes, wr, e_cells, residual)


def _kernel_nodes(kernel, grid):
    """Kernel values at the nodes; singular kernels get inf at t = 0."""
    vals = np.empty(grid.n + 1)
    vals[1:] = kernel(grid.nodes[1:])
    vals[0] = np.inf if kernel.singular_at_zero else float(kernel(np.array([0.0]))[()])
    return vals
