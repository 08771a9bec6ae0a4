"""Convolution kernels on a uniform grid.

Every variant is nonnegative and nonincreasing on (0, inf) and carries exact
antiderivatives where they exist: ``integral`` gives int_0^t K and
``first_moment`` gives int_0^t u K(u) du, which together yield exact cell
weights and cell centroids for product-integration quadrature.  Singular
variants (fractional with alpha < 1, gamma) refuse point evaluation at t = 0;
all integrations near zero go through the exact cell integrals instead.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .errors import CapabilityError, ContractError, DomainError
from .grid import Grid


class Kernel:
    """Base class; concrete variants implement __call__ / integral."""

    singular_at_zero = False
    completely_monotone = False
    differentiable = True

    def __call__(self, t):
        raise NotImplementedError

    def integral(self, t):
        """int_0^t K(s) ds, vectorized, exact."""
        raise NotImplementedError

    def first_moment(self, t):
        """int_0^t s K(s) ds, vectorized, exact."""
        raise NotImplementedError

    def derivative(self, t):
        """K'(t) for t > 0."""
        raise CapabilityError(f"{type(self).__name__} kernel has no derivative information")

    # -- derived helpers -------------------------------------------------

    def _check_positive(self, t):
        t = np.asarray(t, dtype=float)
        if self.singular_at_zero and np.any(t <= 0.0):
            raise DomainError(f"{type(self).__name__} kernel is singular at 0; t must be > 0")
        if np.any(t < 0.0):
            raise DomainError("kernel evaluation needs t >= 0")
        return t

    def mass(self, a, b):
        """Exact int_a^b K."""
        return self.integral(b) - self.integral(a)

    def centroid(self, a, b):
        """Mass centroid of K on [a, b]; midpoint where the mass vanishes."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        m = self.mass(a, b)
        num = self.first_moment(b) - self.first_moment(a)
        mid = 0.5 * (a + b)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(m > 0.0, num / np.where(m > 0.0, m, 1.0), mid)
        return np.clip(c, a, b)

    def cell_weights(self, grid: Grid):
        """w_j = int_{t_j}^{t_{j+1}} K(s) ds for j = 0..n-1."""
        return np.diff(self.integral(grid.nodes))


@dataclass(frozen=True)
class Constant(Kernel):
    """K(t) = k0."""

    k0: float = 1.0
    completely_monotone = True

    def __post_init__(self):
        if self.k0 < 0.0:
            raise DomainError("constant kernel needs k0 >= 0")

    def __call__(self, t):
        t = self._check_positive(t)
        return np.full_like(t, self.k0, dtype=float)

    def integral(self, t):
        return self.k0 * np.asarray(t, dtype=float)

    def first_moment(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * self.k0 * t * t

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Fractional(Kernel):
    """K(t) = t^(alpha-1) / Gamma(alpha), 1/2 < alpha <= 1.

    alpha > 1/2 keeps K square integrable near 0; alpha = 1 degenerates to the
    constant kernel 1.
    """

    alpha: float
    completely_monotone = True

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1.0:
            raise DomainError(
                f"fractional exponent alpha={self.alpha} outside (1/2, 1]: "
                "t^(alpha-1) must stay square integrable near 0"
            )

    @property
    def singular_at_zero(self):
        return self.alpha < 1.0

    def __call__(self, t):
        t = self._check_positive(t)
        return t ** (self.alpha - 1.0) / gamma_fn(self.alpha)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return t ** self.alpha / gamma_fn(self.alpha + 1.0)

    def first_moment(self, t):
        t = np.asarray(t, dtype=float)
        return t ** (self.alpha + 1.0) / ((self.alpha + 1.0) * gamma_fn(self.alpha))

    def derivative(self, t):
        t = self._check_positive(t)
        return (self.alpha - 1.0) * t ** (self.alpha - 2.0) / gamma_fn(self.alpha)


@dataclass(frozen=True)
class Exponential(Kernel):
    """K(t) = k0 * exp(-rate * t)."""

    k0: float = 1.0
    rate: float = 1.0
    completely_monotone = True

    def __post_init__(self):
        if self.k0 < 0.0 or self.rate < 0.0:
            raise DomainError("exponential kernel needs k0 >= 0 and rate >= 0")

    def __call__(self, t):
        t = self._check_positive(t)
        return self.k0 * np.exp(-self.rate * t)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return self.k0 * t
        return self.k0 * (1.0 - np.exp(-self.rate * t)) / self.rate

    def first_moment(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return 0.5 * self.k0 * t * t
        r = self.rate
        return self.k0 * (1.0 - (1.0 + r * t) * np.exp(-r * t)) / (r * r)

    def derivative(self, t):
        t = self._check_positive(t)
        return -self.k0 * self.rate * np.exp(-self.rate * t)


@dataclass(frozen=True)
class GammaKernel(Kernel):
    """K(t) = t^(alpha-1) exp(-rate*t) / Gamma(alpha), 1/2 < alpha <= 1."""

    alpha: float
    rate: float
    completely_monotone = True

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1.0:
            raise DomainError(
                f"gamma kernel exponent alpha={self.alpha} outside (1/2, 1]: "
                "t^(alpha-1) must stay square integrable near 0"
            )
        if self.rate < 0.0:
            raise DomainError("gamma kernel needs rate >= 0")

    @property
    def singular_at_zero(self):
        return self.alpha < 1.0

    def __call__(self, t):
        t = self._check_positive(t)
        return t ** (self.alpha - 1.0) * np.exp(-self.rate * t) / gamma_fn(self.alpha)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return t ** self.alpha / gamma_fn(self.alpha + 1.0)
        return gammainc(self.alpha, self.rate * t) * self.rate ** (-self.alpha)

    def first_moment(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return t ** (self.alpha + 1.0) / ((self.alpha + 1.0) * gamma_fn(self.alpha))
        # int_0^t s^a e^{-rs} ds / Gamma(a) with a = alpha
        a, r = self.alpha, self.rate
        return a * gammainc(a + 1.0, r * t) * r ** (-(a + 1.0))

    def derivative(self, t):
        t = self._check_positive(t)
        return ((self.alpha - 1.0) / t - self.rate) * self(t)


@dataclass(frozen=True)
class Tabulated(Kernel):
    """Piecewise-linear interpolant of (times, values) samples.

    The interpolant itself is the kernel definition (flat extension beyond the
    sample range), so cell integrals are exact for it.  No derivative
    information is exposed.
    """

    times: np.ndarray
    values: np.ndarray
    differentiable = False
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ContractError("tabulated kernel needs matching 1-d times/values, len >= 2")
        if times[0] < 0.0 or np.any(np.diff(times) <= 0.0):
            raise ContractError("tabulated kernel times must be nonnegative and increasing")
        if np.any(values < 0.0):
            raise DomainError("tabulated kernel values must be nonnegative")
        if np.any(np.diff(values) > 1e-12 * max(1.0, values[0])):
            raise DomainError("tabulated kernel values must be nonincreasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        # int_0^{times[i]} of the extended interpolant
        seg = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
        cum = times[0] * values[0] + np.concatenate([[0.0], np.cumsum(seg)])
        object.__setattr__(self, "_cum", cum)

    def __call__(self, t):
        t = self._check_positive(t)
        return np.interp(t, self.times, self.values)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        tt, vv = self.times, self.values
        out = np.empty_like(t)
        below = t <= tt[0]
        above = t >= tt[-1]
        mid = ~below & ~above
        out[below] = t[below] * vv[0]
        out[above] = self._cum[-1] + (t[above] - tt[-1]) * vv[-1]
        if np.any(mid):
            tm = t[mid]
            idx = np.searchsorted(tt, tm, side="right") - 1
            lo = tt[idx]
            v_lo = vv[idx]
            v_t = v_lo + (tm - lo) / (tt[idx + 1] - lo) * (vv[idx + 1] - v_lo)
            out[mid] = self._cum[idx] + 0.5 * (v_lo + v_t) * (tm - lo)
        return out

    def first_moment(self, t):
        raise CapabilityError("tabulated kernel exposes no exact first moment")


def eval_kernel(kernel: Kernel, t):
    """Point evaluation K(t); domain error for singular kernels at t <= 0."""
    return kernel(t)


def cell_weights(kernel: Kernel, grid: Grid):
    """Integrated kernel over every grid cell."""
    return kernel.cell_weights(grid)


def shifted_kernel_derivative(kernel: Kernel, h, u):
    """(Delta_h K)'(u) = K'(u + h) for a shift h > 0."""
    if h <= 0.0:
        raise DomainError("shift h must be positive")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0):
        raise DomainError("shifted kernel derivative needs u >= 0")
    if not kernel.differentiable:
        raise CapabilityError(f"{type(kernel).__name__} kernel has no derivative information")
    return kernel.derivative(u + h)


def convolve_kernel(kernel_or_weights, f_samples, grid: Grid):
    """(K * f)(t_i) with exact kernel cells and trapezoid in f.

    int_{t_j}^{t_{j+1}} K(t_i - s) f(s) ds is approximated by
    w_{i-1-j} * (f_j + f_{j+1}) / 2, which is exact when f is constant and
    keeps singular kernels integrated rather than sampled.
    """
    f = np.asarray(f_samples)
    if isinstance(kernel_or_weights, Kernel):
        w = kernel_or_weights.cell_weights(grid)
    else:
        w = np.asarray(kernel_or_weights, dtype=float)
    if f.shape[-1] != grid.n + 1 or w.shape[-1] != grid.n:
        raise ContractError("operand length does not match the grid")
    avg = 0.5 * (f[..., 1:] + f[..., :-1])
    out = np.zeros(f.shape, dtype=np.result_type(w, f))
    if f.ndim == 1:
        out[1:] = np.convolve(w, avg)[: grid.n]
    else:
        for p in range(f.shape[0]):
            out[p, 1:] = np.convolve(w, avg[p])[: grid.n]
    return out


def convolve_samples(f_samples, g_samples, grid: Grid):
    """(f * g)(t_i) by the trapezoid product rule; exact for degree <= 1."""
    f = np.asarray(f_samples)
    g = np.asarray(g_samples)
    if f.shape != g.shape or f.shape[-1] != grid.n + 1:
        raise ContractError("operand lengths must both match the grid")
    full = np.convolve(f, g)[: grid.n + 1]
    full -= 0.5 * (f * g[0] + f[0] * g)
    return grid.dt * full


def convolve_increments(increments, f_samples, grid: Grid):
    """Stieltjes convolution (d mu * f)(t_i) from cell increments of mu.

    Each cell's mass is paired with the average of f at the reflected cell's
    endpoints: sum_j dmu_j (f_{i-j} + f_{i-j-1}) / 2.
    """
    dmu = np.asarray(increments)
    f = np.asarray(f_samples)
    if dmu.shape[-1] != grid.n or f.shape[-1] != grid.n + 1:
        raise ContractError("operand lengths do not match the grid")
    avg = 0.5 * (f[..., 1:] + f[..., :-1])
    if f.ndim == 1:
        out = np.zeros(grid.n + 1, dtype=np.result_type(dmu, f))
        out[1:] = np.convolve(dmu, avg)[: grid.n]
        return out
    out = np.zeros((f.shape[0], grid.n + 1), dtype=np.result_type(dmu, f))
    for p in range(f.shape[0]):
        out[p, 1:] = np.convolve(dmu, avg[p])[: grid.n]
    return out
