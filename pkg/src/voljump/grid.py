"""Uniform time grid on [0, T] and trapezoid helpers used throughout."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class Grid:
    """Uniform grid t_i = i * dt, i = 0..n, with dt = horizon / n."""

    horizon: float
    n: int

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ContractError(f"grid horizon must be positive, got {self.horizon}")
        if self.n < 2:
            raise ContractError(f"grid needs at least 2 steps, got {self.n}")

    @property
    def dt(self):
        return self.horizon / self.n

    @cached_property
    def nodes(self):
        return np.linspace(0.0, self.horizon, self.n + 1)

    def node_index(self, t, tol=1e-9):
        """Index i with t_i == t; ContractError if t is off-grid."""
        i = int(round(t / self.dt))
        if i < 0 or i > self.n or abs(i * self.dt - t) > tol * max(1.0, self.horizon):
            raise ContractError(f"time {t} is not a node of grid(T={self.horizon}, n={self.n})")
        return i

    def trapezoid_weights(self, upto=None):
        """Quadrature weights for int_0^{t_upto} on nodes 0..upto."""
        m = self.n if upto is None else upto
        w = np.full(m + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        if m == 0:
            return np.zeros(1)
        return w


def trapezoid(values, dt):
    """int_0^{t_end} of node samples by the trapezoid rule."""
    values = np.asarray(values)
    if values.shape[-1] < 2:
        return np.zeros(values.shape[:-1], dtype=values.dtype)
    return dt * (values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1]))


def cumulative_trapezoid(values, dt):
    """Running trapezoid integral, same length as input, starts at 0."""
    values = np.asarray(values)
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), out=out[1:])
    return out
