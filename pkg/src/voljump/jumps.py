"""Nonnegative jump measures on (0, inf): transform, moments, sampling.

The jump transform J(u) = int (e^{u xi} - 1 - u xi) nu(d xi) is the jump
contribution to the Riccati generator; it is finite for Re u <= 0 whenever the
second moment is finite, and evaluation is refused for Re u > 0 (exponential
tails may diverge there).  Sampling draws compound-Poisson sums and is only
offered by finite-activity variants with explicit size laws.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ContractError, DomainError


def _check_domain(u):
    u = np.asarray(u)
    if np.any(np.real(u) > 1e-14):
        raise DomainError("jump transform needs Re(u) <= 0")
    return u


class LevyMeasure:
    """Base class for the supported jump measure variants."""

    samplable = False

    def transform(self, u):
        """J(u) = int (e^{u xi} - 1 - u xi) nu(d xi), Re u <= 0."""
        raise NotImplementedError

    def second_moment(self):
        """int xi^2 nu(d xi)."""
        raise NotImplementedError

    def total_intensity(self):
        """nu((0, inf)); finite for all supported variants."""
        raise NotImplementedError

    def mean_size(self):
        """int xi nu(d xi) / total intensity (0 when there are no jumps)."""
        raise NotImplementedError

    def sample_sums(self, scale, rng):
        """Compound-Poisson draw: for each entry of ``scale`` return the sum of
        N ~ Poisson(total_intensity * scale) i.i.d. sizes."""
        raise CapabilityError(f"{type(self).__name__} is not samplable")


@dataclass(frozen=True)
class NoJumps(LevyMeasure):
    """The zero measure."""

    samplable = True

    def transform(self, u):
        u = _check_domain(u)
        return np.zeros_like(u)

    def second_moment(self):
        return 0.0

    def total_intensity(self):
        return 0.0

    def mean_size(self):
        return 0.0

    def sample_sums(self, scale, rng):
        return np.zeros_like(np.asarray(scale, dtype=float))


@dataclass(frozen=True)
class ExponentialJumps(LevyMeasure):
    """Density intensity * rate * exp(-rate * xi) on (0, inf)."""

    intensity: float
    rate: float
    samplable = True

    def __post_init__(self):
        if self.intensity < 0.0:
            raise DomainError("jump intensity must be >= 0")
        if self.rate <= 0.0:
            raise DomainError("exponential jump rate must be > 0")

    def transform(self, u):
        u = _check_domain(u)
        return self.intensity * (self.rate / (self.rate - u) - 1.0 - u / self.rate)

    def second_moment(self):
        return 2.0 * self.intensity / self.rate**2

    def total_intensity(self):
        return self.intensity

    def mean_size(self):
        return 1.0 / self.rate

    def sample_sums(self, scale, rng):
        scale = np.asarray(scale, dtype=float)
        counts = rng.poisson(self.intensity * scale)
        # a sum of n Exp(rate) variables is Gamma(n, 1/rate); gamma(0) == 0
        return rng.gamma(shape=counts, scale=1.0 / self.rate)


@dataclass(frozen=True)
class PointMassJumps(LevyMeasure):
    """All jumps share one size: nu = intensity * delta_{size}."""

    intensity: float
    size: float
    samplable = True

    def __post_init__(self):
        if self.intensity < 0.0:
            raise DomainError("jump intensity must be >= 0")
        if self.size <= 0.0:
            raise DomainError("jump size must be > 0")

    def transform(self, u):
        u = _check_domain(u)
        x = u * self.size
        return self.intensity * (np.exp(x) - 1.0 - x)

    def second_moment(self):
        return self.intensity * self.size**2

    def total_intensity(self):
        return self.intensity

    def mean_size(self):
        return self.size

    def sample_sums(self, scale, rng):
        scale = np.asarray(scale, dtype=float)
        counts = rng.poisson(self.intensity * scale)
        return counts * self.size


@dataclass(frozen=True)
class TabulatedJumps(LevyMeasure):
    """Quadrature representation sum_j weights_j * delta_{nodes_j}.

    Meant for transform/moment evaluation of measures without a closed form;
    it deliberately refuses to sample (the nodes are quadrature abscissae, not
    an empirical size law).
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise ContractError("tabulated jumps need matching 1-d nodes/weights")
        if np.any(nodes <= 0.0):
            raise DomainError("jump sizes must be > 0 (no mass at the origin)")
        if np.any(weights < 0.0):
            raise DomainError("jump weights must be >= 0")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def transform(self, u):
        u = _check_domain(u)
        x = np.multiply.outer(u, self.nodes)
        return np.sum(self.weights * (np.exp(x) - 1.0 - x), axis=-1)

    def second_moment(self):
        return float(np.sum(self.weights * self.nodes**2))

    def total_intensity(self):
        return float(np.sum(self.weights))

    def mean_size(self):
        tot = self.total_intensity()
        return float(np.sum(self.weights * self.nodes)) / tot if tot > 0.0 else 0.0


def jump_transform(measure: LevyMeasure, u):
    return measure.transform(u)


def second_moment(measure: LevyMeasure):
    return measure.second_moment()


def sample_jump_sum(measure: LevyMeasure, scale, rng):
    """Compound-Poisson sum with local intensity ``total_intensity * scale``.

    ``scale`` is x * dt in the simulation loop; vectorized over paths.
    """
    scale = np.asarray(scale, dtype=float)
    if np.any(scale < 0.0):
        raise DomainError("jump intensity scale must be >= 0")
    return measure.sample_sums(scale, rng)
