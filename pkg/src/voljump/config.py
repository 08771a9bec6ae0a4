"""Flat key = value run configuration.

The format is a plain text file of dotted keys, one per line:

    kernel.type = fractional
    kernel.alpha = 0.6        # dimensionless, in (1/2, 1]
    grid.T = 1.0              # time horizon
    grid.n = 300              # steps
    mc.seed = 7

``#`` starts a comment, blank lines are ignored, later keys override earlier
ones.  Every module precondition is validated here, before any computation:
an invalid configuration never reaches a solver.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .jumps import ExponentialJumps, NoJumps, PointMassJumps, TabulatedJumps
from .kernels import Constant, Exponential, Fractional, GammaKernel, Tabulated
from .riccati import ConstantPlusKTheta, ModelSpec, MonotoneTable, TestFunction

OUTPUT_DIR_ENV = "VOLJUMP_OUTPUT_DIR"

_DEFAULTS = {
    "kernel.type": "fractional",
    "kernel.alpha": "0.6",
    "kernel.k0": "1.0",
    "kernel.rate": "1.0",
    "kernel.table": "",
    "model.b": "0.0",
    "model.c": "0.0",
    "model.b0": "0.0",
    "jumps.type": "none",
    "jumps.lambda": "0.0",
    "jumps.beta": "1.0",
    "jumps.size": "1.0",
    "jumps.table": "",
    "g0.type": "const_plus_ktheta",
    "g0.x0": "0.0",
    "g0.theta": "0.0",
    "g0.table": "",
    "grid.T": "1.0",
    "grid.n": "200",
    "f.type": "zero",
    "f.u": "1.0",
    "f.re": "0.0",
    "f.im": "0.0",
    "mc.paths": "10000",
    "mc.seed": "0",
    "mc.block_size": "8192",
    "mc.checkpoints": "0.25,0.5,0.75",
    "mc.workers": "1",
    "tolerances.mc_slack": "0.01",
    "tolerances.comparison": "1e-10",
    "tolerances.envelope": "1e-8",
    "tolerances.two_formula": "1e-2",
    "tolerances.bound_slack": "1e-8",
    "verify.claims": "all",
    "output.dir": "",
}

_KNOWN_KEYS = set(_DEFAULTS)


def parse_config_text(text):
    """Parse the flat key-tree format into an ordered dict of strings."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = value
    return values


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` holds the effective key table."""

    raw: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text, overrides=None):
        values = dict(_DEFAULTS)
        values.update(parse_config_text(text))
        for key, value in (overrides or {}).items():
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = str(value)
        cfg = cls(raw=values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides=None):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        return cls.from_text(text, overrides)

    def to_text(self):
        """Serialize so that reparsing yields an identical configuration."""
        lines = [f"{key} = {self.raw[key]}" for key in sorted(self.raw)]
        return "\n".join(lines) + "\n"

    # -- typed access -----------------------------------------------------

    def _float(self, key):
        try:
            return float(self.raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {self.raw[key]!r}") from exc

    def _int(self, key):
        try:
            return int(self.raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {self.raw[key]!r}") from exc

    def _str(self, key):
        return self.raw[key]

    # -- object construction ----------------------------------------------

    def grid(self):
        T, n = self._float("grid.T"), self._int("grid.n")
        if T <= 0.0:
            raise ConfigError("grid.T must be positive")
        if n < 2:
            raise ConfigError("grid.n must be at least 2")
        return Grid(T, n)

    def kernel(self):
        kind = self._str("kernel.type")
        if kind == "constant":
            return Constant(self._float("kernel.k0"))
        if kind == "fractional":
            alpha = self._float("kernel.alpha")
            if not 0.5 < alpha <= 1.0:
                raise ConfigError(
                    f"kernel.alpha = {alpha} rejected: the kernel t^(alpha-1) is only "
                    "square integrable near 0 for alpha in (1/2, 1]")
            return Fractional(alpha)
        if kind == "exponential":
            return Exponential(self._float("kernel.k0"), self._float("kernel.rate"))
        if kind == "gamma":
            alpha = self._float("kernel.alpha")
            if not 0.5 < alpha <= 1.0:
                raise ConfigError(
                    f"kernel.alpha = {alpha} rejected: the kernel t^(alpha-1) is only "
                    "square integrable near 0 for alpha in (1/2, 1]")
            return GammaKernel(alpha, self._float("kernel.rate"))
        if kind == "tabulated":
            path = self._str("kernel.table")
            if not path:
                raise ConfigError("kernel.type = tabulated needs kernel.table")
            table = _load_table(path, 2)
            return Tabulated(table[:, 0], table[:, 1])
        raise ConfigError(f"unknown kernel.type {kind!r}")

    def jumps(self):
        kind = self._str("jumps.type")
        lam = self._float("jumps.lambda")
        if lam < 0.0:
            raise ConfigError("jumps.lambda must be >= 0")
        if kind == "none":
            return NoJumps()
        if kind == "exponential":
            beta = self._float("jumps.beta")
            if beta <= 0.0:
                raise ConfigError("jumps.beta must be > 0")
            return ExponentialJumps(lam, beta)
        if kind == "pointmass":
            size = self._float("jumps.size")
            if size <= 0.0:
                raise ConfigError("jumps.size must be > 0")
            return PointMassJumps(lam, size)
        if kind == "tabulated":
            path = self._str("jumps.table")
            if not path:
                raise ConfigError("jumps.type = tabulated needs jumps.table")
            table = _load_table(path, 2)
            return TabulatedJumps(table[:, 0], table[:, 1])
        raise ConfigError(f"unknown jumps.type {kind!r}")

    def input_curve(self, grid):
        kind = self._str("g0.type")
        if kind == "const_plus_ktheta":
            x0 = self._float("g0.x0")
            if x0 < 0.0:
                raise ConfigError("g0.x0 must be >= 0")
            theta = self._float("g0.theta")
            if theta < 0.0:
                raise ConfigError("g0.theta must be >= 0")
            return ConstantPlusKTheta(x0=x0, theta=theta)
        if kind == "monotone_table":
            path = self._str("g0.table")
            if not path:
                raise ConfigError("g0.type = monotone_table needs g0.table")
            table = _load_table(path, 1)
            samples = table[:, 0]
            if samples.shape[0] != grid.n + 1:
                raise ConfigError("g0.table length must be grid.n + 1")
            if samples[0] != 0.0 or np.any(np.diff(samples) < 0.0):
                raise ConfigError("g0.table must be nondecreasing with first sample 0")
            return MonotoneTable(samples)
        raise ConfigError(f"unknown g0.type {kind!r}")

    def model(self, grid=None):
        grid = grid or self.grid()
        c = self._float("model.c")
        if c < 0.0:
            raise ConfigError("model.c must be >= 0")
        return ModelSpec(kernel=self.kernel(), b=self._float("model.b"), c=c,
                         jumps=self.jumps(), g0=self.input_curve(grid),
                         b0=self._float("model.b0"))

    def test_function(self, grid):
        kind = self._str("f.type")
        if kind == "zero":
            return TestFunction.zero(grid)
        if kind == "imag":
            return TestFunction.imag_const(self._float("f.u"), grid)
        if kind == "complex":
            re, im = self._float("f.re"), self._float("f.im")
            if re > 0.0:
                raise ConfigError("f.re must be <= 0 (solutions may explode otherwise)")
            return TestFunction.complex_const(complex(re, im), grid)
        raise ConfigError(f"unknown f.type {kind!r}")

    def checkpoints(self):
        try:
            fracs = tuple(float(p) for p in self._str("mc.checkpoints").split(","))
        except ValueError as exc:
            raise ConfigError("mc.checkpoints must be comma-separated fractions") from exc
        if any(not 0.0 < p < 1.0 for p in fracs):
            raise ConfigError("mc.checkpoints must lie strictly inside (0, 1)")
        return fracs

    def mc_settings(self):
        paths = self._int("mc.paths")
        seed = self._int("mc.seed")
        block = self._int("mc.block_size")
        if paths < 1 or block < 1:
            raise ConfigError("mc.paths and mc.block_size must be positive")
        if seed < 0:
            raise ConfigError("mc.seed must be >= 0")
        if self._int("mc.workers") < 1:
            raise ConfigError("mc.workers must be >= 1")
        return paths, seed, block

    def output_dir(self):
        explicit = self._str("output.dir")
        return explicit or os.environ.get(OUTPUT_DIR_ENV, "voljump-out")

    def claims(self):
        return tuple(c.strip() for c in self._str("verify.claims").split(",") if c.strip())

    def validate(self):
        """Run every constructor once; all preconditions fire here."""
        grid = self.grid()
        self.model(grid)
        self.test_function(grid)
        self.checkpoints()
        self.mc_settings()
        for key in ("tolerances.mc_slack", "tolerances.comparison",
                    "tolerances.envelope", "tolerances.two_formula",
                    "tolerances.bound_slack"):
            if self._float(key) <= 0.0:
                raise ConfigError(f"{key} must be positive")
        return self


def _load_table(path, min_cols):
    try:
        table = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed table {path}: {exc}") from exc
    if table.shape[1] < min_cols:
        raise ConfigError(f"table {path} needs at least {min_cols} columns")
    return table
