"""Domain types for the dual risk model: cost functions, gain laws and parameters.

The surplus of the dual model decreases deterministically at the surplus
dependent rate ``p(x)`` and increases by i.i.d. gains arriving at the epochs of
a Poisson process with intensity ``lam``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ValidationError

COST_KINDS = ("rational", "logistic", "decreasing", "constant", "tabulated")
# aliases used on the command line and in the examples
COST_ALIASES = {"p1": "rational", "p2": "logistic", "p3": "decreasing", "const": "constant"}


def read_two_column_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read ``x,value`` rows; a non-numeric first row is treated as a header."""
    xs, ys = [], []
    with open(Path(path), newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                if i == 0:
                    continue
                raise DomainError(f"{path}: non-numeric row {i + 1}: {row!r}")
            xs.append(x)
            ys.append(y)
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        raise DomainError(f"{path}: need at least two rows")
    if np.any(np.diff(x) <= 0):
        raise DomainError(f"{path}: x column must be strictly increasing")
    return x, y


@dataclass(frozen=True)
class CostFunction:
    """Surplus dependent cost rate ``p(x)``.

    Builtin kinds (``c`` is the scale):

    * ``rational``   p(x) = c (2 - 1/(1+x)), increasing from c to 2c
    * ``logistic``   p(x) = 2c / (1 + exp(-x)), increasing from c to 2c
    * ``decreasing`` p(x) = c + 0.1/(1+x)
    * ``constant``   p(x) = c

    ``tabulated`` uses a monotone (PCHIP, C^1) interpolant through ``table``
    knots, extended by a constant beyond the last knot when ``extend`` is set.
    """

    kind: str
    c: float = 1.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    extend: bool = True
    _interp: Optional[PchipInterpolator] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = COST_ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in COST_KINDS:
            raise DomainError(f"unknown cost kind {self.kind!r}")
        if kind == "tabulated":
            if not self.table or len(self.table) < 2:
                raise DomainError("tabulated cost needs at least two knots")
            knots = tuple((float(a), float(b)) for a, b in self.table)
            object.__setattr__(self, "table", knots)
            x = np.array([k[0] for k in knots])
            y = np.array([k[1] for k in knots])
            if np.any(np.diff(x) <= 0):
                raise DomainError("tabulated cost knots must be strictly increasing in x")
            if x[0] != 0.0:
                raise DomainError("tabulated cost must start at x = 0")
            object.__setattr__(self, "_interp", PchipInterpolator(x, y, extrapolate=False))
        elif not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError(f"cost scale c must be positive, got {self.c}")

    @classmethod
    def from_csv(cls, path, extend: bool = True) -> "CostFunction":
        x, y = read_two_column_csv(path)
        return cls("tabulated", table=tuple(zip(x.tolist(), y.tolist())), extend=extend)

    # -- evaluation ---------------------------------------------------------

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(np.isnan(x)):
            raise DomainError("cost function is defined for x >= 0 only")
        if self.kind == "tabulated" and not self.extend and np.any(x > self.table[-1][0]):
            raise DomainError(
                f"x beyond last knot {self.table[-1][0]} and constant extension disabled"
            )
        return x

    def __call__(self, x):
        if type(x) is float and x >= 0.0 and self.kind != "tabulated":
            return self._scalar(x)
        x = self._check(x)
        c = self.c
        if self.kind == "rational":
            out = c * (2.0 - 1.0 / (1.0 + x))
        elif self.kind == "logistic":
            out = 2.0 * c / (1.0 + np.exp(-x))
        elif self.kind == "decreasing":
            out = c + 0.1 / (1.0 + x)
        elif self.kind == "constant":
            out = np.full_like(x, c)
        else:
            xl = self.table[-1][0]
            out = np.where(x > xl, self.table[-1][1], self._interp(np.minimum(x, xl)))
        return out if out.ndim else float(out)

    def _scalar(self, x):
        c = self.c
        if self.kind == "rational":
            return c * (2.0 - 1.0 / (1.0 + x))
        if self.kind == "logistic":
            return 2.0 * c / (1.0 + math.exp(-x))
        if self.kind == "decreasing":
            return c + 0.1 / (1.0 + x)
        return c

    def _scalar_derivative(self, x):
        c = self.c
        if self.kind == "rational":
            return c / (1.0 + x) ** 2
        if self.kind == "logistic":
            e = math.exp(-x)
            return 2.0 * c * e / (1.0 + e) ** 2
        if self.kind == "decreasing":
            return -0.1 / (1.0 + x) ** 2
        return 0.0

    def derivative(self, x):
        if type(x) is float and x >= 0.0 and self.kind != "tabulated":
            return self._scalar_derivative(x)
        x = self._check(x)
        c = self.c
        if self.kind == "rational":
            out = c / (1.0 + x) ** 2
        elif self.kind == "logistic":
            e = np.exp(-x)
            out = 2.0 * c * e / (1.0 + e) ** 2
        elif self.kind == "decreasing":
            out = -0.1 / (1.0 + x) ** 2
        elif self.kind == "constant":
            out = np.zeros_like(x)
        else:
            xl = self.table[-1][0]
            out = np.where(x > xl, 0.0, self._interp(np.minimum(x, xl), 1))
        return out if out.ndim else float(out)

    def infimum(self) -> float:
        """inf of p over [0, inf)."""
        if self.kind == "tabulated":
            # PCHIP never overshoots the knot values
            return min(k[1] for k in self.table)
        return self.c

    def supremum(self) -> float:
        """sup of p over [0, inf)."""
        if self.kind in ("rational", "logistic"):
            return 2.0 * self.c
        if self.kind == "decreasing":
            return self.c + 0.1
        if self.kind == "constant":
            return self.c
        return max(k[1] for k in self.table)

    def limit_at_infinity(self) -> float:
        if self.kind in ("rational", "logistic"):
            return 2.0 * self.c
        if self.kind in ("decreasing", "constant"):
            return self.c
        return self.table[-1][1]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "c": self.c}
        if self.kind == "tabulated":
            d = {"kind": self.kind, "table": [list(k) for k in self.table], "extend": self.extend}
        return d


def eval_cost(cf: CostFunction, x):
    """Evaluate p(x); raises :class:`DomainError` for negative ``x``."""
    return cf(x)


def eval_cost_derivative(cf: CostFunction, x):
    """Evaluate p'(x)."""
    return cf.derivative(x)


@dataclass(frozen=True)
class JumpLaw:
    """Distribution of the gain sizes.

    ``exponential`` has density mu*exp(-mu*z). ``tabulated`` is a piecewise
    linear density through ``table`` knots and zero beyond the last knot; its
    tail and partial expectations are integrated exactly.
    """

    kind: str
    mu: float = 1.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    _z: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)
    _f: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)
    _tail0: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)
    _tail1: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "exponential":
            if not (self.mu > 0 and math.isfinite(self.mu)):
                raise DomainError(f"exponential rate mu must be positive, got {self.mu}")
            return
        if self.kind != "tabulated":
            raise DomainError(f"unknown jump law kind {self.kind!r}")
        if not self.table or len(self.table) < 2:
            raise DomainError("tabulated density needs at least two knots")
        z = np.array([float(k[0]) for k in self.table])
        f = np.array([float(k[1]) for k in self.table])
        if z[0] != 0.0 or np.any(np.diff(z) <= 0):
            raise DomainError("density knots must start at 0 and increase strictly")
        if np.any(f < 0):
            raise ValidationError("density must be nonnegative")
        dz = np.diff(z)
        m0 = dz * (f[:-1] + f[1:]) / 2.0
        m1 = dz / 6.0 * (f[:-1] * (2 * z[:-1] + z[1:]) + f[1:] * (z[:-1] + 2 * z[1:]))
        # integrals over [z_k, inf)
        tail0 = np.concatenate([np.cumsum(m0[::-1])[::-1], [0.0]])
        tail1 = np.concatenate([np.cumsum(m1[::-1])[::-1], [0.0]])
        if abs(tail0[0] - 1.0) > 1e-3:
            raise ValidationError(f"density integrates to {tail0[0]:.6g}, not 1")
        object.__setattr__(self, "table", tuple(zip(z.tolist(), f.tolist())))
        object.__setattr__(self, "_z", z)
        object.__setattr__(self, "_f", f)
        object.__setattr__(self, "_tail0", tail0)
        object.__setattr__(self, "_tail1", tail1)

    @classmethod
    def exponential(cls, mu: float) -> "JumpLaw":
        return cls("exponential", mu=mu)

    @classmethod
    def from_csv(cls, path) -> "JumpLaw":
        z, f = read_two_column_csv(path)
        return cls("tabulated", table=tuple(zip(z.tolist(), f.tolist())))

    @property
    def is_exponential(self) -> bool:
        return self.kind == "exponential"

    def density(self, z):
        z = np.asarray(z, dtype=float)
        if self.is_exponential:
            out = np.where(z >= 0, self.mu * np.exp(-self.mu * np.maximum(z, 0.0)), 0.0)
        else:
            out = np.interp(z, self._z, self._f, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def _segment_tails(self, t):
        # integral of f and z f over [t, next knot) for the piecewise linear density
        z, f = self._z, self._f
        k = np.clip(np.searchsorted(z, t, side="right") - 1, 0, z.size - 2)
        z1 = z[k + 1]
        ft = np.interp(t, z, f)
        f1 = f[k + 1]
        d = z1 - t
        s0 = d * (ft + f1) / 2.0
        s1 = d / 6.0 * (ft * (2 * t + z1) + f1 * (t + 2 * z1))
        return k, s0, s1

    def tail(self, t):
        """P(C > t)."""
        t = np.asarray(t, dtype=float)
        if self.is_exponential:
            out = np.exp(-self.mu * np.maximum(t, 0.0))
        else:
            tc = np.clip(t, 0.0, self._z[-1])
            k, s0, _ = self._segment_tails(tc)
            out = s0 + self._tail0[k + 1]
        out = np.where(t < 0, 1.0, out)
        return out if out.ndim else float(out)

    @property
    def mean(self) -> float:
        if self.is_exponential:
            return 1.0 / self.mu
        return float(self._tail1[0])

    def partial_expectation(self, t):
        """E[(C - t)^+] = int_t^inf (z - t) f(z) dz for t >= 0."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("partial expectation needs t >= 0")
        if self.is_exponential:
            out = np.exp(-self.mu * t) / self.mu
        else:
            tc = np.minimum(t, self._z[-1])
            k, s0, s1 = self._segment_tails(tc)
            m0 = s0 + self._tail0[k + 1]
            m1 = s1 + self._tail1[k + 1]
            out = np.maximum(m1 - tc * m0, 0.0)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        if self.is_exponential:
            return rng.exponential(1.0 / self.mu, size=size)
        # inverse cdf of the piecewise linear density, solved per segment
        u = rng.random(size=size)
        target = 1.0 - u  # tail mass to the right of the sample
        tail = self._tail0
        k = np.clip(np.searchsorted(-tail, -target, side="right") - 1, 0, self._z.size - 2)
        z0, z1 = self._z[k], self._z[k + 1]
        f0, f1 = self._f[k], self._f[k + 1]
        need = tail[k] - target  # mass to take from inside segment k
        slope = (f1 - f0) / (z1 - z0)
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * need, 0.0))
            d_quad = (disc - f0) / slope
            d_lin = need / f0
        d = np.where(np.abs(slope) > 1e-300, d_quad, d_lin)
        return np.clip(z0 + np.nan_to_num(d), z0, z1)

    def to_dict(self) -> dict:
        if self.is_exponential:
            return {"kind": "exponential", "mu": self.mu}
        return {"kind": "tabulated", "table": [list(k) for k in self.table]}


def partial_expectation(j: JumpLaw, t):
    """int_t^inf (z - t) f(z) dz."""
    return j.partial_expectation(t)


@dataclass(frozen=True)
class ModelParams:
    lam: float
    q: float
    cost: CostFunction
    jumps: JumpLaw

    @property
    def mean_income_rate(self) -> float:
        """lam * E C_1."""
        return self.lam * self.jumps.mean

    def to_dict(self) -> dict:
        return {"lam": self.lam, "q": self.q, "cost": self.cost.to_dict(), "jumps": self.jumps.to_dict()}


@dataclass
class ValidationReport:
    valid: bool
    errors: list
    warnings: list
    p_min_on_probe: float
    mean_jump: float

    def raise_if_invalid(self):
        if not self.valid:
            raise ValidationError("; ".join(self.errors))


def validate(params: ModelParams, probe_max: float = 1000.0, n_probe: int = 2001,
             strict: bool = False) -> ValidationReport:
    """Check the hard requirements on ``params`` and report soft ones.

    Hard: lam > 0, q >= 0, p > 0 on the probe grid, finite positive E C_1.
    Soft: the income rate lam E C_1 should exceed the long-run cost rate, the
    usual sufficient condition for the uncontrolled surplus to drift to +inf.
    With ``strict`` a hard failure raises :class:`ValidationError`.
    """
    errs, warns = [], []
    if not params.lam > 0:
        errs.append(f"jump intensity must be positive (lam={params.lam})")
    if not params.q >= 0:
        errs.append(f"discount rate must be nonnegative (q={params.q})")
    if params.cost.kind == "tabulated":
        knots = np.array([k[1] for k in params.cost.table])
        if np.any(knots <= 0):
            errs.append("tabulated cost has a nonpositive knot")
    grid = np.linspace(0.0, probe_max, n_probe)
    pv = np.asarray(params.cost(grid))
    p_min = float(pv.min())
    if p_min <= 0:
        errs.append(f"cost function is not positive on the probe grid (min {p_min:.3g})")
    mean = params.jumps.mean
    if not (math.isfinite(mean) and mean > 0):
        errs.append("jump law must have finite positive mean")
    if not errs and params.mean_income_rate <= params.cost.limit_at_infinity():
        msg = (f"lam*E[C]={params.mean_income_rate:.6g} does not exceed the long-run cost "
               f"rate {params.cost.limit_at_infinity():.6g}; the surplus may not drift to +inf")
        warns.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    report = ValidationReport(not errs, errs, warns, p_min, mean)
    if strict:
        report.raise_if_invalid()
    return report


def table1_params(c: float = 2.0, q: float = 0.1, mu: float = 0.01, lam: float = 0.1,
                  kind: str = "rational") -> ModelParams:
    """Convenience constructor for the exponential-gain examples."""
    return ModelParams(lam=lam, q=q, cost=CostFunction(kind, c), jumps=JumpLaw.exponential(mu))


def tabulate_density(law: JumpLaw, z_max: float, n: int) -> JumpLaw:
    """Piecewise-linear tabulation of ``law`` on [0, z_max]; the last knot absorbs no mass."""
    z = np.linspace(0.0, z_max, n)
    return JumpLaw("tabulated", table=tuple(zip(z.tolist(), np.asarray(law.density(z)).tolist())))


def tabulate_cost(cf: CostFunction, xs: Sequence[float]) -> CostFunction:
    xs = np.asarray(xs, dtype=float)
    return CostFunction("tabulated", table=tuple(zip(xs.tolist(), np.asarray(cf(xs)).tolist())))
