"""Generator of the dual process and the HJB variational inequality check.

For a candidate m (zero below 0, grid values on [0, beta], affine above beta)

    A m(x) = -p(x) m'(x) + lam int_0^inf (m(x + y) - m(x)) f(y) dy.

The integral is split at y = beta - x: the part inside [0, beta] is a composite
trapezoid on the candidate's own nodes, the affine part above the barrier is
exact, lam (s E[(C - (beta - x))^+] + m(beta) P(C > beta - x)) for slope s.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .barrier_value import BarrierSolution
from .errors import DomainError
from .io import write_csv, write_json
from .model import ModelParams


@dataclass(frozen=True, eq=False)
class CandidateValue:
    """m on [0, beta] from samples (nodes, values, derivatives).

    Above beta m continues affinely with slope ``slope`` (1 for barrier
    values), below 0 it is 0. The derivative at beta is the left derivative.
    """

    beta: float
    nodes: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    slope: float = 1.0

    def __post_init__(self):
        if self.nodes.size and (abs(self.nodes[0]) > 1e-12 or abs(self.nodes[-1] - self.beta) > 1e-9):
            raise DomainError("candidate nodes must span [0, beta]")
        if self.nodes.size and abs(self.values[0]) > 1e-9 * max(1.0, np.max(np.abs(self.values))):
            raise DomainError("candidate must vanish at 0")

    @classmethod
    def from_solution(cls, sol: BarrierSolution) -> "CandidateValue":
        if sol.beta == 0:
            return cls.identity()
        return cls(sol.beta, sol.x.copy(), sol.v.values.copy(), sol.dv.values.copy())

    @classmethod
    def identity(cls) -> "CandidateValue":
        """m(x) = x, the barrier-at-zero value."""
        z = np.zeros(1)
        return cls(0.0, z, z.copy(), np.ones(1))

    @classmethod
    def zero(cls, beta: float, n: int = 101) -> "CandidateValue":
        """m = 0 everywhere."""
        x = np.linspace(0.0, beta, n)
        return cls(beta, x, np.zeros(n), np.zeros(n), 0.0)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.values))) if self.values.size else 1.0)

    def _spline(self):
        sp = self.__dict__.get("_sp")
        if sp is None and self.nodes.size > 1:
            sp = CubicHermiteSpline(self.nodes, self.values, self.derivs)
            self.__dict__["_sp"] = sp
        return sp

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vb = self.values[-1]
        sp = self._spline()
        inside = sp(np.clip(x, 0.0, self.beta)) if sp is not None else np.zeros_like(x)
        out = np.where(x > self.beta, self.slope * (x - self.beta) + vb, np.where(x <= 0, 0.0, inside))
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        sp = self._spline()
        inside = sp(np.clip(x, 0.0, self.beta), 1) if sp is not None else np.full_like(x, self.slope)
        # exact left derivative on nodes
        if sp is not None:
            k = np.searchsorted(self.nodes, x)
            on = (k < self.nodes.size) & (np.abs(self.nodes[np.minimum(k, self.nodes.size - 1)] - x) <= 1e-12)
            inside = np.where(on, self.derivs[np.minimum(k, self.nodes.size - 1)], inside)
        out = np.where(x > self.beta, self.slope, np.where(x <= 0, 0.0, inside))
        return out if out.ndim else float(out)


def _jump_integral(params: ModelParams, m: CandidateValue, x: float) -> float:
    """int_0^inf (m(x + y) - m(x)) f(y) dy for a single x > 0."""
    jumps = params.jumps
    mx = float(m(x))
    if x >= m.beta:
        return m.slope * jumps.mean
    d = m.beta - x
    tail = m.slope * float(jumps.partial_expectation(d)) + m.values[-1] * float(jumps.tail(d))
    # nodes strictly above x, with x itself prepended
    k = np.searchsorted(m.nodes, x, side="right")
    s = np.concatenate([[x], m.nodes[k:]])
    vals = np.concatenate([[mx], m.values[k:]])
    if s.size > 1 and s[1] - s[0] < 1e-12:
        s, vals = s[1:], vals[1:]
    body = np.trapezoid(vals * np.asarray(jumps.density(s - x)), s) if s.size > 1 else 0.0
    return body + tail - mx


def apply_generator(params: ModelParams, m: CandidateValue, x, discounted: bool = False):
    """A m(x), or (A - q) m(x) with ``discounted``; x must be positive."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise DomainError("generator is evaluated on x > 0 only")
    p = np.asarray(params.cost(xs))
    dm = np.asarray(m.derivative(xs))
    jump = np.array([_jump_integral(params, m, xi) for xi in xs])
    out = -p * dm + params.lam * jump
    if discounted:
        out = out - params.q * np.asarray(m(xs))
    return out if np.ndim(x) else float(out[0])


@dataclass
class HjbReport:
    nodes: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    tol: float
    scale: float
    max_violation: float
    witness: Optional[float]
    supersolution: bool
    complementarity_gap: float
    complementarity: bool

    @property
    def passed(self) -> bool:
        return self.supersolution and self.complementarity

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("nodes", "r1", "r2"):
            d.pop(k)
        d["passed"] = self.passed
        d["n_nodes"] = int(self.nodes.size)
        return d

    def write(self, json_path, csv_path=None, comments=()):
        write_json(json_path, self.to_dict())
        if csv_path is not None:
            write_csv(csv_path, ["x", "r1", "r2"], np.column_stack([self.nodes, self.r1, self.r2]),
                      comments)


def verify_hjb(params: ModelParams, m: CandidateValue, tol: float = 1e-3,
               n_above: int = 400, above: Optional[float] = None,
               max_nodes: int = 1001) -> HjbReport:
    """Check max{(A - q) m, 1 - m'} = 0 on interior nodes and beyond the barrier.

    r1 = (A - q) m is compared with ``tol * scale`` (scale = max(1, sup |m|)),
    r2 = 1 - m' with ``tol``. The supersolution check requires both residuals
    below their tolerance everywhere; complementarity requires at least one of
    them to be >= -tol at every node. The witness is the node
    with the largest normalised violation.
    """
    scale = m.scale
    inner = m.nodes[1:]
    if inner.size > max_nodes:
        stride = int(np.ceil(inner.size / max_nodes))
        inner = np.unique(np.concatenate([inner[::stride], inner[-1:]]))
    if above is None:
        above = params.mean_income_rate / params.q if params.q > 0 else 10.0 * max(1.0, m.beta)
    outer = m.beta + np.linspace(0.0, above, n_above + 1)[1:]
    nodes = np.concatenate([inner, outer])
    r1 = np.asarray(apply_generator(params, m, nodes, discounted=True))
    r2 = 1.0 - np.asarray(m.derivative(nodes))
    n1 = r1 / (tol * scale)
    n2 = r2 / tol
    worst = np.maximum(n1, n2)
    i = int(np.argmax(worst))
    super_ok = bool(worst[i] <= 1.0)
    comp = np.minimum(np.abs(r1) / scale, np.abs(r2))
    comp_ok = bool(np.all(worst >= -1.0))
    return HjbReport(nodes, r1, r2, tol, scale, float(max(r1[i] / scale, r2[i])),
                     None if super_ok else float(nodes[i]), super_ok, float(np.max(comp)), comp_ok)
