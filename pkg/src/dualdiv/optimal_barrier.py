"""Marginal value at the barrier and the optimal barrier level.

gamma(beta) = v'_beta(beta-) and the candidate optimal barrier is the first
beta with gamma(beta) = 1. gamma(0) = lam E C / p(0) is known in closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import bisect

from .barrier_value import solve_ub_fredholm, solve_vb_ode
from .errors import ExistenceError
from .io import write_csv, write_json
from .model import ModelParams


def gamma(params: ModelParams, beta: float, **solver_kw) -> float:
    """v'_beta(beta-): ODE shooting for exponential gains, Nystrom otherwise."""
    if beta < 0:
        raise ValueError("barrier must be nonnegative")
    if beta == 0:
        return params.mean_income_rate / float(params.cost(0.0))
    if params.jumps.is_exponential:
        return solve_vb_ode(params, beta, h=beta, **solver_kw).gamma
    return float(solve_ub_fredholm(params, beta, **solver_kw).values[-1])


@dataclass
class ExistenceReport:
    p0_condition: bool
    xhat: Optional[float]
    bracket: Optional[Tuple[float, float]]

    @property
    def holds(self) -> bool:
        return self.p0_condition and self.xhat is not None


@dataclass
class SufficiencyReport:
    derivative_condition: bool
    margin: float
    worst_x: float


@dataclass
class OptimalBarrierReport:
    beta_star: float
    zero_barrier: bool
    gamma_curve: List[Tuple[float, float]]
    existence: ExistenceReport
    sufficiency: Optional[SufficiencyReport]
    root_tol: float
    gamma_at_beta_star: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma_curve"] = [list(t) for t in self.gamma_curve]
        return d

    def write(self, json_path, csv_path=None, comments=()):
        write_json(json_path, self.to_dict())
        if csv_path is not None:
            write_csv(csv_path, ["beta", "gamma"], self.gamma_curve, comments)


def check_zero_barrier(params: ModelParams, x_max: Optional[float] = None, n: int = 4001) -> bool:
    """Whether -p(x) + lam E C - q x <= 0 for every x >= 0.

    Probed on a grid up to lam E C / q; beyond that level the inequality holds
    for any positive p. With q = 0 it reduces to inf p >= lam E C.
    """
    m = params.mean_income_rate
    if params.q <= 0:
        return params.cost.infimum() >= m
    if x_max is None:
        x_max = m / params.q
    xs = np.linspace(0.0, x_max, n)
    lhs = -np.asarray(params.cost(xs)) + m - params.q * xs
    probe_ok = bool(np.all(lhs <= 0.0))
    tail_ok = x_max >= m / params.q and params.cost.infimum() > 0
    return probe_ok and tail_ok


def check_existence(params: ModelParams, x_max: Optional[float] = None, n: int = 20001) -> ExistenceReport:
    """Hypotheses lam E C > p(0) > 0 and some xhat with p(xhat) > lam E C - q xhat."""
    m = params.mean_income_rate
    p0 = float(params.cost(0.0))
    p0_ok = m > p0 > 0
    if params.q <= 0 and params.cost.supremum() <= m:
        return ExistenceReport(p0_ok, None, None)
    if x_max is None:
        x_max = m / params.q if params.q > 0 else 1e4
    xs = np.linspace(0.0, x_max, n)[1:]
    ok = np.asarray(params.cost(xs)) > m - params.q * xs
    if not ok.any():
        return ExistenceReport(p0_ok, None, None)
    xhat = float(xs[np.argmax(ok)])
    return ExistenceReport(p0_ok, xhat, (0.0, xhat) if p0_ok else None)


def check_optimality(params: ModelParams, beta_star: float, n: int = 4001) -> SufficiencyReport:
    """Whether -p'(x) - q < 0 on (0, beta_star]; the margin is min (p' + q)."""
    if not math.isfinite(beta_star):
        raise ValueError("beta_star must be finite")
    top = max(beta_star, 0.0)
    xs = np.linspace(0.0, top, n)[1:] if top > 0 else np.array([1e-12])
    vals = np.asarray(params.cost.derivative(xs)) + params.q
    i = int(np.argmin(vals))
    return SufficiencyReport(bool(vals[i] > 0), float(vals[i]), float(xs[i]))


def _scan_points(beta_max: float, step: float) -> np.ndarray:
    geo = step * 2.0 ** -np.arange(8, 0, -1)
    uni = np.arange(step, beta_max + 0.5 * step, step)
    return np.concatenate([geo, uni])


def _gamma_many(params, betas, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(gamma, [params] * len(betas), betas))
    return [gamma(params, b) for b in betas]


def find_beta_star(params: ModelParams, beta_max: Optional[float] = None,
                   root_tol: float = 1e-6, step: Optional[float] = None,
                   workers: int = 0) -> OptimalBarrierReport:
    """First crossing of gamma(beta) = 1, or the zero barrier.

    gamma is sampled on a geometric-then-uniform scan and the first sign
    change of gamma - 1 is refined by bisection. A scan point within
    ``root_tol`` of 1 is taken as is (left end of a plateau).

    Raises :class:`ExistenceError`, carrying the sampled curve, when no
    crossing occurs up to ``beta_max``.
    """
    m = params.mean_income_rate
    existence = check_existence(params)
    g0 = m / float(params.cost(0.0))
    if check_zero_barrier(params):
        return OptimalBarrierReport(0.0, True, [(0.0, g0)], existence,
                                    check_optimality(params, 0.0), root_tol, g0, params.to_dict())
    if beta_max is None:
        beta_max = 5.0 * m / params.q if params.q > 0 else 1e3
    if step is None:
        step = max(0.5, beta_max / 200.0)
    curve = [(0.0, g0)]
    prev_b, prev_g = 0.0, g0
    found = None
    points = _scan_points(beta_max, step)
    # evaluate in chunks so that parallel workers help without scanning far past the root
    chunk = max(1, workers) * 4 if workers and workers > 1 else 1
    for lo in range(0, points.size, chunk):
        bs = points[lo:lo + chunk].tolist()
        gs = _gamma_many(params, bs, workers)
        for b, g in zip(bs, gs):
            curve.append((b, g))
            if abs(g - 1.0) <= root_tol:
                found = (b, b)
                break
            if (prev_g - 1.0) * (g - 1.0) < 0:
                found = (prev_b, b)
                break
            prev_b, prev_g = b, g
        if found:
            break
    if found is None:
        raise ExistenceError(f"gamma(beta) - 1 has no sign change on [0, {beta_max}]", curve)
    a, b = found
    if a == b:
        beta_star = a
    elif a == 0.0 and abs(g0 - 1.0) <= root_tol:
        beta_star = 0.0
    else:
        beta_star = bisect(lambda t: gamma(params, t) - 1.0, max(a, 1e-12), b, xtol=root_tol)
    g_star = gamma(params, beta_star)
    curve.sort()
    return OptimalBarrierReport(float(beta_star), False, curve, existence,
                                check_optimality(params, beta_star), root_tol, float(g_star),
                                params.to_dict())
