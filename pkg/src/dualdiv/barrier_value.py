"""Value of the barrier strategy, computed three independent ways.

``solve_vb_ode``
    exponential gains only: the nonlocal problem reduces to the second order
    ODE  -p v'' + (mu p - p' - lam - q) v' + mu q v = 0 ; v is a multiple of
    the basis solution with w(0) = 0, w'(0) = 1, the multiple being fixed by
    the undifferentiated equation at x = 0,
    p(0) v'(0) = lam mu int_0^beta v e^{-mu z} dz + lam e^{-mu beta} (1/mu + v(beta)).
``solve_ub_fredholm``
    any gain law: u = v' solves a Fredholm equation of the second kind on
    [0, beta], discretised by the Nystrom method.
``vb_via_duality``
    mirrors the dual process at the barrier into a classical process with
    premium p(beta - y) and reads v off the classical exit functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.integrate import solve_ivp

from .classical_exit import ClassicalModel, exit_functions
from .errors import DegenerateBarrierError, DomainError, SolverError
from .grid import GridFunction
from .io import write_csv, write_json
from .model import ModelParams

DEFAULT_ODE_RTOL = 1e-10
DEFAULT_FREDHOLM_NODES = 400
DEFAULT_DUALITY_STEPS = 2000


@dataclass(frozen=True, eq=False)
class BarrierSolution:
    beta: float
    v: GridFunction
    dv: GridFunction
    gamma: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.v.x

    def value(self, x):
        """v_beta(x) for any x: 0 below zero, affine with slope 1 above beta."""
        x = np.asarray(x, dtype=float)
        vb = self.v.values[-1]
        inside = np.clip(x, 0.0, self.beta)
        body = np.asarray(self.v(inside)) if self.beta > 0 else np.zeros_like(x)
        out = np.where(x > self.beta, x - self.beta + vb, np.where(x <= 0, 0.0, body))
        return out if out.ndim else float(out)

    def derivative(self, x):
        """v'_beta(x); the left derivative at beta."""
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, 0.0, self.beta)
        body = np.asarray(self.dv(inside)) if self.beta > 0 else np.full_like(x, self.gamma)
        out = np.where(x > self.beta, 1.0, np.where(x < 0, 0.0, body))
        return out if out.ndim else float(out)

    def to_csv(self, path, comments=()):
        return write_csv(path, ["x", "v", "dv"],
                         np.column_stack([self.x, self.v.values, self.dv.values]), comments)

    def report(self) -> dict:
        return {"beta": self.beta, "method": self.method, "gamma": self.gamma,
                "v_at_beta": float(self.v.values[-1]), "diagnostics": self.diagnostics}

    def write_report(self, path):
        return write_json(path, self.report())


def zero_barrier_solution(params: ModelParams, method: str = "convention") -> BarrierSolution:
    """beta = 0: everything is paid at once, v_0(x) = x."""
    g0 = params.mean_income_rate / float(params.cost(0.0))
    v = GridFunction(0.0, 0.0, np.array([0.0]), np.array([1.0]))
    dv = GridFunction(0.0, 0.0, np.array([g0]))
    return BarrierSolution(0.0, v, dv, g0, method, {"degenerate": "beta=0"})


def _nodes(beta: float, h: Optional[float], default_steps: int):
    if h is None:
        n = default_steps
    else:
        if not h > 0:
            raise DomainError("grid step must be positive")
        n = max(1, int(math.ceil(beta / h - 1e-9)))
    return np.linspace(0.0, beta, n + 1)


def solve_vb_ode(params: ModelParams, beta: float, h: Optional[float] = None,
                 rtol: float = DEFAULT_ODE_RTOL) -> BarrierSolution:
    """Linear shooting for exponential gains (see module docstring).

    The basis solution is integrated with an adaptive eighth-order
    Runge-Kutta scheme (DOP853) together with I(x) = int_0^x w e^{-mu z} dz.
    ``h`` only sets the output grid; accuracy is governed by ``rtol``.
    """
    if not params.jumps.is_exponential:
        raise DomainError("the ODE reduction needs exponential gains")
    if beta < 0:
        raise DomainError("barrier must be nonnegative")
    if beta == 0:
        return zero_barrier_solution(params, "ode")
    cost, lam, q, mu = params.cost, params.lam, params.q, params.jumps.mu
    x = _nodes(beta, h, DEFAULT_DUALITY_STEPS)
    if np.any(np.asarray(cost(x)) <= 0):
        raise SolverError("cost function must be positive on [0, beta]")

    def rhs(t, y):
        w, dw, _ = y
        t = float(t)
        p = cost(t)
        d2 = ((mu * p - cost.derivative(t) - lam - q) * dw + mu * q * w) / p
        return np.array([dw, d2, w * math.exp(-mu * t)])

    sol = solve_ivp(rhs, (0.0, beta), [0.0, 1.0, 0.0], method="DOP853", rtol=rtol,
                    atol=rtol * 1e-2, dense_output=True)
    if not sol.success:
        raise SolverError(f"ODE integration failed: {sol.message}")
    w_b, _, i_b = sol.y[:, -1]
    e = math.exp(-mu * beta)
    denom = float(cost(0.0)) - lam * mu * i_b - lam * e * w_b
    if abs(denom) < 1e-12 * max(1.0, abs(float(cost(0.0)))):
        raise DegenerateBarrierError(f"shooting normalisation vanishes at beta={beta}")
    alpha = (lam * e / mu) / denom
    w, dw, _ = sol.sol(x)
    w[0], dw[0] = 0.0, 1.0
    w[-1], dw[-1] = sol.y[0, -1], sol.y[1, -1]
    p = np.asarray(cost(x))
    d2w = ((mu * p - np.asarray(cost.derivative(x)) - lam - q) * dw + mu * q * w) / p
    v = GridFunction.on(x, alpha * w, alpha * dw)
    dv = GridFunction.on(x, alpha * dw, alpha * d2w)
    diag = {"alpha": alpha, "denominator": denom, "nfev": int(sol.nfev), "rtol": rtol,
            "grid_step": float(x[1] - x[0]), "n_nodes": int(x.size)}
    return BarrierSolution(float(beta), v, dv, float(alpha * dw[-1]), "ode", diag)


def ode_boundary_residuals(params: ModelParams, beta: float, value, deriv):
    """Residuals (v(0), nonlocal condition) of a candidate on [0, beta].

    ``value`` and ``deriv`` are callables; the nonlocal condition is
    p(0) v'(0) - lam mu int_0^beta v e^{-mu z} dz - lam e^{-mu beta} (1/mu + v(beta)).
    """
    lam, mu = params.lam, params.jumps.mu
    integral = integrate.quad(lambda z: value(z) * math.exp(-mu * z), 0.0, beta,
                              epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    bc = (float(params.cost(0.0)) * deriv(0.0) - lam * mu * integral
          - lam * math.exp(-mu * beta) * (1.0 / mu + value(beta)))
    return float(value(0.0)), float(bc)


@dataclass(frozen=True, eq=False)
class FredholmSystem:
    """Nystrom discretisation of u = G + int_0^beta K(x, y) u(y) dy.

    ``matrix[i, j]`` is the quadrature-weighted kernel; each row is split at
    the diagonal, where K jumps from -q/p(x) to lam/p(x).
    """

    params: ModelParams
    beta: float
    nodes: np.ndarray
    matrix: np.ndarray
    source: np.ndarray

    def kernel(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(self.params.cost(x))
        right = self.params.lam / p * np.asarray(self.params.jumps.tail(np.maximum(y - x, 0.0)))
        out = np.where(y <= x, -self.params.q / p, right)
        return out if out.ndim else float(out)


def build_fredholm_system(params: ModelParams, beta: float,
                          n: int = DEFAULT_FREDHOLM_NODES) -> FredholmSystem:
    if not beta > 0:
        raise DomainError("barrier must be positive")
    if n < 3:
        raise DomainError("need at least three nodes")
    x = np.linspace(0.0, beta, n)
    h = x[1] - x[0]
    p = np.asarray(params.cost(x))
    if np.any(p <= 0):
        raise SolverError("cost function must be positive on [0, beta]")
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    # composite trapezoid on [0, x_i] and on [x_i, beta]
    wl = np.where(j < i, h, 0.0)
    wl = np.where((j == 0) & (i > 0), h / 2, wl)
    wl = np.where((j == i) & (i > 0), h / 2, wl)
    wr = np.where(j > i, h, 0.0)
    wr = np.where((j == n - 1) & (i < n - 1), h / 2, wr)
    wr = np.where((j == i) & (i < n - 1), h / 2, wr)
    tail = np.asarray(params.jumps.tail(np.maximum(x[None, :] - x[:, None], 0.0)))
    left = -params.q / p[:, None]
    right = params.lam / p[:, None] * tail
    A = wl * left + wr * right
    G = params.lam / p * np.asarray(params.jumps.partial_expectation(beta - x))
    return FredholmSystem(params, float(beta), x, A, G)


def _solve_fredholm(system: FredholmSystem):
    M = np.eye(system.nodes.size) - system.matrix
    cond = float(np.linalg.cond(M, 1))
    if not np.isfinite(cond) or cond > 1e13:
        raise SolverError(f"Nystrom system is numerically singular (cond_1 = {cond:.3g})")
    return np.linalg.solve(M, system.source), cond


def solve_ub_fredholm(params: ModelParams, beta: float,
                      n: int = DEFAULT_FREDHOLM_NODES) -> GridFunction:
    """u_beta = v'_beta on ``n`` equispaced nodes of [0, beta]."""
    u, _ = _solve_fredholm(build_fredholm_system(params, beta, n))
    return GridFunction.on(np.linspace(0.0, beta, n), u)


def vb_from_fredholm(u: GridFunction) -> GridFunction:
    """v(x) = int_0^x u by the composite trapezoid rule."""
    v = integrate.cumulative_trapezoid(u.values, dx=u.step, initial=0.0)
    return GridFunction(u.start, u.step, v, u.values)


def solve_vb_fredholm(params: ModelParams, beta: float,
                      n: int = DEFAULT_FREDHOLM_NODES) -> BarrierSolution:
    if beta == 0:
        return zero_barrier_solution(params, "fredholm")
    system = build_fredholm_system(params, beta, n)
    u, cond = _solve_fredholm(system)
    ug = GridFunction.on(system.nodes, u)
    v = vb_from_fredholm(ug)
    # residual of the discrete system and of the x = beta identity
    res = float(np.max(np.abs(u - system.matrix @ u - system.source)))
    diag = {"n_nodes": n, "cond_1": cond, "residual": res, "grid_step": float(ug.step)}
    return BarrierSolution(float(beta), v, ug, float(u[-1]), "fredholm", diag)


def vb_via_duality(params: ModelParams, beta: float, h: Optional[float] = None,
                   extension: str = "constant", x_max: Optional[float] = None) -> BarrierSolution:
    """v_beta(x) = g(beta - x) - Z(beta - x) g(beta) / Z(beta) on [0, beta].

    ``g`` and ``Z`` are the injection and reflected-exit functions of the
    classical mirror with premium p(beta - y).
    """
    if beta < 0:
        raise DomainError("barrier must be nonnegative")
    if beta == 0:
        return zero_barrier_solution(params, "duality")
    if not params.q > 0:
        raise DomainError("the duality route needs q > 0")
    if h is None:
        h = beta / DEFAULT_DUALITY_STEPS
    cm = ClassicalModel.from_dual(params, beta, extension=extension, x_max=x_max)
    ef = exit_functions(cm, h)
    g, Z = ef.gtilde, ef.Z
    ratio = g.values[-1] / Z.values[-1]
    v_y = g.values - Z.values * ratio
    dv_y = g.deriv - Z.deriv * ratio
    v = GridFunction(0.0, ef.h, v_y[::-1].copy(), -dv_y[::-1])
    dv = GridFunction(0.0, ef.h, -dv_y[::-1])
    diag = {"grid_step": ef.h, "x_max": ef.x_max, "extension": extension,
            "G1(0)": float(ef.G1.values[0]), "gtilde(0)": float(g.values[0]),
            "shoot_history": [list(hh) for hh in ef.shoot_history]}
    return BarrierSolution(float(beta), v, dv, float(-dv_y[0]), "duality", diag)


def extend_above_barrier(sol: BarrierSolution, x):
    """x - beta + v(beta) for x > beta."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= sol.beta):
        raise DomainError("extension is defined above the barrier only")
    out = x - sol.beta + sol.v.values[-1]
    return out if out.ndim else float(out)


def solve_barrier(params: ModelParams, beta: float, method: str = "auto", **kw) -> BarrierSolution:
    """Dispatch to one of the three solvers; ``auto`` prefers the ODE when it applies."""
    if method == "auto":
        method = "ode" if params.jumps.is_exponential else "fredholm"
    if method == "ode":
        return solve_vb_ode(params, beta, **kw)
    if method == "fredholm":
        return solve_vb_fredholm(params, beta, **kw)
    if method == "duality":
        return vb_via_duality(params, beta, **kw)
    raise DomainError(f"unknown method {method!r}")
