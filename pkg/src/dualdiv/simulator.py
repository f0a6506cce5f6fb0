"""Monte Carlo simulation of the dual process under a barrier, and of the
reflected classical process until upward passage.

Between arrivals the surplus follows dx/dt = -p(x) (dual) or dy/dt = p~(y)
(classical). Both flows are advanced exactly through the clock
T(x) = int_0^x dz / p(z), so the only error left is sampling error.

Paths are simulated in lockstep. In round k every path receives its k-th
inter-arrival time and jump size from counter-based streams seeded by
(seed, k), so path i always consumes column i and a run is reproducible
regardless of how many paths are still alive.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate

from .errors import DomainError
from .io import write_csv, write_json
from .model import CostFunction, JumpLaw, ModelParams

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10_000
    seed: int = 0
    horizon: Optional[float] = None
    flow_substep: Optional[float] = None  # unused; the flow is integrated exactly

    def horizon_for(self, q: float) -> float:
        if self.horizon is not None:
            return float(self.horizon)
        return 40.0 / q if q > 0 else math.inf


@dataclass
class PathResult:
    dividends: float
    ruin_time: float
    censored: bool
    events: List[Tuple[float, float]] = field(default_factory=list)

    def replay_total(self, q: float) -> float:
        return math.fsum(math.exp(-q * t) * a for t, a in self.events)


@dataclass
class SimEstimate:
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    n_paths: int
    censored_fraction: float
    bias_bound: float

    @classmethod
    def from_samples(cls, x: np.ndarray, censored: np.ndarray, bias_bound: float) -> "SimEstimate":
        n = x.size
        mean = math.fsum(x) / n
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        half = 1.96 * se
        return cls(mean, se, mean - half, mean + half, n, float(np.mean(censored)), bias_bound)

    def to_dict(self) -> dict:
        return asdict(self)


def time_to_zero(cf: Callable, x: float) -> float:
    """int_0^x dz / p(z), the time for the jump-free flow to fall from x to 0."""
    if x < 0:
        raise DomainError("level must be nonnegative")
    if x == 0:
        return 0.0

    def inv(z):
        pz = float(cf(z))
        if not pz > 0:
            raise DomainError(f"cost is not positive at {z}")
        return 1.0 / pz

    val, _ = integrate.quad(inv, 0.0, x, epsabs=1e-14, epsrel=1e-13, limit=500)
    return val


class Flow:
    """Clock T(x) = int_0^x dz/p(z) on [0, top] and its inverse.

    T is tabulated cell by cell with 8-point Gauss-Legendre, evaluated
    off-node by the same rule on the partial cell, and inverted by Newton
    steps (T' = 1/p) started from linear interpolation in the table.
    """

    def __init__(self, p: Callable, top: float, cells: int = 1024):
        self.p = p
        self.top = float(top)
        self.const = None
        if isinstance(p, CostFunction) and p.kind == "constant":
            self.const = float(p(0.0))
        n = max(1, cells)
        self.xs = np.linspace(0.0, self.top, n + 1)
        self.h = self.xs[1] - self.xs[0] if self.top > 0 else 1.0
        if self.const is None and self.top > 0:
            self.T_nodes = np.concatenate([[0.0], np.cumsum(self._piece(self.xs[:-1], self.xs[1:]))])
        else:
            self.T_nodes = self.xs / (self.const or 1.0)

    def _inv_p(self, x):
        px = np.asarray(self.p(x), dtype=float)
        if np.any(px <= 0):
            raise DomainError("cost is not positive along the path")
        return 1.0 / px

    def _piece(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[..., None] + half[..., None] * _GL_X
        return half * (self._inv_p(pts) @ _GL_W)

    def T(self, x):
        x = np.asarray(x, dtype=float)
        if self.const is not None:
            return x / self.const
        k = np.clip((x / self.h).astype(int), 0, self.xs.size - 2)
        return self.T_nodes[k] + self._piece(self.xs[k], x)

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        if self.const is not None:
            return t * self.const
        k = np.clip(np.searchsorted(self.T_nodes, t) - 1, 0, self.xs.size - 2)
        lo, hi = self.xs[k], self.xs[k + 1]
        tl, th = self.T_nodes[k], self.T_nodes[k + 1]
        x = lo + (t - tl) / (th - tl) * (hi - lo)
        for _ in range(4):
            x = np.clip(x - (self.T_nodes[k] + self._piece(lo, x) - t) / self._inv_p(x), lo, hi)
        return x


def round_draws(seed: int, k: int, n: int, lam: float, jumps: JumpLaw):
    """Inter-arrival times and jump sizes for round ``k`` (column i belongs to path i)."""
    r_t = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k, 0))))
    r_c = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k, 1))))
    dt = r_t.exponential(1.0 / lam, n) if lam > 0 else np.full(n, np.inf)
    return dt, np.asarray(jumps.sample(r_c, n), dtype=float)


def _generator_draws(rng: np.random.Generator, lam: float, jumps: JumpLaw):
    def draws(k, n):
        dt = rng.exponential(1.0 / lam, n) if lam > 0 else np.full(n, np.inf)
        return dt, np.asarray(jumps.sample(rng, n), dtype=float)
    return draws


def _run_dual(params: ModelParams, beta: float, x0: float, n: int, draws, horizon: float,
              log: bool = False):
    """Lockstep simulation of n dual paths; returns (totals, ruin, censored, logs)."""
    q = params.q
    top = max(beta, 0.0)
    flow = Flow(params.cost, top) if top > 0 else None
    total = np.zeros(n)
    logs = [[] for _ in range(n)] if log else None
    level = np.full(n, float(x0))
    t = np.zeros(n)
    ruin = np.full(n, np.inf)
    censored = np.zeros(n, dtype=bool)
    if x0 > beta:
        total += x0 - beta
        level[:] = beta
        if log:
            for e in logs:
                e.append((0.0, x0 - beta))
    alive = level > 0
    ruin[~alive] = 0.0
    k = 0
    while alive.any():
        dt, c = draws(k, n)
        k += 1
        idx = np.nonzero(alive)[0]
        y, tt, d = level[idx], t[idx], dt[idx]
        tz = flow.T(y)
        hit = tz <= d
        late = np.where(hit, tt + tz, tt + d) > horizon
        cens = idx[late]
        censored[cens] = True
        alive[cens] = False
        dead = idx[hit & ~late]
        ruin[dead] = t[dead] + tz[hit & ~late]
        alive[dead] = False
        go = ~hit & ~late
        j = idx[go]
        if j.size == 0:
            continue
        t[j] = tt[go] + d[go]
        y = flow.inverse(tz[go] - d[go]) + c[j]
        pay = np.maximum(y - beta, 0.0)
        level[j] = np.minimum(y, beta)
        total[j] += np.exp(-q * t[j]) * pay
        if log:
            for i, ti, a in zip(j[pay > 0], t[j][pay > 0], pay[pay > 0]):
                logs[i].append((float(ti), float(a)))
    return total, ruin, censored, logs


def simulate_path(params: ModelParams, beta: float, x0: float, rng: np.random.Generator,
                  horizon: Optional[float] = None) -> PathResult:
    """One dual path under the barrier ``beta``; dividends are discounted at q."""
    if x0 < 0 or beta < 0:
        raise DomainError("x0 and beta must be nonnegative")
    if horizon is None:
        horizon = SimConfig().horizon_for(params.q)
    tot, ruin, cens, logs = _run_dual(params, beta, x0, 1,
                                      _generator_draws(rng, params.lam, params.jumps), horizon, True)
    return PathResult(float(tot[0]), float(ruin[0]), bool(cens[0]), logs[0])


def simulate_paths(params: ModelParams, beta: float, x0: float, cfg: SimConfig,
                   log: bool = True) -> List[PathResult]:
    """All paths of an :func:`estimate_value` run, with event logs."""
    draws = lambda k, n: round_draws(cfg.seed, k, n, params.lam, params.jumps)
    tot, ruin, cens, logs = _run_dual(params, beta, x0, cfg.n_paths, draws,
                                      cfg.horizon_for(params.q), log)
    return [PathResult(float(tot[i]), float(ruin[i]), bool(cens[i]), logs[i] if log else [])
            for i in range(cfg.n_paths)]


def estimate_value(params: ModelParams, beta: float, x0: float, cfg: SimConfig) -> SimEstimate:
    """Monte Carlo estimate of the expected discounted dividends until ruin."""
    if not params.q > 0:
        raise DomainError("estimate_value needs q > 0")
    if x0 < 0 or beta < 0:
        raise DomainError("x0 and beta must be nonnegative")
    horizon = cfg.horizon_for(params.q)
    draws = lambda k, n: round_draws(cfg.seed, k, n, params.lam, params.jumps)
    tot, _, cens, _ = _run_dual(params, beta, x0, cfg.n_paths, draws, horizon)
    bias = params.mean_income_rate / params.q * math.exp(-params.q * horizon)
    return SimEstimate.from_samples(tot, cens, bias)


def _run_classical(cm, x0: float, a: float, n: int, draws, horizon: float, log: bool = False):
    """Reflected classical paths until first passage above ``a``.

    Returns (exit time, discounted injections, censored, logs).
    """
    q = cm.q
    flow = Flow(cm.premium, a)
    T_a = float(flow.T(a))
    level = np.full(n, float(x0))
    t = np.zeros(n)
    inj = np.zeros(n)
    exit_t = np.full(n, np.inf)
    censored = np.zeros(n, dtype=bool)
    logs = [[] for _ in range(n)] if log else None
    alive = level < a
    exit_t[~alive] = 0.0
    k = 0
    while alive.any():
        dt, c = draws(k, n)
        k += 1
        idx = np.nonzero(alive)[0]
        y, tt, d = level[idx], t[idx], dt[idx]
        Ty = flow.T(y)
        tu = T_a - Ty
        up = tu <= d
        late = np.where(up, tt + tu, tt + d) > horizon
        cens = idx[late]
        censored[cens] = True
        alive[cens] = False
        done = idx[up & ~late]
        exit_t[done] = t[done] + tu[up & ~late]
        alive[done] = False
        go = ~up & ~late
        j = idx[go]
        if j.size == 0:
            continue
        t[j] = tt[go] + d[go]
        y = flow.inverse(Ty[go] + d[go]) - c[j]
        deficit = np.maximum(-y, 0.0)
        level[j] = np.maximum(y, 0.0)
        inj[j] += np.exp(-q * t[j]) * deficit
        if log:
            for i, ti, amt in zip(j[deficit > 0], t[j][deficit > 0], deficit[deficit > 0]):
                logs[i].append((float(ti), float(amt)))
    return exit_t, inj, censored, logs


def simulate_classical_exit(cm, x0: float, a: float, cfg: SimConfig) -> dict:
    """Estimates of E[exp(-q T_a+)] and of the discounted injections up to T_a+."""
    if not 0 <= x0 <= a:
        raise DomainError("need 0 <= x0 <= a")
    horizon = cfg.horizon_for(cm.q)
    draws = lambda k, n: round_draws(cfg.seed, k, n, cm.lam, cm.jumps)
    ex, inj, cens, _ = _run_classical(cm, x0, a, cfg.n_paths, draws, horizon)
    lap = np.where(np.isfinite(ex), np.exp(-cm.q * np.where(np.isfinite(ex), ex, 0.0)), 0.0)
    tail = math.exp(-cm.q * horizon) if math.isfinite(horizon) else 0.0
    return {
        "laplace": SimEstimate.from_samples(lap, cens, tail),
        "injections": SimEstimate.from_samples(inj, cens, cm.lam * cm.jumps.mean / cm.q * tail
                                               if cm.q > 0 else math.inf),
    }


def simulate_classical_paths(cm, x0: float, a: float, cfg: SimConfig) -> List[PathResult]:
    """Classical paths with injection logs; ``ruin_time`` holds the exit time T_a+."""
    draws = lambda k, n: round_draws(cfg.seed, k, n, cm.lam, cm.jumps)
    ex, inj, cens, logs = _run_classical(cm, x0, a, cfg.n_paths, draws, cfg.horizon_for(cm.q), True)
    return [PathResult(float(inj[i]), float(ex[i]), bool(cens[i]), logs[i])
            for i in range(cfg.n_paths)]


def write_path_log(path, results: List[PathResult], comments=()):
    """One row per event: path index, time, event, amount."""
    rows = []
    for i, r in enumerate(results):
        for t, a in r.events:
            rows.append((i, t, "payment", a))
        rows.append((i, r.ruin_time, "censored" if r.censored else "end", 0.0))
    return write_csv(path, ["path", "t", "event", "amount"], rows, comments)


def write_estimate(path, est: SimEstimate, extra: Optional[dict] = None):
    d = est.to_dict()
    if extra:
        d.update(extra)
    write_json(path, d)
