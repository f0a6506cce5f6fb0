"""Exit functions of the classical (premium-income, claim-loss) risk process.

The classical process drifts up at rate ``ptilde(y)`` and drops by the jump
sizes. We compute on a uniform grid

* ``W``    the scale-like function: A W = q W on y >= 0, W = 0 below 0, W(0) = 1
* ``G1``   expected discounted indicator of ruin (penalty 1)
* ``Gid``  expected discounted deficit at ruin (penalty |y|)
* ``Z``    (1 - G1(0)) W + G1, giving E_y[exp(-q T_a)] = Z(y)/Z(a) for the
  process reflected at zero
* ``gtilde`` expected discounted capital injections of the reflected process

All of them solve the Volterra integro-differential equation

    ptilde(y) U'(y) = (lam + q) U(y) - lam int_0^y U(y - z) f(z) dz - lam F_w(y)

with F_w(y) = int_y^inf w(z - y) f(z) dz the penalty forcing (zero for W).
It is marched forward with the implicit trapezoid rule, the convolution being
a composite trapezoid on the same grid. G has no boundary value at 0; it is
written G = P + c W with P(0) = 0 and c fixed by requiring G to stay bounded,
i.e. c = -P(x_max)/W(x_max) on a truncated domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import DegenerateBarrierError, DomainError, SolverError, TruncationError
from .grid import GridFunction
from .io import write_csv
from .model import JumpLaw, ModelParams

Penalty = Union[str, Callable[[float], float]]

_RESCALE_AT = 1e250


@dataclass(frozen=True)
class ClassicalModel:
    """Classical risk process with premium ``premium`` on [0, x_max].

    ``x_keep`` is the level up to which exit functions are retained; beyond it
    the grid only serves to pin the decaying solution.
    """

    premium: Callable
    lam: float
    q: float
    jumps: JumpLaw
    x_keep: float
    x_max: float
    beta: Optional[float] = None
    extension: str = "constant"

    def __post_init__(self):
        if not self.x_keep > 0:
            raise DomainError("x_keep must be positive")
        if self.x_max < self.x_keep:
            raise DomainError("x_max must not be below x_keep")
        if self.extension not in ("constant", "linear", "none"):
            raise DomainError(f"unknown premium extension {self.extension!r}")

    @classmethod
    def from_dual(cls, params: ModelParams, beta: float, extension: str = "constant",
                  x_max: Optional[float] = None) -> "ClassicalModel":
        """Mirror of the dual model at barrier ``beta``: ptilde(y) = p(beta - y).

        Above ``beta`` the premium is extended by the constant p(0) or linearly,
        p(0) + |p'(0)| (y - beta); the absolute slope keeps the extension positive.
        """
        if not beta > 0:
            raise DomainError("barrier must be positive for the classical mirror")
        cost = params.cost
        p0 = float(cost(0.0))
        slope = abs(float(cost.derivative(0.0))) if extension == "linear" else 0.0

        def premium(y):
            y = np.asarray(y, dtype=float)
            inside = cost(np.clip(beta - y, 0.0, None))
            out = np.where(y <= beta, inside, p0 + slope * (y - beta))
            return out if out.ndim else float(out)

        if x_max is None:
            x_max = beta + 10.0 * params.jumps.mean
        return cls(premium, params.lam, params.q, params.jumps, beta, x_max, beta, extension)

    @classmethod
    def with_premium(cls, premium: Callable, lam: float, q: float, jumps: JumpLaw,
                     x_keep: float, x_max: Optional[float] = None) -> "ClassicalModel":
        if x_max is None:
            x_max = x_keep + 10.0 * jumps.mean
        return cls(premium, lam, q, jumps, x_keep, x_max, None, "none")


def _forcing(jumps: JumpLaw, penalty: Penalty, y: np.ndarray) -> np.ndarray:
    if penalty is None:
        return np.zeros_like(y)
    if penalty in ("one", 1):
        return np.asarray(jumps.tail(y), dtype=float)
    if penalty in ("identity", "abs"):
        return np.asarray(jumps.partial_expectation(y), dtype=float)
    if callable(penalty):
        out = np.empty_like(y)
        for i, yi in enumerate(y):
            out[i] = integrate.quad(lambda z: penalty(z - yi) * jumps.density(z), yi, np.inf,
                                    limit=200)[0]
        return out
    raise DomainError(f"unsupported penalty {penalty!r}")


class _Marcher:
    """Implicit-trapezoid march of several solution columns sharing one grid.

    Nodes are ``n*h`` up to ``n_keep`` and continue with step ``H >= h``
    beyond (``H == h`` unless the kernel is exponential, where the
    convolution is a two-term recursion valid on any grid). The march can be
    extended further right; columns are rescaled together when they grow too
    large, and the unscaled values up to ``n_keep`` are frozen first.
    """

    def __init__(self, cm: ClassicalModel, h: float, n_keep: int,
                 forcings: Sequence[Penalty], u0: Sequence[float], H: Optional[float] = None):
        self.cm, self.h, self.n_keep = cm, h, n_keep
        self.exp = cm.jumps.is_exponential
        self.H = h if (H is None or not self.exp) else max(h, H)
        self.m = len(forcings)
        self.forcings = list(forcings)
        self.fscale = 1.0
        self.kept = None
        cap = n_keep + 1
        self.U = np.zeros((cap, self.m))
        self.D = np.zeros((cap, self.m))
        self.F = np.zeros((cap, self.m))
        self.p = np.zeros(cap)
        self.f = np.zeros(cap)
        self.n = 0
        self._fill(0, cap)
        self.U[0] = u0
        lam, q = cm.lam, cm.q
        self.D[0] = ((lam + q) * self.U[0] - lam * self.F[0]) / self.p[0]
        self.conv = np.zeros(self.m)  # running convolution for the exponential kernel

    def level(self, n):
        n = np.asarray(n)
        x_keep = self.n_keep * self.h
        return np.where(n <= self.n_keep, n * self.h, x_keep + (n - self.n_keep) * self.H)

    def index_at(self, x: float) -> int:
        x_keep = self.n_keep * self.h
        if x <= x_keep:
            return int(round(x / self.h))
        return self.n_keep + int(round((x - x_keep) / self.H))

    def _fill(self, lo, hi):
        y = self.level(np.arange(lo, hi))
        self.p[lo:hi] = self.cm.premium(y)
        if np.any(self.p[lo:hi] <= 0):
            raise SolverError("premium must be positive on the whole truncated domain")
        self.f[lo:hi] = self.cm.jumps.density(y)
        for k, pen in enumerate(self.forcings):
            self.F[lo:hi, k] = self.fscale * _forcing(self.cm.jumps, pen, y)

    def _grow(self, n_total):
        cap = self.U.shape[0]
        if n_total + 1 <= cap:
            return
        new = max(n_total + 1, 2 * cap)
        for name in ("U", "D", "F"):
            ext = np.zeros((new, self.m))
            ext[:cap] = getattr(self, name)
            setattr(self, name, ext)
        for name in ("p", "f"):
            ext = np.zeros(new)
            ext[:cap] = getattr(self, name)
            setattr(self, name, ext)
        self._fill(cap, new)

    def march_to(self, n_total: int):
        self._grow(n_total)
        if n_total <= self.n:
            return
        if self.exp:
            self._march_exp(n_total)
        else:
            self._march_general(n_total)
        self.n = n_total

    def _rescale(self, n):
        if self.kept is None:
            self._freeze(n)
        s = 1.0 / _RESCALE_AT
        self.U[: n + 1] *= s
        self.D[: n + 1] *= s
        self.F *= s  # forcing enters linearly: rescale with the columns
        self.fscale *= s

    def _march_exp(self, n_total):
        # conv_n = e^{-mu d} conv_{n-1} + (d/2) mu (e^{-mu d} U_{n-1} + U_n)
        lam, q, mu = self.cm.lam, self.cm.q, self.cm.jumps.mu
        m = self.m
        n0 = self.n + 1
        while n0 <= n_total:
            idx = np.arange(n0, n_total + 1)
            d_all = (self.level(idx) - self.level(idx - 1)).tolist()
            p_all = self.p[n0:n_total + 1].tolist()
            F = [self.F[n0:n_total + 1, k].tolist() for k in range(m)]
            u_prev = self.U[n0 - 1].tolist()
            d_prev = self.D[n0 - 1].tolist()
            conv = self.conv.tolist()
            cols_u = [[] for _ in range(m)]
            cols_d = [[] for _ in range(m)]
            stop = False
            d_last = None
            for i in range(n_total + 1 - n0):
                d = d_all[i]
                if d != d_last:
                    e = math.exp(-mu * d)
                    hm = 0.5 * d * mu
                    d_last = d
                pn = p_all[i]
                a = ((lam + q) - lam * hm) / pn
                lp = lam / pn
                denom = 1.0 - 0.5 * d * a
                big = 0.0
                for k in range(m):
                    known = e * (conv[k] + hm * u_prev[k])
                    b = -lp * (known + F[k][i])
                    un = (u_prev[k] + 0.5 * d * (d_prev[k] + b)) / denom
                    conv[k] = known + hm * un
                    u_prev[k] = un
                    d_prev[k] = a * un + b
                    cols_u[k].append(un)
                    cols_d[k].append(d_prev[k])
                    if abs(un) > big:
                        big = abs(un)
                if not math.isfinite(big):
                    raise SolverError("Volterra march overflowed")
                if big > _RESCALE_AT:
                    stop = True
                    break
            cnt = len(cols_u[0])
            for k in range(m):
                self.U[n0:n0 + cnt, k] = cols_u[k]
                self.D[n0:n0 + cnt, k] = cols_d[k]
            self.conv = np.array(conv)
            if not stop:
                break
            n_last = n0 + cnt - 1
            self._rescale(n_last)
            self.conv *= 1.0 / _RESCALE_AT
            n0 = n_last + 1

    def _march_general(self, n_total):
        h = self.h
        hh = 0.5 * h
        lam, q = self.cm.lam, self.cm.q
        U, D, F, f = self.U, self.D, self.F, self.f
        for n in range(self.n + 1, n_total + 1):
            if n > 1:
                known = h * (f[1:n][::-1] @ U[1:n] + 0.5 * f[n] * U[0])
            else:
                known = hh * f[1] * U[0]
            a = ((lam + q) - lam * hh * f[0]) / self.p[n]
            b = -lam / self.p[n] * (known + F[n])
            un = (U[n - 1] + hh * (D[n - 1] + b)) / (1.0 - hh * a)
            U[n] = un
            D[n] = a * un + b
            big = np.max(np.abs(un))
            if not np.isfinite(big):
                raise SolverError("Volterra march overflowed")
            if big > _RESCALE_AT:
                self._rescale(n)

    def _freeze(self, n):
        if n < self.n_keep:
            raise SolverError("solution overflowed before the retained range was marched")
        k = self.n_keep + 1
        self.kept = (self.U[:k].copy(), self.D[:k].copy())

    def keep(self):
        if self.kept is not None:
            return self.kept
        k = self.n_keep + 1
        return self.U[:k].copy(), self.D[:k].copy()


def _grid_step(cm: ClassicalModel, h: float):
    if not h > 0:
        raise DomainError("grid step must be positive")
    n_keep = max(1, int(math.ceil(cm.x_keep / h - 1e-9)))
    return cm.x_keep / n_keep, n_keep


def _far_step(cm: ClassicalModel, h: float) -> float:
    # beyond x_keep the grid only carries the ratio P/W, which the recursion
    # propagates identically for every column; keep H * growth rate small
    ys = np.linspace(cm.x_keep, cm.x_max, 64)
    growth = (cm.lam + cm.q) / float(np.min(cm.premium(ys)))
    return max(h, min(0.05 / growth, (cm.x_max - cm.x_keep) / 2000.0))


def compute_w(cm: ClassicalModel, h: float) -> GridFunction:
    """Scale-like function W on [0, x_keep] (step adjusted so x_keep is a node)."""
    h, n_keep = _grid_step(cm, h)
    mr = _Marcher(cm, h, n_keep, [None], [1.0])
    mr.march_to(n_keep)
    U, D = mr.keep()
    return GridFunction(0.0, h, U[:, 0], D[:, 0])


# P + c W loses about log10(kappa) digits, kappa = max|c W| / max|P + c W|
_MAX_CANCELLATION = 1e9


def _check_cancellation(U, c):
    for k, ck in enumerate(c):
        g = U[:, k + 1] + ck * U[:, 0]
        big = np.max(np.abs(ck * U[:, 0]))
        size = np.max(np.abs(g))
        if big > _MAX_CANCELLATION * size:
            raise SolverError(
                f"G = P + cW cancels by a factor {big / size:.3g} on the retained range; "
                "shorten it or reduce the growth rate (lam + q) / premium")


@dataclass
class _Shoot:
    U: np.ndarray
    D: np.ndarray
    c: np.ndarray
    x_max: float
    history: list


def _shoot(cm: ClassicalModel, h: float, n_keep: int, penalties: Sequence[Penalty],
           tol: float = 1e-4, max_doublings: int = 4) -> _Shoot:
    """March W and the particular solutions; pin each G's constant by decay.

    Columns: 0 is W, 1.. are P_w with P_w(0) = 0. Starting from ``cm.x_max``
    the truncation level is doubled until every G(0) = c moves by less than
    ``tol``.
    """
    m = 1 + len(penalties)
    mr = _Marcher(cm, h, n_keep, [None] + list(penalties), [1.0] + [0.0] * (m - 1),
                  H=_far_step(cm, h))
    x_max = cm.x_max
    history = []
    prev = None
    for _ in range(max_doublings + 1):
        n_tot = max(n_keep, mr.index_at(x_max))
        mr.march_to(n_tot)
        W_end = mr.U[n_tot, 0]
        c = -mr.U[n_tot, 1:] / W_end
        history.append((x_max, c.tolist()))
        if prev is not None and np.all(np.abs(c - prev) < tol):
            U, D = mr.keep()
            _check_cancellation(U, c)
            return _Shoot(U, D, c, x_max, history)
        prev = c
        x_max *= 2.0
    raise TruncationError(
        f"G(0) still moving after {max_doublings} doublings of x_max: {history}")


def compute_g(cm: ClassicalModel, penalty: Penalty, h: float, tol: float = 1e-4) -> GridFunction:
    """Discounted penalty function G_{q,w} on [0, x_keep].

    ``penalty`` is ``"one"``, ``"identity"`` or a callable w(overshoot) with at
    most linear growth. The result is P + c W with c pinned by decay.
    """
    h, n_keep = _grid_step(cm, h)
    sh = _shoot(cm, h, n_keep, [penalty], tol=tol)
    c = sh.c[0]
    vals = sh.U[:, 1] + c * sh.U[:, 0]
    ders = sh.D[:, 1] + c * sh.D[:, 0]
    return GridFunction(0.0, h, vals, ders)


def compute_z(W: GridFunction, G1: GridFunction) -> GridFunction:
    """Z = (1 - G1(0)) W + G1."""
    W.require_same_grid(G1)
    k = 1.0 - G1.values[0]
    vals = k * W.values + G1.values
    der = None
    if W.deriv is not None and G1.deriv is not None:
        der = k * W.deriv + G1.deriv
    return GridFunction(W.start, W.step, vals, der)


def compute_gtilde(Gid: GridFunction, G1: GridFunction, q: Optional[float] = None) -> GridFunction:
    """gtilde = Gid + G1 * gtilde(0) with gtilde(0) = Gid(0) / (1 - G1(0))."""
    Gid.require_same_grid(G1)
    if q is not None and not q > 0:
        raise DomainError("injections are only finite in expectation for q > 0")
    denom = 1.0 - G1.values[0]
    if not denom > 0:
        raise SolverError(f"degenerate discounting: G1(0) = {G1.values[0]:.6g} >= 1")
    g0 = Gid.values[0] / denom
    vals = Gid.values + G1.values * g0
    der = None
    if Gid.deriv is not None and G1.deriv is not None:
        der = Gid.deriv + G1.deriv * g0
    return GridFunction(Gid.start, Gid.step, vals, der)


@dataclass(frozen=True)
class ExitFunctions:
    W: GridFunction
    G1: GridFunction
    Gid: GridFunction
    Z: GridFunction
    gtilde: GridFunction
    h: float
    x_max: float
    shoot_history: tuple = ()

    @property
    def x(self):
        return self.W.x

    def to_csv(self, path, comments=()):
        rows = np.column_stack([self.x, self.W.values, self.G1.values, self.Gid.values,
                                self.Z.values, self.gtilde.values])
        return write_csv(path, ["x", "W", "G1", "Gid", "Z", "gtilde"], rows, comments)


def exit_functions(cm: ClassicalModel, h: float, tol: float = 1e-4) -> ExitFunctions:
    """All exit functions from a single three-column march."""
    if not cm.q > 0:
        raise DomainError("exit functions with injections need q > 0")
    h, n_keep = _grid_step(cm, h)
    sh = _shoot(cm, h, n_keep, ["one", "identity"], tol=tol)
    c1, cid = sh.c
    W = GridFunction(0.0, h, sh.U[:, 0], sh.D[:, 0])
    G1 = GridFunction(0.0, h, sh.U[:, 1] + c1 * sh.U[:, 0], sh.D[:, 1] + c1 * sh.D[:, 0])
    Gid = GridFunction(0.0, h, sh.U[:, 2] + cid * sh.U[:, 0], sh.D[:, 2] + cid * sh.D[:, 0])
    Z = compute_z(W, G1)
    gt = compute_gtilde(Gid, G1, cm.q)
    return ExitFunctions(W, G1, Gid, Z, gt, h, sh.x_max, tuple(sh.history))


def laplace_exit_reflected(ef: ExitFunctions, x, a: float):
    """E_x[exp(-q T_a^+)] = Z(x)/Z(a) for the process reflected at zero."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > a + 1e-12):
        raise DomainError("need 0 <= x <= a")
    out = np.asarray(ef.Z(x)) / ef.Z(a)
    return out if out.ndim else float(out)


def injections_until_exit(ef: ExitFunctions, x, a: float):
    """E_x[int_0^{T_a^+} exp(-q s) dL_s] = gtilde(x) - Z(x) gtilde(a) / Z(a)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > a + 1e-12):
        raise DomainError("need 0 <= x <= a")
    za = ef.Z(a)
    if za == 0:
        raise DegenerateBarrierError("Z(a) = 0")
    out = np.asarray(ef.gtilde(x)) - np.asarray(ef.Z(x)) * ef.gtilde(a) / za
    return out if out.ndim else float(out)
