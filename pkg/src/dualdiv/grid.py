"""Values of a scalar function on a uniform grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import DomainError, GridMismatchError


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``values[i] = g(start + i*step)`` with optional derivative samples.

    Calling the object interpolates: cubic Hermite when ``deriv`` is known,
    a not-a-knot cubic spline otherwise. Points outside the grid raise.
    """

    start: float
    step: float
    values: np.ndarray
    deriv: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if self.deriv is not None:
            d = np.asarray(self.deriv, dtype=float)
            if d.shape != v.shape:
                raise GridMismatchError("derivative samples must match value samples")
            object.__setattr__(self, "deriv", d)
        if v.ndim != 1 or v.size < 1:
            raise DomainError("grid function needs a 1-D array of samples")
        if v.size > 1 and not self.step > 0:
            raise DomainError("grid step must be positive")

    @classmethod
    def on(cls, x: np.ndarray, values, deriv=None) -> "GridFunction":
        x = np.asarray(x, dtype=float)
        step = float(x[1] - x[0]) if x.size > 1 else 0.0
        if x.size > 2 and not np.allclose(np.diff(x), step, rtol=1e-9, atol=1e-12 * max(1.0, abs(x[-1]))):
            raise GridMismatchError("grid is not uniform")
        return cls(float(x[0]), step, values, deriv)

    def __len__(self):
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.values.size)

    @property
    def end(self) -> float:
        return self.start + self.step * (self.values.size - 1)

    def same_grid(self, other: "GridFunction") -> bool:
        return (len(self) == len(other) and abs(self.start - other.start) <= 1e-12
                and abs(self.step - other.step) <= 1e-12 * max(1.0, self.step))

    def require_same_grid(self, other: "GridFunction"):
        if not self.same_grid(other):
            raise GridMismatchError("grid functions live on different grids")

    def _spline(self):
        sp = self.__dict__.get("_sp")
        if sp is None:
            if self.deriv is not None and len(self) > 1:
                sp = CubicHermiteSpline(self.x, self.values, self.deriv)
            elif len(self) > 3:
                sp = CubicSpline(self.x, self.values)
            else:
                sp = None
            self.__dict__["_sp"] = sp
        return sp

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-9 * max(1.0, abs(self.end))
        if np.any(x < self.start - tol) or np.any(x > self.end + tol):
            raise DomainError(f"evaluation outside grid [{self.start}, {self.end}]")
        xc = np.clip(x, self.start, self.end)
        sp = self._spline()
        if sp is None:
            out = np.interp(xc, self.x, self.values)
        else:
            out = sp(xc)
        return out if out.ndim else float(out)

    def derivative(self, x=None):
        """Derivative samples on the grid, or interpolated derivative at ``x``."""
        if x is None:
            if self.deriv is not None:
                return self.deriv
            return np.gradient(self.values, self.step, edge_order=2)
        x = np.asarray(x, dtype=float)
        sp = self._spline()
        xc = np.clip(x, self.start, self.end)
        if sp is None:
            out = np.interp(xc, self.x, self.derivative())
        else:
            out = sp(xc, 1)
        return out if out.ndim else float(out)

    def to_rows(self):
        cols = [self.x, self.values] + ([self.deriv] if self.deriv is not None else [])
        return np.column_stack(cols)
