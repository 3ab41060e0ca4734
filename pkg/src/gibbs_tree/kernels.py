"""Interaction kernels K(t, u) on [0, 1]^2 and their closed-form constants.

Every kernel is stored together with a separable factorisation
``K(t, u) = left(t) @ right(u)`` so that conditional densities built on top of
it can be integrated once per basis function instead of once per parent spin.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidKernel

ArrayLike = float | np.ndarray


def odd_root(x: ArrayLike, q: int) -> ArrayLike:
    """Real q-th root for odd q: ``sign(x) * |x| ** (1/q)``.

    The principal complex branch is never used, so the result is odd in x.
    """
    if q < 1 or q % 2 == 0:
        raise ValueError(f"odd_root needs an odd positive order, got {q}")
    if q == 1:
        return x
    if q == 3:
        return np.cbrt(x)
    return np.sign(x) * np.abs(x) ** (1.0 / q)


def _check_unit(name: str, x: np.ndarray) -> None:
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")


class Kernel:
    """Symmetric, strictly positive, bounded kernel on the unit square."""

    #: points in [0, 1] where K(t, .) has unbounded derivatives
    singular_points: tuple[float, ...] = ()
    #: exact root order for kernels of the form 1 + c * odd_root(..., q)
    root_order: int | None = None
    name: str = "kernel"

    def left(self, t: np.ndarray) -> np.ndarray:
        """Factor matrix of shape (len(t), r)."""
        raise NotImplementedError

    def right(self, u: np.ndarray) -> np.ndarray:
        """Factor matrix of shape (r, len(u))."""
        raise NotImplementedError

    def __call__(self, t: ArrayLike, u: ArrayLike) -> ArrayLike:
        t_arr = np.asarray(t, dtype=float)
        u_arr = np.asarray(u, dtype=float)
        _check_unit("t", t_arr)
        _check_unit("u", u_arr)
        return self._evaluate(t_arr, u_arr)

    def _evaluate(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        t_b, u_b = np.broadcast_arrays(t, u)
        left = self.left(t_b.ravel())
        right = self.right(u_b.ravel())
        out = np.einsum("ir,ri->i", left, right)
        out = out.reshape(t_b.shape)
        return out if out.ndim else float(out)

    def matrix(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Dense table ``K(t_i, u_j)``."""
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        _check_unit("t", t)
        _check_unit("u", u)
        return self.left(t) @ self.right(u)

    def lower_bound(self) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"variant": self.name}


@dataclass(frozen=True, eq=False)
class OddRootKernel(Kernel):
    """``K(t, u) = 1 + coef * odd_root(4 (t - 1/2)(u - 1/2), q)``."""

    coef: float
    q: int
    name: str = "odd_root"

    @property
    def singular_points(self) -> tuple[float, ...]:  # type: ignore[override]
        return (0.5,)

    @property
    def root_order(self) -> int:  # type: ignore[override]
        return self.q

    def _phi(self, x: np.ndarray) -> np.ndarray:
        return odd_root(np.asarray(x, dtype=float) - 0.5, self.q)

    def left(self, t: np.ndarray) -> np.ndarray:
        scale = self.coef * 4.0 ** (1.0 / self.q)
        return np.column_stack([np.ones_like(t), scale * self._phi(t)])

    def right(self, u: np.ndarray) -> np.ndarray:
        return np.vstack([np.ones_like(u), self._phi(u)])

    def _evaluate(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = 1.0 + self.coef * odd_root(4.0 * (t - 0.5) * (u - 0.5), self.q)
        return out if np.ndim(out) else float(out)

    def lower_bound(self) -> float:
        return 1.0 - self.coef

    def describe(self) -> dict:
        return {"variant": self.name, "coef": self.coef, "q": self.q}


def K2Explicit() -> OddRootKernel:
    """Kernel 1 + (14/15) * 5th-root(4 (t-1/2)(u-1/2)) of the k = 2 model."""
    return OddRootKernel(coef=14.0 / 15.0, q=5, name="K2Explicit")


def K3Explicit() -> OddRootKernel:
    """Kernel 1 + (1/2) * 7th-root(4 (t-1/2)(u-1/2)) of the k = 3 model."""
    return OddRootKernel(coef=0.5, q=7, name="K3Explicit")


@dataclass(frozen=True, eq=False)
class LinearFamily(Kernel):
    """``K(t, u) = 1 + gamma (t - 1/2)(u - 1/2)``, positive iff |gamma| < 4."""

    gamma: float
    name: str = "LinearFamily"

    def __post_init__(self) -> None:
        if not math.isfinite(self.gamma) or abs(self.gamma) >= 4.0:
            raise InvalidKernel(
                f"|gamma| must be < 4 for a positive kernel, got {self.gamma!r}"
            )

    def left(self, t: np.ndarray) -> np.ndarray:
        return np.column_stack([np.ones_like(t), self.gamma * (t - 0.5)])

    def right(self, u: np.ndarray) -> np.ndarray:
        return np.vstack([np.ones_like(u), u - 0.5])

    def _evaluate(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = 1.0 + self.gamma * (t - 0.5) * (u - 0.5)
        return out if np.ndim(out) else float(out)

    def lower_bound(self) -> float:
        return 1.0 - abs(self.gamma) / 4.0

    def describe(self) -> dict:
        return {"variant": self.name, "gamma": self.gamma}


@dataclass(frozen=True, eq=False)
class UserTable(Kernel):
    """Tabulated kernel with bilinear interpolation on a common grid.

    Bilinear interpolation is written as ``sum_i hat_i(t) * row_i(u)`` where
    ``row_i`` is the linear interpolant of table row i; that is the separable
    factorisation used by the samplers.
    """

    grid: np.ndarray
    values: np.ndarray
    name: str = "UserTable"
    asymmetry: float = field(default=0.0)

    def left(self, t: np.ndarray) -> np.ndarray:
        g = self.grid
        idx = np.clip(np.searchsorted(g, t, side="right") - 1, 0, len(g) - 2)
        lo, hi = g[idx], g[idx + 1]
        w = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
        out = np.zeros((len(t), len(g)))
        rows = np.arange(len(t))
        out[rows, idx] = 1.0 - w
        out[rows, idx + 1] += w
        return out

    def right(self, u: np.ndarray) -> np.ndarray:
        return np.vstack([np.interp(u, self.grid, row) for row in self.values])

    def lower_bound(self) -> float:
        return float(self.values.min())

    def describe(self) -> dict:
        return {
            "variant": self.name,
            "grid_size": int(len(self.grid)),
            "asymmetry": self.asymmetry,
        }


def user_table(grid, values, *, symmetry_tol: float = 1e-10) -> UserTable:
    """Validate, symmetrise and wrap a kernel table given on ``grid x grid``."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise InvalidKernel("kernel grid needs at least two points")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise InvalidKernel("kernel grid must be strictly increasing inside [0, 1]")
    if values.shape != (len(grid), len(grid)):
        raise InvalidKernel(
            f"table shape {values.shape} does not match grid size {len(grid)}"
        )
    if not np.all(np.isfinite(values)):
        raise InvalidKernel("kernel table contains non-finite values")
    asym = float(np.max(np.abs(values - values.T)))
    if asym > symmetry_tol:
        warnings.warn(
            f"kernel table asymmetric by {asym:.3e}; using (K + K^T)/2",
            stacklevel=2,
        )
    values = 0.5 * (values + values.T)
    if values.min() <= 0:
        raise InvalidKernel("kernel table must be strictly positive")
    values.setflags(write=False)
    grid.setflags(write=False)
    return UserTable(grid=grid, values=values, asymmetry=asym)


def load_kernel_csv(path: str | Path, **kwargs) -> UserTable:
    """Read a kernel table: header row holds the u-grid, first column the t-grid."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    u_grid = np.array([float(x) for x in rows[0][1:]])
    t_grid = np.array([float(r[0]) for r in rows[1:]])
    body = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    if t_grid.shape != u_grid.shape or not np.allclose(t_grid, u_grid, rtol=0, atol=1e-15):
        raise InvalidKernel("t-grid and u-grid of a kernel table must coincide")
    return user_table(t_grid, body, **kwargs)


def save_kernel_csv(kernel: Kernel, grid, path: str | Path) -> None:
    grid = np.asarray(grid, dtype=float)
    table = kernel.matrix(grid, grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t\\u"] + [repr(float(x)) for x in grid])
        for t, row in zip(grid, table):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def eval_kernel(kernel: Kernel, t: ArrayLike, u: ArrayLike) -> ArrayLike:
    return kernel(t, u)


# -- closed-form constants ---------------------------------------------------


@dataclass(frozen=True)
class ConstantsK2:
    """Coefficients of the non-constant k = 2 solution ``3/4 + b * (t-1/2)^(1/5)``."""

    a: float = (14.0 / 15.0) * 4.0 ** 0.2
    b: float = math.sqrt(21.0 / 5.0) * 2.0 ** 0.2 / 4.0

    @property
    def gamma(self) -> float:
        return 5.0 * self.b**2 / (7.0 * 4.0 ** 0.2) + 9.0 / 16.0

    def identities(self) -> dict[str, tuple[float, float]]:
        """(computed, exact) pairs; see :func:`ulp_distance`."""
        return {
            "quadratic_term": (5.0 * self.b**2 / (7.0 * 4.0 ** 0.2), 3.0 / 16.0),
            "linear_coefficient": (15.0 * self.a / (14.0 * 4.0 ** 0.2), 1.0),
            "gamma": (self.gamma, 0.75),
        }


@dataclass(frozen=True)
class ConstantsK3:
    """Coefficients of the k = 3 solution ``a + b * 7th-root(2 (t - 1/2))``."""

    a: float = 0.5 * math.sqrt(57.0 / 17.0)
    b: float = 0.5 * math.sqrt(33.0 / 119.0)

    def identities(self) -> dict[str, tuple[float, float]]:
        a, b = self.a, self.b
        return {
            "constant_term": (a * a + 7.0 / 3.0 * b * b, 1.0),
            "odd_term": (3.5 * (a * a / 3.0 + b * b / 11.0), 1.0),
        }


def ulp_distance(x: float, y: float) -> float:
    """Distance between x and y measured in units of spacing at y."""
    return abs(x - y) / math.ulp(y)


def exact_k2_identities() -> dict[str, bool]:
    """Rational-arithmetic check of the k = 2 identities (b^2 carries 2^(2/5))."""
    # b^2 = (21/5) 2^(2/5) / 16 and 4^(1/5) = 2^(2/5), so the radicals cancel.
    b2_over_root = Fraction(21, 5) / 16
    a_over_root = Fraction(14, 15)
    return {
        "quadratic_term": Fraction(5, 7) * b2_over_root == Fraction(3, 16),
        "linear_coefficient": Fraction(15, 14) * a_over_root == 1,
    }


def exact_k3_identities() -> dict[str, bool]:
    a2, b2 = Fraction(57, 68), Fraction(33, 476)
    return {
        "constant_term": a2 + Fraction(7, 3) * b2 == 1,
        "odd_term": Fraction(7, 2) * (a2 / 3 + b2 / 11) == 1,
    }


KernelFactory = Callable[[], Kernel]

BUILTIN_KERNELS: dict[str, KernelFactory] = {
    "K2Explicit": K2Explicit,
    "K3Explicit": K3Explicit,
}
