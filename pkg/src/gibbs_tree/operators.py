"""Grid functions and the integral operators W, H_k and R_k.

Operators are applied by Nystrom contraction on the nodes of a quadrature
rule. Every result carries a Nystrom evaluator, so values off the grid (in
particular at t = 0, where R_k is normalised) are computed by quadrature of
the closed-form kernel instead of interpolation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .errors import (
    DegenerateNormalizer,
    DomainError,
    NotAFixedPoint,
    RuleMismatch,
    ZeroAtOrigin,
)
from .kernels import Kernel
from .quadrature import QuadratureRule

NEGATIVE_CLAMP = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the nodes of ``rule``, plus an optional
    evaluator valid on all of [0, 1]."""

    rule: QuadratureRule
    values: np.ndarray
    evaluator: Evaluator | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.rule.nodes.shape:
            raise RuleMismatch(
                f"{values.shape[0] if values.ndim else 1} values for "
                f"{len(self.rule)} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, rule: QuadratureRule, func: Evaluator) -> "GridFunction":
        return cls(rule, np.asarray(func(rule.nodes), dtype=float) * np.ones(len(rule)), func)

    @classmethod
    def constant(cls, rule: QuadratureRule, c: float = 1.0) -> "GridFunction":
        return cls(rule, np.full(len(rule), float(c)), lambda t: np.full(np.shape(t), float(c)))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.evaluator is not None:
            out = np.asarray(self.evaluator(np.atleast_1d(t_arr)), dtype=float)
        else:
            out = self._interpolate(np.atleast_1d(t_arr))
        return out.reshape(t_arr.shape) if t_arr.ndim else float(out.ravel()[0])

    def _interpolate(self, t: np.ndarray) -> np.ndarray:
        # linear, with linear extrapolation past the outermost nodes
        x, y = self.rule.nodes, self.values
        out = np.interp(t, x, y)
        lo, hi = t < x[0], t > x[-1]
        if np.any(lo):
            out[lo] = y[0] + (t[lo] - x[0]) * (y[1] - y[0]) / (x[1] - x[0])
        if np.any(hi):
            out[hi] = y[-1] + (t[hi] - x[-1]) * (y[-1] - y[-2]) / (x[-1] - x[-2])
        return out

    def at_zero(self) -> float:
        return self(0.0)

    def in_cone(self) -> bool:
        """Membership in C+_0: nonnegative on the nodes and not identically 0."""
        return bool(np.all(self.values >= 0.0) and self.values.max() > 0.0)

    def power(self, p: float) -> "GridFunction":
        vals = _safe_power(self.values, p)
        ev = self._eval_or_interp()
        return GridFunction(self.rule, vals, lambda t: _safe_power(ev(t), p))

    def __mul__(self, c: float) -> "GridFunction":
        ev = self._eval_or_interp()
        return GridFunction(self.rule, c * self.values, lambda t: c * ev(t))

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same_rule(self, other.rule)
        a, b = self._eval_or_interp(), other._eval_or_interp()
        return GridFunction(self.rule, self.values + other.values, lambda t: a(t) + b(t))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self + (-1.0) * other

    def sup_distance(self, other: "GridFunction") -> float:
        _same_rule(self, other.rule)
        return float(np.max(np.abs(self.values - other.values)))

    def _eval_or_interp(self) -> Evaluator:
        if self.evaluator is not None:
            return self.evaluator
        return self._interpolate

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write("node,value\n")
            for x, v in zip(self.rule.nodes, self.values):
                fh.write(f"{float(x)!r},{float(v)!r}\n")

    def to_json(self) -> str:
        return json.dumps(
            {
                "rule": self.rule.describe(),
                "nodes": self.rule.nodes.tolist(),
                "values": self.values.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str, rule: QuadratureRule) -> "GridFunction":
        data = json.loads(text)
        if not np.array_equal(np.asarray(data["nodes"]), rule.nodes):
            raise RuleMismatch("serialised nodes do not match the supplied rule")
        return cls(rule, np.asarray(data["values"]))


def _same_rule(f: GridFunction, rule: QuadratureRule) -> None:
    if f.rule is not rule and not (
        len(f.rule) == len(rule) and np.array_equal(f.rule.nodes, rule.nodes)
    ):
        raise RuleMismatch("grid function is bound to a different quadrature rule")


def _safe_power(values, p: float):
    values = np.asarray(values, dtype=float)
    if p == int(p) and p >= 1:
        return values ** int(p)
    if np.any(values < -NEGATIVE_CLAMP):
        raise DomainError(
            f"fractional power of a function with minimum {values.min():.3e}"
        )
    return np.clip(values, 0.0, None) ** p


@lru_cache(maxsize=32)
def nystrom_matrix(kernel: Kernel, rule: QuadratureRule) -> np.ndarray:
    """``A[i, j] = K(x_i, x_j) * w_j``."""
    mat = kernel.matrix(rule.nodes, rule.nodes) * rule.weights[None, :]
    mat.setflags(write=False)
    return mat


def _check_cone(f: GridFunction) -> None:
    if np.any(f.values < -NEGATIVE_CLAMP):
        raise DomainError("function leaves the positive cone")


def _contract(kernel: Kernel, rule: QuadratureRule, nodal: np.ndarray) -> GridFunction:
    weighted = rule.weights * nodal
    values = nystrom_matrix(kernel, rule) @ nodal
    nodes = rule.nodes

    def evaluate(t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        # chunked so dense kernel blocks stay small
        return np.concatenate(
            [kernel.matrix(t[i : i + 2048], nodes) @ weighted for i in range(0, len(t), 2048)]
        ) if len(t) else np.zeros(0)

    return GridFunction(rule, values, evaluate)


def apply_W(kernel: Kernel, rule: QuadratureRule, f: GridFunction) -> GridFunction:
    """``(W f)(t) = int_0^1 K(t, u) f(u) du``."""
    _same_rule(f, rule)
    return _contract(kernel, rule, f.values)


def apply_H(kernel: Kernel, rule: QuadratureRule, k: int, f: GridFunction) -> GridFunction:
    """Hammerstein operator ``(H_k f)(t) = int_0^1 K(t, u) f(u)^k du``."""
    if k < 1:
        raise DomainError(f"order k must be >= 1, got {k}")
    _same_rule(f, rule)
    _check_cone(f)
    return _contract(kernel, rule, f.values ** int(k))


def normalizer(kernel: Kernel, rule: QuadratureRule, f: GridFunction) -> float:
    """``(W f)(0)``, by quadrature of u -> K(0, u) f(u)."""
    _same_rule(f, rule)
    return float(kernel.matrix(np.zeros(1), rule.nodes)[0] @ (rule.weights * f.values))


def apply_R(
    kernel: Kernel,
    rule: QuadratureRule,
    k: int,
    f: GridFunction,
    *,
    tol: float = 1e-300,
) -> GridFunction:
    """``(R_k f)(t) = [(W f)(t) / (W f)(0)]^k``; the result equals 1 at t = 0."""
    _check_cone(f)
    wf = apply_W(kernel, rule, f)
    w0 = wf.at_zero()
    if not w0 > tol:
        raise DegenerateNormalizer(f"(Wf)(0) = {w0!r} is not positive")
    ev = wf.evaluator
    return GridFunction(
        rule,
        (wf.values / w0) ** int(k),
        lambda t: (ev(t) / w0) ** int(k),
    )


def r_residual(kernel: Kernel, rule: QuadratureRule, k: int, f: GridFunction) -> float:
    return apply_R(kernel, rule, k, f).sup_distance(f)


def eigen_to_fixed(f: GridFunction, k: int, *, tol: float = 1e-14) -> GridFunction:
    """Map an H_k eigenfunction to the R_k fixed point ``(f / f(0))^k``."""
    f0 = f.at_zero()
    if not f0 > tol:
        raise ZeroAtOrigin(f"f(0) = {f0!r}")
    return (f * (1.0 / f0)).power(int(k))


class EigenPair(NamedTuple):
    function: GridFunction
    eigenvalue: float
    """lambda_0 = (W h)(0): H_k g = lambda_0 g for g = h^(1/k)."""
    eigenvalue_normalized: float
    """lambda_0 * g(0)^(1-k), the eigenvalue of g / g(0)."""


def fixed_to_eigen(
    kernel: Kernel,
    rule: QuadratureRule,
    h: GridFunction,
    k: int,
    *,
    tol: float = 1e-8,
) -> EigenPair:
    """Inverse of :func:`eigen_to_fixed`: ``g = h^(1/k)`` with ``H_k g = (W h)(0) g``."""
    residual = r_residual(kernel, rule, k, h)
    if residual > tol:
        raise NotAFixedPoint(f"R_k residual {residual:.3e} exceeds {tol:.1e}")
    g = h.power(1.0 / k)
    lam0 = normalizer(kernel, rule, h)
    g0 = g.at_zero()
    return EigenPair(g, lam0, lam0 * g0 ** (1 - k))


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    NON_POSITIVE = "NonPositive"


@dataclass
class FixedPointReport:
    iterations: int
    final_residual_sup: float
    status: Status
    tolerance: float
    lambda_: float | None = None
    lambda_normalized: float | None = None
    initial_residual: float | None = None
    distances: dict[str, float] = field(default_factory=dict)
    label: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        d["lambda"] = d.pop("lambda_")
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def iterate_R(
    kernel: Kernel,
    rule: QuadratureRule,
    k: int,
    f0: GridFunction,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    damping: float = 1.0,
    known: Mapping[str, GridFunction] | None = None,
) -> tuple[GridFunction, FixedPointReport]:
    """Picard iteration ``f <- (1 - damping) f + damping R_k f``.

    Stops when the sup-norm change over the nodes is at most ``tol``. The
    report makes no claim about which fixed point was reached; ``known``
    solutions are only used to record distances to the terminal iterate.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    _check_cone(f0)
    f = f0
    status = Status.MAX_ITERATIONS
    residual = np.inf
    initial = None
    it = 0
    while it < max_iter:
        rf = apply_R(kernel, rule, k, f)
        if damping < 1.0:
            rf = (1.0 - damping) * f + damping * rf
        it += 1
        residual = rf.sup_distance(f)
        if initial is None:
            initial = residual
        if np.any(rf.values < 0.0):
            status = Status.NON_POSITIVE
            break
        f = rf
        if residual <= tol:
            status = Status.CONVERGED
            break
    lam = normalizer(kernel, rule, f)
    report = FixedPointReport(
        iterations=it,
        final_residual_sup=float(residual),
        status=status,
        tolerance=tol,
        lambda_=lam,
        lambda_normalized=lam * f.at_zero() ** ((1 - k) / k),
        initial_residual=float(initial) if initial is not None else None,
        distances={name: f.sup_distance(g) for name, g in (known or {}).items()},
    )
    return f, report
