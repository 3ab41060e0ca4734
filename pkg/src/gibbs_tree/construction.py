"""Explicit two-solution constructions for k = 2, k = 3 and the k >= 4 family.

For k >= 4 the kernel is ``1 + gamma (t - 1/2)(u - 1/2)`` where gamma is
built from a root xi in (0, 1) of ``P(x) = Q(x)``, where for a chosen n > k

    P(x) = (1 + x^(n-1)/2)^(k+1) - (1 - x^(n-1)/2)^(k+1)
    Q(x) = (k + 1) x^(n-k)

and the second solution is the straight line ``xi + xi^n (t - 1/2)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DenominatorUnderflow,
    InvalidOrder,
    MissingRecord,
    NoBracket,
    NotAdmissible,
)
from .kernels import ConstantsK2, ConstantsK3, K2Explicit, K3Explicit, Kernel, LinearFamily, odd_root
from .operators import FixedPointReport, GridFunction, Status, apply_H
from .quadrature import QuadratureRule, default_rule

SCAN_POINTS = 10_000
ROOT_TOL = 1e-12
GAMMA_AGREEMENT = 1e-9
ADMISSIBLE_BOUND = 4.0


def _check_order(k: int, n: int) -> None:
    if k < 2:
        raise InvalidOrder(f"k must be >= 2, got {k}")
    if n <= k:
        raise InvalidOrder(f"n must exceed k, got n={n}, k={k}")


def log_odd_difference(m: int, a):
    """``log((1 + a)^m - (1 - a)^m)`` for 0 < a < 1, without overflow or
    cancellation."""
    a = np.asarray(a, dtype=float)
    d = np.log1p(-a) - np.log1p(a)
    with np.errstate(divide="ignore"):
        return m * np.log1p(a) + np.log(-np.expm1(m * d))


def odd_difference(m: int, a):
    """``(1 + a)^m - (1 - a)^m`` evaluated stably for small a."""
    a = np.asarray(a, dtype=float)
    d = np.log1p(-a) - np.log1p(a)
    out = np.exp(m * np.log1p(a)) * -np.expm1(m * d)
    return out if out.ndim else float(out)


def eval_P(k: int, n: int, x):
    _check_order(k, n)
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore"):
        out = odd_difference(k + 1, 0.5 * x ** (n - 1))
    return out


def eval_Q(k: int, n: int, x):
    _check_order(k, n)
    out = (k + 1) * np.asarray(x, dtype=float) ** (n - k)
    return out if np.ndim(out) else float(out)


def power_sum(k: int, alpha):
    """``sum_{j=0}^{k} (1 + alpha/2)^(k-j) (1 - alpha/2)^j``."""
    alpha = np.asarray(alpha, dtype=float)
    p, m = 1.0 + 0.5 * alpha, 1.0 - 0.5 * alpha
    out = sum(p ** (k - j) * m**j for j in range(k + 1))
    return out if np.ndim(out) else float(out)


def _reduced_gap(k: int, n: int, x):
    """``(P - Q) / x^(n-k)``: same sign as P - Q on (0, 1), without the
    vanishing factor."""
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore"):
        alpha = x ** (n - 1)
    tiny = alpha == 0.0
    safe = np.where(tiny, 1.0, alpha)
    # as alpha -> 0 the quotient tends to k + 1
    logp_over_alpha = np.where(
        tiny, np.log(k + 1.0), log_odd_difference(k + 1, 0.5 * safe) - np.log(safe)
    )
    return np.exp((k - 1) * np.log(x) + logp_over_alpha) - (k + 1)


def phi(k: int, x):
    """``(1 + x/2)^(k+1) - (1 - x/2)^(k+1) - (k + 1) x``."""
    x = np.asarray(x, dtype=float)
    return (1 + x / 2) ** (k + 1) - (1 - x / 2) ** (k + 1) - (k + 1) * x


def phi_prime(k: int, x):
    x = np.asarray(x, dtype=float)
    return (k + 1) * (0.5 * (1 + x / 2) ** k + 0.5 * (1 - x / 2) ** k - 1.0)


def value_at_one(k: int) -> Fraction:
    """Exact ``P(1) = (3^(k+1) - 1) / 2^(k+1)`` (independent of n)."""
    return Fraction(3 ** (k + 1) - 1, 2 ** (k + 1))


@dataclass
class ConstructionRecord:
    k: int
    n: int
    xi: float
    root_bracket: tuple[float, float]
    root_residual: float
    brackets: list[tuple[float, float]] = field(default_factory=list)
    gamma: float | None = None
    gamma_direct: float | None = None
    gamma_expanded: float | None = None
    gamma_form: str | None = None

    @property
    def alpha(self) -> float:
        return self.xi ** (self.n - 1)

    @property
    def beta(self) -> float:
        return self.xi

    @property
    def admissible(self) -> bool:
        return self.gamma is not None and abs(self.gamma) < ADMISSIBLE_BOUND

    def row(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "xi": self.xi,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "admissible": self.admissible,
            "residual": self.root_residual,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(alpha=self.alpha, beta=self.beta, admissible=self.admissible)
        return d


def solve_xi(k: int, n: int, tol: float = ROOT_TOL, scan_points: int = SCAN_POINTS) -> ConstructionRecord:
    """Root of ``P - Q`` in (0, 1).

    Scans a uniform grid for sign changes and refines the rightmost bracket;
    all brackets found are kept on the record.
    """
    _check_order(k, n)
    grid = np.linspace(0.0, 1.0, scan_points + 1)[1:-1]
    gap = _reduced_gap(k, n, grid)
    sign = np.sign(gap)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(sign == 0)[0]
    brackets = [(float(grid[i]), float(grid[i + 1])) for i in idx]
    brackets += [(float(grid[i]), float(grid[i])) for i in exact]
    brackets.sort()
    # the interval (last interior grid point, 1) is covered by P(1) > Q(1)
    if not brackets and gap[-1] < 0 < _reduced_gap(k, n, 1.0):
        brackets.append((float(grid[-1]), 1.0))
    if not brackets:
        raise NoBracket(f"no sign change of P - Q on (0, 1) for k={k}, n={n}")
    lo, hi = brackets[-1]
    if lo == hi:
        xi = lo
    else:
        xi = brentq(lambda x: float(_reduced_gap(k, n, x)), lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = abs(float(eval_P(k, n, xi)) - float(eval_Q(k, n, xi)))
    if residual > tol:
        raise NoBracket(f"root residual {residual:.3e} exceeds {tol:.1e} for k={k}, n={n}")
    return ConstructionRecord(
        k=k, n=n, xi=float(xi), root_bracket=(lo, hi), root_residual=residual, brackets=brackets
    )


@lru_cache(maxsize=None)
def series_coefficients(k: int) -> tuple[Fraction, ...]:
    """Exact coefficients c_i of ``D(alpha) = alpha^3 * sum_i c_i alpha^(2i)``.

    ``D(alpha) = [(1+a/2)^(k+2) - (1-a/2)^(k+2)]/(k+2) - [(1+a/2)^(k+1) -
    (1-a/2)^(k+1)]/(k+1)``; the first coefficient is k/12.
    """
    coeffs = []
    for j in range(3, k + 3, 2):
        c = Fraction(2, 2**j) * (
            Fraction(math.comb(k + 2, j), k + 2) - Fraction(math.comb(k + 1, j), k + 1)
        )
        coeffs.append(c)
    return tuple(coeffs)


def gamma_expanded(k: int, xi: float, n: int) -> float:
    alpha = xi ** (n - 1)
    coeffs = [float(c) for c in series_coefficients(k)]
    denom = math.fsum(c * alpha ** (2 * i) for i, c in enumerate(coeffs))
    return xi ** (1 - k) / denom


def gamma_direct(k: int, xi: float, n: int) -> tuple[float, float]:
    """Direct quotient and an estimate of its relative rounding error."""
    alpha = xi ** (n - 1)
    first = odd_difference(k + 2, 0.5 * alpha) / (k + 2)
    second = xi ** (n - k)
    denom = first - second
    cond = (abs(first) + abs(second)) / abs(denom) * np.finfo(float).eps if denom else np.inf
    return xi ** (3 * n - k - 2) / denom, cond


def compute_gamma(record: ConstructionRecord) -> float:
    """Coupling gamma of the linear kernel family; stored on the record.

    The direct quotient is used unless its denominator has lost precision, in
    which case the series form ``xi^(1-k) / (k/12 + a_3 alpha^2 + ...)`` is used.
    """
    k, n, xi = record.k, record.n, record.xi
    with np.errstate(all="ignore"):
        direct, cond = gamma_direct(k, xi, n)
        try:
            expanded = gamma_expanded(k, xi, n)
        except (OverflowError, ZeroDivisionError):
            expanded = math.nan
    direct_ok = math.isfinite(direct) and direct > 0 and cond < 1e-10
    expanded_ok = math.isfinite(expanded) and expanded > 0
    if direct_ok and expanded_ok and abs(direct - expanded) > GAMMA_AGREEMENT * max(1.0, abs(expanded)):
        raise DenominatorUnderflow(
            f"gamma forms disagree for k={k}, n={n}: {direct!r} vs {expanded!r}"
        )
    if direct_ok:
        gamma, form = direct, "direct"
    elif expanded_ok:
        gamma, form = expanded, "expanded"
    else:
        raise DenominatorUnderflow(f"both gamma forms lost precision for k={k}, n={n}")
    record.gamma = float(gamma)
    record.gamma_direct = float(direct) if math.isfinite(direct) else None
    record.gamma_expanded = float(expanded) if math.isfinite(expanded) else None
    record.gamma_form = form
    return record.gamma


def construct(k: int, n: int) -> ConstructionRecord:
    record = solve_xi(k, n)
    compute_gamma(record)
    return record


def beta_closed_form(k: int, alpha: float) -> float:
    """``((k + 1) / sum_j (1 + alpha/2)^(k-j)(1 - alpha/2)^j)^(1/(k-1))``."""
    return ((k + 1) / power_sum(k, alpha)) ** (1.0 / (k - 1))


@dataclass
class DiagnosticRow:
    n: int
    xi: float
    alpha: float
    beta: float
    gamma: float | None
    admissible: bool
    identity_residual: float
    root_residual: float
    error: str | None = None


def asymptotic_diagnostics(k: int, n_list: Sequence[int]) -> list[DiagnosticRow]:
    """Trend table of (n, xi, alpha, beta, gamma); rows that fail carry ``error``."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    rows = []
    for rec in sweep(k, n_list):
        if isinstance(rec, Exception):
            rows.append(DiagnosticRow(rec.n, *([math.nan] * 3), None, False, math.nan, math.nan, str(rec)))  # type: ignore[attr-defined]
            continue
        rows.append(
            DiagnosticRow(
                n=rec.n,
                xi=rec.xi,
                alpha=rec.alpha,
                beta=rec.beta,
                gamma=rec.gamma,
                admissible=rec.admissible,
                identity_residual=abs(rec.beta - beta_closed_form(k, rec.alpha)),
                root_residual=rec.root_residual,
            )
        )
    return rows


def _construct_or_error(k: int, n: int):
    try:
        return construct(k, n)
    except (NoBracket, DenominatorUnderflow) as exc:
        exc.n = n  # type: ignore[attr-defined]
        return exc


def sweep(k: int, n_values: Iterable[int], workers: int = 1) -> list:
    """Construction records for each n; failures are returned in place."""
    n_values = list(n_values)
    for n in n_values:
        _check_order(k, n)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda n: _construct_or_error(k, n), n_values))
    return [_construct_or_error(k, n) for n in n_values]


def admissible_records(k: int, count: int, n_max: int | None = None) -> list[ConstructionRecord]:
    """The ``count`` smallest n > k whose record is admissible."""
    n_max = n_max or k + 200
    out = []
    for n in range(k + 1, n_max + 1):
        rec = construct(k, n)
        if rec.admissible:
            out.append(rec)
            if len(out) == count:
                break
    return out


SWEEP_COLUMNS = ("k", "n", "xi", "alpha", "beta", "gamma", "admissible", "residual")


def records_to_csv(records: Iterable[ConstructionRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for rec in records:
        row = rec.row()
        w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def records_to_json(records: Iterable[ConstructionRecord]) -> str:
    return json.dumps([rec.row() for rec in records], indent=2)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def build_family_kernel(record: ConstructionRecord) -> LinearFamily:
    if record.gamma is None:
        compute_gamma(record)
    if not record.admissible:
        raise NotAdmissible(
            f"|gamma| = {abs(record.gamma):.6g} >= 4 for k={record.k}, n={record.n}"
        )
    return LinearFamily(record.gamma)


# -- analytic solutions ------------------------------------------------------

SOLUTION_NAMES = ("K2_f1", "K2_f2", "K3_f1", "K3_f2", "General_f0", "General_f1")


@dataclass(frozen=True, eq=False)
class AnalyticSolution:
    which: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    record: ConstructionRecord | None = None

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.evaluator(np.atleast_1d(t_arr)), dtype=float)
        return out.reshape(t_arr.shape) if t_arr.ndim else float(out.ravel()[0])

    def on(self, rule: QuadratureRule) -> GridFunction:
        return GridFunction.from_callable(rule, self.evaluator)

    def is_positive(self, points: int = 10_001) -> bool:
        return bool(np.min(self(np.linspace(0.0, 1.0, points))) > 0.0)


def _ones(t):
    return np.ones(np.shape(t))


def analytic_solution(which: str, record: ConstructionRecord | None = None) -> AnalyticSolution:
    if which in ("K2_f1", "K3_f1", "General_f0"):
        return AnalyticSolution(which, _ones, record)
    if which == "K2_f2":
        b = ConstantsK2().b
        return AnalyticSolution(which, lambda t: 0.75 + b * odd_root(np.asarray(t) - 0.5, 5))
    if which == "K3_f2":
        c = ConstantsK3()
        return AnalyticSolution(
            which, lambda t: c.a + c.b * odd_root(2.0 * (np.asarray(t) - 0.5), 7)
        )
    if which == "General_f1":
        if record is None:
            raise MissingRecord("General_f1 needs a construction record")
        if record.gamma is None:
            compute_gamma(record)
        if not record.admissible:
            raise NotAdmissible(f"record k={record.k}, n={record.n} is not admissible")
        xi, slope = record.xi, record.xi**record.n
        return AnalyticSolution(which, lambda t: xi + slope * (np.asarray(t) - 0.5), record)
    raise ValueError(f"unknown solution {which!r}; expected one of {SOLUTION_NAMES}")


def verify_solution(
    kernel: Kernel,
    rule: QuadratureRule,
    k: int,
    sol: AnalyticSolution | GridFunction,
    tol: float = 1e-8,
) -> FixedPointReport:
    """Sup over nodes of ``|H_k sol - sol|`` (every construction has eigenvalue 1)."""
    f = sol.on(rule) if isinstance(sol, AnalyticSolution) else sol
    hf = apply_H(kernel, rule, k, f)
    residual = float(np.max(np.abs(hf.values - f.values)))
    f0 = f.at_zero()
    return FixedPointReport(
        iterations=0,
        final_residual_sup=residual,
        status=Status.CONVERGED if residual <= tol else Status.MAX_ITERATIONS,
        tolerance=tol,
        lambda_=hf.at_zero() / f0,
        lambda_normalized=hf.at_zero() / f0 * f0 ** (1 - k),
        label=getattr(sol, "which", ""),
    )


@dataclass
class Construction:
    """A kernel, its order k and the two known positive fixed points of H_k."""

    name: str
    kernel: Kernel
    k: int
    solutions: dict[str, AnalyticSolution]
    record: ConstructionRecord | None = None

    @property
    def trivial(self) -> AnalyticSolution:
        return next(iter(self.solutions.values()))

    @property
    def nontrivial(self) -> AnalyticSolution:
        return list(self.solutions.values())[1]

    def verify(self, rule: QuadratureRule | None = None, tol: float = 1e-8) -> list[FixedPointReport]:
        rule = rule or default_rule()
        return [verify_solution(self.kernel, rule, self.k, s, tol) for s in self.solutions.values()]


def builtin_construction(name: str) -> Construction:
    if name == "k2":
        return Construction(
            "k2", K2Explicit(), 2,
            {"K2_f1": analytic_solution("K2_f1"), "K2_f2": analytic_solution("K2_f2")},
        )
    if name == "k3":
        return Construction(
            "k3", K3Explicit(), 3,
            {"K3_f1": analytic_solution("K3_f1"), "K3_f2": analytic_solution("K3_f2")},
        )
    raise ValueError(f"unknown construction {name!r}")


def family_construction(k: int, n: int) -> Construction:
    """The linear-kernel construction for (k, n); raises NotAdmissible if |gamma| >= 4."""
    record = construct(k, n)
    kernel = build_family_kernel(record)
    return Construction(
        f"k{k}n{n}", kernel, k,
        {
            "General_f0": analytic_solution("General_f0", record),
            "General_f1": analytic_solution("General_f1", record),
        },
        record,
    )
