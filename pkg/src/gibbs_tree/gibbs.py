"""Sampling translation-invariant splitting Gibbs measures on a finite ball.

A positive solution f of ``R_k f = f`` (normalised so f(0) = 1) determines the
finite-volume weights ``prod_edges K(s_x, s_y) * prod_boundary f(s_x)``.
Integrating out a leaf gives ``(W f)(s_parent) = (W f)(0) f(s_parent)^(1/k)``,
so the chain on the tree has

    root density         rho(t)   proportional to f(t)^((k+1)/k)
    parent -> child      p(u | t) = K(t, u) f(u) / (W f)(t)

and rho is stationary for p. The stationarity check is run when a handle is
built; a handle that fails it is never returned.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Iterator

import numpy as np

from .errors import NormalizationFailure, NotAFixedPoint, StationarityFailure
from .kernels import Kernel
from .operators import GridFunction, apply_R, eigen_to_fixed, normalizer, nystrom_matrix
from .quadrature import QuadratureRule, cell_rule, cumulative_integral

CDF_CELLS = 4096
CDF_TOL = 1e-9
CDF_MAX_CELLS = 2**18
STATIONARITY_TOL = 1e-8
NORMALIZATION_TOL = 1e-10


# -- tree --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TreeBall:
    """Ball of radius ``radius`` in the Cayley tree of order k, in BFS order.

    The root has k + 1 children, every other internal vertex has k.
    """

    k: int
    radius: int
    parent: np.ndarray
    depth: np.ndarray

    @classmethod
    def build(cls, k: int, radius: int) -> "TreeBall":
        if k < 1 or radius < 0:
            raise ValueError("need k >= 1 and radius >= 0")
        parent, depth = [-1], [0]
        shell = [0]
        for d in range(1, radius + 1):
            nxt = []
            for v in shell:
                for _ in range(k + 1 if v == 0 else k):
                    parent.append(v)
                    depth.append(d)
                    nxt.append(len(parent) - 1)
            shell = nxt
        return cls(k, radius, np.array(parent), np.array(depth))

    def __len__(self) -> int:
        return len(self.parent)

    def shell(self, d: int) -> np.ndarray:
        return np.nonzero(self.depth == d)[0]

    def shell_size(self, d: int) -> int:
        return 1 if d == 0 else (self.k + 1) * self.k ** (d - 1)

    @cached_property
    def _children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(len(self))]
        for v, p in enumerate(self.parent[1:], start=1):
            ch[p].append(v)
        return ch

    def children(self, v: int) -> list[int]:
        return self._children[v]


# -- random streams ----------------------------------------------------------


def vertex_stream(seed: int, vertex: int) -> np.random.Generator:
    """Philox stream keyed on (seed, vertex); independent of traversal order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(vertex),))
    return np.random.Generator(np.random.Philox(ss))


# -- inverse-CDF tables ------------------------------------------------------


class _CdfTable:
    """Cumulative integrals of r basis densities on a uniform grid.

    A density is a nonnegative combination ``sum_r c_r b_r(u)``; its CDF at
    the grid edges is ``sum_r c_r B_r(edge)``, inverted by vectorised
    bisection on the edge index followed by linear interpolation.
    """

    def __init__(self, basis: Callable[[np.ndarray], np.ndarray], singular_points=(), cells: int = CDF_CELLS):
        self.singular_points = tuple(singular_points)
        table = self._table(basis, cells)
        while True:
            finer = self._table(basis, 2 * cells)
            change = float(np.max(np.abs(finer[:, ::2] - table)))
            if change < CDF_TOL or 2 * cells >= CDF_MAX_CELLS:
                break
            cells, table = 2 * cells, finer
        self.cells = cells
        self.refinement_change = change
        self.edges = self._edges(cells)
        self.cumulative = table

    def _edges(self, cells: int) -> np.ndarray:
        return np.unique(np.concatenate([np.linspace(0.0, 1.0, cells + 1), self.singular_points]))

    def _table(self, basis, cells: int) -> np.ndarray:
        return cumulative_integral(basis, self._edges(cells), singular_points=self.singular_points)

    def totals(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.cumulative[:, -1]

    def cdf(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        values = coeffs @ self.cumulative
        return np.interp(x, self.edges, values / values[-1])

    def invert(self, coeffs: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Quantiles for per-sample coefficient rows ``coeffs`` (N, r)."""
        target = v * self.totals(coeffs) if coeffs.ndim == 2 else v * float(coeffs @ self.cumulative[:, -1])
        n_edges = len(self.edges)
        if coeffs.ndim == 1:
            curve = coeffs @ self.cumulative
            idx = np.clip(np.searchsorted(curve, target, side="right") - 1, 0, n_edges - 2)
            c_lo, c_hi = curve[idx], curve[idx + 1]
        else:
            lo = np.zeros(len(v), dtype=np.int64)
            hi = np.full(len(v), n_edges - 1, dtype=np.int64)
            while True:
                active = hi - lo > 1
                if not active.any():
                    break
                mid = (lo + hi) // 2
                val = np.einsum("nr,rn->n", coeffs, self.cumulative[:, mid])
                go_right = (val <= target) & active
                lo = np.where(go_right, mid, lo)
                hi = np.where(~go_right & active, mid, hi)
            idx = lo
            c_lo = np.einsum("nr,rn->n", coeffs, self.cumulative[:, idx])
            c_hi = np.einsum("nr,rn->n", coeffs, self.cumulative[:, idx + 1])
        e_lo, e_hi = self.edges[idx], self.edges[idx + 1]
        span = c_hi - c_lo
        frac = np.where(span > 0, (target - c_lo) / np.where(span > 0, span, 1.0), 0.5)
        return np.clip(e_lo + np.clip(frac, 0.0, 1.0) * (e_hi - e_lo), 0.0, 1.0)


# -- measure -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Density:
    """A probability density on [0, 1] with quadrature moments and a sampler."""

    pdf: Callable[[np.ndarray], np.ndarray]
    rule: QuadratureRule
    _table: _CdfTable
    _coeffs: np.ndarray

    def integral(self) -> float:
        return float(self.rule.weights @ self.pdf(self.rule.nodes))

    def moment(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        x = self.rule.nodes
        return float(self.rule.weights @ (g(x) * self.pdf(x)))

    def mean(self) -> float:
        return self.moment(lambda x: x)

    def cdf(self, x):
        """Exact CDF: tabulated up to the enclosing edge, quadrature inside the cell."""
        x = np.asarray(x, dtype=float)
        flat = np.clip(np.atleast_1d(x).ravel(), 0.0, 1.0)
        tab = self._table
        curve = self._coeffs @ tab.cumulative
        idx = np.clip(np.searchsorted(tab.edges, flat, side="right") - 1, 0, len(tab.edges) - 2)
        out = curve[idx] / curve[-1]
        for i, (a, b) in enumerate(zip(tab.edges[idx], flat)):
            if b > a:
                nodes, w, _ = cell_rule(np.array([a, b]), singular_points=tab.singular_points)
                out[i] += w @ self.pdf(nodes)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        return self._table.invert(self._coeffs, np.asarray(uniforms, dtype=float))


@dataclass(frozen=True, eq=False)
class MeasureHandle:
    """Splitting Gibbs measure determined by a verified R_k fixed point."""

    kernel: Kernel
    rule: QuadratureRule
    k: int
    f: GridFunction
    label: str = ""
    fixed_point_residual: float = 0.0
    stationarity_error: float = 0.0

    def _f_eval(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    @cached_property
    def root_normalizer(self) -> float:
        p = (self.k + 1) / self.k
        z = float(self.rule.weights @ self.f.values**p)
        if not (z > 0 and math.isfinite(z)):
            raise NormalizationFailure(f"root normaliser {z!r}")
        return z

    def root_pdf(self, t) -> np.ndarray:
        p = (self.k + 1) / self.k
        return np.clip(self._f_eval(t), 0.0, None) ** p / self.root_normalizer

    @cached_property
    def weighted_values(self) -> np.ndarray:
        return self.rule.weights * self.f.values

    def w_of_f(self, t) -> np.ndarray:
        """``(W f)(t)`` by quadrature at arbitrary t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.kernel.matrix(t, self.rule.nodes) @ self.weighted_values

    def transition_pdf(self, t: float, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        norm = float(self.w_of_f(t)[0])
        if not norm > 0:
            raise NormalizationFailure(f"(Wf)({t}) = {norm!r}")
        return self.kernel(t, u) * self._f_eval(u) / norm

    @cached_property
    def _root_table(self) -> _CdfTable:
        return _CdfTable(lambda x: self.root_pdf(x)[None, :], self.kernel.singular_points)

    @cached_property
    def _transition_table(self) -> _CdfTable:
        return _CdfTable(
            lambda x: self.kernel.right(x) * self._f_eval(x)[None, :],
            self.kernel.singular_points,
        )

    def sample_root(self, uniforms: np.ndarray) -> np.ndarray:
        return self._root_table.invert(np.ones(1), uniforms)

    def sample_children(self, parent_spins: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        coeffs = self.kernel.left(np.asarray(parent_spins, dtype=float))
        return self._transition_table.invert(coeffs, uniforms)

    def describe(self) -> dict:
        return {
            "label": self.label,
            "k": self.k,
            "kernel": self.kernel.describe(),
            "quadrature": self.rule.describe(),
            "fixed_point_residual": self.fixed_point_residual,
            "stationarity_error": self.stationarity_error,
        }


def stationarity_error(kernel: Kernel, rule: QuadratureRule, k: int, f: GridFunction) -> float:
    """``max_i | int rho(t) p(u_i | t) dt - rho(u_i) |`` over the rule nodes."""
    w, fv = rule.weights, f.values
    rho = fv ** ((k + 1) / k)
    rho = rho / float(w @ rho)
    wf = nystrom_matrix(kernel, rule) @ fv
    kmat = kernel.matrix(rule.nodes, rule.nodes)
    pushed = fv * (kmat.T @ (w * rho / wf))
    return float(np.max(np.abs(pushed - rho)))


def build_measure(
    kernel: Kernel,
    rule: QuadratureRule,
    k: int,
    f: GridFunction,
    *,
    tol: float = 1e-8,
    label: str = "",
) -> MeasureHandle:
    """Validate ``f`` as an R_k fixed point and return its measure handle.

    ``f`` is rescaled so that f(0) = 1. Raises :class:`NotAFixedPoint` if the
    R_k residual exceeds ``tol`` and :class:`StationarityFailure` if the
    derived root density is not invariant under the transition kernel.
    """
    f = f * (1.0 / f.at_zero())
    residual = apply_R(kernel, rule, k, f).sup_distance(f)
    if residual > tol:
        raise NotAFixedPoint(f"R_k residual {residual:.3e} exceeds {tol:.1e}")
    err = stationarity_error(kernel, rule, k, f)
    if not err <= STATIONARITY_TOL:
        raise StationarityFailure(f"stationarity error {err:.3e} exceeds {STATIONARITY_TOL:.0e}")
    return MeasureHandle(kernel, rule, k, f, label, residual, err)


def measure_from_eigenfunction(
    kernel: Kernel, rule: QuadratureRule, k: int, g, *, tol: float = 1e-8, label: str = ""
) -> MeasureHandle:
    """Handle for an H_k eigenfunction g (grid function or analytic solution)."""
    if not isinstance(g, GridFunction):
        label = label or getattr(g, "which", "")
        g = g.on(rule)
    return build_measure(kernel, rule, k, eigen_to_fixed(g, k), tol=tol, label=label)


def root_density(handle: MeasureHandle) -> Density:
    dens = Density(handle.root_pdf, handle.rule, handle._root_table, np.ones(1))
    total = dens.integral()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NormalizationFailure(f"root density integrates to {total!r}")
    return dens


def transition_density(handle: MeasureHandle, parent_spin: float) -> Density:
    t = float(parent_spin)
    dens = Density(
        lambda u: handle.transition_pdf(t, u),
        handle.rule,
        handle._transition_table,
        handle.kernel.left(np.array([t]))[0],
    )
    total = dens.integral()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NormalizationFailure(f"p(.|{t}) integrates to {total!r}")
    return dens


# -- sampling ----------------------------------------------------------------


def _walk(handle: MeasureHandle, tree: TreeBall, n_samples: int, seed: int) -> Iterator[tuple[int, np.ndarray, np.ndarray | None]]:
    """Depth-first generation of (vertex, spins, parent spins); each vertex
    draws its uniforms from its own stream, so results do not depend on the
    traversal order."""
    root = handle.sample_root(vertex_stream(seed, 0).random(n_samples))
    yield 0, root, None
    stack = [(0, root)]
    while stack:
        v, spins = stack.pop()
        for c in reversed(tree.children(v)):
            child = handle.sample_children(spins, vertex_stream(seed, c).random(n_samples))
            yield c, child, spins
            stack.append((c, child))


@dataclass(frozen=True, eq=False)
class SpinConfiguration:
    tree: TreeBall
    spins: np.ndarray
    seed: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("vertex_id,parent_id,depth,spin\n")
        for v, (p, d, s) in enumerate(zip(self.tree.parent, self.tree.depth, self.spins)):
            buf.write(f"{v},{p},{d},{float(s)!r}\n")
        return buf.getvalue()


def sample_balls(handle: MeasureHandle, radius: int, n_samples: int, seed: int) -> np.ndarray:
    """Array of shape (n_samples, |ball|), columns in BFS vertex order."""
    tree = TreeBall.build(handle.k, radius)
    out = np.empty((n_samples, len(tree)))
    for v, spins, _ in _walk(handle, tree, n_samples, seed):
        out[:, v] = spins
    return out


def sample_ball(handle: MeasureHandle, radius: int, seed: int) -> SpinConfiguration:
    tree = TreeBall.build(handle.k, radius)
    return SpinConfiguration(tree, sample_balls(handle, radius, 1, seed)[0], int(seed))


@dataclass
class MarginalStats:
    label: str
    k: int
    radius: int
    n_samples: int
    seed: int
    root_mean: float
    root_mean_se: float
    root_variance: float
    root_third_moment: float
    root_third_moment_se: float
    shell_means: list[float]
    shell_mean_se: list[float]
    parent_child_correlation: float
    root_mean_quadrature: float
    root_third_moment_quadrature: float
    separation_sigma: float
    third_moment_sigma: float
    handle: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def marginal_stats(handle: MeasureHandle, radius: int, n_samples: int, seed: int) -> MarginalStats:
    """Monte Carlo summaries of the ball marginals, with standard errors.

    Only per-shell running sums are kept, so memory is O(radius * n_samples).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    tree = TreeBall.build(handle.k, radius)
    shell_sums = np.zeros((radius + 1, n_samples))
    root = None
    xs, ys = [], []
    for v, spins, parent in _walk(handle, tree, n_samples, seed):
        shell_sums[tree.depth[v]] += spins
        if v == 0:
            root = spins
        elif tree.parent[v] == 0:
            xs.append(parent)
            ys.append(spins)
    shell_avg = shell_sums / np.array([tree.shell_size(d) for d in range(radius + 1)])[:, None]

    def se(x: np.ndarray) -> float:
        return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan

    centered3 = (root - 0.5) ** 3
    dens = root_density(handle)
    root_mean = float(np.mean(root))
    root_se = se(root)
    third = float(np.mean(centered3))
    third_se = se(centered3)
    corr = math.nan
    if xs and n_samples > 1:
        corr = float(np.corrcoef(np.concatenate(xs), np.concatenate(ys))[0, 1])
    return MarginalStats(
        label=handle.label,
        k=handle.k,
        radius=radius,
        n_samples=n_samples,
        seed=int(seed),
        root_mean=root_mean,
        root_mean_se=root_se,
        root_variance=float(np.var(root, ddof=1)) if n_samples > 1 else math.nan,
        root_third_moment=third,
        root_third_moment_se=third_se,
        shell_means=[float(np.mean(s)) for s in shell_avg],
        shell_mean_se=[se(s) for s in shell_avg],
        parent_child_correlation=corr,
        root_mean_quadrature=dens.mean(),
        root_third_moment_quadrature=dens.moment(lambda x: (x - 0.5) ** 3),
        separation_sigma=abs(root_mean - 0.5) / root_se if root_se > 0 else math.inf,
        third_moment_sigma=abs(third) / third_se if third_se > 0 else math.inf,
        handle=handle.describe(),
    )
