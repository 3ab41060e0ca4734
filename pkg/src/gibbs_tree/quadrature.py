"""Gauss-Legendre rules on [0, 1], including rules that resolve algebraic
singularities of the form |u - s|^(1/q) at interior split points s."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import InvalidParams, NonFiniteIntegrand

GAUSS_LEGENDRE = "gauss_legendre"
COMPOSITE = "composite"
SINGULARITY_SPLIT = "singularity_split"
POWER_SUBSTITUTION = "power_substitution"

DEFAULT_ORDER = 16
DEFAULT_PANELS = 64
DEFAULT_SPLITS = (0.5,)
# geometric refinement toward each split point: ratio and number of levels
DEFAULT_GRADING = 0.2
DEFAULT_LEVELS = 14


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def exactness_degree(self) -> int:
        if self.kind == POWER_SUBSTITUTION:
            return 0
        return 2 * self.params["order"] - 1

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params, "n_nodes": len(self)}


@lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes/weights on every panel ``[edges[i], edges[i+1]]``, panel by panel."""
    x, w = _leggauss(order)
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def graded_edges(
    lo: float,
    hi: float,
    panels: int,
    singular_lo: bool,
    singular_hi: bool,
    grading: float = DEFAULT_GRADING,
    levels: int = DEFAULT_LEVELS,
) -> np.ndarray:
    """Uniform panels on [lo, hi], geometrically refined toward singular ends."""
    edges = list(np.linspace(lo, hi, panels + 1))
    h = (hi - lo) / panels
    extra = []
    if singular_lo:
        extra += [lo + h * grading**j for j in range(1, levels + 1)]
    if singular_hi:
        extra += [hi - h * grading**j for j in range(1, levels + 1)]
    return np.unique(np.array(edges + extra))


def _validate(order: int, panels: int, splits) -> None:
    if int(order) < 2:
        raise InvalidParams(f"order must be >= 2, got {order}")
    if int(panels) < 1:
        raise InvalidParams(f"panels must be >= 1, got {panels}")
    for s in splits:
        if not 0.0 < s < 1.0:
            raise InvalidParams(f"split point {s} is not inside (0, 1)")


def build_rule(kind: str = SINGULARITY_SPLIT, **params) -> QuadratureRule:
    """Construct a quadrature rule on [0, 1].

    Parameters
    ----------
    kind : {"gauss_legendre", "composite", "singularity_split", "power_substitution"}
    order : int
        Gauss-Legendre points per panel.
    panels : int
        Number of uniform panels (ignored for ``gauss_legendre``).
    splits : sequence of float
        Interior panel boundaries for ``singularity_split``; panels touching a
        split point are refined geometrically (``grading``, ``levels``).
    q : int
        Root order for ``power_substitution``, which maps
        ``u = 1/2 + s |s|^(q-1) / 2`` for s in [-1, 1].
    """
    order = int(params.get("order", DEFAULT_ORDER))
    if kind == GAUSS_LEGENDRE:
        _validate(order, 1, ())
        x, w = panel_nodes(np.array([0.0, 1.0]), order)
        return QuadratureRule(x, w, kind, {"order": order})

    panels = int(params.get("panels", DEFAULT_PANELS))
    if kind == COMPOSITE:
        _validate(order, panels, ())
        x, w = panel_nodes(np.linspace(0.0, 1.0, panels + 1), order)
        return QuadratureRule(x, w, kind, {"order": order, "panels": panels})

    if kind == SINGULARITY_SPLIT:
        splits = tuple(sorted(float(s) for s in params.get("splits", DEFAULT_SPLITS)))
        grading = float(params.get("grading", DEFAULT_GRADING))
        levels = int(params.get("levels", DEFAULT_LEVELS))
        _validate(order, panels, splits)
        if not 0.0 < grading < 1.0 or levels < 0:
            raise InvalidParams("grading must be in (0, 1) and levels >= 0")
        bounds = (0.0,) + splits + (1.0,)
        lengths = np.diff(bounds)
        # distribute the uniform panels over segments proportional to length
        counts = np.maximum(1, np.round(panels * lengths).astype(int))
        pieces = []
        for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
            pieces.append(
                graded_edges(
                    lo, hi, int(counts[i]), i > 0, i < len(splits), grading, levels
                )
            )
        edges = np.unique(np.concatenate(pieces))
        x, w = panel_nodes(edges, order)
        return QuadratureRule(
            x,
            w,
            kind,
            {
                "order": order,
                "panels": panels,
                "splits": list(splits),
                "grading": grading,
                "levels": levels,
            },
        )

    if kind == POWER_SUBSTITUTION:
        q = int(params.get("q", 5))
        _validate(order, panels, ())
        if q < 1:
            raise InvalidParams("q must be >= 1")
        # an even panel count puts s = 0 on a panel boundary
        n_panels = panels + panels % 2
        s, ws = panel_nodes(np.linspace(-1.0, 1.0, n_panels + 1), order)
        x = 0.5 + 0.5 * s * np.abs(s) ** (q - 1)
        w = ws * 0.5 * q * np.abs(s) ** (q - 1)
        return QuadratureRule(
            x, w, kind, {"order": order, "panels": n_panels, "q": q}
        )

    raise InvalidParams(f"unknown quadrature kind {kind!r}")


def default_rule() -> QuadratureRule:
    return _default_rule()


@lru_cache(maxsize=1)
def _default_rule() -> QuadratureRule:
    return build_rule(SINGULARITY_SPLIT)


def integrate(rule: QuadratureRule, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sum of ``w_i * g(x_i)``; g must accept the full node array."""
    values = np.asarray(g(rule.nodes), dtype=float)
    if values.shape != rule.nodes.shape:
        values = np.broadcast_to(values, rule.nodes.shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrand("integrand is not finite at every node")
    return float(np.dot(rule.weights, values))


def cell_rule(
    edges: np.ndarray,
    order: int = DEFAULT_ORDER,
    singular_points=(),
    grading: float = DEFAULT_GRADING,
    levels: int = DEFAULT_LEVELS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and owning-cell index for integrating over every cell of
    ``edges``; cells ending on a singular point are graded toward it."""
    edges = np.asarray(edges, dtype=float)
    sub = [edges]
    for s in singular_points:
        j = np.searchsorted(edges, s)
        h = edges[1] - edges[0] if len(edges) > 1 else 1.0
        if j < len(edges) and abs(edges[j] - s) < 1e-14:
            if j > 0:
                h = edges[j] - edges[j - 1]
                sub.append(s - h * grading ** np.arange(1, levels + 1))
            if j < len(edges) - 1:
                h = edges[j + 1] - edges[j]
                sub.append(s + h * grading ** np.arange(1, levels + 1))
        elif 0 < j < len(edges):
            # singular point strictly inside a cell: split and grade both sides
            h = min(s - edges[j - 1], edges[j] - s)
            sub.append(np.array([s]))
            sub.append(s - h * grading ** np.arange(1, levels + 1))
            sub.append(s + h * grading ** np.arange(1, levels + 1))
    fine = np.unique(np.concatenate(sub))
    x, w = panel_nodes(fine, order)
    owner = np.searchsorted(edges, x, side="right") - 1
    return x, w, np.clip(owner, 0, len(edges) - 2)


def cumulative_integral(
    g: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    order: int = DEFAULT_ORDER,
    singular_points=(),
) -> np.ndarray:
    """Values of ``int_0^{edges[i]} g`` at every edge (g may return (r, n))."""
    x, w, owner = cell_rule(edges, order, singular_points)
    vals = np.atleast_2d(np.asarray(g(x), dtype=float))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand("integrand is not finite at every node")
    n_cells = len(edges) - 1
    cells = np.stack(
        [np.bincount(owner, weights=w * row, minlength=n_cells) for row in vals]
    )
    out = np.zeros((vals.shape[0], len(edges)))
    out[:, 1:] = np.cumsum(cells, axis=1)
    return out
