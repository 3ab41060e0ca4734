"""Command-line entry point: ``gibbs-tree {verify,sweep,sample,plotdata}``.

Exit codes: 0 success, 1 verification failure, 2 admissibility or
precondition failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import construction as cons
from .errors import GibbsTreeError, InvalidOrder, NotAdmissible, StationarityFailure
from .gibbs import marginal_stats, measure_from_eigenfunction, sample_ball
from .quadrature import DEFAULT_ORDER, DEFAULT_PANELS, DEFAULT_SPLITS, SINGULARITY_SPLIT, build_rule

EXIT_OK, EXIT_VERIFY, EXIT_PRECONDITION, EXIT_IO = 0, 1, 2, 3
SEPARATION_SIGMA = 5.0
CURVE_POINTS = 1001


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    command: str
    construction: str | None = None
    k: int | None = None
    n: int | None = None
    n_range: str | None = None
    tol: float = 1e-8
    quad_order: int = DEFAULT_ORDER
    quad_panels: int = DEFAULT_PANELS
    quad_splits: tuple[float, ...] = DEFAULT_SPLITS
    radius: int = 4
    samples: int = 10_000
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    configuration_out: str | None = None

    def validate(self) -> None:
        if self.k is not None and self.k < 2:
            raise CliError(f"--k must be >= 2, got {self.k}", EXIT_PRECONDITION)
        if self.tol <= 0:
            raise CliError("--tol must be positive", EXIT_PRECONDITION)
        if self.n is not None and self.k is not None and self.n <= self.k:
            raise CliError(f"--n must exceed --k ({self.n} <= {self.k})", EXIT_PRECONDITION)
        if self.n_range is not None:
            values = self.n_values()
            if not values:
                raise CliError(f"empty n-range {self.n_range!r}", EXIT_PRECONDITION)
            if self.k is not None and values[0] <= self.k:
                raise CliError(f"n-range entries must exceed k ({values[0]} <= {self.k})", EXIT_PRECONDITION)

    def n_values(self) -> list[int]:
        if self.n_range is None:
            if self.k is None:
                raise CliError("an n-range needs --k", EXIT_PRECONDITION)
            return list(range(self.k + 1, self.k + 31))
        try:
            lo, hi = (int(x) for x in self.n_range.split(".."))
        except ValueError:
            raise CliError(f"bad --n-range {self.n_range!r}; expected a..b", EXIT_PRECONDITION)
        return list(range(lo, hi + 1))

    def rule(self):
        return build_rule(
            SINGULARITY_SPLIT, order=self.quad_order, panels=self.quad_panels, splits=self.quad_splits
        )

    def resolved(self) -> dict:
        d = asdict(self)
        d["quad_splits"] = list(self.quad_splits)
        d["quadrature"] = self.rule().describe()
        return d


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the flags")
    common.add_argument("--construction", choices=["k2", "k3"])
    common.add_argument("--k", type=int)
    common.add_argument("--n", help="an integer n, or a range a..b for sweep and plotdata")
    common.add_argument("--n-range", dest="n_range", help="inclusive range a..b")
    common.add_argument("--tol", type=float)
    common.add_argument("--quad-order", dest="quad_order", type=int)
    common.add_argument("--quad-panels", dest="quad_panels", type=int)
    common.add_argument("--radius", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument(
        "--configuration-out", dest="configuration_out",
        help="also write one sampled configuration (CSV) of the non-trivial measure",
    )
    parser = argparse.ArgumentParser(prog="gibbs-tree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="check both fixed points of a construction")
    sub.add_parser("sweep", parents=[common], help="tabulate xi, alpha, beta, gamma over n")
    sub.add_parser("sample", parents=[common], help="compare the two Gibbs measures by sampling")
    sub.add_parser("plotdata", parents=[common], help="emit plot-ready CSV series")
    return parser


def resolve_config(argv: list[str] | None = None) -> RunConfig:
    """Flags override the JSON config file, which overrides defaults."""
    args = vars(_parser().parse_args(argv))
    merged: dict = {}
    path = args.pop("config")
    if path:
        try:
            with open(path) as fh:
                merged.update(json.load(fh))
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_IO)
        except json.JSONDecodeError as exc:
            raise CliError(f"bad config {path}: {exc}", EXIT_PRECONDITION)
        merged = {k.replace("-", "_"): v for k, v in merged.items()}
    merged.update({k: v for k, v in args.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - known
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}", EXIT_PRECONDITION)
    n = merged.get("n")
    if isinstance(n, str):
        if ".." in n:
            merged["n_range"], merged["n"] = merged.get("n_range") or n, None
        else:
            try:
                merged["n"] = int(n)
            except ValueError:
                raise CliError(f"bad --n {n!r}", EXIT_PRECONDITION)
    if "quad_splits" in merged:
        merged["quad_splits"] = tuple(merged["quad_splits"])
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GIBBS_TREE_THREADS", "1")))
    except ValueError:
        return 1


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _construction(cfg: RunConfig) -> cons.Construction:
    if cfg.construction:
        return cons.builtin_construction(cfg.construction)
    if cfg.k is None or cfg.n is None:
        raise CliError("need --construction or both --k and --n", EXIT_PRECONDITION)
    try:
        return cons.family_construction(cfg.k, cfg.n)
    except (NotAdmissible, InvalidOrder) as exc:
        raise CliError(str(exc), EXIT_PRECONDITION)


def cmd_verify(cfg: RunConfig) -> tuple[int, str]:
    c = _construction(cfg)
    rule = cfg.rule()
    reports = c.verify(rule, cfg.tol)
    passed = all(r.converged for r in reports)
    out = {
        "config": cfg.resolved(),
        "construction": c.name,
        "k": c.k,
        "kernel": c.kernel.describe(),
        "record": c.record.to_dict() if c.record else None,
        "solutions": {name: r.to_dict() for name, r in zip(c.solutions, reports)},
        "max_residual": max(r.final_residual_sup for r in reports),
        "passed": passed,
    }
    return (EXIT_OK if passed else EXIT_VERIFY), _dumps(out)


def cmd_sweep(cfg: RunConfig) -> tuple[int, str]:
    if cfg.k is None:
        raise CliError("sweep needs --k", EXIT_PRECONDITION)
    k = cfg.k
    try:
        rows = cons.sweep(k, cfg.n_values(), workers=_workers())
    except InvalidOrder as exc:
        raise CliError(str(exc), EXIT_PRECONDITION)
    good = [r for r in rows if isinstance(r, cons.ConstructionRecord)]
    failed = [{"n": r.n, "error": str(r)} for r in rows if not isinstance(r, cons.ConstructionRecord)]
    summary = {
        "limit": 12.0 / k,
        "last_n": good[-1].n if good else None,
        "last_gamma": good[-1].gamma if good else None,
        "last_deviation": abs(good[-1].gamma - 12.0 / k) if good else None,
        "admissible_count": sum(r.admissible for r in good),
        "failed_rows": failed,
    }
    if cfg.format == "json":
        text = _dumps({"config": cfg.resolved(), "rows": [r.row() for r in good], "summary": summary})
    else:
        text = (
            "# config: " + json.dumps(cfg.resolved(), sort_keys=True) + "\n"
            + cons.records_to_csv(good)
            + "# summary: " + json.dumps(summary, sort_keys=True) + "\n"
        )
    return EXIT_OK, text


def cmd_sample(cfg: RunConfig) -> tuple[int, str]:
    c = _construction(cfg)
    rule = cfg.rule()
    try:
        handles = {
            name: measure_from_eigenfunction(c.kernel, rule, c.k, sol, tol=max(cfg.tol, 1e-8), label=name)
            for name, sol in c.solutions.items()
        }
    except StationarityFailure as exc:
        raise CliError(f"aborting: {exc}", EXIT_VERIFY)
    stats = {name: marginal_stats(h, cfg.radius, cfg.samples, cfg.seed) for name, h in handles.items()}
    first, second = (stats[name] for name in c.solutions)
    diff = second.root_mean - first.root_mean
    se = math.hypot(first.root_mean_se, second.root_mean_se)
    sigma = abs(diff) / se if se > 0 else math.inf
    third_diff = second.root_third_moment - first.root_third_moment
    third_se = math.hypot(first.root_third_moment_se, second.root_third_moment_se)
    third_sigma = abs(third_diff) / third_se if third_se > 0 else math.inf
    statistic = "root_mean" if sigma >= SEPARATION_SIGMA else "root_third_moment"
    out = {
        "config": cfg.resolved(),
        "construction": c.name,
        "measures": {name: s.to_dict() for name, s in stats.items()},
        "comparison": {
            "root_mean_difference": diff,
            "root_mean_difference_se": se,
            "root_mean_sigma": sigma,
            "root_third_moment_difference": third_diff,
            "root_third_moment_sigma": third_sigma,
            "statistic": statistic,
            "separated": bool(max(sigma, third_sigma) >= SEPARATION_SIGMA),
            "threshold_sigma": SEPARATION_SIGMA,
        },
    }
    if cfg.configuration_out:
        name = list(c.solutions)[1]
        conf = sample_ball(handles[name], cfg.radius, cfg.seed)
        _emit(conf.to_csv(), cfg.configuration_out)
    return EXIT_OK, _dumps(out)


def cmd_plotdata(cfg: RunConfig) -> tuple[int, str]:
    buf = io.StringIO()
    if cfg.construction is None and cfg.k is not None and cfg.n is None:
        buf.write("n,gamma\n")
        for rec in cons.sweep(cfg.k, cfg.n_values(), workers=_workers()):
            if isinstance(rec, cons.ConstructionRecord):
                buf.write(f"{rec.n},{float(rec.gamma)!r}\n")
        return EXIT_OK, buf.getvalue()
    c = _construction(cfg)
    t = np.linspace(0.0, 1.0, CURVE_POINTS)
    names = list(c.solutions)
    cols = [c.solutions[name](t) for name in names]
    buf.write(",".join(["t", *names]) + "\n")
    for i, ti in enumerate(t):
        buf.write(",".join([repr(float(ti))] + [repr(float(col[i])) for col in cols]) + "\n")
    return EXIT_OK, buf.getvalue()


COMMANDS = {"verify": cmd_verify, "sweep": cmd_sweep, "sample": cmd_sample, "plotdata": cmd_plotdata}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = resolve_config(argv)
        code, text = COMMANDS[cfg.command](cfg)
        _emit(text, cfg.out)
        return code
    except CliError as exc:
        print(f"gibbs-tree: {exc}", file=sys.stderr)
        return exc.code
    except GibbsTreeError as exc:
        print(f"gibbs-tree: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
