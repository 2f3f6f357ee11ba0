"""Command-line entry point: ``quadsparse <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 solver error.
Results go to stdout; diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import algebra, persistence, simulation
from .errors import (
    ContractError,
    DegenerateDensityError,
    DocumentParseError,
    EmptyDataError,
    GridArgumentError,
    PointsFormatError,
    SolverError,
)
from .fit import FitConfig, fit_density
from .grid import GridSpec, read_points_csv
from .smoother import KdeConfig

log = logging.getLogger("quadsparse")

EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise argparse.ArgumentTypeError(f"expected {count} numbers, got {text!r}")
    return vals


def _ints(text: str, count: int | None = None) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise argparse.ArgumentTypeError(f"expected {count} integers, got {text!r}")
    return vals


def _load(path: str):
    return persistence.load(Path(path).read_text())


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def cmd_fit(args) -> None:
    pts = read_points_csv(args.input)
    if len(pts) == 0:
        raise EmptyDataError(f"{args.input} contains no points")
    spec = GridSpec(args.k, tuple(args.bounds)) if args.bounds else GridSpec.covering(pts, args.k)
    bw = args.bandwidth
    cfg = FitConfig(alpha=args.alpha, delta=args.delta, seed=args.seed, cv_folds=args.folds,
                    n_lambda=args.n_lambda, kde=KdeConfig(bw, bw),
                    refit_holdout=args.refit_holdout)
    d = fit_density(pts, spec, cfg)
    _write(args.out, persistence.save(d))
    m = d.metadata
    print(f"nnz {d.nnz}")
    print(f"lambda_star {m['lambda_star']!r}")
    print(f"cv_error {m['cv_error']!r}")
    print(f"cv_se {m['cv_se']!r}")


def cmd_eval(args) -> None:
    d = _load(args.density)
    if args.x is not None or args.y is not None:
        if args.x is None or args.y is None or args.col is not None or args.row is not None:
            raise UsageError("give either --col/--row or --x/--y")
        value = algebra.eval_xy(d, args.x, args.y)
    else:
        if args.col is None or args.row is None:
            raise UsageError("give either --col/--row or --x/--y")
        value = algebra.eval_point(d, args.col, args.row)
    print(repr(value))


def cmd_query(args) -> None:
    d = _load(args.density)
    print(repr(algebra.region_sum(d, args.rect)))


def cmd_union(args) -> None:
    if len(args.densities) < 1:
        raise UsageError("union needs at least one density")
    if args.prior:
        if len(args.prior) != len(args.densities):
            raise UsageError(f"{len(args.prior)} priors for {len(args.densities)} densities")
        priors = args.prior
    else:
        log.warning("no --prior given; weighting the %d densities equally", len(args.densities))
        priors = [1.0 / len(args.densities)] * len(args.densities)
    ds = [_load(p) for p in args.densities]
    u = algebra.union(list(zip(ds, priors)), delta=args.delta)
    _write(args.out, persistence.save(u))
    print(f"nnz {u.nnz}")


def cmd_intersect(args) -> None:
    a, b = _load(args.a), _load(args.b)
    c = algebra.intersect(a, b, delta=args.delta)
    _write(args.out, persistence.save(c))
    print(f"nnz {c.nnz}")


def cmd_export(args) -> None:
    d = _load(args.density)
    if args.grid:
        _write(args.grid, persistence.export_grid(d))
    else:
        _write(args.tiles, persistence.export_tiles(d))


def cmd_simulate(args) -> None:
    try:
        fixture = simulation.FIXTURES[args.fixture]
    except KeyError:
        raise UsageError(f"unknown fixture {args.fixture!r}; choose from {sorted(simulation.FIXTURES)}") from None
    cfg = FitConfig(delta=args.delta, seed=args.seed)
    rows = simulation.run_experiment(fixture, args.k_list, args.alpha_list, cfg, n=args.n,
                                     sample_seed=args.sample_seed, jobs=args.jobs)
    table = simulation.format_table(rows)
    if args.out:
        _write(args.out, table)
    else:
        sys.stdout.write(table)
    for k, a in simulation.alpha_heuristic(rows).items():
        log.info("k=%d: largest model at alpha=%g", k, a)


def cmd_info(args) -> None:
    d = _load(args.density)
    print(f"k {d.k}")
    print("bounds " + " ".join(repr(b) for b in d.spec.bounds))
    print(f"nnz {d.nnz}")
    for key in persistence.META_KEYS:
        print(f"{key} {d.metadata.get(key)!r}")
    print(f"unique_values {len(algebra.unique_values(d))}")
    print(f"mass {d.total()!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quadsparse", description="Fit, query and combine sparse quadtree densities.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a sparse density to a CSV of points")
    f.add_argument("--input", required=True, help="CSV with x,y or lon,lat columns")
    f.add_argument("--k", type=int, default=5, help="grid depth (2^k cells per side)")
    f.add_argument("--alpha", type=float, default=0.5)
    f.add_argument("--delta", type=float, default=0.001)
    f.add_argument("--bandwidth", type=float, help="KDE bandwidth in cells (default: Silverman)")
    f.add_argument("--bounds", type=lambda s: _floats(s, 4), help="x_min,x_max,y_min,y_max")
    f.add_argument("--seed", type=int, default=0, help="CV fold seed")
    f.add_argument("--folds", type=int, default=5)
    f.add_argument("--n-lambda", type=int, default=100)
    f.add_argument("--refit-holdout", type=float, default=0.0,
                   help="fraction of points held out for the NNLS refit")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="density value at one cell or point")
    e.add_argument("--density", required=True)
    e.add_argument("--col", type=int)
    e.add_argument("--row", type=int)
    e.add_argument("--x", type=float)
    e.add_argument("--y", type=float)
    e.set_defaults(func=cmd_eval)

    q = sub.add_parser("query", help="probability mass of a cell rectangle")
    q.add_argument("--density", required=True)
    q.add_argument("--rect", required=True, type=lambda s: _ints(s, 4), help="c0,c1,r0,r1 inclusive")
    q.set_defaults(func=cmd_query)

    u = sub.add_parser("union", help="prior-weighted union of densities",
                       usage="quadsparse union --out OUT [--delta D] [--prior P] DENSITY [[--prior P] DENSITY ...]")
    u.add_argument("--out", required=True)
    u.add_argument("--prior", type=float, action="append", help="prior of the density that follows")
    u.add_argument("--delta", type=float, default=0.001)
    u.set_defaults(func=cmd_union)

    i = sub.add_parser("intersect", help="normalized product of two densities")
    i.add_argument("--out", required=True)
    i.add_argument("--delta", type=float, default=0.001)
    i.add_argument("a")
    i.add_argument("b")
    i.set_defaults(func=cmd_intersect)

    x = sub.add_parser("export", help="export cell values or tile polygons")
    x.add_argument("--density", required=True)
    g = x.add_mutually_exclusive_group(required=True)
    g.add_argument("--grid", help="CSV path for col,row,value")
    g.add_argument("--tiles", help="GeoJSON path for tile polygons")
    x.set_defaults(func=cmd_export)

    s = sub.add_parser("simulate", help="Gaussian-mixture experiment over k and alpha")
    s.add_argument("--fixture", default="gmm6")
    s.add_argument("--n", type=int, default=200_000)
    s.add_argument("--k-list", type=_ints, default=[3, 4, 5, 6, 7])
    s.add_argument("--alpha-list", type=_floats, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    s.add_argument("--delta", type=float, default=0.001)
    s.add_argument("--seed", type=int, default=0, help="CV fold seed")
    s.add_argument("--sample-seed", type=int, default=None, help="defaults to the fixture's seed")
    s.add_argument("--jobs", type=int, default=simulation.default_jobs(),
                   help="worker processes (default: $QUADSPARSE_JOBS or 1)")
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_simulate)

    n = sub.add_parser("info", help="summary of a density document")
    n.add_argument("--density", required=True)
    n.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if args.command == "union":
        # density paths interleave with --prior flags, which argparse cannot pair up
        bad = [e for e in extra if e.startswith("-")]
        if bad:
            parser.error(f"unrecognized arguments: {' '.join(bad)}")
        args.densities = extra
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (UsageError, GridArgumentError, ContractError) as exc:
        print(f"quadsparse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DocumentParseError, PointsFormatError, EmptyDataError, DegenerateDensityError,
            OSError) as exc:
        print(f"quadsparse: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"quadsparse: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
