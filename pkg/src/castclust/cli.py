"""Command-line front end: ``castclust {gen, cluster, grid, dump-z}``.

Every command is deterministic for a given set of flags and ``--seed``.
Records are written as one JSON object per line with a fixed key order.
Exit codes: 0 success, 2 usage / parameter / input errors, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .core import CastError, ParameterError, SolverConfig, symmetrize_abs
from .datasets import (
    LabeledPoints,
    ParseError,
    dump_matrix_image,
    gen_syn1,
    gen_syn2,
    load_csv,
    save_csv,
    syn1_params,
    syn2_params,
)
from .metrics import ami, purity, rand_index
from .similarity import locally_scaled_similarity, pairwise_distances
from .spectral import (
    MethodParams,
    StageError,
    _stage,
    baseline_cluster,
    build_features,
    coefficient_matrix,
    ncuts_on,
)
from .tknn import DEFAULT_K

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

GRID = (0.001, 0.01, 0.1, 1.0, 10.0)
BASELINES = ("ncuts", "njw")
SOLVER_OF = {"rosc": "rosc", "rosc-s": "rosc_s", "cast": "cast"}
METHODS = BASELINES + tuple(SOLVER_OF)
METRICS = ("purity", "ami", "ri")
DEFAULT_ALPHA = 0.1


class UsageError(Exception):
    """Bad flags or unusable input; maps to exit code 2."""


# ---------------------------------------------------------------- helpers

def _load(args) -> LabeledPoints:
    return load_csv(args.input, label_column="none" if args.unlabeled else "last")


def _resolve_k(args, data: LabeledPoints) -> int:
    if args.k is not None:
        return args.k
    if data.truth is None:
        raise UsageError("--k is required for unlabeled input")
    return data.k


def _scores(truth, labels) -> dict:
    if truth is None:
        return {"purity": None, "ami": None, "ri": None}
    return {"purity": purity(truth, labels), "ami": ami(truth, labels), "ri": rand_index(truth, labels)}


def _record(data, method, k, a1, a2, K, seed, p, labels, scores, seconds, converged) -> dict:
    # Key order is part of the output format.
    return {
        "dataset": data.name,
        "method": method,
        "k": k,
        "alpha1": a1,
        "alpha2": a2,
        "K": K,
        "seed": seed,
        "p": p,
        "labels": None if labels is None else [int(v) for v in labels],
        "purity": scores["purity"],
        "ami": scores["ami"],
        "ri": scores["ri"],
        "seconds": seconds,
        "converged": converged,
    }


def _dumps(rec: dict) -> str:
    return json.dumps(rec, allow_nan=False)


def _similarity(args, data):
    D = _stage("distances", pairwise_distances, data.points)
    S = _stage("similarity", locally_scaled_similarity, l=args.l, distances=D)
    return D, S


def _solver_cfg(a1, a2, args) -> SolverConfig:
    return SolverConfig(alpha1=a1, alpha2=a2, max_iters=args.max_iters)


class _Clock:
    """Wall time only when ``--timing`` is given, so default output is byte-stable."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def elapsed(self):
        return round(time.perf_counter() - self.t0, 6) if self.enabled else None


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    make, params = (gen_syn1, syn1_params) if args.kind == "syn1" else (gen_syn2, syn2_params)
    kw = {} if args.target is None else {"target": args.target}
    data = make(params(seed=args.seed, delta_d=args.delta_d, delta_s=args.delta_s, **kw))
    save_csv(data, args.out)
    return EXIT_OK


def _run_method(args, data, D, S, method, k, a1, a2, seed, features=None):
    """One clustering run; returns ``(labels, converged, p)``."""
    if method in BASELINES:
        res = _stage("spectral", baseline_cluster, S, k, method, seed, args.kmeans_runs)
        return res.labels, True, None
    params = MethodParams(k=k, K=args.K, solver=SOLVER_OF[method],
                          solver_cfg=_solver_cfg(a1, a2, args), kmeans_runs=args.kmeans_runs, seed=seed)
    X, W = features if features is not None else build_features(S, data.points, args.K, params.schedule,
                                                                distances=D)
    Z, report = coefficient_matrix(X, W, params.solver, params.solver_cfg)
    labels = ncuts_on(symmetrize_abs(Z), k, args.kmeans_runs, seed)
    return labels, bool(report.converged), X.shape[0]


def cmd_cluster(args) -> int:
    clock = _Clock(args.timing)
    data = _load(args)
    k = _resolve_k(args, data)
    if args.method in BASELINES:
        if args.alpha1 is not None or args.alpha2 is not None:
            print(f"warning: --alpha1/--alpha2 are ignored by {args.method}", file=sys.stderr)
        a1 = a2 = None
    else:
        a1 = DEFAULT_ALPHA if args.alpha1 is None else args.alpha1
        a2 = DEFAULT_ALPHA if args.alpha2 is None else args.alpha2
    D, S = _similarity(args, data)
    labels, converged, p = _run_method(args, data, D, S, args.method, k, a1, a2, args.seed)
    rec = _record(data, args.method, k, a1, a2, args.K, args.seed, p, labels,
                  _scores(data.truth, labels), clock.elapsed(), converged)
    Path(args.out).write_text(_dumps(rec) + "\n")
    return EXIT_OK


def _mean_or_none(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if len(vals) == len(values) and vals else None


def cmd_grid(args) -> int:
    clock = _Clock(args.timing)
    if args.method in BASELINES:
        raise UsageError(f"{args.method} has no alpha parameters to search")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    data = _load(args)
    if data.truth is None:
        raise UsageError("grid search selects by a quality metric and needs labeled input")
    k = _resolve_k(args, data)
    D, S = _similarity(args, data)
    seeds = [args.seed + r for r in range(args.repeats)]
    cells = [(a1, a2) for a1 in GRID for a2 in GRID]  # row-major: alpha1 outer
    # runs[c][r] = (labels, scores, converged); scores is None for a failed cell
    runs = [[None] * len(seeds) for _ in cells]
    p = None
    for r, seed in enumerate(seeds):
        params = MethodParams(k=k, K=args.K, solver=SOLVER_OF[args.method], seed=seed)
        features = build_features(S, data.points, args.K, params.schedule, distances=D)
        p = features[0].shape[0]
        for c, (a1, a2) in enumerate(cells):
            try:
                labels, conv, _ = _run_method(args, data, D, S, args.method, k, a1, a2, seed, features)
            except StageError as exc:
                if isinstance(exc.cause, ParameterError):
                    raise
                print(f"warning: cell alpha1={a1} alpha2={a2} seed={seed} failed in {exc.stage}: {exc.cause}",
                      file=sys.stderr)
                runs[c][r] = (None, None, False)
                continue
            runs[c][r] = (labels, _scores(data.truth, labels), conv)

    records = []
    for c, (a1, a2) in enumerate(cells):
        cell = runs[c]
        ok = all(s is not None for _, s, _ in cell)
        scores = ({m: _mean_or_none([s[m] for _, s, _ in cell]) for m in METRICS} if ok
                  else {m: None for m in METRICS})
        labels = cell[0][0] if ok else None
        converged = ok and all(conv for _, _, conv in cell)
        records.append(_record(data, args.method, k, a1, a2, args.K, args.seed, p, labels, scores, None,
                               converged))

    if args.aggregate == "cell-mean":
        scored = [(i, rec) for i, rec in enumerate(records) if rec[args.select] is not None]
        if not scored:
            raise StageError("grid", CastError("every grid cell failed"))
        # max() keeps the first maximal cell; row-major order makes that the smallest alpha1, then alpha2.
        best_i, best = max(scored, key=lambda ir: ir[1][args.select])
        best = dict(best)
    else:
        # best cell per repeat, then average the winners' metrics
        winners = []
        for r in range(len(seeds)):
            good = [(c, runs[c][r][1]) for c in range(len(cells)) if runs[c][r][1] is not None]
            if not good:
                raise StageError("grid", CastError(f"every grid cell failed for seed {seeds[r]}"))
            winners.append(max(good, key=lambda cs: cs[1][args.select]))
        best = _record(data, args.method, k, None, None, args.K, args.seed, p, None,
                       {m: float(np.mean([s[m] for _, s in winners])) for m in METRICS}, None,
                       all(runs[c][r][2] for r, (c, _) in enumerate(winners)))
    best["seconds"] = clock.elapsed()
    best["selected_by"] = args.select
    best["repeats"] = args.repeats
    best["aggregate"] = args.aggregate

    with Path(args.out).open("w") as fh:
        for rec in records:
            fh.write(_dumps(rec) + "\n")
        fh.write(_dumps(best) + "\n")
    return EXIT_OK


def _stem_paths(out) -> tuple:
    out = Path(out)
    stem = out.with_suffix("") if out.suffix.lower() == ".pgm" else out
    return stem.with_name(stem.name + "_S.pgm"), stem.with_name(stem.name + "_Z.pgm")


def cmd_dump_z(args) -> int:
    if args.method in BASELINES:
        raise UsageError(f"{args.method} builds no coefficient matrix; use rosc, rosc-s or cast")
    data = _load(args)
    if data.truth is None:
        raise UsageError("dump-z orders the images by gold clusters and needs labeled input")
    k = _resolve_k(args, data)
    D, S = _similarity(args, data)
    params = MethodParams(k=k, K=args.K, solver=SOLVER_OF[args.method],
                          solver_cfg=_solver_cfg(args.alpha1, args.alpha2, args), seed=args.seed)
    X, W = build_features(S, data.points, args.K, params.schedule, distances=D)
    Z, _ = coefficient_matrix(X, W, params.solver, params.solver_cfg)
    s_path, z_path = _stem_paths(args.out)
    dump_matrix_image(S, data.truth, s_path)
    dump_matrix_image(symmetrize_abs(Z), data.truth, z_path)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(sp, *, alphas: bool):
    sp.add_argument("input", help="CSV file; last column holds integer labels unless --unlabeled")
    sp.add_argument("--method", required=True, choices=METHODS)
    sp.add_argument("--k", type=int, default=None, help="number of clusters (default: number of gold labels)")
    sp.add_argument("--K", type=int, default=DEFAULT_K, help="neighbours in the mutual-KNN graph")
    sp.add_argument("--l", type=int, default=7, help="neighbour rank used for local scaling")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--kmeans-runs", type=int, default=100)
    sp.add_argument("--max-iters", type=int, default=1000)
    sp.add_argument("--unlabeled", action="store_true", help="input has no label column")
    sp.add_argument("--out", required=True)
    if alphas:
        sp.add_argument("--alpha1", type=float, default=None)
        sp.add_argument("--alpha2", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="castclust", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic multi-scale dataset as CSV")
    g.add_argument("kind", choices=("syn1", "syn2"))
    g.add_argument("--delta-d", type=float, default=0.0, help="relative density change of the target cluster")
    g.add_argument("--delta-s", type=float, default=0.0, help="relative size change of the target cluster")
    g.add_argument("--target", type=int, default=None,
                   help="cluster the deltas apply to (default: the strip for syn1, the ring for syn2)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("cluster", help="cluster a CSV file and write one JSON record")
    _common(c, alphas=True)
    c.add_argument("--timing", action="store_true", help="record wall time (output is then not reproducible)")
    c.set_defaults(func=cmd_cluster)

    gr = sub.add_parser("grid", help="5x5 alpha grid search; 25 records plus the selected one")
    _common(gr, alphas=False)
    gr.add_argument("--select", choices=METRICS, default="purity")
    gr.add_argument("--repeats", type=int, default=1, help="seeds seed..seed+repeats-1 per cell")
    gr.add_argument("--aggregate", choices=("cell-mean", "best-mean"), default="cell-mean",
                    help="average each cell over repeats then select (default), "
                         "or select per repeat then average")
    gr.add_argument("--timing", action="store_true")
    gr.set_defaults(func=cmd_grid)

    d = sub.add_parser("dump-z", help="write S and the coefficient matrix as P5 graymaps")
    _common(d, alphas=True)
    d.set_defaults(func=cmd_dump_z, alpha1=DEFAULT_ALPHA, alpha2=DEFAULT_ALPHA)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParameterError, ParseError, OSError) as exc:
        print(f"castclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        code = EXIT_USAGE if isinstance(exc.cause, ParameterError) else EXIT_NUMERIC
        print(f"castclust: error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return code
    except CastError as exc:
        print(f"castclust: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
