"""Command-line interface.

Exit status: 0 on success, 2 for bad input (arguments, files, data), 3 when
the solver hits a numerical failure.  ``LOGICAGG_OUTPUT_DIR`` and
``LOGICAGG_THREADS`` override the defaults of ``--output-dir`` and
``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__, bench, metrics, selection, simgen
from .expansion import design_for, expand, from_column_spec
from .reparam import build_groups, build_reparam
from .solver import FitResult, SolverConfig, design_product, fit
from .tree import FeatureTree, from_nested, load_tree, to_json, to_nested
from .tuning import DEFAULT_ALPHAS, TuningGrid, cross_validate, lambda_max

log = logging.getLogger("logicagg")

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
MODEL_FORMAT = "logicagg-model/1"


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# io helpers


def _default_threads() -> int:
    env = os.environ.get("LOGICAGG_THREADS")
    if env:
        return int(env)
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def _outdir(args) -> Path:
    d = Path(args.output_dir or os.environ.get("LOGICAGG_OUTPUT_DIR") or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s", path)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as e:
        raise InputError(f"{path}: non-numeric entry ({e})") from None
    if data.size == 0:
        data = data.reshape(0, len(header))
    if data.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    return header, data


def write_csv(path: Path, header: list[str], data: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in data:
            w.writerow([_fmt(x) for x in row])
    log.info("wrote %s", path)


def _fmt(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _load_tree(args) -> FeatureTree:
    if args.tree:
        return load_tree(args.tree)
    return simgen.builtin_tree(args.builtin_tree)


def _load_data(path, tree: FeatureTree, response: str | None, need_response: bool = True):
    header, data = read_csv(path)
    cols = tree.bind_columns(header)
    X0 = data[:, cols]
    y = None
    if response is not None:
        if response not in header:
            if need_response:
                raise InputError(f"response column {response!r} not found in {path}")
        else:
            y = data[:, header.index(response)]
    return X0, y


def _solver_config(args) -> SolverConfig:
    return SolverConfig(tau=args.tau, max_iter=args.max_iter, tol=args.tol, loss=args.loss,
                        w1=args.w1, w0=args.w0)


def _config_dict(args) -> dict:
    skip = {"func", "output_dir", "verbose", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def model_to_dict(res: FitResult, tree: FeatureTree, expanded, lam_max: float,
                  config: dict) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": __version__,
        "tree": json.loads(to_json(tree)),
        "tree_digest": tree.digest(),
        "config": config,
        "config_digest": _digest(config),
        "columns": expanded.column_spec(),
        "node_labels": list(expanded.labels),
        "lambda_max": lam_max,
        **res.to_dict(),
    }


def load_model(path) -> tuple[FitResult, FeatureTree, object, dict]:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("format") != MODEL_FORMAT:
        raise InputError(f"{path}: not a model file")
    tree = from_nested(d["tree"])
    expanded = from_column_spec(tree, d["columns"])
    res = FitResult(mu=d["mu"], gamma=np.asarray(d["gamma"]), beta=np.asarray(d["beta"]),
                    iterations=d["iterations"], smoothed_objective=d["smoothed_objective"],
                    objective=d["objective"], converged=d["converged"], lam=d["lambda"],
                    alpha=d["alpha"], tau=d["tau"], loss=d["loss"])
    return res, tree, expanded, d


def _pattern_outputs(out: Path, res: FitResult, tree: FeatureTree, expanded, rmap,
                     digests: dict) -> dict:
    sel = selection.select_groups(res.gamma, rmap.groups)
    pat = selection.aggregation_pattern(sel, expanded, res.gamma, rmap.groups)
    pd = pat.to_dict(tree) | digests
    _write_json(out / "pattern.json", pd)
    (out / "pattern.dot").write_text(selection.export_dot(tree, pat), encoding="utf-8")
    return pd


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    tree = _load_tree(args)
    X0, y = _load_data(args.data, tree, args.response)
    config = _solver_config(args)
    expanded, design = expand(tree, X0)
    log.info("expanded design: n=%d p=%d (p0=%d, %d derived)",
             design.n, design.p, tree.p0, expanded.n_derived)
    rmap = build_reparam(expanded, design.X)
    Z = design_product(design.X, rmap.A)
    lam_max = lambda_max(design.X, y, rmap, config.loss, (config.w1, config.w0), XA=Z)
    lam = args.lam if args.lam is not None else args.lambda_ratio * lam_max
    res = fit(design.X, y, rmap, lam, args.alpha, config, XA=Z)
    if not res.converged:
        log.warning("solver stopped at max_iter=%d before reaching tol", config.max_iter)
    out = _outdir(args)
    cfg = _config_dict(args)
    model = model_to_dict(res, tree, expanded, lam_max, cfg)
    _write_json(out / "model.json", model)
    _pattern_outputs(out, res, tree, expanded, rmap,
                     {"tree_digest": model["tree_digest"], "config_digest": model["config_digest"]})
    print(json.dumps({"lambda": lam, "lambda_max": lam_max, "alpha": args.alpha,
                      "p": design.p, "iterations": res.iterations,
                      "objective": res.objective, "output_dir": str(out)}))
    return 0


def _grid(args) -> TuningGrid:
    lambdas = tuple(args.lambdas) if args.lambdas else None
    return TuningGrid(alphas=tuple(args.alphas), n_lambdas=args.n_lambdas,
                      lambda_min_ratio=args.lambda_min_ratio, lambdas=lambdas, folds=args.folds)


def cmd_cv(args) -> int:
    tree = _load_tree(args)
    X0, y = _load_data(args.data, tree, args.response)
    config = _solver_config(args)
    cv = cross_validate(X0, y, tree, _grid(args), config, seed=args.seed,
                        threads=args.threads, warm_start=args.warm_start)
    out = _outdir(args)
    cfg = _config_dict(args)
    digests = {"tree_digest": tree.digest(), "config_digest": _digest(cfg)}
    _write_json(out / "cv.json", cv.to_dict() | digests)
    _write_json(out / "model.json", model_to_dict(cv.fit, tree, cv.expanded, cv.lambda_max, cfg))
    _pattern_outputs(out, cv.fit, tree, cv.expanded, cv.rmap, digests)
    print(json.dumps({"best_alpha": cv.best_alpha, "best_lambda": cv.best_lambda,
                      "lambda_max": cv.lambda_max, "output_dir": str(out)}))
    return 0


def cmd_simulate(args) -> int:
    if args.case is not None:
        spec = bench.case_spec(args.kind, args.case)
        tree_id, n = spec.tree_id, spec.n
        snr, abcd = spec.snr, spec.abcd
    else:
        tree_id, n, snr, abcd = args.tree_id, args.n, args.snr, args.abcd
    if args.n_override is not None:
        n = args.n_override
    tree = simgen.builtin_tree(tree_id)
    seed = args.seed + args.replicate
    X0 = simgen.gen_design(tree, n, args.prevalence, seed)
    if not X0.any():
        log.warning("design is all zeros (prevalence %g)", args.prevalence)
    truth = {"kind": args.kind, "tree_id": tree_id, "n": n, "seed": seed,
             "prevalence": args.prevalence}
    if args.kind == "regression":
        y, beta, s2 = simgen.gen_regression(X0, snr, seed)
        truth |= {"snr": snr, "sigma2": s2, "mu": simgen.REGRESSION_MU}
    else:
        if abcd is None:
            raise InputError("classification needs --case or --abcd")
        y = simgen.gen_classification(X0, *abcd, seed=seed).astype(float)
        beta = simgen.classification_truth(tree.p0, *abcd)
        truth |= {"abcd": list(abcd), "positive_rate": float(y.mean())}
    labels = [tree.labels[v] for v in tree.leaves]
    blocks = selection.coarsest_aggregation_set(beta, tree)
    native_gamma = np.zeros(tree.n_nodes)
    col = tree.leaf_col
    for u in blocks:
        native_gamma[u] = beta[col[next(iter(tree.leaves_under(u)))]]
    truth |= {"beta": dict(zip(labels, beta.tolist())),
              "gamma": {tree.labels[u]: float(native_gamma[u]) for u in range(tree.n_nodes)
                        if native_gamma[u] != 0},
              "coarsest_set": [tree.labels[u] for u in blocks],
              "tree": to_nested(tree), "tree_digest": tree.digest(),
              "config_digest": _digest(_config_dict(args))}
    out = _outdir(args)
    write_csv(out / "data.csv", labels + ["y"], np.column_stack([X0, y]))
    _write_json(out / "truth.json", truth)
    (out / "tree.json").write_text(json.dumps(to_nested(tree), indent=2) + "\n", encoding="utf-8")
    print(json.dumps({"n": n, "p0": tree.p0, "output_dir": str(out)}))
    return 0


def cmd_evaluate(args) -> int:
    res, tree, expanded, model = load_model(args.model)
    X0, y = _load_data(args.data, tree, args.response)
    pred = res.predict(design_for(expanded, X0))
    spec = None if args.top_fraction is not None else args.specificity
    rep = metrics.evaluate(y, pred, res.loss, specificity=spec, top_fraction=args.top_fraction,
                           base_rate=args.base_rate)
    d = rep.to_dict() | {"tree_digest": model["tree_digest"],
                         "config_digest": model["config_digest"]}
    out = _outdir(args)
    _write_json(out / "eval.json", d)
    print(json.dumps(d))
    return 0


def _pattern_for_model(res, expanded) -> selection.AggregationPattern:
    groups = build_groups(expanded)
    sel = selection.select_groups(res.gamma, groups)
    return selection.aggregation_pattern(sel, expanded, res.gamma, groups)


def cmd_aggregate(args) -> int:
    if args.model:
        res, tree, expanded, model = load_model(args.model)
        X0, y = _load_data(args.data, tree, args.response, need_response=False)
        pat = _pattern_for_model(res, expanded)
    else:
        if not args.pattern:
            raise InputError("give --model or --pattern")
        tree = _load_tree(args)
        with open(args.pattern, encoding="utf-8") as fh:
            pat = selection.AggregationPattern.from_dict(json.load(fh), tree)
        X0, y = _load_data(args.data, tree, args.response, need_response=False)
    Xa = selection.aggregate_design(X0, pat, tree, keep_dropped=args.keep_dropped)
    names = [tree.labels[b.node] for b in pat.blocks if args.keep_dropped or not b.dropped]
    data = Xa if y is None else np.column_stack([Xa, y])
    header = names + ([args.response] if y is not None else [])
    out = _outdir(args)
    write_csv(out / "aggregated.csv", header, data)
    _write_json(out / "pattern.json", pat.to_dict(tree) | {"tree_digest": tree.digest()})
    print(json.dumps({"blocks": len(pat.blocks), "columns": len(names), "output_dir": str(out)}))
    return 0


def cmd_bench(args) -> int:
    grid = TuningGrid(alphas=tuple(args.alphas), n_lambdas=args.n_lambdas, folds=args.folds)
    res = bench.run_case(args.kind, args.case, args.replicates, args.seed, grid=grid,
                         threads=args.threads, warm_start=not args.cold_start)
    res["config_digest"] = _digest(_config_dict(args))
    res["tree_digest"] = simgen.builtin_tree(res["tree"]).digest()
    out = _outdir(args)
    _write_json(out / "bench.json", res)
    keys = list(res["summary"])
    table = [[k, s["mean"], s["sd"], s["se"]] for k, s in res["summary"].items()]
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "mean", "sd", "se"])
        w.writerows(table)
    print(json.dumps({k: {"mean": res["summary"][k]["mean"], "se": res["summary"][k]["se"]}
                      for k in keys}))
    return 0


def cmd_export_dot(args) -> int:
    tree = _load_tree(args)
    with open(args.pattern, encoding="utf-8") as fh:
        pat = selection.AggregationPattern.from_dict(json.load(fh), tree)
    text = selection.export_dot(tree, pat)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logicagg",
                                description="Tree-guided selection and OR-aggregation of rare "
                                            "binary features.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common_out(sp):
        sp.add_argument("--output-dir", help="output directory (env LOGICAGG_OUTPUT_DIR)")

    def tree_args(sp, required=True):
        g = sp.add_mutually_exclusive_group(required=required)
        g.add_argument("--tree", help="tree file (nested JSON or child<TAB>parent edges)")
        g.add_argument("--builtin-tree", type=int, choices=(1, 2, 3),
                       help="use a built-in simulation tree")

    def solver_args(sp):
        sp.add_argument("--loss", choices=("squared", "logistic"), default="squared")
        sp.add_argument("--tau", type=float, default=1e-3, help="smoothing parameter")
        sp.add_argument("--tol", type=float, default=1e-5)
        sp.add_argument("--max-iter", type=int, default=10_000)
        sp.add_argument("--w1", type=float, default=1.0, help="case weight (logistic)")
        sp.add_argument("--w0", type=float, default=1.0, help="control weight (logistic)")

    def data_args(sp, response_default="y"):
        sp.add_argument("--data", required=True, help="CSV with a header naming the leaves")
        sp.add_argument("--response", default=response_default, help="response column name")

    sp = sub.add_parser("fit", help="fit at one (lambda, alpha)")
    tree_args(sp)
    data_args(sp)
    solver_args(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, help="penalty level")
    g.add_argument("--lambda-ratio", type=float, default=0.1,
                   help="penalty as a fraction of lambda_max (default 0.1)")
    sp.add_argument("--alpha", type=float, default=0.5)
    common_out(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("cv", help="tune (alpha, lambda) by k-fold CV and refit")
    tree_args(sp)
    data_args(sp)
    solver_args(sp)
    sp.add_argument("--alphas", type=_floats, default=list(DEFAULT_ALPHAS))
    sp.add_argument("--lambdas", type=_floats, help="explicit decreasing lambda values")
    sp.add_argument("--n-lambdas", type=int, default=50)
    sp.add_argument("--lambda-min-ratio", type=float, default=0.01)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--warm-start", action="store_true",
                    help="start each fit from the previous lambda's solution")
    sp.add_argument("--threads", type=int, default=_default_threads(),
                    help="concurrent folds (env LOGICAGG_THREADS)")
    common_out(sp)
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("simulate", help="generate a synthetic dataset and its truth")
    sp.add_argument("--kind", choices=("regression", "classification"), default="regression")
    sp.add_argument("--case", type=int, help="preset case (sets tree, n, snr/abcd)")
    sp.add_argument("--tree-id", type=int, choices=(1, 2, 3), default=1)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--n-override", type=int, help="sample size overriding a preset case")
    sp.add_argument("--snr", type=float, default=2.0)
    sp.add_argument("--abcd", type=_floats, help="classification parameters a,b,c,d")
    sp.add_argument("--prevalence", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicate", type=int, default=0)
    common_out(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evaluate", help="score a saved model on new data")
    sp.add_argument("--model", required=True)
    data_args(sp)
    sp.add_argument("--specificity", type=float, default=0.9)
    sp.add_argument("--top-fraction", type=float, help="operating point by top fraction")
    sp.add_argument("--base-rate", type=float, help="population prevalence for adjusted PPV")
    common_out(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("aggregate", help="write the OR-aggregated design")
    sp.add_argument("--model", help="saved model (pattern derived from it)")
    sp.add_argument("--pattern", help="pattern JSON (needs --tree or --builtin-tree)")
    tree_args(sp, required=False)
    data_args(sp)
    sp.add_argument("--keep-dropped", action="store_true")
    common_out(sp)
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("bench", help="replicated simulation benchmark")
    sp.add_argument("--kind", choices=("regression", "classification"), default="regression")
    sp.add_argument("--case", type=int, default=2)
    sp.add_argument("--replicates", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alphas", type=_floats, default=list(DEFAULT_ALPHAS))
    sp.add_argument("--n-lambdas", type=int, default=50)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--cold-start", action="store_true", help="disable warm starts")
    sp.add_argument("--threads", type=int, default=_default_threads())
    common_out(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("export-dot", help="render a pattern JSON as Graphviz DOT")
    tree_args(sp)
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_export_dot)
    return p


def _module_tag(exc: BaseException) -> str:
    tag = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        stem = Path(frame.filename).stem
        if Path(frame.filename).parent.name == "logicagg":
            tag = stem.lstrip("_")
    return tag


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except FloatingPointError as e:
        print(f"error [{_module_tag(e)}]: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error [{_module_tag(e)}]: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
