"""Replicated simulation benchmarks (regression and classification cases)."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics, selection, simgen
from .expansion import design_for
from .solver import SolverConfig
from .tuning import TuningGrid, cross_validate

log = logging.getLogger(__name__)

REGRESSION_TEST_N = 200
CLASSIFICATION_TEST_N = 1000


@dataclass(frozen=True)
class CaseSpec:
    kind: str  # "regression" | "classification"
    case: int
    tree_id: int
    n: int
    test_n: int
    snr: float | None = None
    abcd: tuple[float, float, float, float] | None = None

    @property
    def name(self) -> str:
        return f"{self.kind}-{self.case}"


def case_spec(kind: str, case: int) -> CaseSpec:
    if kind == "regression":
        if case not in simgen.REGRESSION_CASES:
            raise ValueError(f"unknown regression case {case}")
        tree_id, snr, n = simgen.REGRESSION_CASES[case]
        return CaseSpec(kind, case, tree_id, n, REGRESSION_TEST_N, snr=snr)
    if kind == "classification":
        if case not in simgen.CLASSIFICATION_CASES:
            raise ValueError(f"unknown classification case {case}")
        tree_id, abcd, n = simgen.CLASSIFICATION_CASES[case]
        return CaseSpec(kind, case, tree_id, n, CLASSIFICATION_TEST_N, abcd=abcd)
    raise ValueError("kind must be 'regression' or 'classification'")


def _draw(spec: CaseSpec, seed: int, test: bool, sigma2: float | None = None):
    off = simgen.TEST_OFFSET if test else 0
    n = spec.test_n if test else spec.n
    X0 = simgen.gen_design(spec.tree_id, n, 0.1, seed, simgen.DESIGN + off)
    if spec.kind == "regression":
        y, _, s2 = simgen.gen_regression(X0, spec.snr, seed, sigma2=sigma2,
                                         stream=simgen.NOISE + off)
        return X0, y.astype(float), s2
    y = simgen.gen_classification(X0, *spec.abcd, seed=seed, stream=simgen.LATENT + off)
    return X0, y.astype(float), None


def run_replicate(spec: CaseSpec, seed: int, grid: TuningGrid | None = None,
                  config: SolverConfig | None = None, warm_start: bool = True) -> dict:
    """One replicate: simulate, tune by CV, refit, score on a fresh test set."""
    t0 = time.perf_counter()
    tree = simgen.builtin_tree(spec.tree_id)
    X0, y, s2 = _draw(spec, seed, test=False)
    logistic = spec.kind == "classification"
    if config is None:
        config = SolverConfig(loss="logistic" if logistic else "squared")
    if logistic and np.unique(y).size < 2:
        raise ValueError(f"replicate seed {seed}: training outcome has a single class")
    cv = cross_validate(X0, y, tree, grid, config, seed=seed, warm_start=warm_start)
    res = cv.fit
    Xt0, yt, _ = _draw(spec, seed, test=True, sigma2=s2)
    Xt = design_for(cv.expanded, Xt0)
    pred = res.predict(Xt)
    groups = cv.rmap.groups
    selected = selection.select_groups(res.gamma, groups)
    out = {"seed": seed, "alpha": cv.best_alpha, "lambda": cv.best_lambda,
           "selected_groups": selected}
    if logistic:
        out["auc"] = metrics.auc(yt, pred)
        out["auprc"] = metrics.auprc(yt, pred)
        for spec_level in (0.9, 0.95):
            sens, ppv = metrics.sens_ppv_at(yt, pred, specificity=spec_level)
            out[f"sens@{spec_level}"] = sens
            out[f"ppv@{spec_level}"] = ppv
        out["positive_rate"] = float(y.mean())
    else:
        out["mse"] = metrics.mse(yt, pred)
        beta = simgen.regression_truth(tree.p0)
        g_true = selection.true_groups(selection.truth_gamma(cv.expanded, beta), groups)
        out["fnr"], out["fpr"] = metrics.grouping_fnr_fpr(selected, g_true, len(groups))
    out["seconds"] = time.perf_counter() - t0
    return out


def summarize(rows: list[dict]) -> dict:
    """Mean, sd and standard error of every numeric column."""
    keys = [k for k, v in rows[0].items()
            if isinstance(v, (int, float)) and not isinstance(v, bool) and k != "seed"]
    out = {}
    for k in keys:
        x = np.array([r[k] for r in rows], dtype=float)
        sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
        out[k] = {"mean": float(x.mean()), "sd": sd, "se": sd / math.sqrt(x.size)}
    return out


def run_case(kind: str, case: int, replicates: int, base_seed: int = 0,
             grid: TuningGrid | None = None, config: SolverConfig | None = None,
             threads: int = 1, warm_start: bool = True) -> dict:
    """Run ``replicates`` independent replicates (seed ``base_seed + r``)."""
    if replicates < 1:
        raise ValueError("need at least one replicate")
    spec = case_spec(kind, case)
    seeds = [base_seed + r for r in range(replicates)]

    def one(s):
        row = run_replicate(spec, s, grid, config, warm_start)
        log.info("%s seed %d done in %.1fs", spec.name, s, row["seconds"])
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, seeds))
    else:
        rows = [one(s) for s in seeds]
    return {"case": spec.name, "tree": spec.tree_id, "n": spec.n, "test_n": spec.test_n,
            "replicates": replicates, "base_seed": base_seed,
            "summary": summarize(rows), "rows": rows}
