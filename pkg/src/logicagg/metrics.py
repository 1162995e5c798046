"""Evaluation metrics: prediction error, ranking quality, grouping recovery."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


def _pair(y, s):
    y = np.asarray(y, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    if y.shape != s.shape:
        raise ValueError(f"length mismatch: {y.size} labels, {s.size} scores")
    return y, s


def _binary(y):
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    n1 = int(y.sum())
    if n1 == 0 or n1 == y.size:
        raise ValueError("both classes must be present")
    return n1, y.size - n1


def mse(y, pred) -> float:
    y, pred = _pair(y, pred)
    return float(np.mean((y - pred) ** 2))


def auc(y, scores) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    y, s = _pair(y, scores)
    n1, n0 = _binary(y)
    r = rankdata(s)
    return float((r[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def auprc(y, scores) -> float:
    """Area under the precision-recall curve, step interpolation.

    Sum over distinct score thresholds of ``(R_i - R_{i-1}) * P_i``, the
    same estimator as average precision.
    """
    y, s = _pair(y, scores)
    n1, _ = _binary(y)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    cut = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]  # last index of each tie block
    tp = tp[cut]
    k = cut + 1.0
    precision = tp / k
    recall = tp / n1
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def sens_ppv_at(y, scores, specificity: float | None = None,
                top_fraction: float | None = None) -> tuple[float, float]:
    """Sensitivity and PPV when flagging the highest scores.

    Exactly one operating point is given.  With ``specificity`` the
    threshold is the smallest score that keeps the control specificity at or
    above the target; with ``top_fraction`` it is the score of the
    ``ceil(fraction * n)``-th highest observation.  Ties with the threshold
    are all flagged.
    """
    if (specificity is None) == (top_fraction is None):
        raise ValueError("give exactly one of specificity or top_fraction")
    y, s = _pair(y, scores)
    n1, n0 = _binary(y)
    if specificity is not None:
        if not 0.0 <= specificity <= 1.0:
            raise ValueError("specificity must lie in [0, 1]")
        neg = np.sort(s[y == 0])[::-1]
        allowed = int(np.floor((1.0 - specificity) * n0 + 1e-9))  # false positives tolerated
        # flag scores strictly above the (allowed+1)-th largest control score
        thr = neg[allowed] if allowed < n0 else -np.inf
        flagged = s > thr
    else:
        if not 0.0 < top_fraction <= 1.0:
            raise ValueError("top_fraction must lie in (0, 1]")
        k = int(np.ceil(top_fraction * s.size))
        thr = np.sort(s)[::-1][k - 1]
        flagged = s >= thr
    tp = int(np.sum(flagged & (y == 1)))
    nflag = int(flagged.sum())
    sens = tp / n1
    ppv = tp / nflag if nflag else 0.0
    return float(sens), float(ppv)


def adjusted_ppv(tp: float, fp: float, tn: float, n1: float, n0: float,
                 base_rate: float = 0.005) -> float:
    """PPV re-weighted from a case-control sample to population ``base_rate``.

    ``n* = n1/base_rate - n1 - n0`` extra controls are imagined, each flagged
    at the observed false-positive rate.
    """
    if not 0.0 < base_rate < 1.0:
        raise ValueError("base_rate must lie in (0, 1)")
    if min(tp, fp, tn, n1, n0) < 0:
        raise ValueError("counts must be non-negative")
    n_star = n1 / base_rate - n1 - n0
    fpr = fp / (tn + fp) if tn + fp > 0 else 0.0
    den = tp + fp + fpr * n_star
    if den <= 0:
        raise ValueError("no flagged observations")
    return float(tp / den)


def grouping_fnr_fpr(selected, true_groups, n_groups: int) -> tuple[float, float]:
    """Group-level miss rate among true groups and false-alarm rate among nulls.

    A rate whose denominator is empty is reported as 0.
    """
    sel = set(int(g) for g in selected)
    pos = set(int(g) for g in true_groups)
    if not pos <= set(range(n_groups)) or not sel <= set(range(n_groups)):
        raise ValueError("group ids out of range")
    nulls = n_groups - len(pos)
    fnr = len(pos - sel) / len(pos) if pos else 0.0
    fpr = len(sel - pos) / nulls if nulls else 0.0
    return float(fnr), float(fpr)


@dataclass
class EvalReport:
    n: int
    mse: float | None = None
    auc: float | None = None
    auprc: float | None = None
    sensitivity: float | None = None
    ppv: float | None = None
    operating_point: str | None = None
    adjusted_ppv: float | None = None
    fnr: float | None = None
    fpr: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def evaluate(y, pred, loss: str = "squared", specificity: float | None = 0.9,
             top_fraction: float | None = None, base_rate: float | None = None) -> EvalReport:
    """Report for a fitted mean (squared loss) or fitted probabilities (logistic)."""
    y, pred = _pair(y, pred)
    rep = EvalReport(n=int(y.size), mse=mse(y, pred))
    if loss == "logistic":
        rep.auc = auc(y, pred)
        rep.auprc = auprc(y, pred)
        if top_fraction is not None:
            specificity = None
        rep.sensitivity, rep.ppv = sens_ppv_at(y, pred, specificity, top_fraction)
        rep.operating_point = (f"specificity={specificity}" if specificity is not None
                               else f"top_fraction={top_fraction}")
        if base_rate is not None:
            flagged_tp = rep.sensitivity * y.sum()
            flagged_fp = flagged_tp / rep.ppv - flagged_tp if rep.ppv > 0 else 0.0
            n0 = y.size - y.sum()
            rep.adjusted_ppv = adjusted_ppv(flagged_tp, flagged_fp, n0 - flagged_fp,
                                            y.sum(), n0, base_rate)
    return rep
