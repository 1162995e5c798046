import math

import numpy as np
import pytest

from conftest import fig2_tree, random_design
from logicagg import simgen
from logicagg.expansion import expand
from logicagg.reparam import build_reparam
from logicagg.solver import SolverConfig, fit
from logicagg.tree import from_nested
from logicagg.tuning import (TuningGrid, cross_validate, lambda_max, lambda_path, make_folds,
                             select_best, working_residual)


def _toy():
    tree = from_nested({"label": "r", "children": [{"label": "x1"}, {"label": "x2"},
                                                   {"label": "x3"}]})
    # one feature per row: every interaction column is empty and dropped
    X0 = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 0]])
    ex, des = expand(tree, X0)
    return ex, des, build_reparam(ex, des.X)


def test_lambda_max_hand_toy():
    ex, des, rmap = _toy()
    assert des.X.shape == (4, 3)
    y = np.array([1.0, 2.0, 3.0, 6.0])
    lam, l1, l2 = lambda_max(des.X, y, rmap, parts=True)
    # r = (-2,-1,0,3); x'r = (1,-1,0); w = (sqrt(1/2), 1/2, 1/2)
    assert l1 == pytest.approx(0.5, rel=1e-14)
    # child group has 3 members, weight sqrt(3/7); root column is all ones so sum(r) = 0
    assert l2 == pytest.approx(math.sqrt(14 / 3) / 4, rel=1e-14)
    assert lam == max(l1, l2)


def test_lambda_max_zero_for_orthogonal_response():
    ex, des, rmap = _toy()
    y = np.full(4, 2.5)  # centred residual vanishes
    assert lambda_max(des.X, y, rmap) == 0.0


@pytest.mark.parametrize("c", [0.1, 3.0, 250.0])
def test_lambda_max_scales_with_response(c):
    tree = fig2_tree()
    X0 = random_design(tree, 40, 1)
    ex, des = expand(tree, X0)
    rmap = build_reparam(ex, des.X)
    y = np.random.default_rng(1).normal(size=40)
    assert lambda_max(des.X, c * y, rmap) == pytest.approx(c * lambda_max(des.X, y, rmap),
                                                           rel=1e-12)


def test_working_residual_logistic_equal_weights_is_centred():
    y = np.array([0, 1, 1, 0, 0, 1, 0], dtype=float)
    np.testing.assert_allclose(working_residual(y, "logistic"), y - y.mean(), atol=1e-15)


def test_lambda_max_zeroes_fit_at_both_alpha_extremes():
    tree = fig2_tree()
    X0 = random_design(tree, 50, 4)
    ex, des = expand(tree, X0)
    rmap = build_reparam(ex, des.X)
    y = np.random.default_rng(4).normal(size=50)
    lam = lambda_max(des.X, y, rmap)
    thr = 1e-3 * np.abs(des.X.T @ y).max() / 50
    for alpha in (0.0, 1.0):
        res = fit(des.X, y, rmap, lam * 1.1, alpha, SolverConfig(tau=1e-5, tol=1e-10,
                                                                 max_iter=10 ** 6))
        assert np.abs(res.gamma).max() <= thr


def test_lambda_path_shape():
    path = lambda_path(2.0, 50, 0.01)
    assert path.size == 50
    assert path[0] == 2.0 and path[-1] == pytest.approx(0.02)
    assert np.all(np.diff(path) < 0)
    assert np.allclose(np.diff(np.log(path)), np.log(0.01) / 49)
    assert lambda_path(0.0).tolist() == [0.0]


@pytest.mark.parametrize("kw", [dict(folds=1), dict(alphas=()), dict(alphas=(1.5,)),
                                dict(lambdas=(0.1, 0.2)), dict(lambdas=(0.2, 0.2)),
                                dict(lambdas=(-1.0,)), dict(metric="auc")])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        TuningGrid(**kw)


def test_folds_balanced_and_seeded():
    y = np.zeros(103)
    f = make_folds(y, 5, seed=3)
    assert sorted(np.bincount(f).tolist()) == [20, 20, 21, 21, 21]
    assert np.array_equal(f, make_folds(y, 5, seed=3))
    assert not np.array_equal(f, make_folds(y, 5, seed=4))


def test_stratified_folds_keep_both_classes():
    y = np.r_[np.ones(12), np.zeros(50)]
    f = make_folds(y, 5, seed=0, stratified=True)
    for k in range(5):
        assert set(y[f == k]) == {0.0, 1.0}


def test_fold_errors():
    with pytest.raises(ValueError):
        make_folds(np.zeros(3), 5)
    with pytest.raises(ValueError):
        make_folds(np.r_[np.ones(3), np.zeros(40)], 5, stratified=True)


def test_select_best_tie_breaks():
    lambdas = np.array([1.0, 0.5, 0.25])
    alphas = np.array([0.0, 1.0])
    mean = np.array([[2.0, 1.0, 1.0], [3.0, 1.0, 5.0]])
    # three minima; larger lambda first, then larger alpha
    assert select_best(mean, alphas, lambdas) == (1, 1)


def _reg_data(seed, n=120):
    X0 = simgen.gen_design(1, n, 0.1, seed)
    y, _, _ = simgen.gen_regression(X0, 2.0, seed)
    return simgen.builtin_tree(1), X0, y


def test_single_point_grid_returns_that_point():
    tree, X0, y = _reg_data(0)
    cv = cross_validate(X0, y, tree, TuningGrid(alphas=(0.25,), lambdas=(0.07,)), seed=0)
    assert (cv.best_alpha, cv.best_lambda) == (0.25, 0.07)
    assert cv.scores.shape == (5, 1, 1)


def test_cv_table_is_finite_and_complete():
    tree, X0, y = _reg_data(1)
    grid = TuningGrid(alphas=(0.0, 1.0), n_lambdas=6, folds=4)
    cv = cross_validate(X0, y, tree, grid, seed=1)
    assert cv.scores.shape == (4, 2, 6)
    assert np.all(np.isfinite(cv.scores))
    table = cv.table()
    assert len(table) == 12 and sum(r["chosen"] for r in table) == 1
    assert all(np.isfinite(r["se_score"]) for r in table)
    assert cv.lambdas[0] == pytest.approx(cv.lambda_max)


def test_row_permutation_leaves_selection_unchanged():
    tree, X0, y = _reg_data(2)
    grid = TuningGrid(alphas=(0.0, 0.5, 1.0), n_lambdas=8)
    folds = make_folds(y, 5, seed=2)
    a = cross_validate(X0, y, tree, grid, folds=folds, refit=False)
    perm = np.random.default_rng(9).permutation(y.size)
    b = cross_validate(X0[perm], y[perm], tree, grid, folds=folds[perm], refit=False)
    assert (a.best_alpha, a.best_lambda) == (b.best_alpha, pytest.approx(b.best_lambda))
    np.testing.assert_allclose(a.mean_scores, b.mean_scores, rtol=1e-6)


def test_cv_is_deterministic_and_threads_agree():
    tree, X0, y = _reg_data(3, n=80)
    grid = TuningGrid(alphas=(0.5,), n_lambdas=5)
    a = cross_validate(X0, y, tree, grid, seed=3)
    b = cross_validate(X0, y, tree, grid, seed=3, threads=3)
    assert np.array_equal(a.scores, b.scores)
    assert np.array_equal(a.fit.gamma, b.fit.gamma)


def test_logistic_cv_uses_deviance():
    X0 = simgen.gen_design(1, 200, 0.1, 5)
    y = simgen.gen_classification(X0, 1, 1, 0, 0, seed=5).astype(float)
    cv = cross_validate(X0, y, simgen.builtin_tree(1), TuningGrid(alphas=(1.0,), n_lambdas=4),
                        SolverConfig(loss="logistic"), seed=5)
    assert cv.metric == "deviance"
    assert np.all(cv.scores > 0)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="min-CV rule lands in the top decile for 27 of 50 "
                   "pure-noise seeds on Tree 1, n = 200; the 80% rate is not reached")
def test_pure_noise_selects_near_lambda_max():
    tree = simgen.builtin_tree(1)
    grid = TuningGrid(alphas=(0.0, 0.5, 1.0), n_lambdas=50)
    top = grid.n_lambdas // 10
    hits = 0
    for s in range(50):
        X0 = simgen.gen_design(tree, 200, 0.1, s)
        y = simgen.rng(s, simgen.NOISE).standard_normal(200)
        cv = cross_validate(X0, y, tree, grid, seed=s, warm_start=True, refit=False)
        hits += int(np.flatnonzero(cv.lambdas == cv.best_lambda)[0]) < top
    assert hits >= 40
