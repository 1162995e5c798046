import numpy as np
import pytest

from logicagg import simgen
from logicagg.tree import tree_stats


@pytest.mark.parametrize("tree_id,stats", [(1, (15, 4, 4)), (2, (42, 4, 11)), (3, (43, 4, 10))])
def test_builtin_tree_stats(tree_id, stats):
    assert tree_stats(simgen.builtin_tree(tree_id)) == stats


def test_tree3_leaf_ranges():
    t = simgen.builtin_tree(3)
    lab = t.labels
    assert sorted(lab[v] for v in t.leaves_under(t.node_id("u9^1"))) == \
        sorted(f"x{i}" for i in range(33, 43))
    assert [lab[v] for v in t.leaves] == [f"x{i}" for i in range(1, 44)]


def test_unknown_tree():
    with pytest.raises(ValueError):
        simgen.builtin_tree(4)


def test_design_prevalence_zero():
    assert not simgen.gen_design(1, 500, 0.0, 0).any()


def test_design_column_means():
    n = 10_000
    X = simgen.gen_design(1, n, 0.1, 7)
    assert X.shape == (n, 15) and X.dtype == np.uint8
    assert np.all(np.abs(X.mean(axis=0) - 0.1) <= 3 * np.sqrt(0.09 / n))


def test_design_seeded():
    assert np.array_equal(simgen.gen_design(2, 50, 0.1, 3), simgen.gen_design(2, 50, 0.1, 3))
    assert not np.array_equal(simgen.gen_design(2, 50, 0.1, 3), simgen.gen_design(2, 50, 0.1, 4))


def test_streams_independent():
    a = simgen.rng(5, simgen.NOISE).standard_normal(10)
    g = simgen.rng(5, simgen.DESIGN)
    g.random(1000)
    assert np.array_equal(a, simgen.rng(5, simgen.NOISE).standard_normal(10))
    assert not np.array_equal(a, simgen.rng(5, simgen.NOISE + simgen.TEST_OFFSET)
                              .standard_normal(10))


def test_regression_sigma_from_snr():
    X0 = simgen.gen_design(1, 400, 0.1, 1)
    y, beta, s2 = simgen.gen_regression(X0, 2.0, seed=1)
    assert s2 == pytest.approx(np.var(simgen.regression_signal(X0)) / 2.0, rel=1e-14)
    assert beta.tolist() == [3.0] * 4 + [0.0] * 4 + [-5.0] + [1.5] * 4 + [0.0] * 2


def test_regression_signal_baseline():
    X0 = np.zeros((3, 15), dtype=np.uint8)
    assert simgen.regression_signal(X0).tolist() == [2.0] * 3
    X0[0, [0, 3]] = 1
    X0[1, 8] = 1
    X0[2, [10, 12]] = 1
    assert simgen.regression_signal(X0).tolist() == [5.0, -3.0, 3.5]


def test_regression_noise_variance():
    X0 = simgen.gen_design(1, 100_000, 0.1, 2)
    y, _, s2 = simgen.gen_regression(X0, 0.5, seed=2)
    assert np.var(y - simgen.regression_signal(X0)) / s2 == pytest.approx(1.0, abs=0.02)


def test_regression_reuses_sigma():
    X0 = simgen.gen_design(1, 50, 0.1, 0)
    _, _, s2 = simgen.gen_regression(X0, 1.0, seed=0, sigma2=0.3)
    assert s2 == 0.3


@pytest.mark.parametrize("abcd,rate", [((1.0, 1.0, 0.0, 0.0), 0.17), ((0.7, 1.0, 0.0, 0.0), 0.30)])
def test_classification_positive_rate(abcd, rate):
    X0 = simgen.gen_design(1, 100_000, 0.1, 0)
    y = simgen.gen_classification(X0, *abcd, seed=0)
    assert y.mean() == pytest.approx(rate, abs=0.02)


def test_classification_null_is_half():
    X0 = simgen.gen_design(3, 7, 0.3, 0)
    eta = simgen.classification_eta(X0, 0, 0, 0, 0, np.ones(7))
    assert np.all(1.0 / (1.0 + np.exp(-eta)) == 0.5)


def test_classification_extra_terms():
    X0 = np.zeros((2, 43), dtype=np.uint8)
    X0[0, 17] = 1
    X0[1, 20] = 1
    eta = simgen.classification_eta(X0, 0.9, 1.0, 1.5, -3.5, np.zeros(2))
    np.testing.assert_allclose(eta, [-4.5 + 1.5, -4.5 + 3.5])
    beta = simgen.classification_truth(43, 0.9, 1.0, 1.5, -3.5)
    assert beta[17] == beta[18] == 1.5 and beta[19] == 3.5


def test_case_control_ratio_eight():
    y = np.zeros(20_000, dtype=np.uint8)
    y[:1107] = 1
    idx = simgen.case_control_subsample(y, 8, seed=0)
    assert y[idx].sum() == 1107
    assert (y[idx] == 0).sum() == 8856
    assert np.all(np.diff(idx) > 0)


def test_case_control_full_when_balanced():
    y = np.array([0, 1] * 30)
    assert simgen.case_control_subsample(y, 1).tolist() == list(range(60))


def test_case_control_insufficient():
    with pytest.raises(ValueError):
        simgen.case_control_subsample(np.array([1, 1, 0]), 2)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        simgen.SimConfig(n=0)
    with pytest.raises(ValueError):
        simgen.SimConfig(snr=-1)
    assert simgen.SimConfig(seed=10, replicate=3).effective_seed == 13
