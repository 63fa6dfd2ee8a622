import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from arfl import autodiff as ad
from arfl.attacks import AttackSpec
from arfl.autodiff import Tensor, finite_diff_grad
from arfl.datasets import Dataset, make_moons
from arfl.errors import ConfigError, ContractError, UndefinedMetricError
from arfl.evaluation import (
    accuracy,
    adversarial_accuracy,
    auc,
    decision_boundary_grid,
    evaluate,
    mann_whitney_u,
    saliency,
    write_grid_csv,
    write_saliency_csv,
)
from arfl.losses import bce_objective
from arfl.model import MlpModel, init_mlp


def linear_model(w, b):
    return MlpModel([Tensor([list(w)], True)], [Tensor([b], True)], "tanh", (len(w), 1))


class TestAccuracy:
    def test_perfect_and_inverted(self):
        m = linear_model((1.0, 0.0), 0.0)
        d = Dataset(np.array([[1.0, 0.0], [-1.0, 0.0], [2.0, 5.0]]), np.array([1, -1, 1]))
        assert accuracy(m, d) == 1.0
        assert accuracy(linear_model((-1.0, 0.0), 0.0), d) == 0.0

    def test_zero_budget_equals_clean(self):
        m = init_mlp((2, 10, 10, 1), 0)
        d = make_moons(200, 0.2, 1)
        for family in ("fgsm", "pgd"):
            assert adversarial_accuracy(m, d, AttackSpec(family, 0.0)) == accuracy(m, d)

    def test_attack_cannot_help_linear_model(self):
        m = linear_model((1.0, -0.5), 0.1)
        d = make_moons(300, 0.2, 2)
        assert adversarial_accuracy(m, d, AttackSpec("fgsm", 0.2)) <= accuracy(m, d)

    def test_evaluate_report(self):
        m = init_mlp((2, 10, 10, 1), 0)
        d = make_moons(100, 0.2, 0)
        rep = evaluate(m, d, AttackSpec("fgsm", 0.1))
        assert rep.mean_metric == pytest.approx((rep.standard_metric + rep.adversarial_metric) / 2)
        with pytest.raises(ConfigError):
            evaluate(m, d, AttackSpec(), metric="f1")


def brute_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l != 1]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_examples(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, -1, -1]) == 1.0
        assert auc([0.5, 0.5, 0.5, 0.5], [1, -1, 1, -1]) == 0.5
        assert auc([0.9, 0.3, 0.5, 0.1], [1, 1, -1, -1]) == 0.75

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.1, 0.2], [1, 1])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(-5, 5), st.sampled_from([1, -1])), min_size=2, max_size=40))
    def test_matches_pairwise_count(self, pairs):
        scores, labels = zip(*pairs)
        if len(set(labels)) < 2:
            return
        assert abs(auc(scores, labels) - brute_auc(scores, labels)) < 1e-12

    def test_monotone_invariance(self):
        rng = np.random.default_rng(0)
        s, y = rng.normal(size=200), rng.choice([1, -1], 200)
        assert auc(s, y) == auc(np.exp(3 * s) + 1, y)

    def test_evaluate_auc(self):
        m = init_mlp((2, 10, 10, 1), 0)
        rep = evaluate(m, make_moons(100, 0.2, 0), AttackSpec("fgsm", 0.1), metric="auc")
        assert 0.0 <= rep.adversarial_metric <= 1.0


class TestMannWhitney:
    def test_disjoint_five(self):
        u, p = mann_whitney_u([6, 7, 8, 9, 10], [1, 2, 3, 4, 5])
        assert u == 25.0
        assert p == pytest.approx(0.0122, abs=5e-4)

    def test_identical(self):
        u, p = mann_whitney_u([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert u == 4.5 and p == pytest.approx(1.0)

    def test_all_tied(self):
        assert mann_whitney_u([2.0, 2.0], [2.0, 2.0, 2.0]) == (3.0, 1.0)

    def test_empty(self):
        with pytest.raises(ContractError):
            mann_whitney_u([], [1.0])

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.integers(0, 8), min_size=1, max_size=15),
        st.lists(st.integers(0, 8), min_size=1, max_size=15),
    )
    def test_against_pair_count_and_scipy(self, a, b):
        u, p = mann_whitney_u(a, b)
        brute = sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)
        assert u == brute
        assert u + mann_whitney_u(b, a)[0] == len(a) * len(b)
        if len(set(a + b)) > 1:
            ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
            assert u == ref.statistic
            assert p == pytest.approx(min(1.0, ref.pvalue), rel=1e-9, abs=1e-12)


class TestGrid:
    def test_linear_boundary(self):
        m = linear_model((1.0, 0.0), -0.5)
        g = decision_boundary_grid(m, (0.0, 1.0, 0.0, 1.0), (3, 2))
        np.testing.assert_array_equal(g.xs, [0.0, 0.5, 1.0])
        expected = [1 / (1 + math.exp(0.5)), 0.5, 1 / (1 + math.exp(-0.5))]
        for row in g.probs:
            np.testing.assert_allclose(row, expected, rtol=1e-15)

    def test_zero_network_flat(self):
        m = init_mlp((2, 10, 10, 1), 0)
        for p in m.parameters:
            p.values[...] = 0.0
        g = decision_boundary_grid(m, resolution=(5, 4))
        assert g.probs.shape == (4, 5) and np.all(g.probs == 0.5)

    @pytest.mark.parametrize("bounds,res", [((1.0, 1.0, 0.0, 1.0), (5, 5)), ((0.0, 1.0, 2.0, 1.0), (5, 5)), ((0, 1, 0, 1), (1, 5))])
    def test_invalid(self, bounds, res):
        with pytest.raises(ConfigError):
            decision_boundary_grid(init_mlp((2, 1), 0), bounds, res)

    def test_csv(self, tmp_path):
        g = decision_boundary_grid(linear_model((1.0, 0.0), -0.5), (0.0, 1.0, 0.0, 1.0), (3, 2))
        write_grid_csv(g, tmp_path / "g.csv")
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert lines[0] == "x,y,prob" and len(lines) == 7
        assert lines[2] == "0.500000,0.000000,0.500000"


class TestSaliency:
    def test_linear_model_closed_form(self):
        w = np.array([2.0, -1.0])
        m = linear_model(w, 0.0)
        x = np.array([0.3, 0.4])
        z = w @ x
        smap = saliency(m, x, 1)
        # d/dx softplus(-z) = -sigmoid(-z) * w
        np.testing.assert_allclose(smap.grad, -w / (1 + math.exp(z)), rtol=1e-14)
        np.testing.assert_array_equal(smap.scaled, [1.0, 0.0] if smap.grad[0] > smap.grad[1] else [0.0, 1.0])

    def test_finite_difference(self):
        m = init_mlp((2, 10, 10, 1), 3)
        x = np.array([0.5, -0.2])
        smap = saliency(m, x, -1)
        num = finite_diff_grad(lambda v: bce_objective(m, ad.tensor(v), -1).item(), x)
        np.testing.assert_allclose(smap.grad, num, rtol=1e-6)
        assert smap.scaled.min() == 0.0 and smap.scaled.max() == 1.0

    def test_constant_gradient(self):
        m = linear_model((1.0, 1.0), 0.0)
        smap = saliency(m, np.array([0.1, 0.1]), 1)
        assert smap.constant and np.all(smap.scaled == 0.5)

    def test_csv(self, tmp_path):
        smap = saliency(linear_model((2.0, -1.0), 0.0), np.array([0.0, 0.0]), 1)
        write_saliency_csv(smap, tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines() == [
            "dim,grad,scaled",
            "0,-1.000000,0.000000",
            "1,0.500000,1.000000",
        ]
