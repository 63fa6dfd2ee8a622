import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from arfl import autodiff as ad
from arfl.attacks import AttackSpec, attack_points
from arfl.errors import ConfigError, ContractError
from arfl.losses import (
    ArflConfig,
    bce_loss,
    kl_bernoulli,
    kl_value,
    overall_loss,
    robust_loss,
    trades_objective,
    trades_surrogate,
)
from arfl.model import forward, init_mlp


def sig(v):
    return 1.0 / (1.0 + math.exp(-v))


LN2 = math.log(2.0)


class TestBce:
    @pytest.mark.parametrize("y", [1, -1])
    def test_zero_logit(self, y):
        assert bce_loss(0.0, y).item() == pytest.approx(LN2, abs=1e-15)

    def test_confident_right(self):
        assert bce_loss(20.0, 1).item() == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-12)
        assert bce_loss(20.0, 1).item() == pytest.approx(2.06e-9, rel=1e-3)

    def test_confident_wrong(self):
        assert bce_loss(20.0, -1).item() == pytest.approx(20.0, abs=1e-8)

    def test_matches_probability_form(self):
        for z in (-3.0, -0.2, 0.7, 4.0):
            for y in (1, -1):
                t = (y + 1) / 2
                p = sig(z)
                assert bce_loss(z, y).item() == pytest.approx(-(t * math.log(p) + (1 - t) * math.log(1 - p)), rel=1e-12)

    def test_no_overflow(self):
        assert bce_loss(-800.0, 1).item() == pytest.approx(800.0)

    def test_label_check(self):
        with pytest.raises(ContractError):
            bce_loss(0.0, 0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-60, 60), st.sampled_from([1, -1]))
    def test_sign_symmetry(self, z, y):
        assert bce_loss(z, y).item() == bce_loss(-z, -y).item()


class TestRobust:
    def test_zero_features(self):
        assert robust_loss(np.zeros(10), 1).item() == -0.5

    def test_two_features(self):
        expected = -(sig(1.0) + sig(2.0)) / 2
        assert robust_loss(np.array([1.0, -2.0]), 1).item() == pytest.approx(expected, abs=1e-15)
        assert robust_loss(np.array([1.0, -2.0]), 1).item() == pytest.approx(-0.805928, abs=1e-6)

    def test_label_flip(self):
        f = np.array([1.0, -2.0])
        assert robust_loss(f, -1).item() == robust_loss(f, 1).item()

    def test_batch_rows(self):
        f = np.array([[1.0, -2.0], [0.0, 0.0]])
        np.testing.assert_allclose(robust_loss(f, np.array([1, -1])).values, [-(sig(1) + sig(2)) / 2, -0.5])

    def test_empty(self):
        with pytest.raises(ContractError):
            robust_loss(np.zeros(0), 1)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e6, 1e6)), st.sampled_from([1, -1]))
    def test_range_and_label_independence(self, f, y):
        v = robust_loss(f, y).item()
        assert -1.0 <= v <= -0.5
        assert v == robust_loss(f, -y).item()

    @settings(max_examples=100, deadline=None)
    # features away from the underflow range where sigmoid(|f|) rounds to 0.5
    @given(arrays(np.float64, 6, elements=st.floats(-5, 5).filter(lambda v: v == 0 or abs(v) > 1e-6)), st.floats(1.01, 5.0))
    def test_scaling_up_decreases(self, f, c):
        if np.all(f == 0):
            assert robust_loss(f * c, 1).item() == robust_loss(f, 1).item()
        else:
            assert robust_loss(f * c, 1).item() < robust_loss(f, 1).item()


class TestOverall:
    def test_lambda_zero_is_bce(self):
        f = np.array([0.4, -1.0])
        assert overall_loss(1.3, f, 1, ArflConfig(0.0)).item() == bce_loss(1.3, 1).item()

    def test_closed_forms(self):
        assert overall_loss(0.0, np.zeros(10), 1, ArflConfig(10.0)).item() == pytest.approx(LN2 - 5.0, abs=1e-14)
        assert overall_loss(0.0, np.zeros(10), 1, ArflConfig(10.0)).item() == pytest.approx(-4.306853, abs=1e-6)
        v = overall_loss(0.0, np.array([1.0, -2.0]), 1, ArflConfig(0.5)).item()
        assert v == pytest.approx(LN2 - 0.5 * (sig(1) + sig(2)) / 2, abs=1e-14)
        assert v == pytest.approx(0.290183, abs=1e-6)

    def test_negative_lambda(self):
        with pytest.raises(ConfigError):
            ArflConfig(-0.1)


class TestKl:
    def test_identity(self):
        for p in (1e-9, 0.2, 0.5, 0.99):
            assert kl_value(p, p) == 0.0

    def test_clamped_extreme(self):
        q = 1e-7
        expected = 0.5 * math.log(0.5 / q) + 0.5 * math.log(0.5 / (1 - q))
        assert kl_value(0.5, 1e-7) == pytest.approx(expected, rel=1e-12)
        assert kl_value(0.5, 0.0) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(7.36, abs=0.01)

    def test_gibbs_inequality(self):
        rng = np.random.default_rng(0)
        p, q = rng.uniform(0, 1, 1000), rng.uniform(0, 1, 1000)
        assert np.all(kl_bernoulli(p, q).values >= 0.0)


class TestTrades:
    def setup_method(self):
        self.model = init_mlp((2, 10, 10, 1), 5)
        rng = np.random.default_rng(1)
        self.x = rng.normal(size=(16, 2))
        self.y = rng.choice([1, -1], 16)

    def bce(self):
        return bce_loss(forward(self.model, self.x).logit, self.y).values

    def test_beta_zero_is_bce(self):
        out = trades_objective(self.model, self.x, self.y, 0.0, AttackSpec("pgd", 0.05))
        np.testing.assert_array_equal(out.values, self.bce())

    def test_empty_ball(self):
        out = trades_objective(self.model, self.x, self.y, 6.0, AttackSpec("pgd", 0.0))
        np.testing.assert_array_equal(out.values, self.bce())

    @pytest.mark.parametrize("family", ["fgsm", "pgd"])
    def test_not_below_bce(self, family):
        out = trades_objective(self.model, self.x, self.y, 6.0, AttackSpec(family, 0.1), rng=np.random.default_rng(0))
        assert np.all(out.values >= self.bce())

    def test_attack_increases_kl(self):
        x_adv_rand = self.x + np.random.default_rng(2).uniform(-0.1, 0.1, self.x.shape)
        x_adv = attack_points(self.model, self.x, self.y, AttackSpec("pgd", 0.1), objective="kl", rng=np.random.default_rng(0))
        kl_att = trades_surrogate(self.model, self.x, x_adv, self.y, 1.0).values - self.bce()
        kl_rand = trades_surrogate(self.model, self.x, x_adv_rand, self.y, 1.0).values - self.bce()
        assert kl_att.mean() > kl_rand.mean()
        assert np.max(np.abs(x_adv - self.x)) <= 0.1 + 1e-12

    def test_surrogate_differentiable_in_both_inputs(self):
        xt = ad.Tensor(self.x, True)
        ad.backward(ad.sum(trades_surrogate(self.model, xt, self.x + 0.05, self.y, 6.0)))
        assert np.any(xt.grad != 0)
