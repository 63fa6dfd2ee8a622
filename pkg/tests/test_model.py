import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arfl.autodiff import Tensor, backward
from arfl.errors import ConfigError, DimensionError
from arfl.model import MlpModel, forward, init_mlp, load_model, logits, predict, save_model


def hand_model(w0, b0, w1, b1, act="tanh"):
    return MlpModel(
        [Tensor([[*w0]], True), Tensor([[w1]], True)],
        [Tensor([b0], True), Tensor([b1], True)],
        act,
        (2, 1, 1),
    )


def test_same_seed_same_parameters():
    a, b = init_mlp((2, 10, 10, 1), 7), init_mlp((2, 10, 10, 1), 7)
    for p, q in zip(a.parameters, b.parameters):
        assert np.array_equal(p.values, q.values)


def test_different_seed_differs():
    a, b = init_mlp((2, 10, 10, 1), 7), init_mlp((2, 10, 10, 1), 8)
    assert not np.array_equal(a.weights[0].values, b.weights[0].values)


def test_parameter_count():
    assert init_mlp((2, 10, 10, 1), 0).num_parameters() == 151


def test_biases_zero_and_glorot_range():
    m = init_mlp((2, 10, 10, 1), 0)
    for b in m.biases:
        assert np.all(b.values == 0.0)
    for W in m.weights:
        fan_out, fan_in = W.shape
        assert np.all(np.abs(W.values) <= math.sqrt(6 / (fan_in + fan_out)))


@pytest.mark.parametrize("sizes", [(), (2,), (2, 10, 2), (2, 0, 1)])
def test_invalid_sizes(sizes):
    with pytest.raises(ConfigError):
        init_mlp(sizes, 0)


@pytest.mark.parametrize("act", ["tanh", "relu"])
def test_zero_network(act):
    m = init_mlp((2, 10, 10, 1), 0, act)
    for p in m.parameters:
        p.values[...] = 0.0
    out = forward(m, np.array([0.3, -1.2]))
    assert out.logit.item() == 0.0
    assert np.all(out.features.values == 0.0)


def test_hand_forward():
    m = hand_model((0.5, -1.0), 0.2, 2.0, -0.3)
    expected = 2.0 * math.tanh(0.5 * 1.0 - 1.0 * 2.0 + 0.2) - 0.3
    out = forward(m, np.array([1.0, 2.0]))
    assert out.logit.item() == pytest.approx(expected, abs=1e-15)
    assert out.features.values == pytest.approx([math.tanh(-1.3)])


def test_default_feature_width():
    out = forward(init_mlp((2, 10, 10, 1), 0), np.zeros((4, 2)))
    assert out.features.shape == (4, 10)
    assert out.logit.shape == (4,)


def test_input_dimension_error():
    with pytest.raises(DimensionError):
        forward(init_mlp((2, 10, 1), 0), np.zeros(3))


def test_forward_differentiable_in_input_and_parameters():
    m = init_mlp((2, 10, 10, 1), 1)
    x = Tensor([0.2, 0.4], True)
    backward(forward(m, x).logit)
    assert np.any(x.grad != 0)
    assert all(np.any(p.grad != 0) for p in m.weights)


def test_forward_pure():
    m = init_mlp((2, 10, 10, 1), 2)
    x = np.array([[0.1, 0.2], [1.0, -0.5]])
    assert np.array_equal(logits(m, x), logits(m, x))


@pytest.mark.parametrize("b1,expected", [(3.2, 1), (-0.1, -1), (0.0, 1)])
def test_predict_threshold(b1, expected):
    m = hand_model((0.0, 0.0), 0.0, 0.0, b1)
    assert predict(m, np.array([0.5, 0.5])) == expected


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_predict_logit_threshold_equals_probability_threshold(px, py):
    m = init_mlp((2, 10, 10, 1), 3)
    z = float(logits(m, np.array([px, py])))
    label = predict(m, np.array([px, py]))
    assert label == (1 if z >= 0 else -1)
    # in floating point sigmoid rounds to exactly 0.5 for tiny negative logits
    if abs(z) > 1e-12:
        assert label == (1 if 1.0 / (1.0 + math.exp(-z)) >= 0.5 else -1)


def test_checkpoint_round_trip(tmp_path):
    m = init_mlp((2, 10, 10, 1), 4)
    rng = np.random.default_rng(0)
    for p in m.parameters:
        p.values[...] = rng.normal(size=p.shape) / 3.0
    save_model(m, tmp_path / "model.txt")
    back = load_model(tmp_path / "model.txt")
    assert back.layer_sizes == m.layer_sizes and back.hidden_activation == "tanh"
    x = rng.normal(size=(50, 2))
    assert np.array_equal(logits(back, x), logits(m, x))
    first = (tmp_path / "model.txt").read_text().splitlines()[1].split()
    assert first[:3] == ["W0", "10", "2"]
