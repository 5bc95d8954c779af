import numpy as np
import pytest

from errors import ConfigError, NumericError
from core.optim import AdamW


def test_zero_learning_rate_leaves_parameters_untouched():
    params = {"w": np.arange(4.0)}
    before = params["w"].copy()
    opt = AdamW(lr=0.0, weight_decay=0.5)
    for _ in range(3):
        opt.step(params, {"w": np.ones(4)})
    assert np.array_equal(params["w"], before)
    assert opt.step_count == 3


def test_first_step_moves_by_learning_rate():
    params = {"w": np.zeros(3)}
    AdamW(lr=0.1, weight_decay=0.0).step(params, {"w": np.array([2.0, -5.0, 0.0])})
    # bias-corrected first step is lr * sign(g) up to eps
    assert np.allclose(params["w"], [-0.1, 0.1, 0.0], atol=1e-6)


def test_weight_decay_is_decoupled():
    params = {"w": np.full(2, 10.0)}
    AdamW(lr=0.1, weight_decay=0.5).step(params, {"w": np.zeros(2)})
    assert np.allclose(params["w"], 10.0 - 0.1 * 0.5 * 10.0)


def test_minimizes_a_quadratic():
    params = {"w": np.array([3.0, -2.0])}
    opt = AdamW(lr=0.05, weight_decay=0.0)
    for _ in range(1000):
        opt.step(params, {"w": 2 * params["w"]})
    assert np.abs(params["w"]).max() < 0.1


def test_non_finite_gradient_is_numeric_error():
    with pytest.raises(NumericError, match="w"):
        AdamW().step({"w": np.zeros(2)}, {"w": np.array([0.0, np.nan])})


@pytest.mark.parametrize("kw", [{"lr": -1.0}, {"eps": 0.0}, {"betas": (1.0, 0.9)}, {"weight_decay": -0.1}])
def test_invalid_hyperparameters(kw):
    with pytest.raises(ConfigError):
        AdamW(**kw)
