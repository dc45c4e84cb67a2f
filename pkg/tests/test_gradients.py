import numpy as np
import pytest

from signseg import (
    IsolatedSample,
    ModelConfig,
    backward,
    cross_entropy,
    forward_probs,
    gradient_check,
    init_weights,
    relative_error,
)
from signseg.model import param_shapes, weights_to_dict
from signseg.seeding import derive_rng, derive_seed


def test_gradient_shapes_mirror_parameters(tiny_mcfg, tiny_weights, tiny_sample):
    grads, loss = backward(tiny_sample, tiny_weights)
    shapes = param_shapes(tiny_mcfg)
    assert list(grads) == list(shapes)
    for key, g in grads.items():
        assert g.shape == shapes[key]
        assert np.isfinite(g).all()
    assert loss > 0.0


def test_backward_deterministic(tiny_weights, tiny_sample):
    a, loss_a = backward(tiny_sample, tiny_weights)
    b, loss_b = backward(tiny_sample, tiny_weights)
    assert loss_a == loss_b
    for key in a:
        assert np.array_equal(a[key], b[key])


def test_backward_loss_matches_forward(tiny_weights, tiny_sample):
    _, loss = backward(tiny_sample, tiny_weights)
    probs = forward_probs(tiny_weights, tiny_sample.frames)
    np.testing.assert_allclose(loss, cross_entropy(probs, tiny_sample.label), atol=1e-12)


def test_head_gradient_closed_form():
    """With zero layers the head gradient is outer(flattened features, p - onehot)."""
    cfg = ModelConfig(layers=0, heads=1, d_model=4, d_ff=4, window=3, input_dim=4, classes=3)
    weights = init_weights(cfg, derive_seed(1, "init"))
    rng = derive_rng(1, "head-grad")
    sample = IsolatedSample(rng.normal(size=(3, 4)), label=2)
    grads, _ = backward(sample, weights)

    from signseg.model import encoder_forward

    flat = encoder_forward(sample.frames, weights).reshape(-1)
    p = forward_probs(weights, sample.frames)
    dlogits = p.copy()
    dlogits[2] -= 1.0
    np.testing.assert_allclose(grads["head.w"], np.outer(flat, dlogits), atol=1e-12)
    np.testing.assert_allclose(grads["head.b"], dlogits, atol=1e-12)


def test_full_sweep_matches_finite_differences(tiny_mcfg, tiny_weights, tiny_sample):
    err = gradient_check(tiny_weights, tiny_sample, epsilon=1e-4)
    assert err < 1e-4


def test_gradient_check_many_labels(tiny_mcfg, tiny_weights):
    # every class as target, subsampled coordinates for speed
    rng = derive_rng(2, "labels")
    for label in range(tiny_mcfg.classes):
        sample = IsolatedSample(rng.normal(size=(tiny_mcfg.window, tiny_mcfg.input_dim)), label)
        err = gradient_check(tiny_weights, sample, epsilon=1e-4, max_coords=250, seed=label)
        assert err < 1e-4


def test_gradient_check_returns_finite_nonnegative(tiny_weights, tiny_sample):
    err = gradient_check(tiny_weights, tiny_sample, epsilon=1e-4, max_coords=200)
    assert np.isfinite(err)
    assert err >= 0.0


def test_relative_error_guard():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1.0, 1.0) == 0.0
    np.testing.assert_allclose(relative_error(1.0, 2.0), 0.5)


def test_epsilon_must_be_positive(tiny_weights, tiny_sample):
    with pytest.raises(ValueError):
        gradient_check(tiny_weights, tiny_sample, epsilon=0.0)
