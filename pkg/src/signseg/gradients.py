"""Analytic gradients for the encoder classifier, and a finite-difference
checker to verify them coordinate by coordinate."""
from __future__ import annotations

import math

import numpy as np

from .keypoints import IsolatedSample
from .model import (
    ModelWeights,
    _classify_internals,
    _encoder_internals,
    _f64,
    cross_entropy,
    dict_to_weights,
    param_shapes,
    weights_to_dict,
)
from .seeding import derive_rng


def _layer_norm_bwd(dy, cache):
    xhat, inv_std, gain = cache
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def backward(sample: IsolatedSample, weights: ModelWeights) -> tuple[dict[str, np.ndarray], float]:
    """Loss and exact gradients of -ln p[label] for one sample.

    Returns ({name: gradient array}, loss) with gradients in the canonical
    parameter order, shapes mirroring the parameters, dtype float64.
    """
    cfg = weights.config
    features, frames64, caches = _encoder_internals(sample.frames, weights)
    probs, flat = _classify_internals(features, weights)
    loss = cross_entropy(probs, sample.label)

    grads: dict[str, np.ndarray] = {}
    # softmax + cross-entropy collapse to p - onehot at the logits
    dlogits = probs.copy()
    dlogits[sample.label] -= 1.0
    grads["head.w"] = np.outer(flat, dlogits)
    grads["head.b"] = dlogits
    dx = (_f64(weights.head_w) @ dlogits).reshape(cfg.window, cfg.d_model)

    sqrt_dk = math.sqrt(cfg.d_k)
    for i in reversed(range(cfg.layers)):
        layer = weights.layers[i]
        c = caches[i]
        p = f"layers.{i}."

        dr2, dg2, db2 = _layer_norm_bwd(dx, c["ln2"])
        grads[p + "ln2.g"], grads[p + "ln2.b"] = dg2, db2
        dy1 = dr2.copy()

        w2 = _f64(layer.ff_w2)
        d_act = dr2 @ w2.T
        grads[p + "ff.w2"] = c["ff_act"].T @ dr2
        grads[p + "ff.b2"] = dr2.sum(axis=0)
        d_pre = d_act * (c["ff_pre"] > 0.0)
        grads[p + "ff.w1"] = c["y1"].T @ d_pre
        grads[p + "ff.b1"] = d_pre.sum(axis=0)
        dy1 += d_pre @ _f64(layer.ff_w1).T

        dr1, dg1, db1 = _layer_norm_bwd(dy1, c["ln1"])
        grads[p + "ln1.g"], grads[p + "ln1.b"] = dg1, db1
        dx = dr1.copy()

        wo = _f64(layer.wo)
        grads[p + "wo"] = c["concat"].T @ dr1
        d_concat = dr1 @ wo.T

        wq, wk, wv = _f64(layer.wq), _f64(layer.wk), _f64(layer.wv)
        dwq = np.empty_like(wq)
        dwk = np.empty_like(wk)
        dwv = np.empty_like(wv)
        x_in = c["x_in"]
        for h in range(cfg.heads):
            q, k, v, a = c["per_head"][h]
            d_head = d_concat[:, h * cfg.d_k : (h + 1) * cfg.d_k]
            da = d_head @ v.T
            dv = a.T @ d_head
            # row-wise softmax jacobian
            ds = a * (da - (da * a).sum(axis=1, keepdims=True))
            dq = ds @ k / sqrt_dk
            dk_ = ds.T @ q / sqrt_dk
            dwq[h] = x_in.T @ dq
            dwk[h] = x_in.T @ dk_
            dwv[h] = x_in.T @ dv
            dx += dq @ wq[h].T + dk_ @ wk[h].T + dv @ wv[h].T
        grads[p + "wq"], grads[p + "wk"], grads[p + "wv"] = dwq, dwk, dwv

    grads["embed.w"] = frames64.T @ dx
    grads["embed.b"] = dx.sum(axis=0)

    ordered = {name: grads[name] for name in param_shapes(cfg)}
    return ordered, loss


def relative_error(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|, 1e-8); 0 when both values vanish."""
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def gradient_check(
    weights: ModelWeights,
    sample: IsolatedSample,
    epsilon: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Sweeps every parameter coordinate, or a seeded subsample of at least
    200 coordinates when max_coords caps the sweep. Finite differences are
    taken in float64 on a private copy of the weights.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    grads, _ = backward(sample, weights)

    params64 = {name: arr.astype(np.float64) for name, arr in weights_to_dict(weights).items()}
    probe = dict_to_weights(params64, weights.config)

    coords = [(name, i) for name, arr in params64.items() for i in range(arr.size)]
    if max_coords is not None and max_coords < len(coords):
        take = max(200, max_coords)
        if take < len(coords):
            picks = derive_rng(seed, "gradient-check").choice(len(coords), size=take, replace=False)
            coords = [coords[i] for i in sorted(picks)]

    def loss_at() -> float:
        features = _encoder_internals(sample.frames, probe)[0]
        probs = _classify_internals(features, probe)[0]
        return cross_entropy(probs, sample.label)

    worst = 0.0
    for name, i in coords:
        flat = params64[name].reshape(-1)
        original = flat[i]
        flat[i] = original + epsilon
        plus = loss_at()
        flat[i] = original - epsilon
        minus = loss_at()
        flat[i] = original
        fd = (plus - minus) / (2.0 * epsilon)
        analytic = float(grads[name].reshape(-1)[i])
        worst = max(worst, relative_error(analytic, fd))
    return worst
