"""Transformer encoder classifier over fixed-length feature windows.

Forward pipeline: affine embedding of the per-frame features plus additive
sinusoidal position codes, a stack of post-norm encoder layers (multi-head
scaled dot-product self-attention, then a two-layer ReLU feed-forward
block, each wrapped in residual + layer norm), and one fully connected
softmax head over the concatenation of all frame features.

Parameters are stored as float32, the precision of the weights file; all
math upcasts to float64 so analytic gradients agree with central finite
differences to tight tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .seeding import derive_rng

LN_EPS = 1e-5
PE_BASE = 10000.0
PROB_CLAMP = 1e-12

_DIM_FIELDS = ("heads", "d_model", "d_ff", "window", "input_dim", "classes")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; immutable and validated on creation."""

    layers: int
    heads: int
    d_model: int
    d_ff: int
    window: int
    input_dim: int
    classes: int

    def __post_init__(self):
        for name in ("layers",) + _DIM_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.layers < 0:
            raise ConfigError(f"layers must be >= 0, got {self.layers}")
        for name in _DIM_FIELDS:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_model % 2 != 0:
            raise ConfigError(f"d_model must be even for sinusoidal position codes, got {self.d_model}")
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} is not divisible by heads {self.heads}")

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads


@dataclass
class LayerWeights:
    """One encoder layer; attention projections carry no biases."""

    wq: np.ndarray  # (heads, d_model, d_k)
    wk: np.ndarray  # (heads, d_model, d_k)
    wv: np.ndarray  # (heads, d_model, d_k)
    wo: np.ndarray  # (d_model, d_model)
    ff_w1: np.ndarray  # (d_model, d_ff)
    ff_b1: np.ndarray  # (d_ff,)
    ff_w2: np.ndarray  # (d_ff, d_model)
    ff_b2: np.ndarray  # (d_model,)
    ln1_g: np.ndarray  # (d_model,)
    ln1_b: np.ndarray  # (d_model,)
    ln2_g: np.ndarray  # (d_model,)
    ln2_b: np.ndarray  # (d_model,)


@dataclass
class ModelWeights:
    """All parameters plus the config that shaped them."""

    config: ModelConfig
    embed_w: np.ndarray  # (input_dim, d_model)
    embed_b: np.ndarray  # (d_model,)
    layers: list[LayerWeights]
    head_w: np.ndarray  # (window * d_model, classes)
    head_b: np.ndarray  # (classes,)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter order and shapes; also the weights-file layout."""
    shapes: dict[str, tuple[int, ...]] = {
        "embed.w": (config.input_dim, config.d_model),
        "embed.b": (config.d_model,),
    }
    for i in range(config.layers):
        p = f"layers.{i}."
        shapes[p + "wq"] = (config.heads, config.d_model, config.d_k)
        shapes[p + "wk"] = (config.heads, config.d_model, config.d_k)
        shapes[p + "wv"] = (config.heads, config.d_model, config.d_k)
        shapes[p + "wo"] = (config.d_model, config.d_model)
        shapes[p + "ff.w1"] = (config.d_model, config.d_ff)
        shapes[p + "ff.b1"] = (config.d_ff,)
        shapes[p + "ff.w2"] = (config.d_ff, config.d_model)
        shapes[p + "ff.b2"] = (config.d_model,)
        shapes[p + "ln1.g"] = (config.d_model,)
        shapes[p + "ln1.b"] = (config.d_model,)
        shapes[p + "ln2.g"] = (config.d_model,)
        shapes[p + "ln2.b"] = (config.d_model,)
    shapes["head.w"] = (config.window * config.d_model, config.classes)
    shapes["head.b"] = (config.classes,)
    return shapes


def weights_to_dict(weights: ModelWeights) -> dict[str, np.ndarray]:
    """Flatten to {name: array} in canonical order (no copies)."""
    out = {"embed.w": weights.embed_w, "embed.b": weights.embed_b}
    for i, layer in enumerate(weights.layers):
        p = f"layers.{i}."
        out[p + "wq"] = layer.wq
        out[p + "wk"] = layer.wk
        out[p + "wv"] = layer.wv
        out[p + "wo"] = layer.wo
        out[p + "ff.w1"] = layer.ff_w1
        out[p + "ff.b1"] = layer.ff_b1
        out[p + "ff.w2"] = layer.ff_w2
        out[p + "ff.b2"] = layer.ff_b2
        out[p + "ln1.g"] = layer.ln1_g
        out[p + "ln1.b"] = layer.ln1_b
        out[p + "ln2.g"] = layer.ln2_g
        out[p + "ln2.b"] = layer.ln2_b
    out["head.w"] = weights.head_w
    out["head.b"] = weights.head_b
    return out


def dict_to_weights(params: dict[str, np.ndarray], config: ModelConfig) -> ModelWeights:
    """Inverse of weights_to_dict; validates the key set and shapes."""
    shapes = param_shapes(config)
    missing = shapes.keys() - params.keys()
    extra = params.keys() - shapes.keys()
    if missing or extra:
        raise ShapeError(f"parameter names mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
    for name, shape in shapes.items():
        if tuple(params[name].shape) != shape:
            raise ShapeError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
    layers = []
    for i in range(config.layers):
        p = f"layers.{i}."
        layers.append(
            LayerWeights(
                wq=params[p + "wq"],
                wk=params[p + "wk"],
                wv=params[p + "wv"],
                wo=params[p + "wo"],
                ff_w1=params[p + "ff.w1"],
                ff_b1=params[p + "ff.b1"],
                ff_w2=params[p + "ff.w2"],
                ff_b2=params[p + "ff.b2"],
                ln1_g=params[p + "ln1.g"],
                ln1_b=params[p + "ln1.b"],
                ln2_g=params[p + "ln2.g"],
                ln2_b=params[p + "ln2.b"],
            )
        )
    return ModelWeights(
        config=config,
        embed_w=params["embed.w"],
        embed_b=params["embed.b"],
        layers=layers,
        head_w=params["head.w"],
        head_b=params["head.b"],
    )


def init_weights(config: ModelConfig, seed: int) -> ModelWeights:
    """Glorot-uniform matrices, zero biases, unit layer-norm gains.

    Matrices draw from U(-b, b) with b = sqrt(6 / (fan_in + fan_out)). The
    draw order follows the canonical parameter order, so the full weight
    set is a pure function of (config, seed). Arrays are float32, the
    storage precision.
    """
    rng = derive_rng(seed, "init")

    def glorot(shape, fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)

    def zeros(*shape):
        return np.zeros(shape, dtype=np.float32)

    d_m, d_k, d_f = config.d_model, config.d_k, config.d_ff
    embed_w = glorot((config.input_dim, d_m), config.input_dim, d_m)
    embed_b = zeros(d_m)
    layers = []
    for _ in range(config.layers):
        layers.append(
            LayerWeights(
                wq=glorot((config.heads, d_m, d_k), d_m, d_k),
                wk=glorot((config.heads, d_m, d_k), d_m, d_k),
                wv=glorot((config.heads, d_m, d_k), d_m, d_k),
                wo=glorot((d_m, d_m), d_m, d_m),
                ff_w1=glorot((d_m, d_f), d_m, d_f),
                ff_b1=zeros(d_f),
                ff_w2=glorot((d_f, d_m), d_f, d_m),
                ff_b2=zeros(d_m),
                ln1_g=np.ones(d_m, dtype=np.float32),
                ln1_b=zeros(d_m),
                ln2_g=np.ones(d_m, dtype=np.float32),
                ln2_b=zeros(d_m),
            )
        )
    flat_dim = config.window * d_m
    head_w = glorot((flat_dim, config.classes), flat_dim, config.classes)
    head_b = zeros(config.classes)
    return ModelWeights(config, embed_w, embed_b, layers, head_w, head_b)


def _f64(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along `axis`."""
    x = _f64(x)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def positional_encoding(pos: int, d_model: int) -> np.ndarray:
    """Sinusoidal position code: entry 2k is sin(pos / PE_BASE^(2k/d_model)),
    entry 2k+1 the matching cosine."""
    if d_model < 2 or d_model % 2 != 0:
        raise ConfigError(f"d_model must be a positive even number, got {d_model}")
    if pos < 0:
        raise ValueError(f"pos must be >= 0, got {pos}")
    k = np.arange(0, d_model, 2, dtype=np.float64)
    angle = pos / PE_BASE ** (k / d_model)
    out = np.empty(d_model, dtype=np.float64)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


def positional_encoding_matrix(window: int, d_model: int) -> np.ndarray:
    """Position codes for all window positions, shape (window, d_model)."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return np.stack([positional_encoding(pos, d_model) for pos in range(window)])


def embed_frame(frame: np.ndarray, weights: ModelWeights, pos: int) -> np.ndarray:
    """Affine embedding of one frame plus its position code."""
    frame = _f64(frame)
    cfg = weights.config
    if frame.shape != (cfg.input_dim,):
        raise ShapeError(f"frame has shape {frame.shape}, expected ({cfg.input_dim},)")
    if not 0 <= pos < cfg.window:
        raise ValueError(f"pos {pos} out of range [0, {cfg.window})")
    return frame @ _f64(weights.embed_w) + _f64(weights.embed_b) + positional_encoding(pos, cfg.d_model)


@dataclass
class AttentionTensors:
    """Query/key/value matrices for one scaled dot-product attention call."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    d_k: int


def attention_weights(q: np.ndarray, k: np.ndarray, d_k: int) -> np.ndarray:
    """Row-stochastic attention matrix softmax(q k^T / sqrt(d_k))."""
    if d_k < 1:
        raise ValueError(f"d_k must be >= 1, got {d_k}")
    q, k = _f64(q), _f64(k)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ShapeError(f"query/key feature dims differ: {q.shape} vs {k.shape}")
    return softmax(q @ k.T / math.sqrt(d_k), axis=-1)


def attention(t: AttentionTensors) -> np.ndarray:
    """Scaled dot-product attention output, one row per query."""
    v = _f64(t.v)
    if v.ndim != 2 or v.shape[0] != np.asarray(t.k).shape[0]:
        raise ShapeError(f"value rows {v.shape} do not match key rows {np.asarray(t.k).shape}")
    return attention_weights(t.q, t.k, t.d_k) @ v


def _layer_norm_fwd(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv_std
    return gain * xhat + bias, (xhat, inv_std, gain)


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Row-wise layer norm with learnable gain and bias (eps 1e-5)."""
    return _layer_norm_fwd(_f64(x), _f64(gain), _f64(bias))[0]


def multi_head_attention(x: np.ndarray, layer: LayerWeights) -> np.ndarray:
    """Pre-residual multi-head self-attention of x, shape preserved."""
    return _mha_fwd(_f64(x), layer)[0]


def _mha_fwd(x, layer):
    wq, wk, wv, wo = _f64(layer.wq), _f64(layer.wk), _f64(layer.wv), _f64(layer.wo)
    heads = wq.shape[0]
    d_k = wq.shape[2]
    if x.ndim != 2 or x.shape[1] != wq.shape[1]:
        raise ShapeError(f"input shape {x.shape} does not match d_model {wq.shape[1]}")
    per_head = []
    outs = []
    for i in range(heads):
        q, k, v = x @ wq[i], x @ wk[i], x @ wv[i]
        a = softmax(q @ k.T / math.sqrt(d_k), axis=-1)
        outs.append(a @ v)
        per_head.append((q, k, v, a))
    concat = np.concatenate(outs, axis=1)
    return concat @ wo, (per_head, concat)


def feed_forward(x: np.ndarray, layer: LayerWeights) -> np.ndarray:
    """Pre-residual position-wise feed-forward block: affine, ReLU, affine."""
    x = _f64(x)
    if x.ndim != 2 or x.shape[1] != layer.ff_w1.shape[0]:
        raise ShapeError(f"input shape {x.shape} does not match d_model {layer.ff_w1.shape[0]}")
    pre = x @ _f64(layer.ff_w1) + _f64(layer.ff_b1)
    return np.maximum(pre, 0.0) @ _f64(layer.ff_w2) + _f64(layer.ff_b2)


def _encoder_internals(frames, weights: ModelWeights, use_positions: bool = True):
    """Forward pass through embedding and all layers, keeping what the
    backward pass needs. Returns (features, frames64, layer_caches)."""
    cfg = weights.config
    frames = _f64(frames)
    if frames.shape != (cfg.window, cfg.input_dim):
        raise ShapeError(f"frames have shape {frames.shape}, expected ({cfg.window}, {cfg.input_dim})")
    x = frames @ _f64(weights.embed_w) + _f64(weights.embed_b)
    if use_positions:
        x = x + positional_encoding_matrix(cfg.window, cfg.d_model)
    caches = []
    for layer in weights.layers:
        x_in = x
        mha, (per_head, concat) = _mha_fwd(x, layer)
        y1, ln1 = _layer_norm_fwd(x_in + mha, _f64(layer.ln1_g), _f64(layer.ln1_b))
        ff_pre = y1 @ _f64(layer.ff_w1) + _f64(layer.ff_b1)
        ff_act = np.maximum(ff_pre, 0.0)
        ff_out = ff_act @ _f64(layer.ff_w2) + _f64(layer.ff_b2)
        x, ln2 = _layer_norm_fwd(y1 + ff_out, _f64(layer.ln2_g), _f64(layer.ln2_b))
        caches.append(
            {"x_in": x_in, "per_head": per_head, "concat": concat, "ln1": ln1,
             "y1": y1, "ff_pre": ff_pre, "ff_act": ff_act, "ln2": ln2}
        )
    return x, frames, caches


def encoder_forward(frames: np.ndarray, weights: ModelWeights, use_positions: bool = True) -> np.ndarray:
    """Per-frame features after the full encoder stack, (window, d_model).

    With layers == 0 this is just the embedded frames (plus position codes
    unless use_positions is False).
    """
    return _encoder_internals(frames, weights, use_positions)[0]


def _classify_internals(features, weights: ModelWeights):
    cfg = weights.config
    features = _f64(features)
    if features.shape != (cfg.window, cfg.d_model):
        raise ShapeError(
            f"features have shape {features.shape}, expected ({cfg.window}, {cfg.d_model})"
        )
    flat = features.reshape(-1)
    logits = flat @ _f64(weights.head_w) + _f64(weights.head_b)
    return softmax(logits), flat


def classify(features: np.ndarray, weights: ModelWeights) -> np.ndarray:
    """Class probabilities from the flattened window features."""
    return _classify_internals(features, weights)[0]


def forward_probs(weights: ModelWeights, frames: np.ndarray) -> np.ndarray:
    """Full forward pass: frames to class probabilities."""
    return classify(encoder_forward(frames, weights), weights)


def predict_label(weights: ModelWeights, frames: np.ndarray) -> int:
    """Most probable class; argmax ties resolve to the lowest index."""
    return int(np.argmax(forward_probs(weights, frames)))


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-ln p[label], with p clamped below at 1e-12 before the log."""
    probs = _f64(probs)
    if probs.ndim != 1:
        raise ShapeError(f"expected a probability vector, got shape {probs.shape}")
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range [0, {probs.shape[0]})")
    return float(-np.log(max(float(probs[label]), PROB_CLAMP)))
