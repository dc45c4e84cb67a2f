"""Training loop: Adam with decoupled weight decay, step-decay learning
rate, stratified splits, early stopping on validation accuracy."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NonFiniteGradientError, ShapeError
from .gradients import backward
from .keypoints import IsolatedSample
from .model import ModelConfig, ModelWeights, dict_to_weights, forward_probs, init_weights, weights_to_dict
from .seeding import derive_rng, derive_seed


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 50
    lr0: float = 0.005
    lr_decay_every: int = 10
    lr_decay_factor: float = 0.1
    max_epochs: int = 200
    weight_decay: float = 1e-4
    beta1: float = 0.92
    beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be > 0, got {self.lr0}")
        if self.lr_decay_every < 1:
            raise ConfigError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigError(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if self.adam_eps <= 0:
            raise ConfigError(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.early_stop_patience < 1:
            raise ConfigError(f"early_stop_patience must be >= 1, got {self.early_stop_patience}")


def default_config(seed: int = 0) -> TrainConfig:
    """Reference hyperparameters: batch 50, lr 0.005 divided by 10 every 10
    epochs, 200 epochs max, weight decay 1e-4, beta1 0.92, patience 20."""
    return TrainConfig(seed=seed)


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Step decay: lr0 * factor^(epoch // every)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr0 * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


def split_dataset(
    samples: list[IsolatedSample], ratio: float, seed: int
) -> tuple[list[IsolatedSample], list[IsolatedSample]]:
    """Stratified split into (train, test) with `ratio` of each class in train.

    Every class with at least two samples lands in both partitions; a
    single-sample class goes to train with a warning. The split is a pure
    function of (samples, ratio, seed).
    """
    if not samples:
        raise ValueError("cannot split an empty dataset")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    by_label: dict[int, list[int]] = {}
    for i, sample in enumerate(samples):
        by_label.setdefault(int(sample.label), []).append(i)
    rng = derive_rng(seed, "split")
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in sorted(by_label):
        members = by_label[label]
        if len(members) < 2:
            warnings.warn(f"class {label} has {len(members)} sample(s); keeping it in train only")
            train_idx.extend(members)
            continue
        perm = rng.permutation(len(members))
        n_test = int(round(len(members) * (1.0 - ratio)))
        n_test = min(max(n_test, 1), len(members) - 1)
        for j, p in enumerate(perm):
            (test_idx if j < n_test else train_idx).append(members[p])
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


def carve_validation(
    samples: list[IsolatedSample], fraction: float = 0.1, seed: int = 0
) -> tuple[list[IsolatedSample], list[IsolatedSample]]:
    """Split a training set into (core, validation) stratified by class."""
    core, val = split_dataset(samples, 1.0 - fraction, seed)
    return core, val


@dataclass
class AdamState:
    """First/second moment accumulators (float64) and the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState | None,
    lr: float,
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with bias correction and decoupled weight decay.

    Decay shrinks the parameters by lr * weight_decay before the Adam
    update itself. Moments are kept in float64; updated parameters are
    cast back to each parameter's own dtype. Inputs are not mutated.
    """
    if state is None:
        state = AdamState(
            m={k: np.zeros(v.shape, dtype=np.float64) for k, v in params.items()},
            v={k: np.zeros(v.shape, dtype=np.float64) for k, v in params.items()},
            t=0,
        )
    if params.keys() != grads.keys():
        raise ShapeError("parameter and gradient names differ")
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    bias1 = 1.0 - cfg.beta1**t
    bias2 = 1.0 - cfg.beta2**t
    for name, param in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != param.shape:
            raise ShapeError(f"gradient {name} has shape {g.shape}, expected {param.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
        p = param.astype(np.float64)
        if cfg.weight_decay:
            p = p - lr * cfg.weight_decay * p
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * (g * g)
        p = p - lr * (m / bias1) / (np.sqrt(v / bias2) + cfg.adam_eps)
        new_params[name] = p.astype(param.dtype)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    val_accuracy: float
    lr: float


@dataclass
class TrainHistory:
    records: list[EpochRecord]
    best_epoch: int  # -1 when no epoch ran


def _validate_samples(samples: list[IsolatedSample], cfg: ModelConfig, what: str) -> None:
    for i, s in enumerate(samples):
        if s.frames.shape != (cfg.window, cfg.input_dim):
            raise ShapeError(
                f"{what} sample {i} has shape {s.frames.shape}, expected ({cfg.window}, {cfg.input_dim})"
            )
        if not 0 <= s.label < cfg.classes:
            raise ValueError(f"{what} sample {i} label {s.label} out of range [0, {cfg.classes})")


def _sample_gradients(weights, samples, threads):
    if threads <= 1 or len(samples) <= 1:
        return [backward(s, weights) for s in samples]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: backward(s, weights), samples))


def train(
    train_set: list[IsolatedSample],
    val_set: list[IsolatedSample],
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    threads: int = 1,
    on_epoch=None,
) -> tuple[ModelWeights, TrainHistory]:
    """Train from a seeded init; return the best-validation weights.

    Per epoch: seeded shuffle, mini-batches of tcfg.batch_size (gradients
    averaged in a fixed order), one adam_step per batch, then validation
    accuracy. Stops early after early_stop_patience epochs without a
    strict improvement. max_epochs=0 returns the initial weights and an
    empty history. Bit-reproducible for fixed (configs, data, threads).
    """
    if not train_set:
        raise ValueError("train_set must not be empty")
    if not val_set:
        raise ValueError("val_set must not be empty")
    _validate_samples(train_set, mcfg, "train")
    _validate_samples(val_set, mcfg, "validation")

    params = weights_to_dict(init_weights(mcfg, derive_seed(tcfg.seed, "init")))
    state: AdamState | None = None
    shuffle_rng = derive_rng(tcfg.seed, "shuffle")

    records: list[EpochRecord] = []
    best_acc = -1.0
    best_epoch = -1
    best_params = {k: v.copy() for k, v in params.items()}

    for epoch in range(tcfg.max_epochs):
        lr = lr_at_epoch(tcfg, epoch)
        order = shuffle_rng.permutation(len(train_set))
        weights = dict_to_weights(params, mcfg)
        loss_sum = 0.0
        for start in range(0, len(order), tcfg.batch_size):
            batch = [train_set[i] for i in order[start : start + tcfg.batch_size]]
            results = _sample_gradients(weights, batch, threads)
            grad_sum = {k: np.zeros_like(g) for k, g in results[0][0].items()}
            for grads, loss in results:
                for k in grad_sum:
                    grad_sum[k] += grads[k]
                loss_sum += loss
            mean_grads = {k: g / len(batch) for k, g in grad_sum.items()}
            params, state = adam_step(params, mean_grads, state, lr, tcfg)
            weights = dict_to_weights(params, mcfg)
        val_acc = evaluate_isolated(weights, val_set, threads)
        record = EpochRecord(epoch, loss_sum / len(train_set), val_acc, lr)
        records.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        elif epoch - best_epoch >= tcfg.early_stop_patience:
            break
    return dict_to_weights(best_params, mcfg), TrainHistory(records, best_epoch)


def evaluate_isolated(weights: ModelWeights, samples: list[IsolatedSample], threads: int = 1) -> float:
    """Fraction of samples whose argmax class matches the label."""
    if not samples:
        raise ValueError("cannot evaluate an empty sample list")
    if threads <= 1 or len(samples) <= 1:
        probs = [forward_probs(weights, s.frames) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            probs = list(pool.map(lambda s: forward_probs(weights, s.frames), samples))
    hits = sum(int(np.argmax(p)) == int(s.label) for p, s in zip(probs, samples))
    return hits / len(samples)


def history_to_csv(history: TrainHistory) -> str:
    lines = ["epoch,loss,val_accuracy,lr"]
    for r in history.records:
        lines.append(f"{r.epoch},{r.loss!r},{r.val_accuracy!r},{r.lr!r}")
    return "\n".join(lines) + "\n"


@dataclass
class AblationRow:
    layers: int
    heads: int
    accuracies: dict[str, float | None]
    error: str | None = None

    @property
    def label(self) -> str:
        layer_word = "layer" if self.layers == 1 else "layers"
        head_word = "head" if self.heads == 1 else "heads"
        return f"{self.layers} {layer_word} with {self.heads} {head_word}"


def ablate(
    layer_choices: list[int],
    head_choices: list[int],
    datasets: list[tuple[str, list[IsolatedSample], list[IsolatedSample]]],
    base_mcfg: ModelConfig,
    tcfg: TrainConfig,
    threads: int = 1,
    val_fraction: float = 0.1,
) -> list[AblationRow]:
    """Accuracy grid over (layers, heads), layers-major.

    Each cell trains from scratch per dataset with a seed derived from
    (tcfg.seed, layers, heads, dataset), so a rerun reproduces every cell
    exactly. A head count that does not divide d_model records a config
    error in that row instead of aborting the grid.
    """
    if not layer_choices or not head_choices:
        raise ValueError("layer_choices and head_choices must not be empty")
    if not datasets:
        raise ValueError("need at least one dataset")
    prepared = []
    for di, (name, train_samples, test_samples) in enumerate(datasets):
        core, val = carve_validation(
            train_samples, val_fraction, derive_seed(tcfg.seed, "ablate-val", di)
        )
        prepared.append((name, core, val, test_samples))

    rows = []
    for layers in layer_choices:
        for heads in head_choices:
            accuracies: dict[str, float | None] = {}
            error = None
            try:
                mcfg = replace(base_mcfg, layers=layers, heads=heads)
            except ConfigError as exc:
                error = str(exc)
                accuracies = {name: None for name, *_ in prepared}
            else:
                for di, (name, core, val, test_samples) in enumerate(prepared):
                    cell_cfg = replace(tcfg, seed=derive_seed(tcfg.seed, "ablate", layers, heads, di))
                    weights, _ = train(core, val, mcfg, cell_cfg, threads)
                    accuracies[name] = evaluate_isolated(weights, test_samples, threads)
            rows.append(AblationRow(layers, heads, accuracies, error))
    return rows


def ablation_to_csv(rows: list[AblationRow], dataset_names: list[str]) -> str:
    """Accuracy table, one row per architecture, one percent column per
    dataset; config-error cells say so instead of a number."""
    lines = ["Model," + ",".join(dataset_names)]
    for row in rows:
        cells = []
        for name in dataset_names:
            acc = row.accuracies.get(name)
            cells.append("config-error" if acc is None else f"{acc * 100:.2f}")
        lines.append(f"{row.label}," + ",".join(cells))
    return "\n".join(lines) + "\n"
