import dataclasses

import numpy as np
import pytest

from signseg import (
    ConfigError,
    ModelConfig,
    NonFiniteGradientError,
    TrainConfig,
    ablate,
    ablation_to_csv,
    adam_step,
    carve_validation,
    default_config,
    evaluate_isolated,
    history_to_csv,
    init_weights,
    lr_at_epoch,
    make_dataset,
    save_weights,
    split_dataset,
    train,
)
from signseg import IsolatedSample
from signseg.seeding import derive_rng, derive_seed


class TestDefaults:
    def test_published_values(self):
        cfg = default_config()
        assert cfg.batch_size == 50
        assert cfg.lr0 == 0.005
        assert cfg.lr_decay_every == 10
        assert cfg.lr_decay_factor == 0.1
        assert cfg.max_epochs == 200
        assert cfg.weight_decay == 1e-4
        assert cfg.beta1 == 0.92
        assert cfg.beta2 == 0.999
        assert cfg.adam_eps == 1e-8
        assert cfg.early_stop_patience == 20

    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainConfig(lr0=-1.0)
        with pytest.raises(ConfigError):
            TrainConfig(beta1=1.0)


class TestSchedule:
    def test_pinned_points(self):
        cfg = default_config()
        assert lr_at_epoch(cfg, 0) == 0.005
        assert lr_at_epoch(cfg, 9) == 0.005
        assert lr_at_epoch(cfg, 10) == 0.0005
        # 5e-5 only up to float rounding of 0.005 * 0.1**2
        np.testing.assert_allclose(lr_at_epoch(cfg, 25), 5e-5, rtol=1e-12)

    def test_non_increasing(self):
        cfg = default_config()
        values = [lr_at_epoch(cfg, e) for e in range(60)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_negative_epoch(self):
        with pytest.raises(ValueError):
            lr_at_epoch(default_config(), -1)


class TestSplit:
    def test_sizes_and_partition(self):
        data = make_dataset(seed=1, classes=10, n_per_class=20, dim=4, window=6, noise_sigma=0.05)
        train_set, test_set = split_dataset(data, 0.8, seed=7)
        assert len(train_set) == 160 and len(test_set) == 40
        ids = lambda xs: sorted(id(s) for s in xs)
        assert sorted(ids(train_set) + ids(test_set)) == ids(data)

    def test_stratified(self):
        data = make_dataset(seed=2, classes=5, n_per_class=10, dim=4, window=6, noise_sigma=0.05)
        train_set, test_set = split_dataset(data, 0.8, seed=8)
        for label in range(5):
            assert sum(s.label == label for s in train_set) == 8
            assert sum(s.label == label for s in test_set) == 2

    def test_deterministic(self):
        data = make_dataset(seed=3, classes=3, n_per_class=6, dim=4, window=6, noise_sigma=0.05)
        a = split_dataset(data, 0.7, seed=9)
        b = split_dataset(data, 0.7, seed=9)
        assert [s.label for s in a[0]] == [s.label for s in b[0]]
        assert all(np.array_equal(x.frames, y.frames) for x, y in zip(a[0], b[0]))

    def test_lonely_class_warns_into_train(self):
        rng = derive_rng(4, "lonely")
        data = [IsolatedSample(rng.normal(size=(6, 4)), 0) for _ in range(4)]
        data.append(IsolatedSample(rng.normal(size=(6, 4)), 1))
        with pytest.warns(UserWarning):
            train_set, test_set = split_dataset(data, 0.8, seed=10)
        assert sum(s.label == 1 for s in train_set) == 1
        assert sum(s.label == 1 for s in test_set) == 0

    def test_carve_validation_fraction(self):
        data = make_dataset(seed=5, classes=4, n_per_class=10, dim=4, window=6, noise_sigma=0.05)
        core, val = carve_validation(data, 0.1, seed=11)
        assert len(core) == 36 and len(val) == 4
        for label in range(4):
            assert sum(s.label == label for s in val) == 1


class TestAdam:
    def test_first_step_collapses_to_sign(self):
        cfg = dataclasses.replace(default_config(), weight_decay=0.0)
        params = {"w": np.array([1.0, -2.0])}
        grads = {"w": np.array([0.5, -0.25])}
        new, state = adam_step(params, grads, None, lr=0.01, cfg=cfg)
        np.testing.assert_allclose(new["w"], [1.0 - 0.01, -2.0 + 0.01], atol=0.01 * 1e-6)
        assert state.t == 1

    def test_zero_gradient_identity(self):
        cfg = dataclasses.replace(default_config(), weight_decay=0.0)
        params = {"w": np.array([3.0, -1.0])}
        new, state = adam_step(params, {"w": np.zeros(2)}, None, lr=0.1, cfg=cfg)
        np.testing.assert_array_equal(new["w"], params["w"])
        assert state.t == 1

    def test_decoupled_decay_applies_before_update(self):
        cfg = dataclasses.replace(default_config(), weight_decay=0.5)
        params = {"w": np.array([2.0])}
        new, _ = adam_step(params, {"w": np.zeros(1)}, None, lr=0.1, cfg=cfg)
        np.testing.assert_allclose(new["w"], [2.0 * (1 - 0.1 * 0.5)], atol=1e-12)

    def test_quadratic_descends(self):
        cfg = dataclasses.replace(default_config(), weight_decay=0.0)
        w = {"w": np.array([1.0])}
        state = None
        losses = [1.0]
        for _ in range(2):
            grads = {"w": 2.0 * w["w"]}
            w, state = adam_step(w, grads, state, lr=0.005, cfg=cfg)
            losses.append(float(w["w"][0] ** 2))
        assert losses[0] > losses[1] > losses[2]

    def test_functional_no_mutation(self):
        cfg = default_config()
        params = {"w": np.array([1.0, 2.0])}
        before = params["w"].copy()
        adam_step(params, {"w": np.array([0.3, 0.4])}, None, lr=0.01, cfg=cfg)
        np.testing.assert_array_equal(params["w"], before)

    def test_non_finite_gradient_names_parameter(self):
        cfg = default_config()
        with pytest.raises(NonFiniteGradientError) as exc:
            adam_step({"head.w": np.ones(2)}, {"head.w": np.array([1.0, np.nan])}, None, 0.01, cfg)
        assert "head.w" in str(exc.value)


def small_setup(seed, classes=3, n=8, window=8, dim=4):
    data = make_dataset(seed=derive_seed(seed, "data"), classes=classes, n_per_class=n, dim=dim, window=window, noise_sigma=0.05)
    train_set, test_set = split_dataset(data, 0.75, derive_seed(seed, "split"))
    core, val = carve_validation(train_set, 0.15, derive_seed(seed, "val"))
    mcfg = ModelConfig(layers=1, heads=2, d_model=8, d_ff=16, window=window, input_dim=dim, classes=classes)
    return core, val, test_set, mcfg


class TestTrainLoop:
    def test_zero_epochs_returns_initial_weights(self):
        core, val, _, mcfg = small_setup(1)
        tcfg = TrainConfig(seed=5, max_epochs=0)
        weights, history = train(core, val, mcfg, tcfg)
        assert history.records == []
        assert history.best_epoch == -1
        assert save_weights(weights) == save_weights(init_weights(mcfg, derive_seed(5, "init")))

    def test_bit_reproducible(self):
        core, val, _, mcfg = small_setup(2)
        tcfg = TrainConfig(seed=6, max_epochs=4, batch_size=8)
        w1, h1 = train(core, val, mcfg, tcfg)
        w2, h2 = train(core, val, mcfg, tcfg)
        assert h1.records == h2.records
        assert save_weights(w1) == save_weights(w2)

    def test_history_follows_schedule(self):
        core, val, _, mcfg = small_setup(3)
        tcfg = TrainConfig(seed=7, max_epochs=12, batch_size=8, lr_decay_every=4)
        _, history = train(core, val, mcfg, tcfg)
        for record in history.records:
            assert record.lr == lr_at_epoch(tcfg, record.epoch)

    def test_returned_weights_hit_best_validation(self):
        core, val, _, mcfg = small_setup(4)
        tcfg = TrainConfig(seed=8, max_epochs=10, batch_size=8, early_stop_patience=3)
        weights, history = train(core, val, mcfg, tcfg)
        best = max(r.val_accuracy for r in history.records)
        assert history.records[history.best_epoch].val_accuracy == best
        np.testing.assert_allclose(evaluate_isolated(weights, val), best)

    def test_early_stopping_cuts_run_short(self):
        core, val, _, mcfg = small_setup(5)
        tcfg = TrainConfig(seed=9, max_epochs=60, batch_size=8, early_stop_patience=2)
        _, history = train(core, val, mcfg, tcfg)
        assert len(history.records) < 60
        last = history.records[-1].epoch
        assert last - history.best_epoch >= 2

    def test_tiny_run_reaches_bar(self):
        """C=3, 20 per class, W=10: validation should hit 0.95 inside 60 epochs."""
        data = make_dataset(seed=derive_seed(7, "data"), classes=3, n_per_class=20, dim=6, window=10, noise_sigma=0.05)
        train_set, _ = split_dataset(data, 0.8, derive_seed(7, "split"))
        core, val = carve_validation(train_set, 0.1, derive_seed(7, "val"))
        mcfg = ModelConfig(layers=2, heads=2, d_model=32, d_ff=128, window=10, input_dim=6, classes=3)
        tcfg = TrainConfig(seed=derive_seed(7, "train"), max_epochs=60)
        _, history = train(core, val, mcfg, tcfg)
        assert max(r.val_accuracy for r in history.records) >= 0.95

    def test_threads_do_not_change_result(self):
        core, val, _, mcfg = small_setup(6)
        tcfg = TrainConfig(seed=10, max_epochs=3, batch_size=8)
        w1, h1 = train(core, val, mcfg, tcfg, threads=1)
        w2, h2 = train(core, val, mcfg, tcfg, threads=4)
        assert h1.records == h2.records
        assert save_weights(w1) == save_weights(w2)

    def test_empty_dataset_rejected(self):
        _, val, _, mcfg = small_setup(7)
        with pytest.raises(ValueError):
            train([], val, mcfg, TrainConfig(seed=1))


class TestEvaluate:
    def test_chance_level_over_many_inits(self):
        data = make_dataset(seed=derive_seed(5, "data"), classes=10, n_per_class=50, dim=6, window=10, noise_sigma=0.05)
        mcfg = ModelConfig(layers=1, heads=2, d_model=16, d_ff=32, window=10, input_dim=6, classes=10)
        accs = [
            evaluate_isolated(init_weights(mcfg, derive_seed(5, "init", k)), data)
            for k in range(10)
        ]
        assert abs(np.mean(accs) - 0.1) <= 0.05

    def test_empty_rejected(self, tiny_weights):
        with pytest.raises(ValueError):
            evaluate_isolated(tiny_weights, [])


def test_history_to_csv_schema():
    core, val, _, mcfg = small_setup(8)
    tcfg = TrainConfig(seed=11, max_epochs=2, batch_size=8)
    _, history = train(core, val, mcfg, tcfg)
    lines = history_to_csv(history).strip().split("\n")
    assert lines[0] == "epoch,loss,val_accuracy,lr"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[3]) == tcfg.lr0


class TestAblate:
    def test_grid_order_and_labels(self):
        core, val, test_set, mcfg = small_setup(9)
        base = dataclasses.replace(mcfg, d_model=8, heads=2)
        tcfg = TrainConfig(seed=12, max_epochs=2, batch_size=8)
        rows = ablate([1, 2], [2, 4], [("synthetic", core + val, test_set)], base, tcfg)
        assert [(r.layers, r.heads) for r in rows] == [(1, 2), (1, 4), (2, 2), (2, 4)]
        assert rows[0].label == "1 layer with 2 heads"
        assert rows[3].label == "2 layers with 4 heads"
        for row in rows:
            assert row.error is None
            assert 0.0 <= row.accuracies["synthetic"] <= 1.0

    def test_indivisible_heads_recorded_not_fatal(self):
        core, val, test_set, mcfg = small_setup(10)
        tcfg = TrainConfig(seed=13, max_epochs=2, batch_size=8)
        rows = ablate([1], [2, 3], [("synthetic", core + val, test_set)], mcfg, tcfg)
        assert rows[0].error is None
        assert rows[1].error is not None
        assert rows[1].accuracies == {"synthetic": None}
        csv = ablation_to_csv(rows, ["synthetic"])
        assert "config-error" in csv

    def test_csv_schema_and_determinism(self):
        core, val, test_set, mcfg = small_setup(11)
        tcfg = TrainConfig(seed=14, max_epochs=2, batch_size=8)
        args = ([1], [2], [("synthetic", core + val, test_set)], mcfg, tcfg)
        a = ablation_to_csv(ablate(*args), ["synthetic"])
        b = ablation_to_csv(ablate(*args), ["synthetic"])
        assert a == b
        header, row = a.strip().split("\n")
        assert header == "Model,synthetic"
        name, cell = row.split(",")
        assert name == "1 layer with 2 heads"
        float(cell)  # percent with two decimals
        assert "." in cell

    def test_empty_choices_rejected(self):
        core, val, test_set, mcfg = small_setup(12)
        with pytest.raises(ValueError):
            ablate([], [2], [("synthetic", core + val, test_set)], mcfg, TrainConfig(seed=1))
