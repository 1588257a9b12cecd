"""Adam optimizer behavior and the mini-batch training loop."""

import numpy as np
import pytest

from mla_forge.neural import (
    NetConfig,
    TrainConfig,
    TrainingSet,
    adam_step,
    init_adam_state,
    normalize_pair,
    train,
)

TINY = NetConfig(input_channels=8, bifurcations=2, conv_layers=4, base_channels=4, channel_cap=8)


def tiny_dataset(rng, n=6, spatial=(32, 32)):
    inputs = [rng.standard_normal((8, *spatial)).astype(np.float32) for _ in range(n)]
    targets = [rng.standard_normal((2, *spatial)).astype(np.float32) for _ in range(n)]
    return TrainingSet(
        inputs=inputs,
        targets=targets,
        train_indices=list(range(n - 2)),
        val_indices=[n - 2, n - 1],
    )


class TestTrainConfig:
    def test_paper_defaults(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == 1e-4
        assert cfg.batch_size == 4
        assert cfg.max_epochs == 200
        assert (cfg.beta1, cfg.beta2, cfg.epsilon) == (0.9, 0.999, 1e-8)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"learning_rate": -1.0},
            {"batch_size": 0},
            {"max_epochs": 0},
            {"beta1": 1.0},
            {"beta2": 0.0},
            {"epsilon": 0.0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestAdamStep:
    def test_zero_gradient_fresh_state_leaves_params(self):
        params = [np.array([1.0, -2.0]), np.array([[3.0]])]
        grads = [np.zeros(2), np.zeros((1, 1))]
        state = init_adam_state(params)
        before = [p.copy() for p in params]
        adam_step(params, grads, state, 1, TrainConfig())
        for p, b in zip(params, before):
            np.testing.assert_array_equal(p, b)

    def test_first_step_is_signed_learning_rate(self):
        # bias-corrected first step reduces to -lr * sign(g) up to epsilon
        cfg = TrainConfig(learning_rate=1e-4)
        params = [np.array([1.0])]
        state = init_adam_state(params)
        adam_step(params, [np.array([1.0])], state, 1, cfg)
        assert params[0][0] == pytest.approx(1.0 - 1e-4, abs=1e-9)

    def test_scalar_quadratic_converges(self):
        # 100 steps on f(theta) = theta^2 from theta=1: |theta| shrinks
        # monotonically toward 0
        cfg = TrainConfig(learning_rate=5e-2)
        theta = [np.array([1.0])]
        state = init_adam_state(theta)
        history = [1.0]
        for t in range(1, 101):
            grad = [2.0 * theta[0]]
            adam_step(theta, grad, state, t, cfg)
            history.append(abs(float(theta[0][0])))
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
        assert history[-1] < 0.05

    def test_step_index_validated(self):
        params = [np.zeros(1)]
        with pytest.raises(ValueError):
            adam_step(params, [np.zeros(1)], init_adam_state(params), 0, TrainConfig())

    def test_mismatched_lengths(self):
        params = [np.zeros(1)]
        with pytest.raises(ValueError):
            adam_step(params, [], init_adam_state(params), 1, TrainConfig())


class TestTrain:
    def test_zero_learning_rate_keeps_loss_constant(self, rng):
        data = tiny_dataset(rng)
        cfg = TrainConfig(learning_rate=0.0, max_epochs=3, batch_size=2, seed=0)
        params, history = train(data, TINY, cfg)
        train_losses = [h.train_loss for h in history[1:]]
        assert max(train_losses) - min(train_losses) < 1e-7
        assert history[1].val_loss == history[-1].val_loss

    def test_same_seed_identical_curves(self, rng):
        data = tiny_dataset(rng)
        cfg = TrainConfig(max_epochs=4, batch_size=2, seed=11)
        _, hist_a = train(data, TINY, cfg)
        _, hist_b = train(data, TINY, cfg)
        assert [(h.train_loss, h.val_loss) for h in hist_a] == [
            (h.train_loss, h.val_loss) for h in hist_b
        ]

    def test_different_seed_differs(self, rng):
        data = tiny_dataset(rng)
        _, hist_a = train(data, TINY, TrainConfig(max_epochs=2, batch_size=2, seed=0))
        _, hist_b = train(data, TINY, TrainConfig(max_epochs=2, batch_size=2, seed=1))
        assert hist_a[-1].train_loss != hist_b[-1].train_loss

    def test_single_pair_overfit_strictly_decreases(self, rng):
        x = rng.standard_normal((8, 32, 32)).astype(np.float32)
        y = (rng.standard_normal((2, 32, 32)) * 0.1).astype(np.float32)
        data = TrainingSet(inputs=[x], targets=[y], train_indices=[0], val_indices=[])
        _, history = train(data, TINY, TrainConfig(max_epochs=10, seed=0))
        losses = [h.train_loss for h in history[1:]]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_epoch_zero_records_pretraining_validation(self, rng):
        data = tiny_dataset(rng)
        _, history = train(data, TINY, TrainConfig(max_epochs=2, batch_size=2, seed=0))
        assert history[0].epoch == 0
        assert np.isnan(history[0].train_loss)
        assert history[0].val_loss > 0

    def test_returns_best_validation_snapshot(self, rng):
        from mla_forge.neural.training import _mean_val_loss

        data = tiny_dataset(rng)
        cfg = TrainConfig(max_epochs=5, batch_size=2, seed=3)
        params, history = train(data, TINY, cfg)
        best = min(h.val_loss for h in history)
        recomputed = _mean_val_loss(data, params, TINY, cfg.batch_size)
        assert recomputed == pytest.approx(best, rel=1e-6)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            TrainingSet(inputs=[], targets=[], train_indices=[], val_indices=[])

    def test_overlapping_splits_rejected(self, rng):
        x = [rng.standard_normal((8, 32, 32)).astype(np.float32)] * 2
        y = [rng.standard_normal((2, 32, 32)).astype(np.float32)] * 2
        with pytest.raises(ValueError, match="overlap"):
            TrainingSet(inputs=x, targets=y, train_indices=[0, 1], val_indices=[1])


class TestNormalizePair:
    def test_scales_by_input_rms(self, rng):
        x = rng.standard_normal((4, 8, 8)) * 50.0
        y = rng.standard_normal((2, 8, 8)) * 200.0
        xn, yn = normalize_pair(x, y)
        assert float(np.sqrt(np.mean(xn.astype(np.float64) ** 2))) == pytest.approx(
            1.0, rel=1e-5
        )
        np.testing.assert_allclose(
            yn, (y / np.sqrt(np.mean(x**2))).astype(np.float32), rtol=1e-6
        )

    def test_zero_input_passes_through(self):
        x = np.zeros((2, 4, 4))
        y = np.ones((2, 4, 4))
        xn, yn = normalize_pair(x, y)
        np.testing.assert_array_equal(yn, y.astype(np.float32))
