"""Mini-batch training loop with seeded shuffling and best-validation tracking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetConfig, NetParams, init_net_params, network_forward, network_loss_and_grads
from .ops import l1_loss
from .optim import AdamState, TrainConfig, adam_step, init_adam_state

__all__ = ["TrainingSet", "EpochRecord", "train", "normalize_pair"]


@dataclass
class TrainingSet:
    """In-memory dataset of (input tensor, target tensor) pairs with a split.

    inputs[i] is a (2E, D, L) float array, targets[i] a (2, D, L) float array.
    """

    inputs: list[np.ndarray]
    targets: list[np.ndarray]
    train_indices: list[int]
    val_indices: list[int]

    def __post_init__(self) -> None:
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must pair up")
        if not self.inputs:
            raise ValueError("empty dataset")
        if not self.train_indices:
            raise ValueError("empty training split")
        if set(self.train_indices) & set(self.val_indices):
            raise ValueError("train and validation splits overlap")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


def normalize_pair(
    x: np.ndarray, y: np.ndarray, dtype=np.float32
) -> tuple[np.ndarray, np.ndarray]:
    """Scale an (input, target) pair by the input's RMS.

    The scale depends only on the network input, so the same normalization is
    applicable at inference time; all downstream quality metrics are
    scale-invariant anyway.
    """
    rms = float(np.sqrt(np.mean(np.asarray(x, dtype=np.float64) ** 2)))
    scale = 1.0 / rms if rms > 0 else 1.0
    return (x * scale).astype(dtype), (y * scale).astype(dtype)


def _mean_val_loss(
    data: TrainingSet, params: NetParams, net_cfg: NetConfig, batch_size: int
) -> float:
    total = 0.0
    idx = data.val_indices
    for start in range(0, len(idx), batch_size):
        chunk = idx[start : start + batch_size]
        x = np.stack([data.inputs[i] for i in chunk])
        y = np.stack([data.targets[i] for i in chunk])
        pred = network_forward(x, params, net_cfg)
        loss, _ = l1_loss(pred, y)
        total += loss * len(chunk)
    return total / len(idx)


def train(
    dataset: TrainingSet,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
) -> tuple[NetParams, list[EpochRecord]]:
    """Train the full network with Adam on the L1 discrepancy to SLA targets.

    Deterministic for a fixed seed (init and shuffling both derive from it).
    Epoch 0 in the history records the pre-training validation loss; the
    returned parameters are the best-validation snapshot.
    """
    params = init_net_params(net_cfg, seed=train_cfg.seed)
    flat = params.flat()
    state: AdamState = init_adam_state(flat)
    rng = np.random.default_rng(train_cfg.seed)
    history: list[EpochRecord] = []

    val_loss = (
        _mean_val_loss(dataset, params, net_cfg, train_cfg.batch_size)
        if dataset.val_indices
        else np.nan
    )
    history.append(EpochRecord(epoch=0, train_loss=np.nan, val_loss=val_loss))
    best_val = val_loss if dataset.val_indices else np.inf
    best_params = params.copy()

    step = 0
    order = np.asarray(dataset.train_indices)
    for epoch in range(1, train_cfg.max_epochs + 1):
        perm = rng.permutation(len(order))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), train_cfg.batch_size):
            batch = order[perm[start : start + train_cfg.batch_size]]
            x = np.stack([dataset.inputs[i] for i in batch])
            y = np.stack([dataset.targets[i] for i in batch])
            loss, grads = network_loss_and_grads(x, y, params, net_cfg)
            step += 1
            adam_step(flat, grads.flat(), state, step, train_cfg)
            epoch_loss += loss
            n_batches += 1
        train_loss = epoch_loss / n_batches
        if dataset.val_indices:
            val_loss = _mean_val_loss(dataset, params, net_cfg, train_cfg.batch_size)
            if val_loss < best_val:
                best_val = val_loss
                best_params = params.copy()
        else:
            val_loss = np.nan
            best_params = params
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
    return best_params, history
