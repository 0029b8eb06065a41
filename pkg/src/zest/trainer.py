"""Minimal contrastive-divergence trainer for producing weight snapshots.

Plain minibatch SGD, no momentum or weight decay: the point is realistic
weight trajectories along learning, not training quality. Positive-phase
statistics use hidden means; the negative phase reconstructs with k sampled
Gibbs steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import bernoulli_from_logits, philox_stream, sigmoid
from .rbm import RbmModel


@dataclass(frozen=True)
class TrainConfig:
    n_hidden: int
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 100
    cd_k: int = 1
    seed: int = 0
    snapshot_epochs: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("n_hidden, epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.cd_k < 1:
            raise ValueError("cd_k must be >= 1")
        object.__setattr__(self, "snapshot_epochs", tuple(sorted(set(self.snapshot_epochs))))


def _dense(dataset) -> np.ndarray:
    if hasattr(dataset, "to_dense"):
        return dataset.to_dense()
    arr = np.asarray(dataset, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("dataset must be a non-empty 2-d array")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("dataset must be binary")
    return arr


def train_cd(dataset, config: TrainConfig) -> list[tuple[int, RbmModel]]:
    """Run CD_k training, returning (epoch, model) snapshots.

    Weights start at N(0, 0.01^2), biases at zero; epoch 0 in
    snapshot_epochs captures that initialization. The whole trajectory is a
    deterministic function of the seed.
    """
    data = _dense(dataset)
    n_examples, n_features = data.shape
    rng = philox_stream(config.seed)
    w = rng.normal(0.0, 0.01, size=(config.n_hidden, n_features))
    b = np.zeros(n_features)
    c = np.zeros(config.n_hidden)
    lr = config.learning_rate

    snapshots: list[tuple[int, RbmModel]] = []
    wanted = set(config.snapshot_epochs)
    if 0 in wanted:
        snapshots.append((0, RbmModel(w.copy(), b.copy(), c.copy())))

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_examples)
        for lo in range(0, n_examples, config.batch_size):
            v_pos = data[order[lo : lo + config.batch_size]]
            m = v_pos.shape[0]
            zh = c + v_pos @ w.T
            ph_pos = sigmoid(zh)
            h = bernoulli_from_logits(rng.random(zh.shape), zh)
            v_neg = v_pos
            ph_neg = ph_pos
            for t in range(config.cd_k):
                zv = b + h @ w
                v_neg = bernoulli_from_logits(rng.random(zv.shape), zv)
                zh = c + v_neg @ w.T
                ph_neg = sigmoid(zh)
                if t + 1 < config.cd_k:
                    h = bernoulli_from_logits(rng.random(zh.shape), zh)
            w += lr * (ph_pos.T @ v_pos - ph_neg.T @ v_neg) / m
            b += lr * (v_pos.mean(axis=0) - v_neg.mean(axis=0))
            c += lr * (ph_pos.mean(axis=0) - ph_neg.mean(axis=0))
        if epoch in wanted or (epoch == config.epochs and not wanted):
            snapshots.append((epoch, RbmModel(w.copy(), b.copy(), c.copy())))
    return snapshots


def rms_weights(model: RbmModel) -> float:
    """Root mean square of the coupling entries; biases excluded."""
    return float(np.sqrt(np.mean(model.weights**2)))
