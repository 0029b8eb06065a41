"""Binary restricted Boltzmann machine: energies, conditionals, samplers.

Units take values in {0, 1}. The weight matrix is stored hidden-by-visible,
so row ``i`` couples hidden unit ``i`` to the whole visible layer and
exchanging the two layers is a cheap relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import bernoulli_from_logits, sigmoid, softplus


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class RbmModel:
    """Weights (n_hidden x n_visible) plus visible and hidden biases.

    Instances are immutable after construction; the arrays are marked
    read-only so a model can be shared freely across threads.
    """

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    weights_t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = _as_float_array(self.weights, "weights")
        b = _as_float_array(self.visible_bias, "visible_bias")
        c = _as_float_array(self.hidden_bias, "hidden_bias")
        if w.ndim != 2:
            raise ValueError("weights must be a 2-d matrix")
        if b.ndim != 1 or c.ndim != 1:
            raise ValueError("bias vectors must be 1-d")
        if w.shape != (c.size, b.size):
            raise ValueError(
                f"weights shape {w.shape} inconsistent with biases "
                f"(expected {(c.size, b.size)})"
            )
        if b.size < 1 or c.size < 1:
            raise ValueError("layer sizes must be positive")
        wt = np.ascontiguousarray(w.T)
        for arr in (w, b, c, wt):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "visible_bias", b)
        object.__setattr__(self, "hidden_bias", c)
        object.__setattr__(self, "weights_t", wt)

    @property
    def n_visible(self) -> int:
        return self.visible_bias.size

    @property
    def n_hidden(self) -> int:
        return self.hidden_bias.size

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmModel":
        return cls(np.zeros((n_hidden, n_visible)), np.zeros(n_visible), np.zeros(n_hidden))


def as_bits(x, length: int, name: str = "state") -> np.ndarray:
    """Validate a {0,1} state vector of the given length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (length,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({length},)")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError(f"{name} must contain only 0/1 entries")
    return arr


def energy(model: RbmModel, x, h) -> float:
    """Joint energy -b.x - c.h - h.Wx."""
    x = as_bits(x, model.n_visible, "x")
    h = as_bits(h, model.n_hidden, "h")
    return float(-model.visible_bias @ x - model.hidden_bias @ h - h @ (model.weights @ x))


def free_energy_visible(model: RbmModel, x) -> float:
    """Visible free energy F(x); exp(-F) is the hidden-marginalized weight."""
    x = as_bits(x, model.n_visible, "x")
    act = model.hidden_bias + model.weights @ x
    return float(-(model.visible_bias @ x + softplus(act).sum()))


def conditional_hidden(model: RbmModel, x) -> np.ndarray:
    """P(h_i = 1 | x) for every hidden unit."""
    x = as_bits(x, model.n_visible, "x")
    return sigmoid(model.hidden_bias + model.weights @ x)


def conditional_visible(model: RbmModel, h) -> np.ndarray:
    """P(x_j = 1 | h) for every visible unit."""
    h = as_bits(h, model.n_hidden, "h")
    return sigmoid(model.visible_bias + model.weights_t @ h)


def gibbs_step(model: RbmModel, x, rng: np.random.Generator) -> np.ndarray:
    """One alternating Gibbs update: sample h | x, then x' | h.

    Consumes n_hidden uniforms for the hidden layer, then n_visible for the
    visible layer.
    """
    x = as_bits(x, model.n_visible, "x")
    zh = model.hidden_bias + model.weights @ x
    h = bernoulli_from_logits(rng.random(model.n_hidden), zh)
    zv = model.visible_bias + model.weights_t @ h
    return bernoulli_from_logits(rng.random(model.n_visible), zv)


def metropolis_step(model: RbmModel, x, n_flips: int, rng: np.random.Generator) -> np.ndarray:
    """Propose flipping n_flips distinct bits; accept with min(1, e^(F(x)-F(x'))).

    Ties at acceptance ratio one always accept.
    """
    x = as_bits(x, model.n_visible, "x")
    if not 1 <= n_flips <= model.n_visible:
        raise ValueError(f"n_flips={n_flips} outside [1, {model.n_visible}]")
    idx = rng.choice(model.n_visible, size=n_flips, replace=False)
    proposal = x.copy()
    proposal[idx] = 1.0 - proposal[idx]
    log_ratio = free_energy_visible(model, x) - free_energy_visible(model, proposal)
    if log_ratio >= 0.0 or rng.random() < np.exp(log_ratio):
        return proposal
    return x


def transpose(model: RbmModel) -> RbmModel:
    """Exchange the layers: weights transposed, biases swapped."""
    return RbmModel(model.weights.T, model.hidden_bias, model.visible_bias)
