"""Construction of the starting bias for annealed runs.

A strategy names how the visible means are obtained (uniform, dataset
averages, or self-sampling of the model with Gibbs/Metropolis from one of
five deterministic-or-random starting states) and how the means are squashed
into finite logit biases with the epsilon cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import numpy.linalg as la
from scipy.special import logit

from .ais import BaseDistribution
from .numerics import bernoulli_from_logits
from .rbm import RbmModel, gibbs_step, metropolis_step, transpose


class Sampler(str, Enum):
    UNIFORM = "uniform"          # no sampling: B = 0
    DATASET_MEANS = "dataset"    # columnwise means of a training set
    GIBBS = "gibbs"
    METROPOLIS = "metropolis"


class Init(str, Enum):
    ZERO = "zero"
    ONE = "one"
    BERNOULLI = "bernoulli"
    MEAN_FIELD = "mf"
    PSEUDOINVERSE = "ps"


@dataclass(frozen=True)
class StrategySpec:
    sampler: Sampler
    init: Init = Init.ZERO
    n_samples: int = 1024
    n_steps: int = 100
    n_flips: int | float | None = None  # int = absolute count, float = fraction of n_visible
    epsilon: float = 0.05
    transpose: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sampler", Sampler(self.sampler))
        object.__setattr__(self, "init", Init(self.init))
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        if self.n_samples < 1 or self.n_steps < 1:
            raise ValueError("n_samples and n_steps must be >= 1")
        if self.sampler is Sampler.METROPOLIS:
            if self.n_flips is None:
                raise ValueError("metropolis strategies need n_flips")
            if isinstance(self.n_flips, float) and not 0.0 < self.n_flips <= 1.0:
                raise ValueError("fractional n_flips must lie in (0, 1]")
            if isinstance(self.n_flips, int) and self.n_flips < 1:
                raise ValueError("integer n_flips must be >= 1")

    def to_dict(self) -> dict:
        return {
            "sampler": self.sampler.value,
            "init": self.init.value,
            "n_samples": self.n_samples,
            "n_steps": self.n_steps,
            "n_flips": self.n_flips,
            "epsilon": self.epsilon,
            "transpose": self.transpose,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StrategySpec":
        return cls(
            sampler=Sampler(d["sampler"]),
            init=Init(d.get("init", "zero")),
            n_samples=int(d.get("n_samples", 1024)),
            n_steps=int(d.get("n_steps", 100)),
            n_flips=d.get("n_flips"),
            epsilon=float(d.get("epsilon", 0.05)),
            transpose=bool(d.get("transpose", False)),
        )


@dataclass(frozen=True, eq=False)
class MeanEstimate:
    means: np.ndarray
    n_samples_used: int

    def __post_init__(self):
        arr = np.array(self.means, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("means must be a vector")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("means must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "means", arr)


# Generic presets: Gibbs sampling from the deterministic weight-derived
# starting states, 1024 samples spaced 100 steps, epsilon 0.05.
def gibbs_mf_spec(transpose: bool = False) -> StrategySpec:
    return StrategySpec(Sampler.GIBBS, Init.MEAN_FIELD, 1024, 100, None, 0.05, transpose)


def gibbs_ps_spec(transpose: bool = False) -> StrategySpec:
    return StrategySpec(Sampler.GIBBS, Init.PSEUDOINVERSE, 1024, 100, None, 0.05, transpose)


def uniform_spec(transpose: bool = False) -> StrategySpec:
    return StrategySpec(Sampler.UNIFORM, transpose=transpose)


PRESETS = {
    "uniform": uniform_spec,
    "gibbs-mf": gibbs_mf_spec,
    "gibbs-ps": gibbs_ps_spec,
}


def pseudoinverse(matrix) -> np.ndarray:
    """Moore-Penrose inverse via SVD with cutoff max(m, n) * eps * sigma_max."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("pseudoinverse expects a matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("pseudoinverse requires finite entries")
    u, s, vt = la.svd(a, full_matrices=False)
    if s.size == 0:
        return a.T.copy()
    tau = max(a.shape) * np.finfo(np.float64).eps * s[0]
    inv = np.where(s > tau, 1.0 / np.where(s > tau, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def init_state(model: RbmModel, kind: Init, rng: np.random.Generator | None = None) -> np.ndarray:
    """Starting visible state for the mean-estimation chain."""
    kind = Init(kind)
    n_v = model.n_visible
    if kind is Init.ZERO:
        return np.zeros(n_v)
    if kind is Init.ONE:
        return np.ones(n_v)
    if kind is Init.BERNOULLI:
        if rng is None:
            raise ValueError("bernoulli initialization needs an rng")
        return bernoulli_from_logits(rng.random(n_v), np.zeros(n_v))
    if kind is Init.MEAN_FIELD:
        # High-probability state from the sign of the extended row sums:
        # bit on iff its bias plus total incoming coupling is positive.
        row = model.visible_bias + model.weights.sum(axis=0)
        return (row > 0.0).astype(np.float64)
    if kind is Init.PSEUDOINVERSE:
        xp = -pseudoinverse(model.weights) @ model.hidden_bias
        xp = np.clip(xp, 0.0, 1.0)
        return (xp >= 0.5).astype(np.float64)
    raise ValueError(f"unknown init kind {kind!r}")


def resolve_n_flips(n_flips: int | float, n_visible: int) -> int:
    """Fractions resolve against the visible layer; at least one bit flips."""
    if isinstance(n_flips, float):
        return max(1, round(n_flips * n_visible))
    return int(n_flips)


def estimate_means_by_sampling(
    model: RbmModel, spec: StrategySpec, rng: np.random.Generator
) -> MeanEstimate:
    """Average the visible state over spec.n_samples collection rounds.

    Rounds are separated by spec.n_steps sampler steps; the first sample is
    taken after one inter-sample gap and there is no further burn-in.
    """
    if spec.sampler not in (Sampler.GIBBS, Sampler.METROPOLIS):
        raise ValueError("mean estimation needs a gibbs or metropolis strategy")
    x = init_state(model, spec.init, rng)
    n_flips = 0
    if spec.sampler is Sampler.METROPOLIS:
        n_flips = resolve_n_flips(spec.n_flips, model.n_visible)
    acc = np.zeros(model.n_visible)
    for _ in range(spec.n_samples):
        for _ in range(spec.n_steps):
            if spec.sampler is Sampler.GIBBS:
                x = gibbs_step(model, x, rng)
            else:
                x = metropolis_step(model, x, n_flips, rng)
        acc += x
    return MeanEstimate(acc / spec.n_samples, spec.n_samples)


def means_from_dataset(dataset) -> MeanEstimate:
    """Columnwise means of a binary dataset (array or packed dataset)."""
    if hasattr(dataset, "column_means"):
        means = dataset.column_means()
        n = dataset.n_examples
    else:
        arr = np.asarray(dataset, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("dataset must be a non-empty 2-d array")
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ValueError("dataset must be binary")
        means = arr.mean(axis=0)
        n = arr.shape[0]
    return MeanEstimate(means, n)


def bias_from_means(model: RbmModel, means, epsilon: float) -> BaseDistribution:
    """Logit biases from estimated means after the epsilon cutoff rescale.

    Means are squeezed linearly into [epsilon, 1-epsilon] so the logits stay
    finite; the base then reproduces the rescaled means exactly:
    sigmoid(B_i) = epsilon + (1 - 2 epsilon) m_i.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    m = means.means if isinstance(means, MeanEstimate) else np.asarray(means, dtype=np.float64)
    m_cut = epsilon + (1.0 - 2.0 * epsilon) * m
    return BaseDistribution.for_model(model, logit(m_cut))


def build_base(
    model: RbmModel,
    spec: StrategySpec,
    dataset=None,
    rng: np.random.Generator | None = None,
) -> BaseDistribution:
    """Compose transpose (if set), mean estimation, and the cutoff logit map.

    The returned base belongs to the transposed model when spec.transpose is
    set; callers must anneal that same orientation.
    """
    work = transpose(model) if spec.transpose else model
    if spec.sampler is Sampler.UNIFORM:
        return BaseDistribution.uniform(work)
    if spec.sampler is Sampler.DATASET_MEANS:
        if dataset is None:
            raise ValueError("dataset strategy needs a dataset")
        return bias_from_means(work, means_from_dataset(dataset), spec.epsilon)
    if rng is None:
        raise ValueError(f"{spec.sampler.value} strategy needs an rng")
    return bias_from_means(work, estimate_means_by_sampling(work, spec, rng), spec.epsilon)


def with_transpose(spec: StrategySpec, flag: bool = True) -> StrategySpec:
    return replace(spec, transpose=flag)
