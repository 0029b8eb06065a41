"""Annealed importance sampling estimator of log Z for binary RBMs.

A run anneals visible-layer samples from a bias-only base distribution to the
target model along the linear inverse-temperature schedule, accumulating
per-chain log importance weights, and reduces them with a log-mean-exp.
Chains draw from independent counter-based streams keyed by
(seed, chain_index), so results are reproducible no matter how the chains
are batched or scheduled; the reduction always runs in ascending chain order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from threadpoolctl import threadpool_limits

from . import _kernels
from .numerics import LOG2, bernoulli_from_logits, philox_stream, softplus
from .rbm import RbmModel, as_bits

# Per-chain uniforms are pulled from the Philox streams in blocks of this
# many transition steps to bound buffer memory.
_RNG_BUFFER_BYTES = 64 << 20


class Schedule(str, Enum):
    LINEAR = "linear"


@dataclass(frozen=True)
class AisConfig:
    n_beta: int
    n_samples: int
    seed: int
    schedule: Schedule = Schedule.LINEAR

    def __post_init__(self):
        if self.n_beta < 1:
            raise ValueError("n_beta must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        object.__setattr__(self, "schedule", Schedule(self.schedule))


@dataclass(frozen=True, eq=False)
class BaseDistribution:
    """Visible-only bias vector B with its closed-form log Z_0.

    log Z_0 = n_hidden * log 2 + sum_j softplus(B_j): the hidden layer is
    free at inverse temperature zero and each visible unit factorizes.
    """

    B: np.ndarray
    log_z0: float

    def __post_init__(self):
        arr = np.array(self.B, dtype=np.float64)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("B must be a finite 1-d vector")
        arr.setflags(write=False)
        object.__setattr__(self, "B", arr)
        object.__setattr__(self, "log_z0", float(self.log_z0))

    @classmethod
    def for_model(cls, model: RbmModel, B) -> "BaseDistribution":
        B = np.asarray(B, dtype=np.float64)
        if B.shape != (model.n_visible,):
            raise ValueError(f"B has shape {B.shape}, expected ({model.n_visible},)")
        log_z0 = model.n_hidden * LOG2 + float(softplus(B).sum())
        return cls(B, log_z0)

    @classmethod
    def uniform(cls, model: RbmModel) -> "BaseDistribution":
        return cls.for_model(model, np.zeros(model.n_visible))


@dataclass(frozen=True, eq=False)
class AisResult:
    log_z_ais: float
    log_z0: float
    samples: np.ndarray  # Z0-normalized log weights, one per chain
    sample_mean: float
    sample_std: float
    config: AisConfig
    wall_time: float = field(compare=False)

    @property
    def n_samples(self) -> int:
        return self.samples.size


def log_mean_exp(samples) -> float:
    """log of the arithmetic mean of exp(samples), shifted by the running max."""
    s = np.asarray(samples, dtype=np.float64)
    if s.size == 0:
        raise ValueError("log_mean_exp of empty sample set")
    if not np.all(np.isfinite(s)):
        raise ValueError("log_mean_exp requires finite samples")
    m = float(s.max())
    return m + float(np.log(np.exp(s - m).mean()))


def relative_difference_xi(log_z_exact: float, log_z_ais: float) -> float:
    """|(log Z_exact - log Z_ais) / log Z_exact|."""
    if log_z_exact == 0.0:
        raise ValueError("relative difference undefined for log_z_exact = 0")
    return abs((log_z_exact - log_z_ais) / log_z_exact)


def log_unnorm_marginal_at_beta(model: RbmModel, base: BaseDistribution, beta: float, x) -> float:
    """log of the hidden-marginalized unnormalized weight at inverse temperature beta.

    Interpolates the bias-only base with the target model:
    (1-beta) B.x + beta b.x + sum_i softplus(beta (c_i + W_i.x)).
    At beta=0 this integrates to Z_0; at beta=1 it equals -F(x).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    x = as_bits(x, model.n_visible, "x")
    if base.B.shape != (model.n_visible,):
        raise ValueError("base dimension does not match model")
    act = beta * (model.hidden_bias + model.weights @ x)
    return float(
        (1.0 - beta) * (base.B @ x) + beta * (model.visible_bias @ x) + softplus(act).sum()
    )


def annealed_gibbs_step(
    model: RbmModel, base: BaseDistribution, beta: float, x, rng: np.random.Generator
) -> np.ndarray:
    """One Gibbs update that leaves the interpolated distribution invariant.

    Samples h_i ~ Bernoulli(sigmoid(beta (c_i + W_i.x))), then
    x_j ~ Bernoulli(sigmoid((1-beta) B_j + beta b_j + beta (W^T h)_j)).
    Consumes n_hidden then n_visible uniforms.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    x = as_bits(x, model.n_visible, "x")
    zh = beta * (model.hidden_bias + model.weights @ x)
    h = bernoulli_from_logits(rng.random(model.n_hidden), zh)
    zv = (1.0 - beta) * base.B + beta * model.visible_bias + beta * (model.weights_t @ h)
    return bernoulli_from_logits(rng.random(model.n_visible), zv)


def _check_base(model: RbmModel, base: BaseDistribution) -> None:
    if base.B.shape != (model.n_visible,):
        raise ValueError(
            f"base has {base.B.shape[0]} visible units, model has {model.n_visible}"
        )
    expected = model.n_hidden * LOG2 + float(softplus(base.B).sum())
    if abs(base.log_z0 - expected) > 1e-8 * max(1.0, abs(expected)):
        raise ValueError(
            "base log_z0 inconsistent with model layer sizes "
            f"(stored {base.log_z0!r}, expected {expected!r}); "
            "was the base built for the transposed model?"
        )


def run_ais(model: RbmModel, base: BaseDistribution, config: AisConfig) -> AisResult:
    """Estimate log Z with config.n_samples annealed chains.

    Every chain i: draw x from the base, then for k = 1..n_beta accumulate
    log p_k(x) - log p_{k-1}(x) of the unnormalized marginals and, before the
    next ratio, advance x with one Gibbs update at beta_k. The Z0-normalized
    samples s_i feed a log-mean-exp in ascending chain order.

    Chains run in lockstep over vectorized steps; any NaN/Inf sample aborts
    the run since a dropped chain would bias the estimator.
    """
    _check_base(model, base)
    n = config.n_beta
    n_s = config.n_samples
    n_v, n_h = model.n_visible, model.n_hidden
    W, Wt = model.weights, model.weights_t
    b, c, B = model.visible_bias, model.hidden_bias, base.B
    t_start = time.perf_counter()

    gens = [philox_stream(config.seed, i) for i in range(n_s)]
    stride = n_h + n_v
    block_steps = max(1, min(256, _RNG_BUFFER_BYTES // (8 * n_s * stride)))

    logw = np.zeros(n_s)
    A = np.empty((n_s, n_h))
    H = np.empty((n_s, n_h))
    AZ = np.empty((n_s, n_v))
    Xn = np.empty((n_s, n_v))
    sp_k = np.empty(n_s)
    sp_p = np.empty(n_s)

    with threadpool_limits(limits=1, user_api="blas"):
        U0 = np.empty((n_s, n_v))
        for i, g in enumerate(gens):
            U0[i] = g.random(n_v)
        X = bernoulli_from_logits(U0, np.broadcast_to(B, (n_s, n_v)))

        k = 1
        while k <= n:
            k_hi = min(k + block_steps, n + 1)
            n_trans = sum(1 for kk in range(k, k_hi) if kk < n)
            U = np.empty((n_s, n_trans * stride))
            for i, g in enumerate(gens):
                U[i] = g.random(n_trans * stride)
            pos = 0
            for kk in range(k, k_hi):
                bk = kk / n
                bp = (kk - 1) / n
                np.matmul(X, Wt, out=A)
                np.add(A, c, out=A)
                bx = X @ b
                Bx = X @ B
                if kk < n:
                    _kernels.level_pair_and_hidden_bits(A, bk, bp, U, pos * stride, sp_k, sp_p, H)
                else:
                    _kernels.level_pair_rowsums(A, bk, bp, sp_k, sp_p)
                logw += ((1.0 - bk) * Bx + bk * bx + sp_k) - ((1.0 - bp) * Bx + bp * bx + sp_p)
                if kk < n:
                    np.matmul(H, W, out=AZ)
                    AZ *= bk
                    AZ += (1.0 - bk) * B + bk * b
                    _kernels.bits_from_logits(AZ, U, pos * stride + n_h, Xn)
                    X, Xn = Xn, X
                    pos += 1
            k = k_hi

    s = logw + base.log_z0
    if not np.all(np.isfinite(s)):
        bad = int(np.flatnonzero(~np.isfinite(s))[0])
        raise FloatingPointError(f"non-finite AIS sample in chain {bad}")
    s.setflags(write=False)
    return AisResult(
        log_z_ais=log_mean_exp(s),
        log_z0=base.log_z0,
        samples=s,
        sample_mean=float(s.mean()),
        sample_std=float(s.std()),
        config=config,
        wall_time=time.perf_counter() - t_start,
    )
