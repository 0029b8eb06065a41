"""Shared numerical primitives: saturated softplus/sigmoid, Bernoulli sampling
from logits, streaming log-sum-exp accumulation, and seed derivation.

The saturation cutoff and the division-free Bernoulli rule are the single
source of truth for every sampler in the package; the compiled kernels in
``_kernels`` mirror them literally.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import expit, logit  # noqa: F401  (re-exported)

# Beyond |z| = 40, log1p(exp(-|z|)) is below one ulp of max(z, 0) for every
# z of interest and sigmoid(z) is unreachable by 53-bit uniforms.
SOFTPLUS_CUTOFF = 40.0

LOG2 = float(np.log(2.0))


def softplus(z):
    """Overflow-safe log(1 + e^z), elementwise."""
    z = np.asarray(z, dtype=np.float64)
    pos = np.maximum(z, 0.0)
    az = np.abs(z)
    tail = np.where(az <= SOFTPLUS_CUTOFF, np.log1p(np.exp(-az)), 0.0)
    return pos + tail


def sigmoid(z):
    """Logistic function, elementwise."""
    return expit(z)


def bernoulli_from_logits(u, z):
    """Sample bits with P(bit=1) = sigmoid(z) from uniforms u in [0, 1).

    Uses the division-free comparison u * e^(-z) < 1 - u, which is exact in
    real arithmetic and saturates past the cutoff where 53-bit uniforms can
    no longer land on the other side. The compiled kernels implement the
    identical rule so mixed numpy/kernel runs sample the same bits.
    """
    u = np.asarray(u, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    out = z > 0.0
    small = np.abs(z) <= SOFTPLUS_CUTOFF
    if np.any(small):
        zs = z[small]
        us = u[small]
        out = np.asarray(out)
        out[small] = us * np.exp(-zs) < 1.0 - us
    return out.astype(np.float64)


def log_sum_exp_merge(acc: tuple[float, float], block: tuple[float, float]) -> tuple[float, float]:
    """Merge two (running_max, sum_of_exp_shifted) pairs.

    Each pair represents sum(exp(s_i)) as sum_part * exp(max_part); merging
    in a fixed order keeps parallel reductions bit-reproducible.
    """
    m1, s1 = acc
    m2, s2 = block
    if s1 == 0.0:
        return m2, s2
    if s2 == 0.0:
        return m1, s1
    if m1 >= m2:
        return m1, s1 + s2 * np.exp(m2 - m1)
    return m2, s2 + s1 * np.exp(m1 - m2)


def derive_seed(*parts) -> int:
    """Derive a stable 64-bit seed from arbitrary string/int parts.

    blake2b keeps the derivation platform-independent, so per-row and
    per-chain streams do not depend on Python's randomized hash.
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def philox_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); streams never collide."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) + ((int(stream) & 0xFFFFFFFFFFFFFFFF) << 64)
    return np.random.Generator(np.random.Philox(key=key))
