"""Compiled inner loops for the exact enumerator and the annealing engine.

Every kernel mirrors the saturation rules of :mod:`zest.numerics` exactly and
writes only to per-row (or per-block) output slots, so results are
bit-identical for any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_CUT = 40.0  # keep in sync with numerics.SOFTPLUS_CUTOFF


@njit(cache=True, inline="always")
def _softplus1(z: float) -> float:
    if z > _CUT:
        return z
    if z < -_CUT:
        return 0.0
    if z > 0.0:
        return z + np.log1p(np.exp(-z))
    return np.log1p(np.exp(z))


@njit(cache=True, inline="always")
def _bern1(u: float, z: float) -> float:
    if z > _CUT:
        return 1.0
    if z < -_CUT:
        return 0.0
    return 1.0 if u * np.exp(-z) < 1.0 - u else 0.0


@njit(cache=True, parallel=True)
def level_pair_and_hidden_bits(A, beta_k, beta_p, U, u_off, sp_k, sp_p, H):
    """One pass over the affine matrix A = x W^T + c for all chains.

    Accumulates the softplus row sums at the two inverse temperatures and
    samples the hidden bits at beta_k from uniforms U[i, u_off:u_off+n_h].
    """
    n, m = A.shape
    for i in prange(n):
        acc_k = 0.0
        acc_p = 0.0
        for j in range(m):
            a = A[i, j]
            zk = beta_k * a
            zp = beta_p * a
            if zk > _CUT:
                acc_k += zk
            elif zk >= -_CUT:
                acc_k += (zk if zk > 0.0 else 0.0) + np.log1p(np.exp(-abs(zk)))
            if zp > _CUT:
                acc_p += zp
            elif zp >= -_CUT:
                acc_p += (zp if zp > 0.0 else 0.0) + np.log1p(np.exp(-abs(zp)))
            H[i, j] = _bern1(U[i, u_off + j], zk)
        sp_k[i] = acc_k
        sp_p[i] = acc_p


@njit(cache=True, parallel=True)
def level_pair_rowsums(A, beta_k, beta_p, sp_k, sp_p):
    """Softplus row sums at two inverse temperatures (final step: no bits)."""
    n, m = A.shape
    for i in prange(n):
        acc_k = 0.0
        acc_p = 0.0
        for j in range(m):
            a = A[i, j]
            zk = beta_k * a
            zp = beta_p * a
            if zk > _CUT:
                acc_k += zk
            elif zk >= -_CUT:
                acc_k += (zk if zk > 0.0 else 0.0) + np.log1p(np.exp(-abs(zk)))
            if zp > _CUT:
                acc_p += zp
            elif zp >= -_CUT:
                acc_p += (zp if zp > 0.0 else 0.0) + np.log1p(np.exp(-abs(zp)))
        sp_k[i] = acc_k
        sp_p[i] = acc_p


@njit(cache=True, parallel=True)
def bits_from_logits(Z, U, u_off, out):
    """Bernoulli bits with P(1) = sigmoid(Z[i, j]) from U[i, u_off + j]."""
    n, m = Z.shape
    for i in prange(n):
        for j in range(m):
            out[i, j] = _bern1(U[i, u_off + j], Z[i, j])


@njit(cache=True, parallel=True)
def gray_block_scan(W, b, c, n_states, block_size, blk0, block_max, block_sum):
    """Streaming log-sum-exp of b.x + sum_i softplus(c_i + W_i.x) over the
    visible states covered by blocks blk0 .. blk0+len(block_max)-1 of the
    Gray-code sequence.

    Each anchor block recomputes its starting affine terms from the absolute
    Gray code and then applies the one-column-per-state incremental update,
    so per-state values do not depend on how blocks are scheduled across
    calls or threads. block_max/block_sum collect one streaming
    (max, sum e^(s-max)) pair per block; the caller merges them in ascending
    block order.
    """
    n_h, n_v = W.shape
    n_blocks = block_max.shape[0]
    for local in prange(n_blocks):
        t0 = (blk0 + local) * block_size
        t1 = min(t0 + block_size, n_states)
        g0 = t0 ^ (t0 >> 1)
        a = c.copy()
        tb = 0.0
        for j in range(n_v):
            if (g0 >> j) & 1:
                tb += b[j]
                for i in range(n_h):
                    a[i] += W[i, j]
        m = -np.inf
        acc = 0.0
        g = g0
        for t in range(t0, t1):
            if t != t0:
                # bit flipped between gray(t-1) and gray(t): lowest set bit of t
                tt = t
                j = 0
                while tt & 1 == 0:
                    tt >>= 1
                    j += 1
                g ^= 1 << j
                if (g >> j) & 1:
                    tb += b[j]
                    for i in range(n_h):
                        a[i] += W[i, j]
                else:
                    tb -= b[j]
                    for i in range(n_h):
                        a[i] -= W[i, j]
            s = tb
            for i in range(n_h):
                s += _softplus1(a[i])
            if s <= m:
                acc += np.exp(s - m)
            else:
                acc = acc * np.exp(m - s) + 1.0
                m = s
        block_max[local] = m
        block_sum[local] = acc


