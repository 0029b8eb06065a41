"""Exact log partition functions for small instances.

The main oracle marginalizes the hidden layer analytically and enumerates the
smaller layer in Gray-code order with incremental affine updates; a second,
independent oracle enumerates every joint state. Block-diagonal systems
factorize, so their exact value is the sum of per-block logs.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .numerics import log_sum_exp_merge, softplus
from .rbm import RbmModel, transpose

DEFAULT_MARGINAL_BITS = 26
DEFAULT_JOINT_BITS = 22

# States per anchor block. Fixed (not a tuning knob): anchors are recomputed
# from the absolute Gray code at multiples of this size, which pins every
# per-state value regardless of how blocks are distributed over workers.
_BLOCK = 4096


class EnumerationBudgetError(ValueError):
    """Raised when an instance needs more enumeration bits than allowed."""


@dataclass(frozen=True)
class ExactZResult:
    log_z: float
    enumerated_layer: str  # which layer of the *input* model was enumerated
    states_visited: int


def _merge_blocks(block_max: np.ndarray, block_sum: np.ndarray) -> float:
    acc = (-np.inf, 0.0)
    for m, s in zip(block_max, block_sum):
        acc = log_sum_exp_merge(acc, (float(m), float(s)))
    return acc[0] + float(np.log(acc[1]))


def exact_log_z(
    model: RbmModel,
    max_enum_bits: int = DEFAULT_MARGINAL_BITS,
    workers: int = 1,
) -> ExactZResult:
    """log Z by enumerating the smaller layer with the other marginalized.

    Enumeration runs over 2^min(n_visible, n_hidden) states; blocks of the
    Gray sequence may be computed by several workers, but the streaming
    reduction is merged in fixed block order so the result is independent of
    ``workers``.
    """
    enum_layer = "visible"
    m = model
    if m.n_hidden < m.n_visible:
        m = transpose(m)
        enum_layer = "hidden"
    if m.n_visible > max_enum_bits:
        raise EnumerationBudgetError(
            f"enumeration needs {m.n_visible} bits, budget is {max_enum_bits}"
        )
    n_states = 1 << m.n_visible
    n_blocks = (n_states + _BLOCK - 1) // _BLOCK
    block_max = np.empty(n_blocks)
    block_sum = np.empty(n_blocks)
    if workers > 1 and n_blocks > 1:
        ranges = np.array_split(np.arange(n_blocks), min(workers, n_blocks))

        def scan(blocks: np.ndarray) -> None:
            lo = int(blocks[0])
            hi = int(blocks[-1]) + 1
            sub_max = np.empty(hi - lo)
            sub_sum = np.empty(hi - lo)
            _kernels.gray_block_scan(
                m.weights, m.visible_bias, m.hidden_bias, n_states, _BLOCK, lo, sub_max, sub_sum
            )
            block_max[lo:hi] = sub_max
            block_sum[lo:hi] = sub_sum

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(scan, ranges))
    else:
        _kernels.gray_block_scan(
            m.weights, m.visible_bias, m.hidden_bias, n_states, _BLOCK, 0, block_max, block_sum
        )
    return ExactZResult(
        log_z=_merge_blocks(block_max, block_sum),
        enumerated_layer=enum_layer,
        states_visited=n_states,
    )


def _unpack_states(n_bits: int) -> np.ndarray:
    """All 2^n_bits binary vectors, one per row, bit j in column j."""
    codes = np.arange(1 << n_bits, dtype=np.uint32)
    return ((codes[:, None] >> np.arange(n_bits, dtype=np.uint32)[None, :]) & 1).astype(np.float64)


def exact_log_z_joint(model: RbmModel, max_bits: int = DEFAULT_JOINT_BITS) -> float:
    """log Z by brute force over every joint (x, h) state; test oracle only."""
    total_bits = model.n_visible + model.n_hidden
    if total_bits > max_bits:
        raise EnumerationBudgetError(
            f"joint enumeration needs {total_bits} bits, budget is {max_bits}"
        )
    X = _unpack_states(model.n_visible)
    H = _unpack_states(model.n_hidden)
    # -E(x, h) on the full grid, visible states along rows
    neg_e = (X @ model.visible_bias)[:, None]
    neg_e = neg_e + (H @ model.hidden_bias)[None, :]
    neg_e += (X @ model.weights_t) @ H.T
    m = float(neg_e.max())
    return m + float(np.log(np.exp(neg_e - m).sum()))


def exact_log_z_block(
    blocks: Sequence[RbmModel],
    max_enum_bits: int = DEFAULT_MARGINAL_BITS,
) -> float:
    """log Z of a block-diagonal assembly: the per-block logs add."""
    if not blocks:
        raise ValueError("need at least one block")
    return float(sum(exact_log_z(b, max_enum_bits).log_z for b in blocks))


def log_z_zero_coupling(model: RbmModel) -> float:
    """Closed form for W = 0: every unit factorizes, log Z = sum softplus(biases)."""
    if np.any(model.weights != 0.0):
        raise ValueError("closed form requires zero couplings")
    return float(softplus(model.visible_bias).sum() + softplus(model.hidden_bias).sum())
