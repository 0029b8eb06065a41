"""Synthetic exactly-solvable instances.

Gaussian-moment matrices draw one (mean, std) pair per matrix from hyper
Gaussians and fill the weights iid from it; biases reuse the realized pair
scaled by lambda. Block-diagonal assemblies stack such matrices on the
diagonal so the exact log Z is the sum of per-block logs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import derive_seed, philox_stream
from .rbm import RbmModel


@dataclass(frozen=True)
class GwgmParams:
    n_visible: int
    n_hidden: int
    mu_mu: float
    sigma_mu: float
    mu_sigma: float
    sigma_sigma: float
    lam: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_visible < 1 or self.n_hidden < 1:
            raise ValueError("layer sizes must be positive")
        if self.sigma_mu < 0 or self.sigma_sigma < 0:
            raise ValueError("hyper standard deviations must be >= 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n_visible": self.n_visible,
            "n_hidden": self.n_hidden,
            "mu_mu": self.mu_mu,
            "sigma_mu": self.sigma_mu,
            "mu_sigma": self.mu_sigma,
            "sigma_sigma": self.sigma_sigma,
            "lam": self.lam,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GwgmParams":
        return cls(
            n_visible=int(d["n_visible"]),
            n_hidden=int(d["n_hidden"]),
            mu_mu=float(d["mu_mu"]),
            sigma_mu=float(d["sigma_mu"]),
            mu_sigma=float(d["mu_sigma"]),
            sigma_sigma=float(d["sigma_sigma"]),
            lam=float(d.get("lam", 0.0)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class BmsParams:
    blocks: tuple[GwgmParams, ...]
    seed: int | None = None

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("need at least one block")
        object.__setattr__(self, "blocks", blocks)


def realized_moments(params: GwgmParams) -> tuple[float, float]:
    """The (mu_W, sigma_W) pair a given seed realizes; sigma clamps at zero."""
    rng = philox_stream(params.seed)
    mu_w = rng.normal(params.mu_mu, params.sigma_mu)
    sigma_w = max(0.0, rng.normal(params.mu_sigma, params.sigma_sigma))
    return float(mu_w), float(sigma_w)


def generate_gwgm(params: GwgmParams) -> RbmModel:
    """Draw a model: hyperdraw (mu_W, sigma_W), then weights and scaled biases.

    Draw order is fixed (mu_W, sigma_W, weights, visible bias, hidden bias)
    so a seed pins the instance bit for bit.
    """
    rng = philox_stream(params.seed)
    mu_w = rng.normal(params.mu_mu, params.sigma_mu)
    sigma_w = max(0.0, rng.normal(params.mu_sigma, params.sigma_sigma))
    w = rng.normal(mu_w, sigma_w, size=(params.n_hidden, params.n_visible))
    b = rng.normal(params.lam * mu_w, params.lam * sigma_w, size=params.n_visible)
    c = rng.normal(params.lam * mu_w, params.lam * sigma_w, size=params.n_hidden)
    return RbmModel(w, b, c)


def generate_bms(params: BmsParams) -> tuple[RbmModel, list[RbmModel]]:
    """Assemble a block-diagonal model; returns (assembly, blocks).

    When the master seed is set, per-block seeds derive from it; otherwise
    each block uses its own seed. Off-block couplings are exactly zero and
    the bias vectors concatenate in block order.
    """
    specs = params.blocks
    if params.seed is not None:
        specs = tuple(
            GwgmParams(**{**p.to_dict(), "seed": derive_seed(params.seed, i)})
            for i, p in enumerate(specs)
        )
    blocks = [generate_gwgm(p) for p in specs]
    n_v = sum(m.n_visible for m in blocks)
    n_h = sum(m.n_hidden for m in blocks)
    w = np.zeros((n_h, n_v))
    b = np.concatenate([m.visible_bias for m in blocks])
    c = np.concatenate([m.hidden_bias for m in blocks])
    i0 = j0 = 0
    for m in blocks:
        w[i0 : i0 + m.n_hidden, j0 : j0 + m.n_visible] = m.weights
        i0 += m.n_hidden
        j0 += m.n_visible
    return RbmModel(w, b, c), blocks
