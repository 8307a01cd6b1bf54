"""Objective terms for explainer training and their combination.

All terms are written against the autodiff ops: pass plain numpy values to
get floats, pass Vars to get a differentiable node. The contrastive term is
evaluated in log-space throughout, so it never overflows even for large
embedding dot products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _autodiff as ad
from .errors import ConformanceError, ValidationError

SIGN_MODES = ("as_derived", "as_printed")


@dataclass(frozen=True)
class LossWeights:
    """alpha scales the contrastive term, beta the MSE term, gamma the size term."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.003

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v}")
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be >= 0")
        if self.gamma <= 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")


def _check_lengths(*vecs):
    lengths = {ad.value_of(v).shape for v in vecs}
    if len(lengths) != 1:
        raise ConformanceError(f"embedding shapes differ: {sorted(lengths)}")


def info_nce_loss(h_mix_pos, h_mix_neg, h, h_pos, h_neg):
    """Contrastive loss over embedding dot products.

    -log[ exp(h_mix+ . h) / (exp(h_mix+ . h+) + exp(h_mix- . h-)) ],
    computed as logaddexp(b, c) - a.
    """
    _check_lengths(h_mix_pos, h_mix_neg, h, h_pos, h_neg)
    a = ad.dot(h_mix_pos, h)
    b = ad.dot(h_mix_pos, h_pos)
    c = ad.dot(h_mix_neg, h_neg)
    return ad.sub(ad.logaddexp(b, c), a)


def size_loss(mask, h_star, gamma: float):
    """Explanation-size penalty plus the embedding-norm term.

    gamma * (sum of mask weights over existing edges, each undirected edge
    once) - log(sigmoid(h* . h*)). The first argument is an EdgeMask, or the
    already-summed edge weights (scalar or Var) on the training path.
    """
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    from .graph_core import EdgeMask

    edge_weight_sum = mask.edge_sum() if isinstance(mask, EdgeMask) else mask
    q = ad.dot(h_star, h_star)
    # -log(sigmoid(q)) == log(1 + exp(-q)) == logaddexp(0, -q)
    return ad.add(ad.mul(edge_weight_sum, gamma), ad.logaddexp(0.0, ad.neg(q)))


def mse_loss(y_a, y_b):
    """Squared difference of two scalar predictions."""
    return ad.power(ad.sub(y_a, y_b), 2)


def overall_loss(size, nce, mse, w: LossWeights, sign_mode: str = "as_derived"):
    """Combine the three terms.

    as_derived (default): size + alpha*nce + beta*mse, the sign consistent
    with maximizing the mutual-information lower bound. as_printed flips the
    contrastive term's sign (size - alpha*nce + beta*mse) for fidelity runs.
    """
    if sign_mode not in SIGN_MODES:
        raise ValidationError(f"sign_mode must be one of {SIGN_MODES}, got {sign_mode!r}")
    nce_term = ad.mul(nce, w.alpha if sign_mode == "as_derived" else -w.alpha)
    return ad.add(ad.add(size, nce_term), ad.mul(mse, w.beta))
