"""Adaptive pooling: centroids generated from the graph's mean feature.

Node-to-centroid cosine scores are normalized per centroid row, the ``h``
heads are mixed with learned weights, and the resulting ``n_pool x n``
assignment ``C`` coarsens features and adjacency.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import parameter
from .init import linear, uniform

POOL_NORMS = ("softmax", "shifted-l1")
GAMMA_MODES = ("softmax", "free")


def init_pool(rng, params: dict, h: int, n_pool: int, d_encode: int, d_pool: int,
              gamma: str = "softmax") -> None:
    linear(rng, params, "pool.centroid1", d_encode, d_encode)
    linear(rng, params, "pool.centroid2", d_encode, h * n_pool * d_encode)
    params["pool.w"] = uniform(rng, "pool.w", (d_encode, d_pool), d_encode)
    # softmax mode starts from equal head weights; free mode from the same mixture
    start = np.zeros((1, h)) if gamma == "softmax" else np.full((1, h), 1.0 / h)
    params["pool.gamma"] = parameter(start, "pool.gamma")


def centroids(x, params: dict, h: int, n_pool: int, counts=None):
    """Centroid batch flattened to ``(h * n_pool) x d_encode`` (per graph when batched)."""
    d = x.shape[-1]
    z = ad.relu(ad.affine(ad.mean_rows(x, counts), params["pool.centroid1.w"],
                          params["pool.centroid1.b"]))
    flat = ad.affine(z, params["pool.centroid2.w"], params["pool.centroid2.b"])
    return ad.reshape(flat, x.shape[:-2] + (h * n_pool, d))


def head_weights(params: dict, gamma: str = "softmax"):
    g = params["pool.gamma"]
    return ad.softmax_rows(g) if gamma == "softmax" else g


def assignment(k_flat, x, params: dict, h: int, n_pool: int, norm: str = "softmax",
               gamma: str = "softmax", mask=None):
    """``C`` of shape ``n_pool x n``: mixture over heads of row-normalized cosine scores.

    ``mask`` (``B x n x 1``) excludes zero-padded nodes from every row.
    """
    lead, n = x.shape[:-2], x.shape[-2]
    cols = None if mask is None else np.swapaxes(np.asarray(mask) > 0, -1, -2)
    cos = ad.matmul(ad.l2_normalize_rows(k_flat), ad.transpose(ad.l2_normalize_rows(x)))
    if norm == "softmax":
        c_heads = ad.softmax_rows(cos, cols)
    elif norm == "shifted-l1":
        shifted = ad.scale(cos, 0.5, 0.5)
        if cols is not None:
            shifted = ad.mul(shifted, cols.astype(np.float64))
        c_heads = ad.row_l1_normalize(shifted)
    else:
        raise ValueError(f"pool norm must be one of {POOL_NORMS}, got {norm!r}")
    if h == 1:
        return c_heads
    mixed = ad.matmul(head_weights(params, gamma), ad.reshape(c_heads, lead + (h, n_pool * n)))
    return ad.reshape(mixed, lead + (n_pool, n))


def coarsen(x, adj, c, w):
    """``X_pool = relu(C X W)`` and ``A_pool = relu(C A C^T)``."""
    x_pool = ad.relu(ad.matmul(ad.matmul(c, x), w))
    a_pool = ad.relu(ad.matmul(ad.matmul(c, adj), ad.transpose(c)))
    return x_pool, a_pool


def pool(x, adj, params: dict, h: int, n_pool: int, norm: str = "softmax",
         gamma: str = "softmax", mask=None):
    """Returns ``(X_pool, A_pool, C)``; batched inputs need the node ``mask``."""
    counts = None if mask is None else np.asarray(mask).sum(axis=-2, keepdims=True)
    k_flat = centroids(x, params, h, n_pool, counts)
    c = assignment(k_flat, x, params, h, n_pool, norm, gamma, mask)
    x_pool, a_pool = coarsen(x, adj, c, params["pool.w"])
    return x_pool, a_pool, c
