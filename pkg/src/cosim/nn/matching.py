"""Cross-graph matching on (coarsened) graph pairs and cosine scoring."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from .init import linear, uniform


def init_matching(rng, params: dict, layers: int, d: int, d_final: int, n_inputs: int) -> None:
    if n_inputs < 1:
        raise ValueError("matching needs at least one of the X, I and M inputs enabled")
    for layer in range(layers):
        pre = f"match.{layer}"
        params[f"{pre}.gat.w"] = uniform(rng, f"{pre}.gat.w", (d, d), d)
        params[f"{pre}.gat.a_src"] = uniform(rng, f"{pre}.gat.a_src", (d, 1), 2 * d)
        params[f"{pre}.gat.a_dst"] = uniform(rng, f"{pre}.gat.a_dst", (d, 1), 2 * d)
        linear(rng, params, f"{pre}.fuse1", n_inputs * d, d)
        linear(rng, params, f"{pre}.fuse2", d, d)
    linear(rng, params, "match.agg.l", d, d_final)
    linear(rng, params, "match.agg.gate", d, d_final)
    linear(rng, params, "match.agg.g", d_final, d_final)


def gat(x, adj: np.ndarray, w, a_src, a_dst, slope: float = 0.2):
    """Single-head attention over each node's neighbourhood plus itself."""
    h = ad.matmul(x, w)
    logits = ad.leaky_relu(ad.outer_add(ad.matmul(h, a_src), ad.transpose(ad.matmul(h, a_dst))), slope)
    mask = (np.asarray(adj) != 0) | np.eye(adj.shape[-1], dtype=bool)
    return ad.matmul(ad.softmax_rows(logits, mask), h)


def cross_mask(x_i, x_j):
    """Row-softmax over ``x_j``'s nodes of the cosine affinities."""
    return ad.softmax_rows(ad.matmul(ad.l2_normalize_rows(x_i), ad.transpose(ad.l2_normalize_rows(x_j))))


def propagate(x_i, a_i: np.ndarray, x_j, params: dict, layer: int, flags=(True, True, True),
              slope: float = 0.2):
    """One propagator step for graph i given its partner j."""
    use_x, use_i, use_m = flags
    pre = f"match.{layer}"
    parts = []
    if use_x:
        parts.append(x_i)
    if use_i:
        x_gat = gat(x_i, a_i, params[f"{pre}.gat.w"], params[f"{pre}.gat.a_src"],
                    params[f"{pre}.gat.a_dst"], slope)
        neighbours = (np.asarray(a_i) != 0).astype(np.float64)
        parts.append(ad.matmul(neighbours, x_gat))
    if use_m:
        parts.append(ad.sub(x_i, ad.matmul(cross_mask(x_i, x_j), x_j)))
    if not parts:
        raise ValueError("all matching inputs disabled")
    z = parts[0] if len(parts) == 1 else ad.concat_cols(parts)
    hidden = ad.relu(ad.affine(z, params[f"{pre}.fuse1.w"], params[f"{pre}.fuse1.b"]))
    return ad.affine(hidden, params[f"{pre}.fuse2.w"], params[f"{pre}.fuse2.b"])


def aggregate(x_p, params: dict):
    """Gated node sum followed by a final affine map: ``1 x d_final``."""
    gate = ad.softmax_rows(ad.affine(x_p, params["match.agg.gate.w"], params["match.agg.gate.b"]))
    value = ad.affine(x_p, params["match.agg.l.w"], params["match.agg.l.b"])
    return ad.affine(ad.sum_rows(ad.mul(gate, value)), params["match.agg.g.w"], params["match.agg.g.b"])


def match_pair(x1, a1, x2, a2, params: dict, layers: int, flags=(True, True, True),
               slope: float = 0.2):
    """Run the propagators on both graphs, then aggregate each: ``(f1, f2)``."""
    for layer in range(layers):
        x1, x2 = (propagate(x1, a1, x2, params, layer, flags, slope),
                  propagate(x2, a2, x1, params, layer, flags, slope))
    return aggregate(x1, params), aggregate(x2, params)


def score(f1, f2):
    """Cosine of two ``1 x d`` embeddings as a ``1 x 1`` tensor (0 if either is zero)."""
    return ad.cosine_rows(f1, f2)


def pair_loss(scores, targets):
    return ad.mse(scores, targets)
