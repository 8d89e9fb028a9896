"""Per-graph encoder: a stack of convolution, ReLU and batchnorm blocks."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import parameter
from .init import linear

ENCODERS = ("gin", "gcn")
BN_STATS = ("graph", "running")


def gcn_propagator(adj: np.ndarray) -> np.ndarray:
    """Symmetrically normalized ``D^-1/2 (A + I) D^-1/2`` (batched over leading axes)."""
    a = np.asarray(adj, dtype=np.float64) + np.eye(adj.shape[-1])
    dinv = 1.0 / np.sqrt(a.sum(axis=-1))
    return a * dinv[..., :, None] * dinv[..., None, :]


def gcn_layer(x, prop, w, b=None):
    return ad.affine(ad.matmul(prop, x), w, b)


def gin_layer(x, adj, eps, mlp):
    """``MLP((1 + eps) x_v + sum of neighbour rows)``; ``mlp`` is (w1, b1, w2, b2)."""
    w1, b1, w2, b2 = mlp
    z = ad.add(ad.add(x, ad.matmul(adj, x)), ad.mul_scalar(x, eps))
    return ad.affine(ad.relu(ad.affine(z, w1, b1)), w2, b2)


def init_encoder(rng, params: dict, bn: dict, kind: str, k: int, d_in: int, d_out: int,
                 momentum: float = 0.9) -> None:
    if kind not in ENCODERS:
        raise ValueError(f"encoder must be one of {ENCODERS}, got {kind!r}")
    width = d_in
    for layer in range(k):
        pre = f"enc.{layer}"
        if kind == "gin":
            linear(rng, params, f"{pre}.mlp1", width, d_out)
            linear(rng, params, f"{pre}.mlp2", d_out, d_out)
            params[f"{pre}.eps"] = parameter(np.zeros((1, 1)), f"{pre}.eps")
        else:
            linear(rng, params, f"{pre}.gc", width, d_out)
        params[f"{pre}.bn.gamma"] = parameter(np.ones((1, d_out)), f"{pre}.bn.gamma")
        params[f"{pre}.bn.beta"] = parameter(np.zeros((1, d_out)), f"{pre}.bn.beta")
        bn[f"{pre}.bn"] = ad.BatchNormState.fresh(d_out, momentum)
        width = d_out


def encode(x, adj: np.ndarray, params: dict, bn: dict, kind: str, k: int,
           train: bool = False, update_stats: bool = True, mask=None, bn_stats: str = "graph"):
    """Returns ``(X_encode, A_encode)``; the adjacency passes through unchanged.

    ``x`` is ``n x d_in`` or a zero-padded ``B x n x d_in`` batch with node
    ``mask``; padded rows stay zero through every block.  With
    ``bn_stats="graph"`` every graph is normalized by its own statistics in
    both modes; ``"running"`` uses the running averages outside training.
    """
    if bn_stats not in BN_STATS:
        raise ValueError(f"bn_stats must be one of {BN_STATS}, got {bn_stats!r}")
    own_stats = train or bn_stats == "graph"
    if x.shape[-1] != _input_width(params, kind):
        raise ad.ShapeError(f"encoder expects {_input_width(params, kind)} input features, "
                            f"got {x.shape[-1]}")
    prop = gcn_propagator(adj) if kind == "gcn" else adj
    h = x
    for layer in range(k):
        pre = f"enc.{layer}"
        if kind == "gin":
            mlp = (params[f"{pre}.mlp1.w"], params[f"{pre}.mlp1.b"],
                   params[f"{pre}.mlp2.w"], params[f"{pre}.mlp2.b"])
            h = gin_layer(h, prop, params[f"{pre}.eps"], mlp)
        else:
            h = gcn_layer(h, prop, params[f"{pre}.gc.w"], params[f"{pre}.gc.b"])
        h = ad.batchnorm(ad.relu(h), params[f"{pre}.bn.gamma"], params[f"{pre}.bn.beta"],
                         bn[f"{pre}.bn"], own_stats, train and update_stats, mask)
    return h, adj


def _input_width(params: dict, kind: str) -> int:
    key = "enc.0.mlp1.w" if kind == "gin" else "enc.0.gc.w"
    return params[key].shape[0]
