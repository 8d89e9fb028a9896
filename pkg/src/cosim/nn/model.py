"""Full similarity model: encode, pool (optional), match, score."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .. import __version__
from .. import autodiff as ad
from ..graph import Graph, feature_matrix
from .encoding import BN_STATS, ENCODERS, encode, init_encoder
from .matching import init_matching, match_pair, score
from .pooling import GAMMA_MODES, POOL_NORMS, init_pool, pool

CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class ModelConfig:
    encoder: str = "gin"
    k: int = 3
    features: str = "degree-onehot"
    feature_cap: int = 16
    d_encode: int = 64
    pooling: bool = True
    h: int = 5
    n_pool: int = 10
    d_pool: int = 64
    pool_norm: str = "softmax"
    gamma: str = "softmax"
    match_layers: int = 1
    use_x: bool = True
    use_i: bool = True
    use_m: bool = True
    d_final: int = 64
    gat_slope: float = 0.2
    bn_momentum: float = 0.9
    bn_stats: str = "graph"
    seed: int = 0

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.bn_stats not in BN_STATS:
            raise ValueError(f"encoder.bn_stats must be one of {BN_STATS}, got {self.bn_stats!r}")
        if self.pool_norm not in POOL_NORMS:
            raise ValueError(f"pool.norm must be one of {POOL_NORMS}, got {self.pool_norm!r}")
        if self.gamma not in GAMMA_MODES:
            raise ValueError(f"pool gamma mode must be one of {GAMMA_MODES}, got {self.gamma!r}")
        if not (self.use_x or self.use_i or self.use_m):
            raise ValueError("at least one of match.use_x, match.use_i, match.use_m must be enabled")
        if min(self.k, self.d_encode, self.h, self.n_pool, self.d_pool, self.d_final,
               self.match_layers) < 1:
            raise ValueError("model sizes must be positive")
        if not self.pooling and self.d_pool != self.d_encode:
            raise ValueError("whole-graph matching needs d_pool == d_encode")

    @property
    def d_in(self) -> int:
        return 1 if self.features == "constant" else self.feature_cap + 1

    @property
    def flags(self) -> tuple:
        return (self.use_x, self.use_i, self.use_m)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)


class CoSimModel:
    """Parameters, batchnorm statistics and the forward pass.

    ``encode_calls`` counts per-graph encoder evaluations so callers can
    check that precomputed database representations are reused.
    """

    def __init__(self, cfg: ModelConfig = ModelConfig(), params: dict | None = None,
                 bn: dict | None = None):
        self.cfg = cfg
        self.encode_calls = 0
        self.zero_score_pairs = 0
        if params is None:
            rng = np.random.default_rng(cfg.seed)
            params, bn = {}, {}
            init_encoder(rng, params, bn, cfg.encoder, cfg.k, cfg.d_in, cfg.d_encode, cfg.bn_momentum)
            if cfg.pooling:
                init_pool(rng, params, cfg.h, cfg.n_pool, cfg.d_encode, cfg.d_pool, cfg.gamma)
            init_matching(rng, params, cfg.match_layers, cfg.d_pool, cfg.d_final, sum(cfg.flags))
        self.params = params
        self.bn = bn

    # -- forward pieces -------------------------------------------------

    def input_features(self, g: Graph) -> np.ndarray:
        if g.features is not None and g.features.shape[1] == self.cfg.d_in:
            return g.features
        return feature_matrix(g, self.cfg.features, self.cfg.feature_cap)

    def _stack(self, graphs):
        """Zero-padded ``(X, A, mask)``; mask is None when no padding is needed."""
        sizes = [g.n for g in graphs]
        n_max = max(sizes)
        b = len(graphs)
        x = np.zeros((b, n_max, self.cfg.d_in))
        adj = np.zeros((b, n_max, n_max))
        for i, g in enumerate(graphs):
            x[i, :g.n] = self.input_features(g)
            adj[i, :g.n, :g.n] = g.adjacency
        if min(sizes) == n_max:
            return x, adj, None
        mask = np.zeros((b, n_max, 1))
        for i, n in enumerate(sizes):
            mask[i, :n] = 1.0
        return x, adj, mask

    def encode(self, g: Graph, train: bool = False, update_stats: bool = True):
        """``(X_encode, A)`` for one graph as ``n x d_encode``."""
        self.encode_calls += 1
        x = ad.Tensor(self.input_features(g))
        return encode(x, g.adjacency, self.params, self.bn, self.cfg.encoder, self.cfg.k,
                      train, update_stats, bn_stats=self.cfg.bn_stats)

    def embed_batch(self, graphs, train: bool = False, update_stats: bool = True):
        """Coarsened ``(X_pool, A_pool)`` for a list of graphs, batched on axis 0."""
        if not self.cfg.pooling:
            raise ValueError("batched embedding needs pooling; whole-graph matching runs per pair")
        self.encode_calls += len(graphs)
        x, adj, mask = self._stack(graphs)
        h, _ = encode(ad.Tensor(x), adj, self.params, self.bn, self.cfg.encoder, self.cfg.k,
                      train, update_stats, mask, self.cfg.bn_stats)
        xp, ap, _ = pool(h, adj, self.params, self.cfg.h, self.cfg.n_pool, self.cfg.pool_norm,
                         self.cfg.gamma, mask)
        return xp, ap

    def embed(self, g: Graph, train: bool = False, update_stats: bool = True):
        """Per-graph representation fed to matching: ``(X, A)``, coarsened when pooling."""
        x, adj = self.encode(g, train, update_stats)
        if not self.cfg.pooling:
            return x, adj
        x_pool, a_pool, _ = pool(x, adj, self.params, self.cfg.h, self.cfg.n_pool,
                                 self.cfg.pool_norm, self.cfg.gamma)
        return x_pool, a_pool

    def pooled(self, g: Graph):
        """``(X_pool, A_pool, C)`` as arrays, eval mode."""
        with ad.no_grad():
            x, adj = self.encode(g, train=False)
            xp, ap, c = pool(x, adj, self.params, self.cfg.h, self.cfg.n_pool,
                             self.cfg.pool_norm, self.cfg.gamma)
        return xp.data, ap.data, c.data

    def match(self, e1, e2):
        """Score tensor (``... x 1 x 1``) for embedded graphs or embedded batches."""
        x1, a1 = e1
        x2, a2 = e2
        a1 = a1.data if isinstance(a1, ad.Tensor) else a1
        a2 = a2.data if isinstance(a2, ad.Tensor) else a2
        f1, f2 = match_pair(x1, a1, x2, a2, self.params, self.cfg.match_layers,
                            self.cfg.flags, self.cfg.gat_slope)
        s = score(f1, f2)
        zero = ~f1.data.any(axis=-1) | ~f2.data.any(axis=-1)
        self.zero_score_pairs += int(zero.sum())
        return s

    def forward(self, g1: Graph, g2: Graph, train: bool = False):
        return self.match(self.embed(g1, train), self.embed(g2, train))

    def forward_pairs(self, pairs, train: bool = False, update_stats: bool = True):
        """Scores for a list of ``(g1, g2)`` as a flat ``P``-vector tensor.

        With pooling, each distinct graph is embedded once and the whole batch
        is matched in one pass.
        """
        if not self.cfg.pooling:
            scores = [ad.reshape(self.forward(a, b, train), (1, 1)) for a, b in pairs]
            return ad.reshape(ad.concat_rows(scores), (len(pairs),))
        order: dict = {}
        graphs = []
        for a, b in pairs:
            for g in (a, b):
                if g.id not in order:
                    order[g.id] = len(graphs)
                    graphs.append(g)
        xp, ap = self.embed_batch(graphs, train, update_stats)
        ia = [order[a.id] for a, _ in pairs]
        ib = [order[b.id] for _, b in pairs]
        s = self.match((ad.take(xp, ia), ap.data[ia]), (ad.take(xp, ib), ap.data[ib]))
        return ad.reshape(s, (len(pairs),))

    def predict(self, g1: Graph, g2: Graph) -> float:
        with ad.no_grad():
            return self.forward(g1, g2).item()

    def predict_pairs(self, pairs, chunk: int = 256) -> np.ndarray:
        out = []
        with ad.no_grad():
            for i in range(0, len(pairs), chunk):
                out.append(self.forward_pairs(pairs[i:i + chunk]).data)
        return np.concatenate(out) if out else np.zeros(0)

    def precompute(self, g: Graph):
        """Eval-mode representation detached from any tape."""
        with ad.no_grad():
            x, a = self.embed(g, train=False)
        a = a.data if isinstance(a, ad.Tensor) else a
        return ad.Tensor(x.data), a

    def score_embedded(self, e1, e2) -> float:
        with ad.no_grad():
            return self.match(e1, e2).item()

    # -- state -----------------------------------------------------------

    def named_params(self) -> dict:
        return dict(self.params)

    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state_arrays(self) -> dict:
        out = {f"param/{k}": v.data for k, v in self.params.items()}
        for k, st in self.bn.items():
            out[f"bn/{k}/mean"] = st.mean
            out[f"bn/{k}/var"] = st.var
        return out

    def snapshot(self) -> dict:
        return {k: np.array(v, copy=True) for k, v in self.state_arrays().items()}

    def restore(self, snap: dict) -> None:
        for key, arr in snap.items():
            kind, rest = key.split("/", 1)
            if kind == "param":
                self.params[rest].data = np.array(arr, copy=True)
            else:
                name, stat = rest.rsplit("/", 1)
                setattr(self.bn[name], stat, np.array(arr, copy=True))

    def clone(self) -> "CoSimModel":
        m = CoSimModel(self.cfg, params={k: ad.parameter(v.data, k) for k, v in self.params.items()},
                       bn=copy.deepcopy(self.bn))
        return m

    def with_config(self, **changes) -> "CoSimModel":
        """Same parameters under a modified config (e.g. ``pooling=False``)."""
        cfg = ModelConfig.from_dict({**asdict(self.cfg), **changes})
        return CoSimModel(cfg, params=self.params, bn=self.bn)


def save_checkpoint(path, model: CoSimModel, meta: dict | None = None) -> None:
    header = {"format": CHECKPOINT_FORMAT, "version": __version__,
              "config": asdict(model.cfg), "meta": meta or {}}
    arrays = model.state_arrays()
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[CoSimModel, dict]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["__header__"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {header.get('format')!r}")
        cfg = ModelConfig.from_dict(header["config"])
        model = CoSimModel(cfg)
        snap = {k: z[k] for k in z.files if k != "__header__"}
    expected = set(model.state_arrays())
    if set(snap) != expected:
        missing = sorted(expected - set(snap))
        extra = sorted(set(snap) - expected)
        raise ValueError(f"checkpoint does not match its config (missing {missing[:3]}, extra {extra[:3]})")
    model.restore(snap)
    return model, header["meta"]
