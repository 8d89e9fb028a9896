"""Mini-batch training, optimizer steps and split evaluation."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from . import metrics
from .graph import Dataset
from .nn import CoSimModel, ModelConfig

log = logging.getLogger(__name__)

MODES = ("regression", "classification")


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    batch_size: int = 32
    lr: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 100
    mode: str = "regression"
    theta: float = 0.5
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = asdict(self.model)
        return d


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class OptimState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def step(params: dict, grads: dict, state: OptimState, cfg: TrainConfig) -> None:
    """Apply one Adam (or plain gradient-descent) update in place."""
    state.t += 1
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ad.ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.data.shape}")
        if cfg.optimizer == "gd":
            p.data = p.data - cfg.lr * g
            continue
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1 - cfg.beta2) * g * g
        state.m[name], state.v[name] = m, v
        mhat = m / (1 - cfg.beta1 ** state.t)
        vhat = v / (1 - cfg.beta2 ** state.t)
        p.data = p.data - cfg.lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)


# ---------------------------------------------------------------------------
# Training


def pair_targets(ds: Dataset, pairs, mode: str) -> np.ndarray:
    if mode == "classification":
        return np.array([float(p.cls) for p in pairs])
    return np.array([p.sim for p in pairs])


def _graph_pairs(ds: Dataset, pairs):
    return [(ds.graphs[p.id_a], ds.graphs[p.id_b]) for p in pairs]


@dataclass
class TrainResult:
    model: CoSimModel
    curve: list
    best_iteration: int
    best_val: float
    seconds: float

    def write_curve(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "train_loss", "val_mse"])
            for row in self.curve:
                val = "" if row["val_mse"] is None else repr(row["val_mse"])
                w.writerow([row["iteration"], repr(row["train_loss"]), val])


def validation_loss(model: CoSimModel, ds: Dataset, pairs, mode: str) -> float:
    pred = model.predict_pairs(_graph_pairs(ds, pairs))
    return metrics.mse(pred, pair_targets(ds, pairs, mode))


def train(ds: Dataset, cfg: TrainConfig = TrainConfig(), model: CoSimModel | None = None,
          progress=None) -> TrainResult:
    """Train on training-split pairs; returns the best-on-validation model."""
    train_pairs = list(ds.pairs_in_split("train"))
    val_pairs = list(ds.pairs_in_split("val"))
    if not train_pairs:
        raise ValueError("dataset has no labeled training pairs")
    if not val_pairs:
        raise ValueError("dataset has no labeled validation pairs")
    model = model if model is not None else CoSimModel(cfg.model)
    targets = pair_targets(ds, train_pairs, cfg.mode)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A1]))
    opt = OptimState()
    curve = []
    best_val, best_iter, best_snap = math.inf, 0, model.snapshot()
    t0 = time.perf_counter()
    for it in range(1, cfg.iterations + 1):
        idx = rng.integers(len(train_pairs), size=cfg.batch_size)
        batch = _graph_pairs(ds, [train_pairs[i] for i in idx])
        with ad.Tape() as tape:
            loss = ad.mse(model.forward_pairs(batch, train=True), targets[idx])
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(it, value)
        step(model.params, tape.backward(loss, model.params), opt, cfg)
        val = None
        if it % cfg.eval_every == 0 or it == cfg.iterations:
            val = validation_loss(model, ds, val_pairs, cfg.mode)
            if val < best_val:
                best_val, best_iter, best_snap = val, it, model.snapshot()
            log.info("iter %d train %.5f val %.5f", it, value, val)
        curve.append({"iteration": it, "train_loss": value, "val_mse": val})
        if progress is not None:
            progress(it, value, val)
    model.restore(best_snap)
    return TrainResult(model, curve, best_iter, best_val, time.perf_counter() - t0)


def evaluate(model: CoSimModel, ds: Dataset, split: str = "test", mode: str = "regression",
             theta: float = 0.5, ks=metrics.DEFAULT_KS) -> metrics.MetricsReport:
    """Metrics over the labeled pairs whose endpoints both lie in ``split``."""
    pairs = sorted(ds.pairs_in_split(split), key=lambda p: p.key)
    if not pairs:
        raise ValueError(f"split {split!r} has no labeled pairs")
    t0 = time.perf_counter()
    pred = model.predict_pairs(_graph_pairs(ds, pairs))
    per_pair = (time.perf_counter() - t0) / len(pairs)
    truth = pair_targets(ds, pairs, mode)
    classes = [p.cls for p in pairs]
    return metrics.report([p.key for p in pairs], pred, truth, classes, theta, ks, per_pair)
