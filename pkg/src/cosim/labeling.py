"""Ground-truth GED, similarity and class labels for graph pairs."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .ged import UNIT_COSTS, EditCostModel, GedBound, assignment_ged, beam_ged
from .graph import Dataset, Graph, LabeledPair, similarity_from_ged
from .synthgen import trim_bound

log = logging.getLogger(__name__)

LABEL_ALGORITHMS = ("beam", "hungarian", "vj")


class LabelingError(ValueError):
    pass


@dataclass(frozen=True)
class LabelConfig:
    algorithms: tuple = LABEL_ALGORITHMS
    beam_width: int = 100
    use_trim_bound: bool = True
    class_rule: str = "lineage"
    theta: float = 0.8
    pairs: str = "all"
    cost: EditCostModel = UNIT_COSTS

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        unknown = set(self.algorithms) - set(LABEL_ALGORITHMS)
        if unknown:
            raise LabelingError(f"unknown labeling algorithms {sorted(unknown)}")
        if self.class_rule not in ("lineage", "threshold"):
            raise LabelingError(f"class rule must be 'lineage' or 'threshold', got {self.class_rule!r}")
        if self.pairs not in ("all", "within-split"):
            raise LabelingError(f"pair enumeration must be 'all' or 'within-split', got {self.pairs!r}")
        if not self.algorithms and not self.use_trim_bound:
            raise LabelingError("no GED source configured")

    @classmethod
    def parse_class_rule(cls, text: str):
        """``lineage`` or ``threshold:0.8`` -> (rule, theta)."""
        if text == "lineage":
            return "lineage", 0.8
        if text.startswith("threshold:"):
            return "threshold", float(text.split(":", 1)[1])
        raise LabelingError(f"bad class rule {text!r}")


def ground_truth_ged(bounds, trim: int | None = None) -> tuple[int, str]:
    """Minimum over upper bounds; returns ``(ged, source)``.

    ``source`` names the single candidate attaining the minimum, or
    ``min-of-several`` when candidates tie.
    """
    cands: list[tuple[float, str]] = []
    for b in bounds:
        if isinstance(b, GedBound):
            cands.append((b.value, "exact" if b.kind == "exact" else b.algorithm))
        else:
            name, value = b
            cands.append((float(value), name))
    if trim is not None:
        cands.append((float(trim), "trim"))
    if not cands:
        raise LabelingError("ground truth needs at least one GED bound")
    best = min(v for v, _ in cands)
    winners = sorted({name for v, name in cands if v == best})
    return int(round(best)), winners[0] if len(winners) == 1 else "min-of-several"


def similarity(ged: float, n1: int, n2: int) -> float:
    if ged < 0 or n1 < 1 or n2 < 1:
        raise ValueError("similarity needs ged >= 0 and positive node counts")
    return similarity_from_ged(ged, n1, n2)


def class_label(ga: Graph, gb: Graph, rule: str = "lineage", sim: float | None = None,
                theta: float = 0.8) -> int:
    if rule == "lineage":
        if ga.lineage is None or gb.lineage is None:
            missing = ga.id if ga.lineage is None else gb.id
            raise LabelingError(f"graph {missing!r} has no lineage metadata")
        return 1 if ga.lineage == gb.lineage else -1
    if rule == "threshold":
        if sim is None:
            raise LabelingError("threshold rule needs a similarity value")
        return 1 if sim >= theta else -1
    raise LabelingError(f"unknown class rule {rule!r}")


def enumerate_pairs(ds: Dataset, mode: str = "all") -> list[tuple[str, str]]:
    if mode == "all":
        groups = [sorted(ds.graphs)]
    else:
        groups = [sorted(ids) for ids in ds.splits.values()]
    out = []
    for ids in groups:
        out.extend(itertools.combinations(ids, 2))
    return sorted(out)


def label_pair(ga: Graph, gb: Graph, cfg: LabelConfig) -> LabeledPair:
    bounds = []
    for algo in cfg.algorithms:
        if algo == "beam":
            bounds.append(beam_ged(ga, gb, cfg.cost, cfg.beam_width))
        else:
            bounds.append(assignment_ged(ga, gb, cfg.cost, algo))
    tb = trim_bound(ga, gb) if cfg.use_trim_bound else None
    if not bounds and tb is None:
        raise LabelingError(f"pair ({ga.id}, {gb.id}) has no trim bound and no algorithms configured")
    ged, source = ground_truth_ged(bounds, tb)
    sim = similarity(ged, ga.n, gb.n)
    cls = class_label(ga, gb, cfg.class_rule, sim, cfg.theta)
    return LabeledPair(ga.id, gb.id, ged, sim, cls, source)


def _label_chunk(args):
    graphs, keys, cfg = args
    return [label_pair(graphs[a], graphs[b], cfg) for a, b in keys]


def _read_checkpoint(path: Path, ds: Dataset, cfg: LabelConfig) -> dict:
    done = {}
    if not path.exists():
        return done
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            a, b = row["id_a"], row["id_b"]
            ged = int(row["ged"])
            ga, gb = ds.graphs[a], ds.graphs[b]
            sim = similarity(ged, ga.n, gb.n)
            cls = class_label(ga, gb, cfg.class_rule, sim, cfg.theta)
            done[(a, b)] = LabeledPair(a, b, ged, sim, cls, row["source"])
    return done


def label_dataset(ds: Dataset, cfg: LabelConfig = LabelConfig(), checkpoint=None,
                  workers: int = 1, chunk: int = 64, progress=None) -> Dataset:
    """Label every enumerated pair; resumes from an append-only checkpoint CSV."""
    keys = enumerate_pairs(ds, cfg.pairs)
    done: dict = {}
    writer = fh = None
    if checkpoint is not None:
        path = Path(checkpoint)
        done = _read_checkpoint(path, ds, cfg)
        fresh = not path.exists()
        fh = path.open("a", newline="")
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(["id_a", "id_b", "ged", "source"])
    todo = [k for k in keys if k not in done]
    if done:
        log.info("resuming labeling: %d of %d pairs already done", len(done), len(keys))
    chunks = [todo[i:i + chunk] for i in range(0, len(todo), chunk)]
    try:
        if workers > 1 and len(chunks) > 1:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(_label_chunk, [(ds.graphs, c, cfg) for c in chunks])
        else:
            pool = None
            results = (_label_chunk((ds.graphs, c, cfg)) for c in chunks)
        for n_chunks, labeled in enumerate(results, start=1):
            for p in labeled:
                done[p.key] = p
                if writer is not None:
                    writer.writerow([p.id_a, p.id_b, p.ged, p.ged_source])
            if fh is not None:
                fh.flush()
            if progress is not None:
                progress(min(len(done), len(keys)), len(keys))
        if pool is not None:
            pool.shutdown()
    finally:
        if fh is not None:
            fh.close()
    return ds.with_pairs(done[k] for k in keys)


def label_fraction_positive(ds: Dataset) -> float:
    if not ds.pairs:
        return math.nan
    return sum(p.cls == 1 for p in ds.pairs) / len(ds.pairs)
