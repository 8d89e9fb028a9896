"""Command-line entry point: ``cosim <command> [options]``.

Exit status is 0 on success, 1 for invalid usage or input, 2 for runtime
failures.  Every command that writes an artifact also writes
``<artifact>.manifest.json`` beside it.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("cosim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    from .config import data_path, write_manifest
    from .graph import save_dataset
    from .synthgen import GenSpec, build_dataset

    t0 = time.time()
    spec = GenSpec(family=args.family, n=args.n, ba_m=args.ba_m, er_p=args.er_p,
                   n_basic=args.n_basic, per_basic=args.per_basic, ged_min=args.ged_min,
                   ged_max=args.ged_max, seed=args.seed, prefix=args.prefix)
    ds = build_dataset(spec)
    out = data_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    write_manifest(out, "gen", asdict(spec), [], [out], {"seed": args.seed}, t0)
    print(f"wrote {len(ds.graphs)} graphs, {len(ds.pairs)} trim-bounded pairs to {out}")
    return EXIT_OK


def cmd_label(args) -> int:
    from .config import data_path, write_manifest
    from .graph import load_dataset, save_dataset
    from .labeling import LabelConfig, label_dataset

    t0 = time.time()
    rule, theta = LabelConfig.parse_class_rule(args.class_rule)
    cfg = LabelConfig(algorithms=tuple(_csv_list(args.algos)), beam_width=args.beam_width,
                      use_trim_bound=args.use_trim, class_rule=rule, theta=theta, pairs=args.pairs)
    src = data_path(args.dataset)
    ds = load_dataset(src)
    ckpt = data_path(args.checkpoint) if args.checkpoint else None
    labeled = label_dataset(ds, cfg, checkpoint=ckpt, workers=args.workers)
    out = data_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(labeled, out)
    conf = {**asdict(cfg), "cost": asdict(cfg.cost), "workers": args.workers}
    write_manifest(out, "label", conf, [src], [out], {}, t0)
    print(f"labeled {len(labeled.pairs)} pairs -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from dataclasses import replace

    from .config import data_path, load_config, write_manifest
    from .graph import load_dataset
    from .nn import save_checkpoint
    from .train import train

    t0 = time.time()
    cfg, run = load_config(args.config)
    if args.iterations is not None:
        cfg = replace(cfg, iterations=args.iterations)
    dataset = args.dataset or run.get("dataset")
    out_dir = args.out or run.get("out")
    if not dataset or not out_dir:
        raise UsageError("train needs a dataset and an output directory (config [run] or flags)")
    src = data_path(dataset)
    out = data_path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(src)
    res = train(ds, cfg)
    ckpt = out / "model.npz"
    curve = out / "loss_curve.csv"
    save_checkpoint(ckpt, res.model, {"best_iteration": res.best_iteration, "best_val": res.best_val,
                                      "train": cfg.to_dict(), "dataset": str(src)})
    res.write_curve(curve)
    write_manifest(ckpt, "train", cfg.to_dict(), [src, args.config], [ckpt, curve],
                   {"seed": cfg.seed, "model_seed": cfg.model.seed}, t0)
    print(f"best validation MSE {res.best_val:.6g} at iteration {res.best_iteration}; "
          f"checkpoint {ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .config import data_path, write_manifest
    from .graph import load_dataset
    from .nn import load_checkpoint
    from .train import evaluate

    t0 = time.time()
    model, meta = load_checkpoint(data_path(args.ckpt))
    dataset = args.dataset or meta.get("dataset")
    if not dataset:
        raise UsageError("eval needs --dataset (the checkpoint records none)")
    src = data_path(dataset)
    ds = load_dataset(src)
    mode = args.mode or meta.get("train", {}).get("mode", "regression")
    rep = evaluate(model, ds, args.split, mode, args.theta)
    text = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    if args.out:
        out = data_path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
        write_manifest(out, "eval", {"split": args.split, "mode": mode, "theta": args.theta},
                       [data_path(args.ckpt), src], [out], {}, t0)
    print(text)
    return EXIT_OK


def _graphs_of(path):
    from .config import data_path
    from .graph import load_dataset

    ds = load_dataset(data_path(path))
    return [ds.graphs[k] for k in sorted(ds.graphs)]


def cmd_bench(args) -> int:
    from .bench import MODELS, bench_search
    from .config import data_path, write_manifest
    from .nn import load_checkpoint

    t0 = time.time()
    models = _csv_list(args.models)
    bad = set(models) - set(MODELS)
    if bad:
        raise UsageError(f"unknown models {sorted(bad)}; choose from {MODELS}")
    model, _ = load_checkpoint(data_path(args.ckpt))
    db = _graphs_of(args.db)
    queries = _graphs_of(args.queries)[: args.max_queries]
    rep = bench_search(model, db, queries, models, reps=args.reps, scenario=args.scenario or Path(args.db).stem)
    out = data_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out)
    write_manifest(out, "bench", {"models": models, "reps": args.reps, "max_queries": args.max_queries},
                   [data_path(args.ckpt), data_path(args.db), data_path(args.queries)], [out], {}, t0)
    for r in rep.rows:
        print(f"{r.model:8s} K={r.K} n={r.n:.1f} per-pair {r.per_pair_s * 1e3:.3f} ms "
              f"per-query {r.per_query_s * 1e3:.3f} ms")
    return EXIT_OK


def cmd_search(args) -> int:
    from .bench import search
    from .config import data_path
    from .graph import load_dataset
    from .nn import load_checkpoint

    model, _ = load_checkpoint(data_path(args.ckpt))
    db = load_dataset(data_path(args.db))
    if args.query_id:
        qds = load_dataset(data_path(args.queries)) if args.queries else db
        if args.query_id not in qds.graphs:
            raise UsageError(f"query id {args.query_id!r} not found")
        query = qds.graphs[args.query_id]
    elif args.queries:
        qds = load_dataset(data_path(args.queries))
        query = qds.graphs[sorted(qds.graphs)[0]]
    else:
        raise UsageError("search needs --query-id or --queries")
    stored = {gid: model.precompute(g) for gid, g in db.graphs.items()}
    hits = search(model, query, stored, args.k)
    print(json.dumps([{"id": gid, "score": s} for gid, s in hits], indent=2))
    return EXIT_OK


def cmd_ged(args) -> int:
    import itertools

    from .config import data_path, write_manifest
    from .ged import BudgetExceeded, compute_ged
    from .graph import load_dataset

    t0 = time.time()
    src = data_path(args.pairs)
    ds = load_dataset(src)
    keys = [p.key for p in ds.pairs] or list(itertools.combinations(sorted(ds.graphs), 2))
    out = data_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    width = None if args.beam_width is not None and args.beam_width <= 0 else args.beam_width
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id_a", "id_b", "value", "kind", "elapsed_ms"])
        for a, b in keys:
            try:
                r = compute_ged(ds.graphs[a], ds.graphs[b], args.algo, beam_width=width)
            except BudgetExceeded as exc:
                raise UsageError(str(exc)) from exc
            w.writerow([a, b, repr(float(r.value)), r.kind, f"{r.elapsed * 1e3:.4f}"])
    write_manifest(out, "ged", {"algo": args.algo, "beam_width": width if width else "unbounded"},
                   [src], [out], {}, t0)
    print(f"computed {len(keys)} {args.algo} values -> {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from . import autodiff as ad
    from .nn import CoSimModel, ModelConfig
    from .synthgen import gen_er

    rng = np.random.default_rng(args.seed)
    g1, g2 = gen_er(6, 0.5, rng, "gc_a"), gen_er(6, 0.5, rng, "gc_b")
    model = CoSimModel(ModelConfig(seed=args.seed))
    target = float(rng.uniform(0.2, 0.9))
    rep = ad.gradcheck(lambda: ad.mse(model.forward(g1, g2), [target]), model.params,
                       eps=args.eps, samples=args.samples, seed=args.seed)
    ok = rep.max_rel_err < args.tol
    print(json.dumps({"max_rel_err": rep.max_rel_err, "offending_param": rep.offending_param,
                      "offending_index": rep.offending_index, "checked": rep.checked,
                      "skipped_kinks": rep.skipped_kinks, "tolerance": args.tol, "passed": ok},
                     indent=2))
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_selftest(args) -> int:
    from . import selftest

    return EXIT_OK if selftest.run() else EXIT_RUNTIME


def cmd_report(args) -> int:
    """Merge bench CSVs into whitespace columns: n, then per-pair ms per model."""
    rows: dict[float, dict] = {}
    models: list[str] = []
    for path in args.bench:
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                n = float(r["n"])
                rows.setdefault(n, {})[r["model"]] = float(r["per_pair_s"]) * 1e3
                if r["model"] not in models:
                    models.append(r["model"])
    lines = ["# n " + " ".join(f"{m}_per_pair_ms" for m in models)]
    for n in sorted(rows):
        vals = [f"{rows[n][m]:.6f}" if m in rows[n] else "NaN" for m in models]
        lines.append(f"{n:.2f} " + " ".join(vals))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cosim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cosim {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="command")
    sub.required = True

    s = sub.add_parser("gen", help="generate a synthetic BA/ER dataset")
    s.add_argument("--family", choices=["ba", "er", "BA", "ER"], default="ba")
    s.add_argument("--n", type=int, default=60)
    s.add_argument("--ba-m", type=int, default=1)
    s.add_argument("--er-p", type=float, default=0.0205)
    s.add_argument("--n-basic", type=int, default=2)
    s.add_argument("--per-basic", type=int, default=99)
    s.add_argument("--ged-min", type=int, default=1)
    s.add_argument("--ged-max", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prefix", default=None, help="graph id prefix (default family+n)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("label", help="attach ground-truth GED, similarity and class to pairs")
    s.add_argument("--dataset", required=True)
    s.add_argument("--algos", default="beam,hungarian,vj")
    s.add_argument("--beam-width", type=int, default=100)
    s.add_argument("--use-trim", dest="use_trim", action="store_true", default=True)
    s.add_argument("--no-trim", dest="use_trim", action="store_false")
    s.add_argument("--class-rule", default="lineage", help="lineage | threshold:FLOAT")
    s.add_argument("--pairs", choices=["all", "within-split"], default="all")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--checkpoint", default=None, help="append-only CSV for resumable runs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("train", help="train a model from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--dataset", default=None)
    s.add_argument("--out", default=None, help="output directory")
    s.add_argument("--iterations", type=int, default=None)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--dataset", default=None)
    s.add_argument("--split", choices=["train", "val", "test"], default="test")
    s.add_argument("--mode", choices=["regression", "classification"], default=None)
    s.add_argument("--theta", type=float, default=0.5)
    s.add_argument("--workers", type=int, default=1, help="accepted for interface parity; single worker")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="time similarity search: cosim vs whole-graph matcher")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--db", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--models", default="cosim,matcher")
    s.add_argument("--reps", type=int, default=30)
    s.add_argument("--max-queries", type=int, default=3)
    s.add_argument("--scenario", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("search", help="top-k most similar database graphs for a query")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--db", required=True)
    s.add_argument("--queries", default=None)
    s.add_argument("--query-id", default=None)
    s.add_argument("--k", type=int, default=10)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("ged", help="compute classical GED values for dataset pairs")
    s.add_argument("--algo", choices=["exact", "beam", "hungarian", "vj"], required=True)
    s.add_argument("--beam-width", type=int, default=100, help="<= 0 means unbounded")
    s.add_argument("--pairs", required=True, help="dataset file; all graph pairs if it has none")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ged)

    s = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("selftest", help="run the built-in invariant checks")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("report", help="gnuplot-ready scaling table from bench CSVs")
    s.add_argument("bench", nargs="+")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    from .config import ConfigError
    from .graph import DatasetError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"cosim {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - map every other failure to the runtime code
        log.debug("runtime failure", exc_info=True)
        print(f"cosim {args.command}: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
