"""Command line entry point: prepare, index, train, eval, bench."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .data import ingest_interactions, load_prepared, prepare, save_prepared, sha256_file
from .matio import load_matrix, save_matrix
from .mips import IndexConfig, build_index, load_index
from .trainer import TrainConfig, evaluate, train

log = logging.getLogger("fastopl")


def _index_sidecar(path) -> Path:
    return Path(str(path) + ".json")


def cmd_prepare(args) -> int:
    ds = ingest_interactions(args.input, min_interactions=args.min_interactions)
    print(f"ingested {ds.n_users} users, {ds.n_items} items "
          f"({ds.n_dropped_users} users dropped, {ds.n_duplicates} duplicates removed)")
    data = prepare(ds, args.dim, args.seed, test_frac=args.test_frac)
    data.meta["provenance"]["input_sha256"] = sha256_file(args.input)
    data.meta["min_interactions"] = args.min_interactions
    save_prepared(data, args.out, ds)
    print(f"wrote {args.out}: P={data.meta['P']} L={args.dim} train={len(data.train)} test={len(data.test)}")
    return 0


def cmd_index(args) -> int:
    data = load_prepared(args.data)
    cfg = IndexConfig(args.variant, args.m, args.ef_construction, args.ef_search, args.seed)
    index = build_index(data.beta, cfg)
    index.save(args.out)
    _index_sidecar(args.out).write_text(json.dumps({
        "beta_sha256": data.meta["provenance"]["beta_sha256"],
        "variant": cfg.variant, "m": cfg.m, "ef_construction": cfg.ef_construction,
        "ef_search": cfg.ef_search, "seed": cfg.seed,
    }, indent=2), encoding="utf-8")
    print(f"wrote {cfg.variant} index over {index.n_items} items to {args.out}")
    return 0


def _load_index_for(data, path):
    index = load_index(path)
    if index.vectors.shape != data.beta.matrix.shape or not np.array_equal(index.vectors, data.beta.matrix):
        raise SystemExit(f"index {path} was not built from this dataset's embeddings")
    return index


def cmd_train(args) -> int:
    data = load_prepared(args.data)
    index = _load_index_for(data, args.index)
    cfg = TrainConfig(
        method=args.method, epsilon=args.epsilon, topk=args.topk, samples=args.samples,
        batch_size=args.batch, optimizer=args.optimizer, lr=args.lr, epochs=args.epochs, seed=args.seed,
        sampler=args.sampler, budget_seconds=args.budget_seconds,
    )
    theta, report = train(cfg, data.train, data.beta, index, data.test)
    bench.write_report_csv(args.report, {"run": report})
    params = args.params_out or str(Path(args.report).with_suffix(".theta.bin"))
    save_matrix(params, theta)
    for r in report.records:
        print(f"epoch {r.epoch:3d}  train {r.reward_train:.4f}  test {r.reward_test:.4f}  "
              f"t {r.wall_seconds:.2f}s  ess {r.ess_mean:.1f}")
    print(f"wrote {args.report} and {params}")
    return 0


def cmd_eval(args) -> int:
    data = load_prepared(args.data)
    index = _load_index_for(data, args.index)
    theta = load_matrix(args.params)
    print(f"R_test = {evaluate(theta, data.beta, index, data.test):.6f}")
    return 0


def cmd_bench(args) -> int:
    spec_path = Path(args.spec)
    spec = bench.parse_bench_config(spec_path.read_text(encoding="utf-8"))
    base = spec_path.parent
    data_dir = args.data or (base / spec.data if spec.data else None)
    index_path = args.index or (base / spec.index if spec.index else None)
    if data_dir is None or index_path is None:
        raise SystemExit("bench needs data and index paths (config or --data/--index)")
    data = load_prepared(data_dir)
    index = _load_index_for(data, index_path)
    if args.budget_seconds is not None:
        spec.runs = {n: bench.with_overrides(c, budget_seconds=args.budget_seconds) for n, c in spec.runs.items()}
    report = bench.benchmark(spec.runs, data.train, data.beta, index, data.test, spec.baseline)
    bench.write_report_csv(args.report, report.reports)
    bench.write_summary_csv(bench.summary_path(args.report), report)
    for row in report.summary:
        print(f"{row['name']:>16s}  {row['mean_epoch_seconds']:.4f}s/epoch  RS={row['speedup']:.2f}  "
              f"R_test={row['final_reward_test']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fastopl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="ingest interactions and build embeddings/contexts")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--min-interactions", type=int, default=2)
    s.add_argument("--test-frac", type=float, default=0.2)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("index", help="build a MIPS index over the item embeddings")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--m", type=int, default=16)
    s.add_argument("--ef-construction", type=int, default=200)
    s.add_argument("--ef-search", type=int, default=128)
    s.add_argument("--variant", choices=["graph", "exact"], default="graph")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("train", help="train a policy")
    s.add_argument("--data", required=True)
    s.add_argument("--index", required=True)
    s.add_argument("--method", choices=["exact", "reinforce", "snis"], required=True)
    s.add_argument("--epsilon", type=float, default=0.8)
    s.add_argument("--topk", type=int, default=256)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--batch", type=int, default=32)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--sampler", choices=["gumbel", "inverse-cdf"], default="gumbel")
    s.add_argument("--budget-seconds", type=float, default=None)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--params-out", default=None)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="compute R_test for saved parameters")
    s.add_argument("--data", required=True)
    s.add_argument("--index", required=True)
    s.add_argument("--params", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="compare several training configs")
    s.add_argument("--spec", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--data", default=None)
    s.add_argument("--index", default=None)
    s.add_argument("--budget-seconds", type=float, default=None)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
