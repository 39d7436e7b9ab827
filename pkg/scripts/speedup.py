"""Per-epoch wall time of reinforce vs snis over catalog sizes.

    python3 scripts/speedup.py --sizes 10000 100000
    python3 scripts/speedup.py --mips-only --sizes 500000   # index build/query scaling only
"""
import argparse
import time

import numpy as np

from fastopl.experiments import time_methods
from fastopl.mips import IndexConfig, build_index, recall_at_k
from fastopl.synth import gaussian_catalog


def mips_scaling(sizes, dim, seed):
    rng = np.random.default_rng(seed)
    for p in sizes:
        beta = gaussian_catalog(p, dim, seed)
        t0 = time.perf_counter()
        index = build_index(beta, IndexConfig(seed=seed))
        build = time.perf_counter() - t0
        q = rng.standard_normal((100, dim))
        t0 = time.perf_counter()
        index.top_k_batch(q, 256)
        per_query = (time.perf_counter() - t0) / len(q)
        print(f"P={p:>8d}  build {build:7.1f}s  query {per_query * 1e3:6.2f}ms  "
              f"recall@256 {recall_at_k(index, q[:20], 256):.3f}", flush=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--users", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--topk", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mips-only", action="store_true")
    args = ap.parse_args()
    if args.mips_only:
        mips_scaling(args.sizes, args.dim, args.seed)
        return
    for p in args.sizes:
        res = time_methods(p, args.dim, args.users, args.epochs, args.topk, args.samples, seed=args.seed)
        r, s = res["reinforce"].mean_epoch_seconds, res["snis"].mean_epoch_seconds
        print(f"P={p:>8d}  reinforce {r:.3f}s/epoch  snis {s:.3f}s/epoch  speedup {r / s:.1f}x", flush=True)


if __name__ == "__main__":
    main()
