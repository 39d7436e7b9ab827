"""Train reinforce and snis variants on the planted task and print R_test curves.

    python3 scripts/learning_quality.py --epochs 50 --csv quality.csv
"""
import argparse

from fastopl.bench import write_report_csv
from fastopl.experiments import QUALITY_RUNS, learning_quality, planted_task


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--lr", type=float, default=1e-4)
    ap.add_argument("--topk", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--runs", nargs="+", choices=list(QUALITY_RUNS), default=list(QUALITY_RUNS))
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    data = planted_task(seed=args.seed)
    reports = learning_quality({n: QUALITY_RUNS[n] for n in args.runs}, args.epochs, args.lr, args.topk,
                               args.seed, data, verbose=True)
    for name, rep in reports.items():
        curve = " ".join(f"{r.reward_test:.3f}" for r in rep.records[::5])
        print(f"{name:>12s}  {curve}")
    if args.csv:
        write_report_csv(args.csv, reports)


if __name__ == "__main__":
    main()
