"""Relative error of the SNIS covariance gradient against the exact oracle as S grows."""
import argparse

from fastopl.experiments import snis_error_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--items", type=int, default=100)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--epsilon", type=float, default=0.8)
    ap.add_argument("--topk", type=int, default=16)
    ap.add_argument("--replications", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = (100, 1_000, 10_000, 100_000)
    mean_err, rep_err = snis_error_curve(args.items, args.dim, args.epsilon, args.topk, sizes,
                                         args.replications, args.seed)
    print(f"{'S':>8s}  {'mean error':>10s}  {'error of mean':>13s}")
    for s in sizes:
        print(f"{s:>8d}  {rep_err[s]:10.4f}  {mean_err[s]:13.4f}")


if __name__ == "__main__":
    main()
