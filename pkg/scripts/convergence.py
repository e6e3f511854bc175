"""KS distance of the top eigenvalue to its limit law over a range of n.

Usage: python scripts/convergence.py configs/iid_wigner.yaml --n 200 500 1000
"""

import argparse

from mdep_rmt.cli import load_config
from mdep_rmt.experiments import convergence_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--n", type=int, nargs="+", required=True)
    ap.add_argument("--reps", type=int)
    ap.add_argument("--rank", type=int, default=0, help="0-based rank of the eigenvalue")
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    cfg = load_config(args.config, threads=args.threads)
    if args.reps:
        cfg = type(cfg).from_dict({**cfg.to_dict(), "reps": args.reps})
    print("n      ks       stderr   reps")
    for row in convergence_sweep(cfg, args.n, rank=args.rank):
        print(f"{row['n']:<6} {row['ks']:.4f}   {row['stderr']:.4f}   {row['reps']}")


if __name__ == "__main__":
    main()
