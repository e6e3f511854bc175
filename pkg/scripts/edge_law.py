"""Top eigenvalues of a configured ensemble against the limit reference.

Runs the trials of a config, then prints the KS distance and a short QQ
table for each of the top K eigenvalues.
"""

import argparse

from mdep_rmt.cli import load_config
from mdep_rmt.experiments import compare_distributions, reference_for, run_trials, top_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    cfg = load_config(args.config, args.seed, args.threads)
    results = run_trials(cfg)
    tops = top_matrix(results)
    ref = reference_for(cfg)
    paths = {}
    for r in results:
        paths[r.path] = paths.get(r.path, 0) + 1
    print(f"{cfg.ensemble} n={cfg.n} reps={cfg.reps} paths={paths} reference mass={cfg.mass}")
    for k in range(cfg.K):
        c = compare_distributions(tops[:, k], ref[:, k])
        print(f"top{k + 1}: KS {c.ks:.4f}  (p={c.pvalue:.3g})")
        for level, emp, lim in c.qq[::3]:
            print(f"  q{level:.2f}  empirical {emp:.4f}  limit {lim:.4f}")


if __name__ == "__main__":
    main()
