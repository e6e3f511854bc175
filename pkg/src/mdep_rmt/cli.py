"""``mdep-rmt`` command-line front end.

Every command is silent on success apart from its declared output and exits
with 2 on configuration errors and 3 on numeric failures, printing a single
diagnostic line to stderr.
"""

import argparse
import csv
import glob
import json
import math
import os
import sys

import numpy as np
import yaml

from . import __version__
from .estimators import estimate_extremal_index
from .experiments import (ExperimentConfig, Frechet, compare_distributions, reference_for,
                          run_trials, top_matrix)
from .fields import generate_field, model_from_dict, theoretical_cluster
from .limit import sample_limit_spectrum_wigner, write_limit_csv
from .matrices import (block_decompose, read_matrix_bin, read_matrix_csv, truncate,
                       write_matrix_bin, write_matrix_csv)
from .rng import stream
from .spectra import (singular_values, sparse_truncated_cov_spectrum, sparse_truncated_spectrum,
                      sym_eig)

SCHEMA = "mdep-rmt/summary"
SCHEMA_VERSION = 1
EXIT_CONFIG, EXIT_NUMERIC = 2, 3
LIMIT_TAG = 31


class ConfigError(Exception):
    pass


class NumericError(Exception):
    pass


# --- config documents -------------------------------------------------------

def load_yaml(path):
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not a valid YAML document ({e.__class__.__name__})")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return doc


def load_config(path, seed=None, threads=None):
    doc = load_yaml(path)
    if seed is not None:
        doc["seed"] = seed
    if threads is not None:
        doc["threads"] = threads
    try:
        return ExperimentConfig.from_dict(doc)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"{path}: {e}")


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def _model_doc(doc):
    return doc["model"] if "model" in doc else doc


def _stamp(fingerprint):
    return f"mdep-rmt {__version__} config {fingerprint}"


def _write_rows(path, header, rows, stamp):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {stamp}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(float(x))


def _read_matrix(path):
    if path.endswith(".bin"):
        x, _ = read_matrix_bin(path)
        return x
    return read_matrix_csv(path)


# --- commands ---------------------------------------------------------------

def cmd_gen(args):
    doc = load_yaml(args.config)
    try:
        model = model_from_dict(_model_doc(doc))
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"{args.config}: {e}")
    n = args.n or doc.get("n")
    p = args.p or doc.get("p") or n
    if not n:
        raise ConfigError("field size missing: pass --n or set n in the config")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    sample = generate_field(model, int(p), int(n), seed)
    stamp = _stamp(sample.fingerprint)
    out = args.out or f"field.{args.format}"
    if args.format == "bin":
        write_matrix_bin(out, sample.values)
        meta = {"version": __version__, "fingerprint": sample.fingerprint,
                "model": model.to_dict(), "seed": seed, "shape": list(sample.shape)}
        with open(out + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    else:
        write_matrix_csv(out, sample.values, comment=stamp)


def _matrix_spectrum(x, args):
    p, n = x.shape
    symmetric = p == n and np.array_equal(x, x.T) and args.kind != "cov"
    if args.kind == "sym" and not symmetric:
        raise ConfigError("--kind sym needs a symmetric matrix")
    if args.sparse:
        if args.eps is None or args.r is None:
            raise ConfigError("--sparse needs --eps and --r")
        if p % args.r or n % args.r:
            raise ConfigError(f"--r {args.r} must divide both dimensions {x.shape}")
        above, _ = truncate(x, args.eps)
        blocks = block_decompose(above, args.r)
        res = (sparse_truncated_spectrum if symmetric else sparse_truncated_cov_spectrum)(
            above, blocks)
        if res.event_s:
            # remaining eigenvalues are zero; keep the full spectrum as on the dense path
            full = np.zeros(p)
            full[: res.values.size] = res.values
            return np.sort(full)[::-1], "sparse"
        x = above.to_dense()
    if symmetric:
        return sym_eig(x), "dense"
    s = singular_values(x)
    return s * s, "dense"


def cmd_eig(args):
    try:
        x = _read_matrix(args.matrix)
    except OSError as e:
        raise ConfigError(f"cannot read {args.matrix}: {e.strerror}")
    except ValueError as e:
        raise ConfigError(str(e))
    vals, path = _matrix_spectrum(x, args)
    print(f"# path {path}")
    for v in vals[: args.K]:
        print(_fmt(v))


def _trial_rows(cfg, results):
    header = ["trial", "seed", "path", "event_s"] + [f"top{k + 1}" for k in range(cfg.K)]
    if cfg.ensemble == "wigner":
        header += [f"bottom{k + 1}" for k in range(cfg.K)]
    rows = []
    for r in results:
        row = [r.trial, r.seed, r.path, "" if r.event_s is None else int(r.event_s)]
        row += [_fmt(v) for v in r.top]
        if r.bottom is not None:
            row += [_fmt(v) for v in r.bottom]
        rows.append(row)
    return header, rows


def _qq_table(path, comparison, stamp):
    with open(path, "w") as fh:
        fh.write(f"# {stamp}\n# level empirical reference\n")
        for level, a, b in comparison.qq:
            fh.write(f"{level:.2f} {a!r} {b!r}\n")


def summarize(cfg, results):
    paths = {}
    for r in results:
        paths[r.path] = paths.get(r.path, 0) + 1
    ev = [r.event_s for r in results if r.event_s is not None]
    summary = {"schema": SCHEMA, "schema_version": SCHEMA_VERSION, "version": __version__,
               "fingerprint": cfg.fingerprint(), "config": cfg.to_dict(), "reps": cfg.reps,
               "paths": paths, "event_s_rate": (sum(ev) / len(ev)) if ev else None,
               "comparisons": {}}
    summary["config"].pop("threads", None)
    return summary


def cmd_simulate(args):
    cfg = load_config(args.config, args.seed, args.threads)
    out = args.out or cfg.out or "."
    os.makedirs(out, exist_ok=True)
    results = run_trials(cfg)
    tops = top_matrix(results)
    if not np.all(np.isfinite(tops)):
        raise NumericError("non-finite eigenvalue in trial output")
    stamp = cfg.stamp()
    header, rows = _trial_rows(cfg, results)
    _write_rows(os.path.join(out, "trials.csv"), header, rows, stamp)

    summary = summarize(cfg, results)
    try:
        ref = reference_for(cfg)
    except ValueError:
        ref = None  # no closed-form cluster; compare later with an empirical reference
    if ref is not None:
        ks = []
        for k in range(cfg.K):
            c = compare_distributions(tops[:, k], ref[:, k])
            summary["comparisons"][f"top{k + 1}"] = c.to_dict()
            _qq_table(os.path.join(out, f"qq_top{k + 1}.dat"), c, stamp)
            ks.append(c.ks)
        if cfg.K >= 2:
            summary["comparisons"]["pair_max_ks"] = max(ks[:2])
        summary["reference"] = {"reps": int(ref.shape[0]), "mass": cfg.mass}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


def cmd_limit(args):
    cfg = load_config(args.config, args.seed)
    try:
        cluster = theoretical_cluster(cfg.field_model)
    except ValueError as e:
        raise ConfigError(str(e))
    reps = args.reps or 10 * cfg.reps
    rng = stream(cfg.seed, LIMIT_TAG)
    samples = [sample_limit_spectrum_wigner(cluster, cfg.alpha, cfg.K, rng, mass=cfg.mass)
               for _ in range(reps)]
    out = args.out or "limit.csv"
    write_limit_csv(out, samples, comment=cfg.stamp())


def cmd_theta(args):
    doc = load_yaml(args.config)
    try:
        model = model_from_dict(_model_doc(doc))
        n = int(doc["n"])
        r = int(doc.get("r") or math.ceil(n ** 0.3))
        u = float(doc.get("u", 1.0))
        reps = int(doc.get("reps", 1))
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"{args.config}: {e}")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    try:
        est = estimate_extremal_index(model, model.alpha, n, r, u, reps, seed,
                                      threads=args.threads or 1)
    except RuntimeError as e:
        raise NumericError(str(e))
    try:
        closed = f"{theoretical_cluster(model).theta:.6g}"
    except ValueError:
        closed = "n/a"
    print(f"theta_hat {est.theta:.6g} +- {est.stderr:.3g}  closed_form {closed}  "
          f"(n={n}, r={r}, u={u:g}, blocks={est.n_blocks}, exceedances={est.count})")


def _read_columns(path):
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    if not lines:
        raise ConfigError(f"{path}: no data")
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def load_sample(path, rank=1, kind="wigner"):
    """One value per trial from a trials CSV, a long-format limit CSV, or a one-column CSV."""
    header, rows = _read_columns(path)
    try:
        if f"top{rank}" in header:
            j = header.index(f"top{rank}")
            return np.array([float(r[j]) for r in rows])
        col = "wigner_point" if kind == "wigner" else "cov_point"
        if col in header and "trial" in header:
            t, j = header.index("trial"), header.index(col)
            by_trial = {}
            for r in rows:
                by_trial.setdefault(int(r[t]), []).append(float(r[j]))
            out = []
            for key in sorted(by_trial):
                v = sorted(by_trial[key], reverse=True)
                out.append(v[rank - 1] if len(v) >= rank else 0.0)
            return np.array(out)
        if len(header) == 1:
            return np.array([float(r[0]) for r in rows])
    except ValueError as e:
        raise ConfigError(f"{path}: {e}")
    raise ConfigError(f"{path}: no column top{rank}, {col}, or single value column")


def cmd_compare(args):
    emp = load_sample(args.empirical, args.rank, args.kind)
    if args.frechet:
        theta, alpha = args.frechet
        ref = Frechet(theta, alpha)
    elif args.reference:
        ref = load_sample(args.reference, args.rank, args.kind)
    else:
        raise ConfigError("give a reference CSV or --frechet THETA ALPHA")
    c = compare_distributions(emp, ref)
    report = {"schema": "mdep-rmt/compare", "schema_version": SCHEMA_VERSION,
              "version": __version__, "empirical": args.empirical,
              "reference": args.reference or {"frechet": list(args.frechet)},
              "rank": args.rank, **c.to_dict()}
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_report(args):
    paths = sorted(glob.glob(os.path.join(args.dir, "**", "summary.json"), recursive=True))
    if not paths:
        raise ConfigError(f"no summary.json under {args.dir}")
    print("fingerprint       ensemble    n     reps  event_s  ks_top1  ks_top2  dir")
    for p in paths:
        with open(p) as fh:
            s = json.load(fh)
        if s.get("schema") != SCHEMA:
            continue
        c = s.get("comparisons", {})
        ks1 = c.get("top1", {}).get("ks")
        ks2 = c.get("top2", {}).get("ks")
        ev = s.get("event_s_rate")
        cfg = s["config"]
        print(f"{s['fingerprint']}  {cfg['ensemble']:<10}  {cfg['n']:<5} {s['reps']:<5} "
              f"{'-' if ev is None else f'{ev:.3f}':<8} {'-' if ks1 is None else f'{ks1:.4f}':<8} "
              f"{'-' if ks2 is None else f'{ks2:.4f}':<8} {os.path.dirname(p)}")


# --- entry point --------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="mdep-rmt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mdep-rmt {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out")

    g = sub.add_parser("gen", help="write one field realization")
    common(g)
    g.add_argument("--p", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--format", choices=("csv", "bin"), default="csv")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eig", help="top eigenvalues of a stored matrix")
    e.add_argument("matrix")
    e.add_argument("--K", type=int, default=5)
    e.add_argument("--kind", choices=("auto", "sym", "cov"), default="auto")
    e.add_argument("--sparse", action="store_true")
    e.add_argument("--eps", type=float)
    e.add_argument("--r", type=int)
    e.set_defaults(func=cmd_eig)

    s = sub.add_parser("simulate", help="run trials; write trials.csv and summary.json")
    common(s)
    s.set_defaults(func=cmd_simulate)

    li = sub.add_parser("limit", help="sample the limit process; write a reference CSV")
    common(li)
    li.add_argument("--reps", type=int)
    li.set_defaults(func=cmd_limit)

    t = sub.add_parser("theta", help="estimate the extremal index")
    common(t)
    t.set_defaults(func=cmd_theta)

    c = sub.add_parser("compare", help="KS distance and QQ table")
    c.add_argument("empirical")
    c.add_argument("reference", nargs="?")
    c.add_argument("--frechet", nargs=2, type=float, metavar=("THETA", "ALPHA"))
    c.add_argument("--rank", type=int, default=1)
    c.add_argument("--kind", choices=("wigner", "cov"), default="wigner")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="tabulate summaries under a directory")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as e:
        print(f"mdep-rmt: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"mdep-rmt: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"mdep-rmt: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
