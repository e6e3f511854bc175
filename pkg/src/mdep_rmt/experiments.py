"""Monte Carlo harness: simulate edge spectra and compare them with limit laws."""

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .fields import generate_field, model_from_dict, theoretical_cluster
from .limit import sample_limit_spectrum_wigner
from .matrices import (CooMatrix, TruncationParams, block_decompose, build_data, build_wigner,
                       default_truncation, truncate)
from .rng import derive_seed, stream
from .spectra import (singular_values, sparse_truncated_cov_spectrum,
                      sparse_truncated_spectrum, spectral_norm, sym_eig)
from .tails import norm_constant

ENSEMBLES = ("wigner", "covariance")
SOLVERS = ("dense", "sparse")
TRIAL_TAG, REF_TAG = 21, 22
# a Wigner matrix keeps n^2/2 independent entries but is normalized by a_{n^2}
WIGNER_TRIANGLE_MASS = 0.5
# standard deviation of the Kolmogorov limit law of sqrt(N) * KS
KOLMOGOROV_SD = 0.2603


@dataclass
class ExperimentConfig:
    """One simulation study.  ``model`` is a field-model document
    (see ``fields.model_from_dict``); ``truncation`` a ``TruncationParams``
    document or None for the default at this alpha."""

    model: dict
    ensemble: str = "wigner"
    n: int = 200
    p: Optional[int] = None
    K: int = 2
    reps: int = 100
    solver: str = "sparse"
    truncation: Optional[dict] = None
    seed: int = 0
    norm_method: str = "exact"
    reference_mass: Optional[float] = None
    weyl_check: bool = False
    threads: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"ensemble must be one of {ENSEMBLES}, got {self.ensemble!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.norm_method not in ("exact", "monte-carlo-quantile"):
            raise ValueError(f"norm_method must be 'exact' or 'monte-carlo-quantile', "
                             f"got {self.norm_method!r}")
        if int(self.reps) < 1:
            raise ValueError("reps must be at least 1")
        if int(self.n) < 2:
            raise ValueError("n must be at least 2")
        if int(self.K) < 1:
            raise ValueError("K must be at least 1")
        if self.ensemble == "wigner" and self.p not in (None, self.n):
            raise ValueError("Wigner ensembles are square; drop p")
        if self.p is not None and int(self.p) < 1:
            raise ValueError("p must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        self.field_model  # validates the model document
        self.trunc

    @property
    def field_model(self):
        return model_from_dict(self.model)

    @property
    def alpha(self):
        return float(self.model["noise"]["alpha"])

    @property
    def rho(self):
        return float(self.model["noise"].get("rho", 0.5))

    @property
    def rows(self):
        return self.n if self.ensemble == "wigner" or self.p is None else int(self.p)

    @property
    def gamma(self):
        return self.rows / self.n

    @property
    def trunc(self):
        if self.truncation is None:
            return default_truncation(self.alpha)
        d = dict(self.truncation)
        if d.get("mode") == "adaptive":
            d.setdefault("alpha", self.alpha)
        return TruncationParams.from_dict(d)

    @property
    def mass(self):
        if self.reference_mass is not None:
            return self.reference_mass
        return WIGNER_TRIANGLE_MASS if self.ensemble == "wigner" else 1.0

    def to_dict(self):
        d = {"model": self.model, "ensemble": self.ensemble, "n": int(self.n), "K": int(self.K),
             "reps": int(self.reps), "solver": self.solver, "seed": int(self.seed),
             "norm_method": self.norm_method, "weyl_check": bool(self.weyl_check),
             "threads": int(self.threads)}
        if self.p is not None:
            d["p"] = int(self.p)
        if self.truncation is not None:
            d["truncation"] = dict(self.truncation)
        if self.reference_mass is not None:
            d["reference_mass"] = float(self.reference_mass)
        if self.out is not None:
            d["out"] = self.out
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        if "model" not in d:
            raise ValueError("config needs a 'model' section")
        return cls(**d)

    def fingerprint(self):
        """Hash of everything that affects results (not threads or output paths)."""
        d = self.to_dict()
        d.pop("threads", None)
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def stamp(self):
        return f"mdep-rmt {__version__} config {self.fingerprint()}"


@dataclass
class TrialResult:
    """Top-K spectrum of one realization.

    ``top`` holds the K largest eigenvalues (descending).  For Wigner trials
    ``bottom`` holds the K smallest (ascending, most negative first).  The
    sparse path is taken only when it resolves at least K values; otherwise
    the trial falls back to a dense solve.
    """

    trial: int
    seed: int
    top: np.ndarray
    bottom: Optional[np.ndarray]
    path: str
    event_s: Optional[bool]
    wall_time: float = field(default=0.0, compare=False)
    remainder_norm: Optional[float] = None


def _pad(x, K):
    x = np.asarray(x, dtype=float)[:K]
    return np.concatenate([x, np.zeros(K - x.size)]) if x.size < K else x


def _padded_coo(above, r):
    """Grow the shape to multiples of ``r``; zero rows leave the nonzero spectrum unchanged."""
    p, n = above.shape
    shape = (-(-p // r) * r, -(-n // r) * r)
    return CooMatrix(above.rows, above.cols, above.vals, shape)


def _wigner_trial(cfg, model, seq, t):
    t0 = time.perf_counter()
    seed = derive_seed(cfg.seed, TRIAL_TAG, t)
    M = build_wigner(generate_field(model, cfg.n, cfg.n, seed), seq)
    K = cfg.K
    remainder = None
    path, event_s = "dense", None
    if cfg.solver == "sparse":
        trunc = cfg.trunc
        level = trunc.sparse_level(cfg.n, M.scale)
        above, below = truncate(M, level)
        blocks = block_decompose(_padded_coo(above, trunc.block_side(cfg.n)),
                                 trunc.block_side(cfg.n))
        res = sparse_truncated_spectrum(above, blocks)
        event_s = res.event_s
        if cfg.weyl_check:
            remainder = spectral_norm(below)[0]
        # fewer than K values above the level leaves the top K unresolved
        if res.event_s and np.count_nonzero(res.values > 0) >= K:
            vals = res.values
            top = _pad(vals[vals > 0], K)
            bottom = _pad(np.sort(vals[vals < 0]), K)
            return TrialResult(t, seed, top, bottom, "sparse", True,
                               time.perf_counter() - t0, remainder)
        path = "dense-fallback"
    eig = sym_eig(M)
    return TrialResult(t, seed, _pad(eig, K), _pad(eig[::-1], K), path, event_s,
                       time.perf_counter() - t0, remainder)


def _cov_trial(cfg, model, seq, t):
    t0 = time.perf_counter()
    seed = derive_seed(cfg.seed, TRIAL_TAG, t)
    A = build_data(generate_field(model, cfg.rows, cfg.n, seed), seq)
    K = cfg.K
    remainder = None
    path, event_s = "dense", None
    if cfg.solver == "sparse":
        trunc = cfg.trunc
        level = trunc.sparse_level(cfg.n, A.scale)
        r = trunc.block_side(cfg.n)
        above, below = truncate(A, level)
        blocks = block_decompose(_padded_coo(above, r), r)
        res = sparse_truncated_cov_spectrum(above, blocks)
        event_s = res.event_s
        if cfg.weyl_check:
            remainder = spectral_norm(below)[0]
        if res.event_s and res.values.size >= K:
            return TrialResult(t, seed, _pad(res.values, K), None, "sparse", True,
                               time.perf_counter() - t0, remainder)
        path = "dense-fallback"
    s = singular_values(A)
    return TrialResult(t, seed, _pad(s * s, K), None, path, event_s,
                       time.perf_counter() - t0, remainder)


def _run(cfg, trial_fn, threads):
    model = cfg.field_model
    seq = model.normalization(cfg.norm_method)
    # fill the cache before workers share the sequence
    norm_constant(seq, cfg.rows * cfg.n)
    threads = cfg.threads if threads is None else threads
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda t: trial_fn(cfg, model, seq, t), range(cfg.reps)))


def run_wigner_trials(cfg, threads=None):
    if cfg.ensemble != "wigner":
        raise ValueError("config is not a Wigner ensemble")
    return _run(cfg, _wigner_trial, threads)


def run_cov_trials(cfg, threads=None):
    if cfg.ensemble != "covariance":
        raise ValueError("config is not a covariance ensemble")
    return _run(cfg, _cov_trial, threads)


def run_trials(cfg, threads=None):
    fn = run_wigner_trials if cfg.ensemble == "wigner" else run_cov_trials
    return fn(cfg, threads)


def top_matrix(results):
    """Stack of ``top`` vectors, shape (reps, K)."""
    return np.array([r.top for r in results])


# --- limit references -----------------------------------------------------

@dataclass(frozen=True)
class Frechet:
    """``P(Y <= x) = exp(-c x^-alpha)`` for ``x > 0``."""

    c: float
    alpha: float

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x > 0, np.exp(-self.c * np.maximum(x, 1e-300) ** -self.alpha), 0.0)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        return (-np.log(q) / self.c) ** (-1.0 / self.alpha)


def reference_top_k(cluster, alpha, K, reps, seed, kind="wigner", mass=1.0):
    """``reps`` draws of the top-K limit points, shape (reps, K)."""
    rng = stream(seed, REF_TAG, K)
    out = np.empty((reps, K))
    for i in range(reps):
        s = sample_limit_spectrum_wigner(cluster, alpha, K, rng, mass=mass)
        out[i] = s.wigner if kind == "wigner" else s.cov
    return out


def reference_for(cfg, reps=None, cluster=None):
    """Limit draws matching ``cfg`` with ``10 * cfg.reps`` rows by default."""
    cluster = cluster or theoretical_cluster(cfg.field_model)
    reps = 10 * cfg.reps if reps is None else reps
    return reference_top_k(cluster, cfg.alpha, cfg.K, reps, cfg.seed, cfg.ensemble, cfg.mass)


@dataclass
class Comparison:
    ks: float
    pvalue: float
    n_emp: int
    n_ref: Optional[int]
    method: str
    qq: list

    def to_dict(self):
        return {"ks": self.ks, "pvalue": self.pvalue, "n_emp": self.n_emp,
                "n_ref": self.n_ref, "method": self.method, "qq": self.qq}


QQ_LEVELS = np.round(np.linspace(0.05, 0.95, 19), 2)


def compare_distributions(empirical, reference):
    """KS distance and a QQ table.

    ``reference`` is either a sample (two-sample KS) or an object with a
    ``cdf`` method (one-sample KS); a ``ppf`` method, when present, fills the
    reference column of the QQ table.
    """
    emp = np.asarray(empirical, dtype=float).ravel()
    if emp.size == 0:
        raise ValueError("empty empirical sample")
    if hasattr(reference, "cdf"):
        res = stats.kstest(emp, reference.cdf)
        ref_q = reference.ppf(QQ_LEVELS) if hasattr(reference, "ppf") else np.full(19, np.nan)
        n_ref, method = None, "one-sample"
    else:
        ref = np.asarray(reference, dtype=float).ravel()
        if ref.size == 0:
            raise ValueError("empty reference sample")
        res = stats.ks_2samp(emp, ref)
        ref_q = np.quantile(ref, QQ_LEVELS)
        n_ref, method = ref.size, "two-sample"
    emp_q = np.quantile(emp, QQ_LEVELS)
    qq = [(float(p), float(a), float(b)) for p, a, b in zip(QQ_LEVELS, emp_q, ref_q)]
    return Comparison(float(res.statistic), float(res.pvalue), emp.size, n_ref, method, qq)


def ks_stderr(n_emp, n_ref=None):
    n_eff = n_emp if n_ref is None else n_emp * n_ref / (n_emp + n_ref)
    return KOLMOGOROV_SD / math.sqrt(n_eff)


def convergence_sweep(cfg, n_list, reference=None, rank=0, threads=None):
    """KS of the rank-``rank`` eigenvalue against its limit law at each ``n``.

    ``reference`` may be an analytic law (``cdf``) or None, in which case
    ``10 * reps`` draws from the closed-form limit process are used.
    """
    if cfg.reps < 1:
        raise ValueError("reps must be at least 1")
    ref = reference
    if ref is None:
        ref = reference_for(cfg)[:, rank]
    rows = []
    for n in n_list:
        p = None if cfg.p is None else max(1, int(round(cfg.gamma * n)))
        c = replace(cfg, n=int(n), p=p)
        emp = top_matrix(run_trials(c, threads))[:, rank]
        cmp_ = compare_distributions(emp, ref)
        rows.append({"n": int(n), "ks": cmp_.ks, "stderr": ks_stderr(cmp_.n_emp, cmp_.n_ref),
                     "reps": c.reps})
    return rows
