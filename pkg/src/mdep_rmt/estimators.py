"""Monte Carlo estimators for the extremal index, block events and truncation error."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fields import generate_field, sample_block_exceedances
from .matrices import truncate
from .rng import derive_seed, stream
from .spectra import spectral_norm
from .tails import norm_constant

THETA_TAG, EVENT_TAG, NORM_TAG = 11, 12, 13


@dataclass
class ThetaEstimate:
    theta: float
    stderr: float
    count: int
    n_blocks: int
    u: float

    def __iter__(self):
        # unpacks as (theta_hat, stderr)
        return iter((self.theta, self.stderr))


def estimate_extremal_index(model, alpha, n, r, u=1.0, reps=1, seed=0, threads=1,
                            chunks=None):
    """``theta_hat = u^alpha k^2 p_hat`` with ``k = n / r``.

    ``p_hat`` is the fraction of ``reps * k^2`` fresh independent ``r x r``
    blocks whose max ``|X|`` exceeds ``a_{n^2} u``.  The work is split into
    ``chunks`` pieces, each with its own stream, so the result does not
    depend on ``threads``.
    """
    if u < 1.0:
        raise ValueError("u must be at least 1")
    if not 1 <= r < n:
        raise ValueError(f"need 1 <= r < n, got r={r}, n={n}")
    k = n / r
    n_blocks = int(round(reps * k * k))
    if n_blocks < 1:
        raise ValueError("no blocks to sample; increase reps")
    level = norm_constant(model.normalization(), n * n) * u
    chunks = chunks or min(64, n_blocks)
    sizes = [n_blocks // chunks + (i < n_blocks % chunks) for i in range(chunks)]

    def work(i):
        rng = stream(seed, THETA_TAG, n, r, i)
        return sample_block_exceedances(model, r, level, sizes[i], rng).count

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        count = sum(pool.map(work, range(chunks)))
    if count == 0:
        raise RuntimeError(f"no block exceeded a_(n^2) * u among {n_blocks} blocks; "
                           "use a smaller u or larger reps")
    p = count / n_blocks
    factor = u ** alpha * k * k
    return ThetaEstimate(factor * p, factor * math.sqrt(p * (1.0 - p) / n_blocks),
                         count, n_blocks, u)


def _row_events(bk, bl, k_blocks):
    """Per-matrix indicators from the block coordinates of nonzero entries."""
    occ = np.zeros((k_blocks, k_blocks), dtype=bool)
    occ[bk, bl] = True
    multi = bool(np.any(occ.sum(axis=1) > 1))
    diag = bool(np.any(np.diag(occ)))
    three = bool(np.any(occ[:, :-2] & occ[:, 1:-1] & occ[:, 2:])) if k_blocks >= 3 else False
    return multi, diag, three


def block_event_probs(spec, trunc, r, reps, seed=0, threads=1):
    """Frequencies over ``reps`` matrices of three block events of ``A^{>eps}``.

    ``p_multi_row``: some block row holds two or more nonzero blocks.
    ``p_diag_nonzero``: some diagonal block is nonzero.
    ``p_three_consecutive``: some block row holds three adjacent nonzero blocks.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    n = spec.n
    if n % r:
        raise ValueError(f"r={r} must divide n={n}")
    b = norm_constant(spec.seq, n * n)
    eps = trunc.sparse_level(n, b)
    kb = n // r

    def work(t):
        M = spec.sample(derive_seed(seed, EVENT_TAG, t))
        above, _ = truncate(M, eps)
        return _row_events(above.rows // r, above.cols // r, kb)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        hits = np.array(list(pool.map(work, range(reps))), dtype=float)
    p = hits.mean(axis=0)
    return {"p_multi_row": float(p[0]), "p_diag_nonzero": float(p[1]),
            "p_three_consecutive": float(p[2]), "reps": reps, "eps": eps, "r": r}


def truncated_norm_profile(spec, eps_list, reps, seed=0, threads=1, tol=1e-8):
    """Median spectral norm of the remainder ``A^{<=eps}`` for each ``eps``."""
    if reps < 1:
        raise ValueError("reps must be positive")
    eps_list = [float(e) for e in eps_list]

    def work(t):
        M = spec.sample(derive_seed(seed, NORM_TAG, t))
        out = []
        for e in eps_list:
            _, below = truncate(M, e)
            s, ok = spectral_norm(below, tol=tol, seed=t)
            out.append((s, ok))
        return out

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        res = list(pool.map(work, range(reps)))
    rows = []
    for j, e in enumerate(eps_list):
        norms = np.array([res[t][j][0] for t in range(reps)])
        conv = sum(res[t][j][1] for t in range(reps))
        rows.append({"eps": e, "median_norm": float(np.median(norms)),
                     "converged": int(conv), "reps": reps})
    return rows


# --- dependence diagnostics -----------------------------------------------

def bounded_transform(x, center=0.0):
    """``sign(x - c) min(|x - c|, 1)``; bounded, so correlations always exist."""
    y = np.asarray(x, dtype=float) - center
    return np.sign(y) * np.minimum(np.abs(y), 1.0)


def lagged_correlation(x, di, dj, center=0.0, stride=1):
    """Sample correlation of ``g(X_{i,t})`` and ``g(X_{i+di, t+dj})`` with ``g`` bounded.

    ``stride`` thins the base points ``(i, t)``; with stride at least twice the
    lag and m-dependent ``X`` the summands are independent.
    """
    if center == "median":
        center = float(np.median(x))
    g = bounded_transform(x, center)
    p, n = g.shape
    a = g[max(0, -di):p - max(0, di), max(0, -dj):n - max(0, dj)]
    b = g[max(0, di):p + min(0, di), max(0, dj):n + min(0, dj)]
    a, b = a[::stride, ::stride].ravel(), b[::stride, ::stride].ravel()
    return float(np.corrcoef(a, b)[0, 1]), a.size


def independence_zscores(model, size, seed, lag=None, center=0.0):
    """z-scores ``sqrt(N) rho_hat`` at every offset of sup-distance ``lag`` (default ``m + 1``).

    Base points are thinned to stride ``2 lag``, so under independence at
    that lag each score is approximately standard normal.
    """
    lag = model.m + 1 if lag is None else lag
    x = generate_field(model, size, size, seed).values
    out = {}
    for di in range(-lag, lag + 1):
        for dj in range(0, lag + 1):
            if max(abs(di), abs(dj)) != lag or (dj == 0 and di < 0):
                continue
            rho, count = lagged_correlation(x, di, dj, center, stride=2 * lag)
            out[(di, dj)] = rho * math.sqrt(count)
    return out
