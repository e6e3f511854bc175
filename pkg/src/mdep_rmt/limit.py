"""Samplers for the limiting Poisson cluster processes of the edge spectrum.

Cluster centers are the points ``P_1 > P_2 > ...`` of a Poisson process on
``(0, inf)`` with mean measure ``mass * theta * y^-alpha`` of ``(y, inf)``.
Each center carries the singular values of an independent cluster shape Q;
Wigner limit points are ``P_i sigma_ij`` and covariance limit points are
``P_i^2 sigma_ij^2``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .cluster import ClusterShapeSpec
from .fields import sample_block_exceedances
from .spectra import batch_singular_values


def sample_ppp_points(theta, alpha, count, rng, mass=1.0):
    """The ``count`` largest points, descending: ``P_i = (Gamma_i / (mass theta))^(-1/alpha)``."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if count < 1:
        raise ValueError("need at least one point")
    gamma = np.cumsum(rng.standard_exponential(int(count)))
    return (gamma / (mass * theta)) ** (-1.0 / alpha)


@dataclass
class LimitSample:
    """One draw of the top of the limiting point process.

    ``points`` are the cluster centers used (descending) and ``sv[i]`` the
    singular values attached to ``points[i]``.  ``wigner`` and ``cov`` are the
    top-K points of the two limit processes, zero-padded when ``padded``.
    ``certified`` is True when the stopping rule proved that no further
    center could enter the top K.
    """

    points: np.ndarray
    sv: np.ndarray
    wigner: np.ndarray
    cov: np.ndarray
    K: int
    certified: bool = True
    padded: bool = False
    cutoff: str = "top-K"

    def rows(self, trial=0):
        """Long-format rows: trial, i, j, P_i, sigma_ij, wigner_point, cov_point."""
        out = []
        for i, p in enumerate(self.points):
            for j, s in enumerate(self.sv[i]):
                if s > 0:
                    out.append((trial, i + 1, j + 1, p, s, p * s, (p * s) ** 2))
        return out


def _top_k(cluster, alpha, K, rng, mass, max_points, batch):
    if K < 1:
        raise ValueError("K must be at least 1")
    bound = cluster.sigma_bound
    gamma0 = 0.0
    pts, svs = [], []
    best = np.empty(0)
    certified = False
    drawn = 0
    while drawn < max_points:
        size = min(batch, max_points - drawn)
        gamma = gamma0 + np.cumsum(rng.standard_exponential(size))
        gamma0 = gamma[-1]
        p = (gamma / (mass * cluster.theta)) ** (-1.0 / alpha)
        s = cluster.sample_sv(rng, size)
        pts.append(p)
        svs.append(s)
        drawn += size
        prod = (p[:, None] * s).ravel()
        best = np.sort(np.concatenate([best, prod[prod > 0]]))[::-1][:K]
        # later centers are below p[-1], so their products stay below p[-1] * bound
        if best.size == K and p[-1] * bound < best[-1]:
            certified = True
            break
    padded = best.size < K
    if padded:
        best = np.concatenate([best, np.zeros(K - best.size)])
    return np.concatenate(pts), np.concatenate(svs), best, certified, padded


def sample_limit_spectrum_wigner(cluster, alpha, K, rng, mass=1.0, max_points=100_000,
                                 batch=None):
    """Top-K points of ``sum_i sum_j delta_{P_i sigma_ij}``.

    ``mass`` scales the center intensity; a Wigner matrix built from the
    upper triangle of an ``n x n`` field and normalized by ``a_{n^2}`` sees
    only half of the ``n^2`` entries, which corresponds to ``mass = 1/2``.
    """
    batch = batch or max(2 * K, 16)
    P, sv, top, cert, pad = _top_k(cluster, alpha, K, rng, mass, max_points, batch)
    return LimitSample(P, sv, top, top ** 2, K, cert, pad)


def sample_limit_spectrum_cov(cluster, alpha, K, rng, mass=1.0, max_points=100_000, batch=None):
    """Top-K points of ``sum_i sum_j delta_{P_i^2 sigma_ij^2}``.

    Squaring is monotone on nonnegative points, so these are the squares of
    the Wigner construction driven by the same stream.
    """
    return sample_limit_spectrum_wigner(cluster, alpha, K, rng, mass, max_points, batch)


def write_limit_csv(path, samples, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["trial", "i", "j", "P_i", "sigma_ij", "wigner_point", "cov_point"])
        for t, s in enumerate(samples):
            for row in s.rows(t):
                w.writerow([row[0], row[1], row[2]] + [repr(float(v)) for v in row[3:]])


# --- empirical cluster shapes ---------------------------------------------

def dominant_window(x, m):
    """The ``(2m+1) x (2m+1)`` window of ``x`` centered at its largest ``|x|``, zero padded."""
    w = 2 * m + 1
    i, j = np.unravel_index(int(np.argmax(np.abs(x))), x.shape)
    pad = np.pad(x, m)
    return pad[i:i + w, j:j + w]


@dataclass
class EmpiricalCluster:
    spec: ClusterShapeSpec
    windows: np.ndarray = field(repr=False)
    sv: np.ndarray = field(repr=False)
    accepted: int = 0
    tried: int = 0

    @property
    def acceptance_rate(self):
        return self.accepted / self.tried


def empirical_cluster_sampler(model, alpha, r, u, a, max_rejects, rng, n_samples=2000,
                              chunk=100_000):
    """Cluster shape and extremal index from blocks whose max exceeds ``a u``.

    Accepted ``r x r`` blocks are divided by their own sup-norm; singular
    values come from the dominant ``(2m+1)``-window, which makes them
    invariant to where the cluster sits in the block.  With tail constant
    ``C`` of the field marginal, ``theta_hat = (a u)^alpha p_hat / (C r^2)``.
    """
    if u < 1.0:
        raise ValueError("u must be at least 1")
    if r <= model.m:
        raise ValueError(f"block side r={r} must exceed the dependence range m={model.m}")
    level = a * u
    windows, tried, accepted = [], 0, 0
    while len(windows) < n_samples:
        if tried >= max_rejects:
            rate = accepted / max(tried, 1)
            raise RuntimeError(f"only {accepted} of {n_samples} blocks accepted after "
                               f"{tried} tries (rate {rate:.3g}); lower u or a")
        size = min(chunk, max_rejects - tried)
        res = sample_block_exceedances(model, r, level, size, rng, keep=True)
        tried += size
        accepted += res.count
        for x in res.blocks:
            windows.append(dominant_window(x / np.abs(x).max(), model.m))
    windows = np.array(windows)
    sv = batch_singular_values(windows)

    C = model.tail_constant()
    if C is None:
        raise ValueError("theta needs a known tail constant; use a Pareto noise family")
    p_hat = accepted / tried
    factor = level ** alpha / (C * r * r)
    theta = factor * p_hat
    stderr = factor * np.sqrt(p_hat * (1.0 - p_hat) / tried)

    def q_sampler(g):
        return windows[g.integers(len(windows))]

    def sv_batch(g, size):
        return sv[g.integers(len(sv), size=size)]

    spec = ClusterShapeSpec(min(theta, 1.0), q_sampler, sv.shape[1], float(sv[:, 0].max()),
                            sv_batch=sv_batch, theta_stderr=float(stderr), source="empirical")
    return EmpiricalCluster(spec, windows, sv, accepted, tried)
