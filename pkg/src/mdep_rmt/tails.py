"""Regularly varying entry laws and their normalization sequences.

The slowly varying factor is fixed to 1: ``P(|X| > x) = (x / scale)^-alpha``
for the exact Pareto family, so ``a_n = scale * n^(1/alpha)`` exactly.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .rng import stream

FAMILIES = ("exact-pareto", "shifted-pareto-centered", "custom-inverse-cdf")


@dataclass(frozen=True)
class TailModel:
    """Univariate regularly varying law with tail index ``alpha``.

    ``rho`` is the probability that an extreme value is positive.  For
    ``shifted-pareto-centered`` the known mean of the signed Pareto mixture,
    ``(2 rho - 1) scale alpha / (alpha - 1)``, is subtracted analytically.
    ``custom-inverse-cdf`` maps a uniform to ``X`` through ``quantile``; its
    sign is whatever the quantile function produces and ``rho`` is ignored.
    """

    alpha: float
    rho: float = 0.5
    family: str = "exact-pareto"
    scale: float = 1.0
    quantile: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 4.0:
            raise ValueError(f"alpha must lie in (0, 4), got {self.alpha}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "shifted-pareto-centered" and self.alpha <= 1.0:
            raise ValueError("centering needs a finite mean (alpha > 1)")
        if self.family == "custom-inverse-cdf" and self.quantile is None:
            raise ValueError("custom-inverse-cdf requires a quantile function")

    @property
    def shift(self):
        if self.family != "shifted-pareto-centered":
            return 0.0
        return (2.0 * self.rho - 1.0) * self.scale * self.alpha / (self.alpha - 1.0)

    @property
    def has_zero_mean(self):
        if self.family == "shifted-pareto-centered":
            return True
        if self.family == "exact-pareto":
            return self.alpha > 1.0 and self.rho == 0.5
        return False

    @property
    def is_nonnegative(self):
        return self.family == "exact-pareto" and self.rho == 1.0

    @property
    def tail_constant(self):
        """``lim x^alpha P(|X| > x)``; ``None`` when unknown (custom laws)."""
        if self.family == "custom-inverse-cdf":
            return None
        return self.scale ** self.alpha

    def magnitude(self, u):
        """Pareto magnitude from uniforms on [0, 1)."""
        return self.scale * (1.0 - u) ** (-1.0 / self.alpha)

    def magnitude_cdf_level(self, level):
        """The uniform ``u`` at which ``magnitude(u) == level`` (0 below scale)."""
        if level <= self.scale:
            return 0.0
        return 1.0 - (level / self.scale) ** (-self.alpha)

    def from_uniforms(self, u_mag, u_sign):
        """Transform two independent uniform arrays into draws of ``X``."""
        if self.family == "custom-inverse-cdf":
            return np.asarray(self.quantile(u_mag), dtype=float)
        x = self.magnitude(u_mag)
        x = np.where(u_sign < self.rho, x, -x)
        if self.family == "shifted-pareto-centered":
            x = x - self.shift
        return x

    def sample(self, rng, size=None):
        u = rng.random(size)
        v = rng.random(size)
        return self.from_uniforms(u, v)

    def tail_prob(self, x):
        """Exact ``P(|X| > x)`` for the uncentered Pareto family."""
        if self.family != "exact-pareto":
            raise ValueError("closed-form tail only for exact-pareto")
        x = np.asarray(x, dtype=float)
        return np.where(x < self.scale, 1.0, (np.maximum(x, self.scale) / self.scale) ** -self.alpha)

    def to_dict(self):
        if self.family == "custom-inverse-cdf":
            raise ValueError("custom quantile functions are not serializable")
        return {"alpha": self.alpha, "rho": self.rho, "family": self.family, "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        return cls(alpha=float(d["alpha"]), rho=float(d.get("rho", 0.5)),
                   family=d.get("family", "exact-pareto"), scale=float(d.get("scale", 1.0)))


def sample_entry(model, rng):
    """One draw of ``X``."""
    return float(model.sample(rng))


@dataclass
class NormalizationSeq:
    """The sequence ``a_n`` with ``n P(|X| > a_n) -> 1``.

    ``exact`` uses ``a_n = (constant * n)^(1/alpha)`` where ``constant`` is the
    tail constant ``lim x^alpha P(|X| > x)``; this is exact for exact Pareto
    entries and the asymptotic normalization otherwise.  ``monte-carlo-quantile``
    takes the empirical ``1 - 1/n`` quantile of ``|X|`` from ``sampler`` over
    ``max(100 n, exceedances * n)`` draws, streamed in chunks.
    """

    alpha: float
    method: str = "exact"
    constant: float = 1.0
    sampler: Optional[Callable] = field(default=None, repr=False)
    seed: int = 0
    exceedances: int = 10_000
    chunk: int = 5_000_000
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.method not in ("exact", "monte-carlo-quantile"):
            raise ValueError(f"unknown normalization method {self.method!r}")
        if self.method == "monte-carlo-quantile" and self.sampler is None:
            raise ValueError("monte-carlo-quantile needs a sampler(rng, size)")

    @classmethod
    def for_tail(cls, tail, method="exact", **kw):
        if tail.family == "custom-inverse-cdf":
            method = "monte-carlo-quantile"
        if method == "exact":
            return cls(alpha=tail.alpha, constant=tail.tail_constant, **kw)
        return cls(alpha=tail.alpha, method=method, sampler=tail.sample, **kw)

    def _quantile(self, n):
        k = max(100, self.exceedances)
        total = k * n
        rng = stream(self.seed, n)
        top = np.empty(0)
        done = 0
        while done < total:
            size = min(self.chunk, total - done)
            x = np.abs(self.sampler(rng, size))
            top = np.concatenate([top, x])
            if top.size > k:
                top = np.partition(top, top.size - k)[-k:]
            done += size
        # the k-th largest of k*n draws is the empirical (1 - 1/n) quantile
        return float(np.min(top))

    def __call__(self, n):
        return norm_constant(self, n)


def norm_constant(seq, n):
    """``a_n``; cached per ``n``."""
    n = int(n)
    if n < 1:
        raise ValueError("a_n is defined for n >= 1")
    if n not in seq.cache:
        if seq.method == "exact":
            seq.cache[n] = (seq.constant * n) ** (1.0 / seq.alpha)
        else:
            seq.cache[n] = seq._quantile(n)
    return seq.cache[n]


def hill_tail_index(samples, k):
    """Hill estimate of ``alpha`` from the ``k`` largest ``|samples|``."""
    x = np.abs(np.asarray(samples, dtype=float)).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    if not 0 < k < x.size:
        raise ValueError(f"k must satisfy 0 < k < {x.size}, got {k}")
    top = np.sort(np.partition(x, x.size - k - 1)[-(k + 1):])
    if top[0] <= 0:
        raise ValueError("Hill estimator needs a positive threshold order statistic")
    h = np.mean(np.log(top[1:]) - np.log(top[0]))
    if h <= 0:
        raise ValueError("degenerate sample: zero log-spacings above the threshold")
    return 1.0 / h
