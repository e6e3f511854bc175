"""Stationary m-dependent regularly varying random fields.

Noise lives on the integer lattice Z^2 and is generated tile by tile from
counter-based streams keyed by ``(seed, channel, tile_row, tile_col)``, so the
field on any window is the same whatever the requested size ``p x n``.

Every model maps a noise window of shape ``(p + m, n + m)`` to a ``p x n``
field through ``_filter``; the filters slice only the trailing two axes so
they also run on stacks of independent windows.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cluster import ClusterShapeSpec
from .rng import stream
from .tails import NormalizationSeq, TailModel

TILE = 128
NOISE_MAG, NOISE_SIGN, AUX = 0, 1, 2


def lattice_uniform(seed, channel, i0, i1, j0, j1, tile=TILE):
    """Uniforms on lattice rows ``[i0, i1)`` x cols ``[j0, j1)`` for one channel."""
    out = np.empty((i1 - i0, j1 - j0))
    for ti in range(i0 // tile, (i1 - 1) // tile + 1):
        for tj in range(j0 // tile, (j1 - 1) // tile + 1):
            block = stream(seed, channel, ti, tj).random((tile, tile))
            r0, r1 = max(i0, ti * tile), min(i1, (ti + 1) * tile)
            c0, c1 = max(j0, tj * tile), min(j1, (tj + 1) * tile)
            out[r0 - i0:r1 - i0, c0 - j0:c1 - j0] = block[r0 - ti * tile:r1 - ti * tile,
                                                          c0 - tj * tile:c1 - tj * tile]
    return out


def _as_filter(h):
    a = np.atleast_2d(np.asarray(h, dtype=float))
    if a.ndim != 2:
        raise ValueError("filter must be a 2D array")
    if not np.any(a != 0):
        raise ValueError("filter has all-zero coefficients")
    size = max(a.shape)
    sq = np.zeros((size, size))
    sq[: a.shape[0], : a.shape[1]] = a
    return tuple(tuple(float(v) for v in row) for row in sq)


class FieldModel:
    """Base class; subclasses are frozen dataclasses."""

    family = "base"
    noise_offset = True  # noise window starts at lattice (-m, -m)

    @property
    def m(self):
        raise NotImplementedError

    @property
    def alpha(self):
        return self.tail.alpha

    def _check_mean(self):
        if self.tail.alpha >= 2.0 and not self.tail.has_zero_mean:
            raise ValueError("alpha in [2, 4) requires mean-zero noise "
                             "(use shifted-pareto-centered or rho = 0.5)")

    def aux_from_uniform(self, u):
        return None

    def tail_constant(self):
        """``lim x^alpha P(|X| > x)`` for the field's marginal."""
        base = self.tail.tail_constant
        return None if base is None else base * self._constant_factor()

    def normalization(self, method="exact", **kw):
        if method == "exact" and self.tail_constant() is not None:
            return NormalizationSeq(alpha=self.alpha, constant=self.tail_constant(), **kw)

        def sampler(rng, size):
            # fresh independent windows, one field value each
            return self.sample_windows(rng, 1, size)[:, 0, 0]

        return NormalizationSeq(alpha=self.alpha, method="monte-carlo-quantile",
                                sampler=sampler, **kw)

    def sample_windows(self, rng, r, count):
        """``count`` independent ``r x r`` field blocks, shape (count, r, r)."""
        w = r + self.m
        z = self.tail.sample(rng, (count, w, w))
        aux = self.aux_from_uniform(rng.random((count, w, w)))
        return self._filter(z, aux, r, r)

    def to_dict(self):
        raise NotImplementedError

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class IID(FieldModel):
    tail: TailModel
    family = "iid"

    def __post_init__(self):
        self._check_mean()

    @property
    def m(self):
        return 0

    noise_bound = 1.0

    def _constant_factor(self):
        return 1.0

    def _filter(self, z, aux, p, n):
        return z[..., :p, :n].copy()

    def to_dict(self):
        return {"family": self.family, "noise": self.tail.to_dict()}


@dataclass(frozen=True)
class LinearMA(FieldModel):
    """``X_it = sum_{k,l=0}^m h_kl Z_{i-k, t-l}``."""

    filter: tuple
    tail: TailModel
    family = "linear-ma"

    def __post_init__(self):
        object.__setattr__(self, "filter", _as_filter(self.filter))
        self._check_mean()

    @property
    def H(self):
        return np.array(self.filter)

    @property
    def m(self):
        return len(self.filter) - 1

    @property
    def noise_bound(self):
        return float(np.abs(self.H).sum())

    def _constant_factor(self):
        return float((np.abs(self.H) ** self.alpha).sum())

    def _filter(self, z, aux, p, n):
        m, H = self.m, self.H
        x = np.zeros(z.shape[:-2] + (p, n))
        for k in range(m + 1):
            for l in range(m + 1):
                if H[k, l] != 0:
                    x += H[k, l] * z[..., m - k:m - k + p, m - l:m - l + n]
        return x

    def to_dict(self):
        return {"family": self.family, "filter": [list(r) for r in self.filter],
                "noise": self.tail.to_dict()}


@dataclass(frozen=True)
class MaxLinear(FieldModel):
    """``X_it = max_{k,l} h_kl Z_{i-k, t-l}`` with nonnegative coefficients and noise."""

    filter: tuple
    tail: TailModel
    family = "max-linear"

    def __post_init__(self):
        object.__setattr__(self, "filter", _as_filter(self.filter))
        if self.tail.alpha >= 2.0:
            raise ValueError("max-linear fields require alpha < 2")
        if np.any(self.H < 0):
            raise ValueError("max-linear fields require nonnegative coefficients")
        if not self.tail.is_nonnegative:
            raise ValueError("max-linear fields require nonnegative noise (exact-pareto, rho = 1)")

    H = LinearMA.H
    m = LinearMA.m

    @property
    def noise_bound(self):
        return float(self.H.max())

    def _constant_factor(self):
        return float((self.H ** self.alpha).sum())

    def _filter(self, z, aux, p, n):
        m, H = self.m, self.H
        x = np.zeros(z.shape[:-2] + (p, n))
        for k in range(m + 1):
            for l in range(m + 1):
                if H[k, l] > 0:
                    np.maximum(x, H[k, l] * z[..., m - k:m - k + p, m - l:m - l + n], out=x)
        return x

    to_dict = LinearMA.to_dict


@dataclass(frozen=True)
class RandomCoeffBernoulli(FieldModel):
    """``X_it = 4 Z_it + eps_{i-1,t} Z_{i-1,t} + 3 Z_{i-1,t-1}``, eps ~ Bernoulli(q)."""

    q: float
    tail: TailModel
    family = "random-coeff-bernoulli"

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        self._check_mean()

    @property
    def m(self):
        return 1

    noise_bound = 8.0

    def _constant_factor(self):
        a = self.alpha
        return 4.0 ** a + self.q + 3.0 ** a

    def aux_from_uniform(self, u):
        return (u < self.q).astype(float)

    def _filter(self, z, aux, p, n):
        return (4.0 * z[..., 1:1 + p, 1:1 + n]
                + aux[..., 0:p, 1:1 + n] * z[..., 0:p, 1:1 + n]
                + 3.0 * z[..., 0:p, 0:n])

    def to_dict(self):
        return {"family": self.family, "q": self.q, "noise": self.tail.to_dict()}


@dataclass(frozen=True)
class RademacherSum(FieldModel):
    """``X_it = eps_it * sum_{j,s=0}^m Z_{i+j, t+s}``, eps Rademacher."""

    m_range: int
    tail: TailModel
    family = "rademacher-sum"
    noise_offset = False

    def __post_init__(self):
        if int(self.m_range) != self.m_range or self.m_range < 0:
            raise ValueError("m must be a nonnegative integer")
        object.__setattr__(self, "m_range", int(self.m_range))

    @property
    def m(self):
        return self.m_range

    @property
    def noise_bound(self):
        return float((self.m + 1) ** 2)

    def _constant_factor(self):
        return float((self.m + 1) ** 2)

    def aux_from_uniform(self, u):
        return np.where(u < 0.5, 1.0, -1.0)

    def _filter(self, z, aux, p, n):
        m = self.m
        s = np.zeros(z.shape[:-2] + (p, n))
        for j in range(m + 1):
            for t in range(m + 1):
                s += z[..., j:j + p, t:t + n]
        return aux[..., :p, :n] * s

    def to_dict(self):
        return {"family": self.family, "m": self.m, "noise": self.tail.to_dict()}


MODELS = {cls.family: cls for cls in (IID, LinearMA, MaxLinear, RandomCoeffBernoulli, RademacherSum)}


def model_from_dict(d):
    family = d.get("family")
    if family not in MODELS:
        raise ValueError(f"unknown field family {family!r}; expected one of {sorted(MODELS)}")
    tail = TailModel.from_dict(d["noise"])
    if family == "iid":
        return IID(tail)
    if family in ("linear-ma", "max-linear"):
        return MODELS[family](d["filter"], tail)
    if family == "random-coeff-bernoulli":
        return RandomCoeffBernoulli(float(d["q"]), tail)
    return RademacherSum(int(d["m"]), tail)


def dependence_range(model):
    return model.m


@dataclass
class FieldSample:
    values: np.ndarray
    model: FieldModel
    seed: int

    @property
    def shape(self):
        return self.values.shape

    @property
    def fingerprint(self):
        blob = json.dumps({"model": self.model.to_dict(), "shape": list(self.shape),
                           "seed": self.seed}, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def noise_window(model, seed, p, n):
    """Noise and auxiliary windows feeding a ``p x n`` field."""
    m = model.m
    o = -m if model.noise_offset else 0
    i0, i1, j0, j1 = o, o + p + m, o, o + n + m
    z = model.tail.from_uniforms(lattice_uniform(seed, NOISE_MAG, i0, i1, j0, j1),
                                 lattice_uniform(seed, NOISE_SIGN, i0, i1, j0, j1))
    aux = None
    if type(model).aux_from_uniform is not FieldModel.aux_from_uniform:
        aux = model.aux_from_uniform(lattice_uniform(seed, AUX, i0, i1, j0, j1))
    return z, aux


def generate_field(model, p, n, seed):
    """The field restricted to ``[0, p) x [0, n)``."""
    if p < 1 or n < 1:
        raise ValueError("field dimensions must be positive")
    z, aux = noise_window(model, seed, p, n)
    return FieldSample(model._filter(z, aux, p, n), model, int(seed))


# --- closed-form cluster shapes -------------------------------------------

def _sign(rng, rho):
    return 1.0 if rng.random() < rho else -1.0


def theoretical_cluster(model, alpha=None, rho=None):
    """Extremal index and cluster-shape sampler for the closed-form families."""
    from .spectra import batch_singular_values, singular_values

    alpha = model.alpha if alpha is None else alpha
    rho = model.tail.rho if rho is None else rho

    if isinstance(model, IID):
        return ClusterShapeSpec(1.0, lambda rng: np.array([[_sign(rng, rho)]]), 1, 1.0,
                                sv_batch=lambda rng, size: np.ones((size, 1)))

    if isinstance(model, (LinearMA, MaxLinear)):
        H = model.H
        hmax = np.abs(H).max()
        theta = hmax ** alpha / (np.abs(H) ** alpha).sum()
        sv = singular_values(H) / hmax
        k = 1.0 if isinstance(model, MaxLinear) else None
        return ClusterShapeSpec(
            theta, lambda rng: (k or _sign(rng, rho)) * H / hmax, model.m + 1, float(sv[0]),
            sv_batch=lambda rng, size: np.tile(sv, (size, 1)))

    if isinstance(model, RandomCoeffBernoulli):
        q = model.q
        theta = 4.0 ** alpha / (4.0 ** alpha + q + 3.0 ** alpha)
        shapes = [np.array([[1.0, 0.0], [e / 4.0, 0.75]]) for e in (0.0, 1.0)]
        svs = np.array([singular_values(s) for s in shapes])

        def q_sampler(rng):
            return _sign(rng, rho) * shapes[int(rng.random() < q)]

        return ClusterShapeSpec(theta, q_sampler, 2, float(svs[:, 0].max()),
                                sv_batch=lambda rng, size: svs[(rng.random(size) < q).astype(int)])

    if isinstance(model, RademacherSum):
        w = model.m + 1

        def q_sampler(rng):
            return np.where(rng.random((w, w)) < 0.5, 1.0, -1.0)

        def sv_batch(rng, size):
            return batch_singular_values(np.where(rng.random((size, w, w)) < 0.5, 1.0, -1.0))

        return ClusterShapeSpec(1.0 / w ** 2, q_sampler, w, float(w), sv_batch=sv_batch)

    raise ValueError(f"no closed-form cluster for {type(model).__name__}; "
                     "use limit.empirical_cluster_sampler instead")


# --- block sampling for extremal statistics -------------------------------

@dataclass
class BlockExceedances:
    n_blocks: int
    count: int
    blocks: Optional[list]


def _distinct_positions(rng, total, count):
    """Uniform random subset of ``range(total)`` of the given size."""
    pos = np.unique(rng.integers(0, total, size=count))
    while pos.size < count:
        extra = rng.integers(0, total, size=count - pos.size)
        pos = np.unique(np.concatenate([pos, extra]))
    return rng.permutation(pos)


def sample_block_exceedances(model, r, threshold, n_blocks, rng, keep=False, batch=256):
    """Count which of ``n_blocks`` independent ``r x r`` blocks have max
    ``|X| > threshold``; optionally return the exceeding blocks.

    For Pareto noise the count is simulated exactly but cheaply: a block can
    only exceed when some noise magnitude in its window is above
    ``threshold / noise_bound - |shift|``.  The number and position of such
    large noise values is drawn first (binomial count, uniform positions) and
    only the windows that hold one are materialized, with the remaining noise
    drawn from its conditional law below the level.
    """
    tail = model.tail
    w = r + model.m
    per_window = w * w
    level = threshold / model.noise_bound - abs(tail.shift)
    kept = [] if keep else None

    if tail.family == "custom-inverse-cdf" or level <= tail.scale:
        count = 0
        done = 0
        while done < n_blocks:
            size = min(batch, n_blocks - done)
            x = model.sample_windows(rng, r, size)
            hit = np.abs(x).max(axis=(-2, -1)) > threshold
            count += int(hit.sum())
            if keep:
                kept.extend(x[hit])
            done += size
        return BlockExceedances(n_blocks, count, kept)

    u_level = tail.magnitude_cdf_level(level)
    p_large = 1.0 - u_level
    total = n_blocks * per_window
    n_large = int(rng.binomial(total, p_large))
    pos = np.sort(_distinct_positions(rng, total, n_large)) if n_large else np.empty(0, int)
    block_ids = pos // per_window
    count = 0
    for b in np.unique(block_ids):
        local = pos[block_ids == b] % per_window
        u = rng.random(per_window) * u_level
        u[local] = u_level + rng.random(local.size) * p_large
        z = tail.from_uniforms(u, rng.random(per_window)).reshape(w, w)
        aux = model.aux_from_uniform(rng.random((w, w)))
        x = model._filter(z, aux, r, r)
        if np.abs(x).max() > threshold:
            count += 1
            if keep:
                kept.append(x)
    return BlockExceedances(n_blocks, count, kept)
