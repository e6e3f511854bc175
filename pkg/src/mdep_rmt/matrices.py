"""Wigner and data matrices, entrywise truncation, and r x r block structure."""

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tails import norm_constant


@dataclass
class SymMatrix:
    values: np.ndarray
    scale: float = 1.0  # the normalizing constant a_{n^2}

    @property
    def n(self):
        return self.values.shape[0]


@dataclass
class RectMatrix:
    values: np.ndarray
    scale: float = 1.0  # a_{np}

    @property
    def shape(self):
        return self.values.shape

    @property
    def gamma(self):
        p, n = self.values.shape
        return p / n


def _raw(M):
    return M.values if isinstance(M, (SymMatrix, RectMatrix)) else np.asarray(M, dtype=float)


def reflect_upper(x):
    """Symmetric matrix from the upper triangle (diagonal included) of ``x``."""
    u = np.triu(x)
    return u + np.triu(u, 1).T


def build_wigner(field_sample, seq):
    x = getattr(field_sample, "values", field_sample)
    n, n2 = x.shape
    if n != n2:
        raise ValueError(f"Wigner matrices need a square field, got {x.shape}")
    a = norm_constant(seq, n * n)
    return SymMatrix(reflect_upper(x) / a, a)


def build_data(field_sample, seq):
    x = getattr(field_sample, "values", field_sample)
    p, n = x.shape
    a = norm_constant(seq, n * p)
    return RectMatrix(x / a, a)


@dataclass
class WignerEnsembleSpec:
    """A field model and matrix order; ``sample(seed)`` gives the normalized matrix."""

    model: object
    n: int
    norm_method: str = "exact"
    _seq: object = field(default=None, repr=False, compare=False)

    @property
    def seq(self):
        if self._seq is None:
            self._seq = self.model.normalization(self.norm_method)
        return self._seq

    def sample(self, seed):
        from .fields import generate_field

        return build_wigner(generate_field(self.model, self.n, self.n, seed), self.seq)


@dataclass
class CooMatrix:
    """Sorted coordinate list (row-major order)."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: tuple

    @property
    def nnz(self):
        return self.vals.size

    def to_dense(self):
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.vals
        return out


def truncate(M, eps):
    """Split ``M`` into entries with ``|m_ij| > eps`` (sparse) and the remainder."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = _raw(M)
    rows, cols = np.nonzero(np.abs(x) > eps)
    above = CooMatrix(rows, cols, x[rows, cols], x.shape)
    below = x.copy()
    below[rows, cols] = 0.0
    return above, below


@dataclass
class BlockDecomposition:
    r: int
    k_rows: int
    k_cols: int
    maxnorms: np.ndarray
    threshold: float = 0.0
    surviving: list = field(default_factory=list)

    @property
    def k(self):
        return self.k_rows


def trim_to_blocks(n, r):
    """Largest multiple of ``r`` not exceeding ``n``."""
    return (n // r) * r


def block_decompose(M, r, threshold=0.0):
    """Per-block max-norms of ``M`` (dense array, matrix wrapper or CooMatrix)."""
    r = int(r)
    shape = M.shape if isinstance(M, CooMatrix) else _raw(M).shape
    p, n = shape
    if r < 1 or r > min(p, n):
        raise ValueError(f"block side r={r} must lie in [1, {min(p, n)}]")
    if p % r or n % r:
        raise ValueError(f"r={r} must divide both dimensions {shape}; trim first")
    kr, kc = p // r, n // r
    if isinstance(M, CooMatrix):
        norms = np.zeros((kr, kc))
        np.maximum.at(norms, (M.rows // r, M.cols // r), np.abs(M.vals))
    else:
        norms = np.abs(_raw(M)).reshape(kr, r, kc, r).max(axis=(1, 3))
    surv = [tuple(int(v) for v in kl) for kl in np.argwhere(norms > threshold)]
    return BlockDecomposition(r, kr, kc, norms, threshold, surv)


def reassemble(blocks_dense, r):
    """Inverse of splitting a matrix into a (k, k') grid of ``r x r`` blocks."""
    kr, kc = blocks_dense.shape[:2]
    return blocks_dense.transpose(0, 2, 1, 3).reshape(kr * r, kc * r)


def split_blocks(x, r):
    p, n = x.shape
    return x.reshape(p // r, r, n // r, r).transpose(0, 2, 1, 3)


@dataclass
class TruncationParams:
    """Entry thresholds for the truncation shortcut.

    ``fixed``: one level ``eps`` for every n (used for alpha < 2).
    ``adaptive``: ``eps_n = n^beta / b_n`` for the remainder and the second,
    higher level ``eps~_n = b_n^((kappa - 1) / 2)`` for the block spectrum.
    ``eta`` sets the block side ``r = ceil(n^(1 - eta))`` in both modes.
    """

    mode: str = "fixed"
    eps: Optional[float] = 0.5
    alpha: Optional[float] = None
    beta: Optional[float] = None
    eta: float = 0.9
    kappa: Optional[float] = None
    check_range: tuple = (10, 10**6)

    def __post_init__(self):
        if self.mode == "fixed":
            if self.eps is None or self.eps < 0:
                raise ValueError("fixed truncation needs eps >= 0")
        elif self.mode == "adaptive":
            lo, hi = beta_window(self.alpha)
            if not lo < self.beta < hi:
                raise ValueError(f"beta={self.beta} outside ({lo:.6g}, {hi:.6g})")
            if not 5.0 / 6.0 < self.eta < 1.0:
                raise ValueError("eta must lie in (5/6, 1)")
            if not self.kappa > self.eta:
                raise ValueError("kappa must exceed eta")
            ns = np.unique(np.geomspace(*self.check_range, 64).astype(int))
            for n in ns:
                b = float(n) ** (2.0 / self.alpha)
                if not self.eps_tilde(n, b) > self.eps_n(n, b):
                    raise ValueError(f"second threshold does not exceed eps_n at n={n}")
        else:
            raise ValueError(f"unknown truncation mode {self.mode!r}")

    def eps_n(self, n, b_n):
        if self.mode == "fixed":
            return self.eps
        return float(n) ** self.beta / b_n

    def eps_tilde(self, n, b_n):
        if self.mode == "fixed":
            return self.eps
        return b_n ** ((self.kappa - 1.0) / 2.0)

    def sparse_level(self, n, b_n):
        """Threshold at which the block-sparse spectrum is taken."""
        return self.eps_tilde(n, b_n)

    def block_side(self, n):
        return max(1, math.ceil(n ** (1.0 - self.eta) - 1e-12))

    def to_dict(self):
        d = {"mode": self.mode, "eta": self.eta}
        if self.mode == "fixed":
            d["eps"] = self.eps
        else:
            d.update(alpha=self.alpha, beta=self.beta, kappa=self.kappa)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("mode", "fixed") == "fixed":
            return cls(mode="fixed", eps=float(d.get("eps", 0.5)), eta=float(d.get("eta", 0.9)))
        return cls(mode="adaptive", eps=None, alpha=float(d["alpha"]), beta=float(d["beta"]),
                   eta=float(d.get("eta", 0.9)), kappa=float(d.get("kappa", 0.95)))


def beta_window(alpha):
    """Open interval for the exponent of ``eps_n = n^beta / b_n``."""
    return 4.0 / (3.0 * alpha), 2.0 * (8.0 - alpha) / (alpha * (10.0 - alpha))


FIXED_EPS = 0.5


def default_truncation(alpha, n=None, eps=None):
    if alpha < 2.0:
        return TruncationParams(mode="fixed", eps=FIXED_EPS if eps is None else eps)
    lo, hi = beta_window(alpha)
    assert lo < hi, "empty beta window"
    return TruncationParams(mode="adaptive", eps=None, alpha=alpha, beta=0.5 * (lo + hi),
                            eta=0.9, kappa=0.95)


# --- flat binary / CSV matrix files ----------------------------------------
#
# Binary layout (little-endian): 4-byte magic b"MDRM", uint32 kind
# (0 general, 1 symmetric), uint32 rows, uint32 cols, then rows*cols float64
# values in row-major order.

MAGIC = b"MDRM"
HEADER = struct.Struct("<4sIII")


def write_matrix_bin(path, x, symmetric=False):
    x = np.ascontiguousarray(x, dtype="<f8")
    p, n = x.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, int(symmetric), p, n))
        fh.write(x.tobytes())


def read_matrix_bin(path):
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, kind, p, n = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != p * n:
        raise ValueError(f"{path}: expected {p * n} values, found {data.size}")
    return data.reshape(p, n).astype(float), bool(kind)


def write_matrix_csv(path, x, comment=None):
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(f"c{j}" for j in range(x.shape[1])) + "\n")
        for row in x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no header row")
    header = lines[0].strip().split(",")
    if header != [f"c{j}" for j in range(len(header))]:
        raise ValueError(f"{path}: expected header c0,c1,..., got {lines[0].strip()[:40]!r}")
    x = np.loadtxt(lines[1:], delimiter=",", ndmin=2, dtype=float)
    if x.shape[1] != len(header):
        raise ValueError(f"{path}: {x.shape[1]} columns under a {len(header)}-column header")
    return x
