"""Spectra of symmetric and rectangular matrices.

Dense eigenproblems go through LAPACK (``numpy.linalg.eigh``: Householder
tridiagonalization followed by an implicit tridiagonal solver).  Singular
values take the Gram-matrix route through the same solver.  The block-sparse
shortcut reads the nonzero spectrum of a thresholded matrix off the singular
values of its few surviving blocks whenever no block row holds two of them.
"""

from dataclasses import dataclass, field

import numpy as np

from .matrices import CooMatrix, _raw

# singular values below this fraction of the largest are treated as zero
RANK_RTOL = 1e-7


def sym_eig(M, want_vectors=False):
    """Eigenvalues in descending order (and matching orthonormal columns)."""
    x = _raw(M)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix has non-finite entries")
    if not np.array_equal(x, x.T):
        raise ValueError("matrix is not symmetric")
    if want_vectors:
        w, v = np.linalg.eigh(x)
        return w[::-1], v[:, ::-1]
    return np.linalg.eigvalsh(x)[::-1]


def singular_values(M):
    """Descending singular values, ``min(p, n)`` of them, via the smaller Gram matrix."""
    x = _raw(M)
    x = np.atleast_2d(x)
    g = x @ x.T if x.shape[0] <= x.shape[1] else x.T @ x
    lam = np.linalg.eigvalsh(g)[::-1]
    return np.sqrt(np.clip(lam, 0.0, None))


def batch_singular_values(stack):
    """Singular values for a stack of small matrices, shape (count, min(p, n))."""
    stack = np.asarray(stack, dtype=float)
    p, n = stack.shape[-2:]
    t = np.swapaxes(stack, -1, -2)
    g = stack @ t if p <= n else t @ stack
    lam = np.linalg.eigvalsh(g)[..., ::-1]
    return np.sqrt(np.clip(lam, 0.0, None))


def _nonzero_sv(b):
    """Nonzero singular values of a small block after dropping empty rows/cols."""
    b = b[np.any(b != 0, axis=1)][:, np.any(b != 0, axis=0)]
    if b.size == 0:
        return np.empty(0)
    s = singular_values(b)
    return s[s > RANK_RTOL * s[0]]


@dataclass
class SparseSpectrum:
    """Outcome of the block-sparse shortcut.

    ``event_s`` is False when some block row holds two nonzero blocks or a
    diagonal block is nonzero; the caller then falls back to a dense solve.
    ``values`` are sorted descending, ``provenance[i]`` names the block
    ``(k, l)`` that produced ``values[i]``.
    """

    event_s: bool
    values: np.ndarray = field(default_factory=lambda: np.empty(0))
    provenance: list = field(default_factory=list)
    reason: str = ""


def _blocks_of(M_above, r):
    if isinstance(M_above, CooMatrix):
        return M_above.rows, M_above.cols, M_above.vals
    x = _raw(M_above)
    rows, cols = np.nonzero(x)
    return rows, cols, x[rows, cols]


def _check_single_block_per_line(bk, bl):
    pairs = np.unique(np.stack([bk, bl], axis=1), axis=0) if bk.size else np.empty((0, 2), int)
    for axis, name in ((0, "row"), (1, "column")):
        idx, counts = np.unique(pairs[:, axis], return_counts=True)
        if np.any(counts > 1):
            return pairs, f"block {name} {int(idx[counts > 1][0])} holds several nonzero blocks"
    return pairs, ""


def sparse_truncated_spectrum(M_above, blocks):
    """Nonzero eigenvalues of a thresholded symmetric matrix from its blocks.

    On the event that every block row has at most one nonzero block and all
    diagonal blocks vanish, the nonzero spectrum is exactly
    ``{+-sigma_j(B_kl) : k < l, B_kl != 0}``.
    """
    r = blocks.r
    rows, cols, vals = _blocks_of(M_above, r)
    bk, bl = rows // r, cols // r
    if np.any(bk == bl):
        return SparseSpectrum(False, reason="nonzero diagonal block")
    pairs, why = _check_single_block_per_line(bk, bl)
    if why:
        return SparseSpectrum(False, reason=why)

    out, prov = [], []
    for k, l in pairs:
        if k > l:
            continue
        sel = (bk == k) & (bl == l)
        b = np.zeros((r, r))
        b[rows[sel] - k * r, cols[sel] - l * r] = vals[sel]
        for s in _nonzero_sv(b):
            out += [s, -s]
            prov += [(int(k), int(l))] * 2
    order = np.argsort(-np.asarray(out), kind="stable")
    return SparseSpectrum(True, np.asarray(out)[order], [prov[i] for i in order])


def sparse_truncated_cov_spectrum(A_above, blocks):
    """Nonzero eigenvalues of ``A A'`` for a thresholded data matrix ``A``.

    When every block row and block column of ``A`` holds at most one nonzero
    block, ``A A'`` is block diagonal up to permutation and its nonzero
    eigenvalues are the squared singular values of those blocks.
    """
    r = blocks.r
    rows, cols, vals = _blocks_of(A_above, r)
    bk, bl = rows // r, cols // r
    pairs, why = _check_single_block_per_line(bk, bl)
    if why:
        return SparseSpectrum(False, reason=why)
    out, prov = [], []
    for k, l in pairs:
        sel = (bk == k) & (bl == l)
        b = np.zeros((r, r))
        b[rows[sel] - k * r, cols[sel] - l * r] = vals[sel]
        for s in _nonzero_sv(b):
            out.append(s * s)
            prov.append((int(k), int(l)))
    order = np.argsort(-np.asarray(out), kind="stable")
    return SparseSpectrum(True, np.asarray(out)[order], [prov[i] for i in order])


def spectral_norm(E, tol=1e-8, max_iter=1000, seed=0):
    """Largest singular value by power iteration on ``E'E``.

    Returns ``(estimate, converged)``.  The estimate never exceeds the true
    norm; callers needing a guaranteed upper bound use the Frobenius norm
    when ``converged`` is False.
    """
    x = _raw(E)
    if not np.any(x):
        return 0.0, True
    v = np.random.default_rng(seed).standard_normal(x.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        w = x.T @ (x @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0, True
        v = w / lam
        if abs(lam - prev) <= tol * lam:
            return float(np.sqrt(lam)), True
        prev = lam
    return float(np.sqrt(prev)), False


def frobenius_norm(E):
    return float(np.linalg.norm(_raw(E)))


@dataclass
class WeylReport:
    gap: float
    spectral: float
    frobenius: float
    converged: bool

    @property
    def bound(self):
        return self.spectral if self.converged else self.frobenius


def weyl_gap(M, E):
    """Largest eigenvalue displacement caused by adding ``E`` to ``M``, with bounds."""
    m, e = _raw(M), _raw(E)
    if m.shape != e.shape:
        raise ValueError(f"dimension mismatch: {m.shape} vs {e.shape}")
    gap = float(np.max(np.abs(sym_eig(m + e) - sym_eig(m)))) if m.size else 0.0
    s, ok = spectral_norm(e)
    return WeylReport(gap, s, frobenius_norm(e), ok)


def spectrum_point_sets(eigs, tol=0.0):
    """Split a spectrum into positive and negative parts, dropping |x| <= tol."""
    x = np.asarray(eigs, dtype=float)
    pos = np.sort(x[x > tol])[::-1]
    neg = np.sort(x[x < -tol])
    return pos, neg


def localization_score(M_above, v, blocks):
    """Largest share of ``|v|^2`` carried by the row ranges of one block pair.

    With ``M_above`` given, only the block pairs ``(k, l)`` holding a nonzero
    entry compete; with ``None``, any two distinct block rows.
    """
    v = np.asarray(v, dtype=float)
    r = blocks.r
    k = v.size // r
    total = float(np.sum(v ** 2))
    if total == 0.0:
        return 0.0
    mass = (v[: k * r] ** 2).reshape(k, r).sum(axis=1)
    pairs = []
    if M_above is not None:
        rows, cols, _ = _blocks_of(M_above, r)
        if rows.size:
            pairs = np.unique(np.stack([rows // r, cols // r], axis=1), axis=0)
    if len(pairs):
        best = max(mass[a] + (mass[b] if b != a else 0.0) for a, b in pairs)
    elif k == 1:
        best = mass[0]
    else:
        best = np.sort(mass)[-2:].sum()
    return float(min(1.0, best / total))
