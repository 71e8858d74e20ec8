"""Dense kernels: (weighted) column orthonormalization and SVD.

All frames produced here are orthonormal in the inner product
``<a, b> = sum_k w_k a_k b_k`` (``w = 1`` when no weights are given).
"""

import numpy as np


class NonFiniteError(ValueError):
    """Raised when a factorization receives NaN or infinite entries."""


#: residual norm (relative to the column's own norm) below which a column
#: is treated as linearly dependent on the preceding ones
DEFICIENCY_TOL = 1e-12


def _as_weights(weights, n):
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights have shape {w.shape}, expected ({n},)")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return w


def inner(A, B, weights=None):
    """Matrix of pairwise inner products ``A^T diag(w) B``."""
    if weights is None:
        return A.T @ B
    B = np.asarray(B)
    return A.T @ (weights[:, None] * B if B.ndim == 2 else weights * B)


def _norm(a, w):
    if w is None:
        return float(np.sqrt(a @ a))
    return float(np.sqrt(a @ (w * a)))


#: maximal number of projection sweeps per column
MAX_SWEEPS = 5


def _orthogonalize(Q, a, w, orig_norm):
    """Project ``a`` against the orthonormal frame ``Q`` until it stops shrinking.

    At least two sweeps are made; further sweeps follow while the last one
    removed more than half of the remaining norm ("twice is enough"). Returns ``(residual, coeffs)`` with
    ``residual = None`` when the column is numerically dependent.
    """
    coeffs = np.zeros(Q.shape[1])
    nrm = _norm(a, w)
    for sweep in range(1, MAX_SWEEPS + 1):
        if nrm <= DEFICIENCY_TOL * orig_norm or nrm == 0.0:
            return None, coeffs
        if Q.shape[1] == 0:
            return a, coeffs
        c = inner(Q, a, w)
        a = a - Q @ c
        coeffs += c
        new = _norm(a, w)
        if sweep >= 2 and new > 0.5 * nrm:
            if new <= DEFICIENCY_TOL * orig_norm:
                return None, coeffs
            return a, coeffs
        nrm = new
    return None, coeffs


def _completion(Q, w, used):
    # unit vector least represented in span(Q), ties broken by index
    n = Q.shape[0]
    wt = np.ones(n) if w is None else w
    # W-norm of e_k minus its projection: w_k - w_k^2 |Q[k, :]|^2
    resid = wt - wt**2 * np.sum(Q * Q, axis=1)
    order = [k for k in np.argsort(-resid, kind="stable") if k not in used]
    for k in order:
        used.add(k)
        e = np.zeros(n)
        e[k] = 1.0
        e0 = _norm(e, w)
        r, _ = _orthogonalize(Q, e, w, e0)
        if r is not None:
            return r / _norm(r, w)
    raise ValueError("no completion vector available: frame already spans the space")


def _gram_schmidt(A, w, deficient, prefix):
    # column by column against [prefix, accepted columns], re-orthogonalized
    n, k = A.shape
    frame = np.empty((n, prefix.shape[1] + k))
    frame[:, : prefix.shape[1]] = prefix
    p = prefix.shape[1]
    R = np.zeros((k, k))
    kept = []
    used = set()
    for j in range(k):
        a = A[:, j]
        Qf = frame[:, : p + len(kept)]
        r, c = _orthogonalize(Qf, a, w, _norm(a, w))
        R[: len(kept), j] = c[p:]
        if r is not None:
            nrm = _norm(r, w)
            q = r / nrm
            R[len(kept), j] = nrm
        elif deficient == "drop":
            continue
        else:
            q = _completion(Qf, w, used)
        frame[:, p + len(kept)] = q
        kept.append(j)
    m = len(kept)
    return frame[:, p : p + m].copy(), R[:m, :]


def ortho_columns(W, weights=None, deficient="complete"):
    """Orthonormalize the columns of ``W`` in the (weighted) inner product.

    Gram-Schmidt column by column, each column projected against the frame
    built so far at least twice and until a sweep no longer removes more
    than half of its norm. Columns that are numerically dependent on their
    predecessors are replaced by canonical unit vectors orthogonalized
    against the frame (``deficient="complete"``) or skipped
    (``deficient="drop"``).

    Parameters
    ----------
    W : ndarray, shape (n, k)
    weights : ndarray, shape (n,), optional
        Positive quadrature weights of the inner product.
    deficient : {"complete", "drop"}

    Returns
    -------
    Q : ndarray, shape (n, k) or (n, k_kept)
        Columns orthonormal in the weighted inner product.
    R : ndarray
        Upper triangular (in kept-row order) with ``W = Q @ R`` whenever
        ``W`` has full column rank.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    n, k = W.shape
    w = _as_weights(weights, n)
    if deficient not in ("complete", "drop"):
        raise ValueError(f"unknown deficiency mode {deficient!r}")
    if deficient == "complete" and k > n:
        raise ValueError(f"cannot build {k} orthonormal columns in dimension {n}")
    if not np.all(np.isfinite(W)):
        raise NonFiniteError("non-finite entries in W")
    if k and not np.any(W):
        raise ValueError("all-zero input matrix")
    return _gram_schmidt(W, w, deficient, np.zeros((n, 0)))


def extend_frame(Q, B, weights=None, deficient="complete"):
    """Orthonormal columns spanning ``span(B)`` modulo the orthonormal frame ``Q``.

    ``Q`` itself is left untouched, so ``[Q, extend_frame(Q, B)]`` is an
    orthonormal frame whose leading block is exactly ``Q``.
    """
    Q = np.asarray(Q, dtype=float)
    B = np.asarray(B, dtype=float)
    if Q.shape[0] != B.shape[0]:
        raise ValueError("row counts of Q and B differ")
    w = _as_weights(weights, Q.shape[0])
    if deficient == "complete" and Q.shape[1] + B.shape[1] > Q.shape[0]:
        raise ValueError("frame would exceed the space dimension")
    Qn, _ = _gram_schmidt(B, w, deficient, Q)
    return Qn


def svd(A):
    """Thin SVD ``A = P diag(sigma) Q^T`` with descending ``sigma``."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("non-finite entries in A")
    P, sigma, Qt = np.linalg.svd(A, full_matrices=False)
    return P, sigma, Qt.T
