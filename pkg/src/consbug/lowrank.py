"""Low-rank state, basis augmentation and (conservative) SVD truncation."""

from dataclasses import dataclass

import numpy as np

from .linalg import inner, ortho_columns, svd


@dataclass(frozen=True)
class LowRankState:
    """Factorized solution ``Y = X @ S @ V.T``.

    ``X`` is orthonormal in the plain Euclidean product, ``V`` in the
    model's weighted velocity product. ``S`` may be rectangular when a frame
    saturates the space dimension.
    """

    X: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.S.shape != (self.X.shape[1], self.V.shape[1]):
            raise ValueError(
                f"inconsistent factor shapes X{self.X.shape} S{self.S.shape} V{self.V.shape}"
            )

    @property
    def rank(self):
        return min(self.S.shape)

    @property
    def shape(self):
        return self.X.shape[0], self.V.shape[0]

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in (self.X, self.S, self.V))


@dataclass(frozen=True)
class TruncationPolicy:
    """Rank selection rule ``theta = theta_bar * ||S_hat||_F``.

    ``mode`` is ``"plain_svd"`` or ``"conservative"``; the latter keeps the
    first ``conserved_count`` velocity basis vectors (the conserved basis U)
    untouched.
    """

    theta_bar: float
    conserved_count: int = 0
    mode: str = "plain_svd"
    max_rank: int | None = None
    min_rank: int = 2

    def __post_init__(self):
        if self.theta_bar < 0:
            raise ValueError("theta_bar must be non-negative")
        if self.conserved_count < 0:
            raise ValueError("conserved_count must be non-negative")
        if self.mode not in ("plain_svd", "conservative"):
            raise ValueError(f"unknown truncation mode {self.mode!r}")


def evaluate(state):
    """Dense ``X S V^T``; meant for tests and small oracles."""
    return state.X @ state.S @ state.V.T


def tail_rank(sigma, theta):
    """Smallest ``r`` with ``sqrt(sum(sigma[r:]**2)) <= theta``."""
    tails = np.sqrt(np.cumsum((sigma**2)[::-1]))[::-1]
    # tails[j] is the norm of sigma[j:]
    for r in range(len(sigma)):
        if tails[r] <= theta:
            return r
    return len(sigma)


def _clamp(r, lo, hi):
    return max(min(max(r, lo), hi), 0)


def svd_truncate(Xhat, Shat, Vhat, policy):
    """Plain SVD truncation of ``Xhat Shat Vhat^T`` to tolerance ``theta_bar ||Shat||_F``."""
    theta = policy.theta_bar * np.linalg.norm(Shat)
    P, sigma, Q = svd(Shat)
    r1 = tail_rank(sigma, theta)
    hi = len(sigma) if policy.max_rank is None else min(len(sigma), policy.max_rank)
    r1 = _clamp(r1, min(policy.min_rank, hi), hi)
    return LowRankState(Xhat @ P[:, :r1], np.diag(sigma[:r1]), Vhat @ Q[:, :r1])


def conservative_truncate(Xhat, Shat, Vhat, policy, U):
    """Truncate while leaving every moment ``<Y, u_j>_v`` unchanged.

    The leading ``m`` columns of ``Vhat`` must coincide with the conserved
    basis ``U``. The coefficient block acting on them is kept exactly, the
    remainder is SVD-truncated with ``theta = theta_bar ||Shat||_F``.
    """
    m = policy.conserved_count
    U = np.asarray(U, dtype=float)
    if U.shape[1] != m:
        raise ValueError(f"conserved basis has {U.shape[1]} columns, policy expects {m}")
    lead = Vhat[:, :m]
    if lead.shape != U.shape or np.max(np.abs(lead - U), initial=0.0) > 1e-12 * max(
        1.0, np.max(np.abs(U))
    ):
        raise ValueError("leading velocity basis vectors do not match the conserved basis")

    theta = policy.theta_bar * np.linalg.norm(Shat)
    K_cons = Xhat @ Shat[:, :m]
    S_rem = Shat[:, m:]
    V_rem = Vhat[:, m:]
    if S_rem.size:
        P, sigma, Q = svd(S_rem)
    else:
        P, sigma, Q = np.zeros((Shat.shape[0], 0)), np.zeros(0), np.zeros((0, 0))
    r_tilde = tail_rank(sigma, theta)
    hi = len(sigma)
    if policy.max_rank is not None:
        hi = min(hi, max(policy.max_rank - m, 0))
    r_tilde = _clamp(r_tilde, min(max(policy.min_rank - m, 0), hi), hi)

    X_tilde = Xhat @ P[:, :r_tilde]
    KS_tilde = X_tilde * sigma[:r_tilde]
    V1 = np.hstack([U, V_rem @ Q[:, :r_tilde]])
    blocks = np.hstack([K_cons, KS_tilde])
    n_x = Xhat.shape[0]
    mode = "complete" if m + r_tilde <= n_x else "drop"
    if np.any(blocks) or r_tilde:
        X1, _ = ortho_columns(np.hstack([K_cons, X_tilde]), deficient=mode)
    else:
        X1 = np.eye(n_x)[:, : min(m + r_tilde, n_x)]
    S1 = X1.T @ blocks
    return LowRankState(X1, S1, V1)


def augment_frames(old, new_block, weights=None):
    """Orthonormal frame of ``[old, new_block]`` with old columns first.

    Returns ``(frame, frame^T W old)``. When the requested width exceeds the
    space dimension, dependent columns are dropped instead of completed.
    """
    old = np.asarray(old, dtype=float)
    new_block = np.asarray(new_block, dtype=float)
    if old.shape[0] != new_block.shape[0]:
        raise ValueError("row counts differ")
    stacked = np.hstack([old, new_block])
    mode = "complete" if stacked.shape[1] <= stacked.shape[0] else "drop"
    frame, _ = ortho_columns(stacked, weights, deficient=mode)
    return frame, inner(frame, old, weights)
