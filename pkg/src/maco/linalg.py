"""Dense helpers: an exact SVD oracle, rank truncation, and norms.

These back the desk-scale experiments and the reference answers the
iterative solver is compared against.  Everything here is small and dense;
LAPACK via numpy does the heavy lifting, with a deterministic sign
convention layered on top so repeated runs and tests see identical factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdResult",
    "svd",
    "best_rank_approx",
    "tail_bound",
    "fro_norm",
    "fro_dist",
    "random_low_rank",
]


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"matrix must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains non-finite values")
    return X


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``X = U @ diag(sigma) @ Vt`` with ``sigma`` non-increasing."""

    U: np.ndarray
    sigma: np.ndarray
    Vt: np.ndarray

    def truncate(self, r: int) -> np.ndarray:
        """Reassemble the best rank-``r`` approximation."""
        return (self.U[:, :r] * self.sigma[:r]) @ self.Vt[:r, :]


def svd(X) -> SvdResult:
    """Thin SVD with a canonical sign choice.

    Singular vectors are only defined up to sign; we fix each pair so that
    the first nonzero component of the left vector is positive.  This makes
    the decomposition a deterministic function of the input.
    """
    X = _check_matrix(X)
    U, sigma, Vt = np.linalg.svd(X, full_matrices=False)
    U = np.ascontiguousarray(U)
    Vt = np.ascontiguousarray(Vt)
    for k in range(sigma.shape[0]):
        nz = np.flatnonzero(U[:, k])
        if nz.size and U[nz[0], k] < 0.0:
            U[:, k] = -U[:, k]
            Vt[k, :] = -Vt[k, :]
    return SvdResult(U, sigma, Vt)


def best_rank_approx(X, r: int) -> np.ndarray:
    """Best rank-``r`` approximation in Frobenius distance."""
    X = _check_matrix(X)
    if not (1 <= r <= min(X.shape)):
        raise ValueError(f"rank must be in [1, {min(X.shape)}], got {r}")
    return svd(X).truncate(r)


def tail_bound(sigma, r: int) -> float:
    """Sum of the singular values past index ``r``.

    This is the per-entry slack that makes the best rank-``r``
    approximation feasible:  no entry of ``X`` differs from its rank-``r``
    truncation by more than ``tail_bound(sigma, r)``.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 1:
        raise ValueError("sigma must be a 1-d array of singular values")
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("singular values must be finite and non-negative")
    if np.any(sigma[1:] > sigma[:-1] + 1e-12 * max(1.0, float(sigma[0]) if sigma.size else 1.0)):
        raise ValueError("singular values must be non-increasing")
    if r < 0:
        raise ValueError(f"rank must be non-negative, got {r}")
    if r >= sigma.shape[0]:
        return 0.0
    return float(np.sum(sigma[r:]))


def fro_norm(X) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(X, dtype=np.float64)))


def fro_dist(X, Y) -> float:
    """Frobenius distance between two same-shape matrices."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    return float(np.linalg.norm(X - Y))


def random_low_rank(m: int, n: int, rank: int, seed: int,
                    scale: float = 1.0) -> np.ndarray:
    """Random rank-``rank`` matrix: product of standard normal factors.

    Used as the instance generator for the slack-sweep experiments.
    """
    if rank < 1 or rank > min(m, n):
        raise ValueError(f"rank must be in [1, {min(m, n)}], got {rank}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, rank))
    B = rng.standard_normal((rank, n))
    return scale * (A @ B)
