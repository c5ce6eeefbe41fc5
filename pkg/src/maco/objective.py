"""Penalized objective, directional gradients, and curvature constants.

The solver minimizes

    f(L, R) = mu/2 (||L||_F^2 + ||R||_F^2)
              + 1/2 sum_eq (p_ij - x_ij)^2
              + 1/2 sum_low max(lo_ij - p_ij, 0)^2
              + 1/2 sum_up  max(p_ij - hi_ij, 0)^2

where ``p_ij = (L @ R)_ij`` runs over the constrained entries only.  A box
entry contributes one lower and one upper hinge sharing the same product;
at most one of the two can be active.  With every constraint stored as an
``[lo, hi]`` interval (infinite on the open side, degenerate for an
equality), each entry's contribution collapses to the single expression
``1/2 * t(p)^2`` with

    t(p) = p - lo  if p < lo,   p - hi  if p > hi,   0 otherwise,

which is also exactly the entry's term in every partial derivative.  The
functions here are the slow, vectorized reference; the compiled kernels in
``_kernels`` implement the same arithmetic per-coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CsrIndex, FactorPair, ObservationSet, build_index

__all__ = [
    "ObjectiveValue",
    "CoordinateUpdate",
    "eval_objective",
    "interval_violation",
    "entry_products",
    "row_lipschitz",
    "col_lipschitz",
    "row_directional_grad",
    "col_directional_grad",
    "coordinate_update",
]


@dataclass(frozen=True)
class ObjectiveValue:
    """Objective split into its four non-negative parts."""

    total: float
    reg: float
    eq: float
    lo_hinge: float
    up_hinge: float

    def __post_init__(self):
        for name in ("reg", "eq", "lo_hinge", "up_hinge"):
            if getattr(self, name) < 0:
                raise ValueError(f"objective part {name} is negative")


@dataclass(frozen=True)
class CoordinateUpdate:
    """Exact minimizer step for one coordinate: ``delta = -grad / lip``."""

    grad: float
    lip: float
    delta: float


def _as_index(obs) -> CsrIndex:
    if isinstance(obs, CsrIndex):
        return obs
    if isinstance(obs, ObservationSet):
        return build_index(obs)
    raise TypeError(f"expected ObservationSet or CsrIndex, got {type(obs)!r}")


def _as_products(products) -> np.ndarray:
    # Accepts a bare array or anything exposing a `.products` array
    # (the solver's residual cache).
    return np.asarray(getattr(products, "products", products), dtype=np.float64)


def interval_violation(p, lo, hi):
    """Signed distance of ``p`` outside ``[lo, hi]`` (0 inside).

    Works element-wise on arrays.  This single expression carries the whole
    data-fit part of the objective and its derivatives.
    """
    p = np.asarray(p, dtype=np.float64)
    return np.where(p < lo, p - lo, np.where(p > hi, p - hi, 0.0))


def entry_products(factors: FactorPair, index: CsrIndex,
                   chunk: int = 1 << 16) -> np.ndarray:
    """Products ``(L @ R)_ij`` at the constrained entries, row-major order.

    Chunked so memory stays bounded on image-scale instances.
    """
    out = np.empty(index.nnz, dtype=np.float64)
    L, R = factors.L, factors.R
    for s in range(0, index.nnz, chunk):
        sl = slice(s, min(s + chunk, index.nnz))
        out[sl] = np.einsum("kr,rk->k", L[index.ii[sl]], R[:, index.jj[sl]])
    return out


def eval_objective(factors: FactorPair, obs, mu: float) -> ObjectiveValue:
    """Exact objective value, recomputed from scratch.

    ``obs`` may be an :class:`ObservationSet` or a prebuilt
    :class:`CsrIndex`.
    """
    if not (mu > 0 and np.isfinite(mu)):
        raise ValueError(f"mu must be positive and finite, got {mu}")
    index = _as_index(obs)
    if factors.m != index.m or factors.n != index.n:
        raise ValueError(f"factor shape {factors.m} x {factors.n} does not "
                         f"match observations {index.m} x {index.n}")
    p = entry_products(factors, index)
    reg = 0.5 * mu * (float(np.sum(factors.L ** 2)) +
                      float(np.sum(factors.R ** 2)))
    is_eq = index.kind_code == 0
    eq = 0.5 * float(np.sum((p[is_eq] - index.lo[is_eq]) ** 2))
    rest = ~is_eq
    lo_hinge = 0.5 * float(
        np.sum(np.maximum(index.lo[rest] - p[rest], 0.0) ** 2))
    up_hinge = 0.5 * float(
        np.sum(np.maximum(p[rest] - index.hi[rest], 0.0) ** 2))
    return ObjectiveValue(reg + eq + lo_hinge + up_hinge,
                          reg, eq, lo_hinge, up_hinge)


def row_lipschitz(index: CsrIndex, R: np.ndarray, i: int, rhat: int,
                  mu: float) -> float:
    """Curvature bound for coordinate ``L[i, rhat]``:
    ``mu + sum_{j in support(i)} R[rhat, j]^2``.

    Each constrained entry contributes once, whatever its kind: the
    second derivative of ``1/2 t(p)^2`` in ``p`` is at most 1 everywhere.
    """
    sl = index.row_slice(i)
    return float(mu + np.sum(R[rhat, index.col[sl]] ** 2))


def col_lipschitz(index: CsrIndex, L: np.ndarray, rhat: int, j: int,
                  mu: float) -> float:
    """Curvature bound for coordinate ``R[rhat, j]``:
    ``mu + sum_{i in support(j)} L[i, rhat]^2``."""
    sl = index.col_slice(j)
    return float(mu + np.sum(L[index.row[sl], rhat] ** 2))


def row_directional_grad(factors: FactorPair, index: CsrIndex, products,
                         i: int, rhat: int, mu: float) -> float:
    """Partial derivative of the objective in ``L[i, rhat]``.

    ``products`` must hold the current entry products (row-major order); a
    solver residual cache is accepted directly.
    """
    p = _as_products(products)
    sl = index.row_slice(i)
    t = interval_violation(p[sl], index.lo[sl], index.hi[sl])
    return float(mu * factors.L[i, rhat] + t @ factors.R[rhat, index.col[sl]])


def col_directional_grad(factors: FactorPair, index: CsrIndex, products,
                         rhat: int, j: int, mu: float) -> float:
    """Partial derivative of the objective in ``R[rhat, j]``."""
    p = _as_products(products)
    sl = index.col_slice(j)
    pos = index.csr_pos[sl]
    t = interval_violation(p[pos], index.lo_csc[sl], index.hi_csc[sl])
    return float(mu * factors.R[rhat, j] + t @ factors.L[index.row[sl], rhat])


def coordinate_update(grad: float, lip: float) -> CoordinateUpdate:
    """Exact coordinate minimizer of the local quadratic model.

    ``lip`` must be positive; with the regularizer folded in it is always
    at least ``mu``, so the step is well defined.
    """
    if not (lip > 0 and np.isfinite(lip)):
        raise ValueError(f"curvature must be positive and finite, got {lip}")
    return CoordinateUpdate(float(grad), float(lip), -float(grad) / float(lip))
