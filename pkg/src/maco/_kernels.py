"""Compiled coordinate-update kernels.

Imported lazily by ``solver`` so that the rest of the package never pays
the JIT machinery's import or compile cost.

Layout conventions (see ``model.CsrIndex``): value arrays are row-major
ordered; the column mirror walks them through ``csr_pos``.  A row pass
updates ``tau`` coordinates ``L[i, rhat]`` for distinct sampled rows ``i``;
a column pass updates ``R[rhat, j]`` for distinct sampled columns.  Rows
are disjoint, so their factor writes and residual writes never collide and
the sampled updates can run in any order — batched results are identical
to sequential ones.  The cross curvature caches (``col_lip`` after a row
pass, ``row_lip`` after a column pass) receive additive corrections; those
are applied grouped by component index in a fixed order, which both avoids
write collisions under ``prange`` and keeps results bit-identical for
every thread count.
"""

import numpy as np
from numba import njit, prange

# Variant codes shared with the solver.
PLAIN, NONNEG, CLIP = 0, 1, 2


@njit(inline="always")
def _violation(p, lo, hi):
    if p < lo:
        return p - lo
    if p > hi:
        return p - hi
    return 0.0


@njit(inline="always")
def _clamp(x, vmode, zeta):
    if vmode == NONNEG:
        return x if x > 0.0 else 0.0
    if vmode == CLIP:
        if x > zeta:
            return zeta
        if x < -zeta:
            return -zeta
    return x


@njit(inline="always")
def _row_update_one(L, R, row_lip, products, row_ptr, col, lo, hi,
                    i, v, mu, vmode, zeta):
    """Update L[i, v]; returns new^2 - old^2 for the curvature correction."""
    g = mu * L[i, v]
    for e in range(row_ptr[i], row_ptr[i + 1]):
        t = _violation(products[e], lo[e], hi[e])
        if t != 0.0:
            g += t * R[v, col[e]]
    old = L[i, v]
    new = _clamp(old - g / row_lip[i, v], vmode, zeta)
    d = new - old
    if d != 0.0:
        L[i, v] = new
        for e in range(row_ptr[i], row_ptr[i + 1]):
            products[e] += d * R[v, col[e]]
    return new * new - old * old


@njit(inline="always")
def _col_update_one(L, R, col_lip, products, col_ptr, row, csr_pos,
                    lo_csc, hi_csc, j, v, mu, vmode, zeta):
    """Update R[v, j]; returns new^2 - old^2 for the curvature correction."""
    g = mu * R[v, j]
    for q in range(col_ptr[j], col_ptr[j + 1]):
        t = _violation(products[csr_pos[q]], lo_csc[q], hi_csc[q])
        if t != 0.0:
            g += t * L[row[q], v]
    old = R[v, j]
    new = _clamp(old - g / col_lip[v, j], vmode, zeta)
    d = new - old
    if d != 0.0:
        R[v, j] = new
        for q in range(col_ptr[j], col_ptr[j + 1]):
            products[csr_pos[q]] += d * L[row[q], v]
    return new * new - old * old


@njit(inline="always")
def _apply_row_pass_corrections(col_lip, row_ptr, col, rows_s, rhats, dsq, v):
    for k in range(rows_s.shape[0]):
        if rhats[k] == v and dsq[k] != 0.0:
            i = rows_s[k]
            for e in range(row_ptr[i], row_ptr[i + 1]):
                col_lip[v, col[e]] += dsq[k]


@njit(inline="always")
def _apply_col_pass_corrections(row_lip, col_ptr, row, cols_s, rhats, dsq, v):
    for k in range(cols_s.shape[0]):
        if rhats[k] == v and dsq[k] != 0.0:
            j = cols_s[k]
            for q in range(col_ptr[j], col_ptr[j + 1]):
                row_lip[row[q], v] += dsq[k]


@njit(cache=True, nogil=True)
def row_pass(L, R, row_lip, col_lip, products, row_ptr, col, lo, hi,
             rows_s, rhats, mu, vmode, zeta, dsq):
    for k in range(rows_s.shape[0]):
        dsq[k] = _row_update_one(L, R, row_lip, products, row_ptr, col,
                                 lo, hi, rows_s[k], rhats[k], mu, vmode, zeta)
    for v in range(R.shape[0]):
        _apply_row_pass_corrections(col_lip, row_ptr, col, rows_s, rhats,
                                    dsq, v)


@njit(cache=True, nogil=True, parallel=True)
def row_pass_mt(L, R, row_lip, col_lip, products, row_ptr, col, lo, hi,
                rows_s, rhats, mu, vmode, zeta, dsq):
    for k in prange(rows_s.shape[0]):
        dsq[k] = _row_update_one(L, R, row_lip, products, row_ptr, col,
                                 lo, hi, rows_s[k], rhats[k], mu, vmode, zeta)
    for v in prange(R.shape[0]):
        _apply_row_pass_corrections(col_lip, row_ptr, col, rows_s, rhats,
                                    dsq, v)


@njit(cache=True, nogil=True)
def col_pass(L, R, row_lip, col_lip, products, col_ptr, row, csr_pos,
             lo_csc, hi_csc, cols_s, rhats, mu, vmode, zeta, dsq):
    for k in range(cols_s.shape[0]):
        dsq[k] = _col_update_one(L, R, col_lip, products, col_ptr, row,
                                 csr_pos, lo_csc, hi_csc, cols_s[k],
                                 rhats[k], mu, vmode, zeta)
    for v in range(R.shape[0]):
        _apply_col_pass_corrections(row_lip, col_ptr, row, cols_s, rhats,
                                    dsq, v)


@njit(cache=True, nogil=True, parallel=True)
def col_pass_mt(L, R, row_lip, col_lip, products, col_ptr, row, csr_pos,
                lo_csc, hi_csc, cols_s, rhats, mu, vmode, zeta, dsq):
    for k in prange(cols_s.shape[0]):
        dsq[k] = _col_update_one(L, R, col_lip, products, col_ptr, row,
                                 csr_pos, lo_csc, hi_csc, cols_s[k],
                                 rhats[k], mu, vmode, zeta)
    for v in prange(R.shape[0]):
        _apply_col_pass_corrections(row_lip, col_ptr, row, cols_s, rhats,
                                    dsq, v)


@njit(cache=True, nogil=True)
def epoch(L, R, row_lip, col_lip, products,
          row_ptr, col, lo, hi,
          col_ptr, row, csr_pos, lo_csc, hi_csc,
          row_samples, row_rhats, col_samples, col_rhats,
          mu, vmode, zeta, dsq_row, dsq_col):
    """One epoch: row and column passes interleaved one-for-one."""
    n_row = row_samples.shape[0]
    n_col = col_samples.shape[0]
    for t in range(max(n_row, n_col)):
        if t < n_row:
            row_pass(L, R, row_lip, col_lip, products, row_ptr, col, lo, hi,
                     row_samples[t], row_rhats[t], mu, vmode, zeta, dsq_row)
        if t < n_col:
            col_pass(L, R, row_lip, col_lip, products, col_ptr, row, csr_pos,
                     lo_csc, hi_csc, col_samples[t], col_rhats[t],
                     mu, vmode, zeta, dsq_col)


@njit(cache=True, nogil=True)
def compute_products(L, R, ii, jj):
    out = np.empty(ii.shape[0], dtype=np.float64)
    for k in range(ii.shape[0]):
        s = 0.0
        for v in range(L.shape[1]):
            s += L[ii[k], v] * R[v, jj[k]]
        out[k] = s
    return out


@njit(cache=True, nogil=True)
def build_lipschitz(L, R, ii, jj, mu):
    m, r = L.shape
    n = R.shape[1]
    row_lip = np.full((m, r), mu, dtype=np.float64)
    col_lip = np.full((r, n), mu, dtype=np.float64)
    for k in range(ii.shape[0]):
        i = ii[k]
        j = jj[k]
        for v in range(r):
            row_lip[i, v] += R[v, j] * R[v, j]
            col_lip[v, j] += L[i, v] * L[i, v]
    return row_lip, col_lip
