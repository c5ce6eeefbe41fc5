"""Alternating parallel coordinate descent for constrained completion.

Each update touches one factor coordinate: a row pass samples ``tau_row``
distinct rows without replacement, picks an independent component ``rhat``
per row, and moves each ``L[i, rhat]`` to the exact minimizer of its local
quadratic upper model, ``delta = -grad / lip``.  Column passes mirror this
on ``R``.  Because the objective is separable across rows of ``L`` (and
across columns of ``R``) once the other factor is fixed, every update in a
pass sees the same pre-pass state whether the pass runs sequentially or in
parallel — results are identical for every thread count, and each pass can
never increase the objective in the plain variant.

Three caches make an update O(support size): the per-entry products
``(L @ R)_ij``, the row curvatures ``mu + sum_j R[rhat, j]^2``, and the
column curvatures ``mu + sum_i L[i, rhat]^2``.  Passes maintain all three
incrementally; ``rebuild_caches`` recomputes them from scratch for
verification.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import objective as _obj
from .errors import NumericalAbort
from .model import CsrIndex, FactorPair, ObservationSet, build_index

__all__ = [
    "Variant",
    "SolverConfig",
    "ResidualCache",
    "LipschitzCache",
    "SolverState",
    "apply_variant_clamp",
    "init",
    "row_pass",
    "col_pass",
    "run",
    "grad_norms",
    "rebuild_caches",
]

_K = None


def _kernels():
    """Import the compiled kernels on first use only."""
    global _K
    if _K is None:
        from . import _kernels as mod
        _K = mod
    return _K


_VARIANT_MODES = ("plain", "nonneg", "clip")


@dataclass(frozen=True)
class Variant:
    """Feasible-set restriction applied to every coordinate update.

    ``plain`` leaves updates unrestricted, ``nonneg`` clamps factors at
    zero from below, and ``clip`` confines them to ``[-zeta, zeta]``.
    """

    mode: str = "plain"
    zeta: float | None = None

    def __post_init__(self):
        if self.mode not in _VARIANT_MODES:
            raise ValueError(f"unknown variant {self.mode!r}; "
                             f"expected one of {_VARIANT_MODES}")
        if self.mode == "clip":
            if self.zeta is None or not (self.zeta > 0
                                         and math.isfinite(self.zeta)):
                raise ValueError("clip variant needs a positive finite zeta")
        elif self.zeta is not None:
            raise ValueError(f"variant {self.mode!r} takes no zeta")

    @classmethod
    def plain(cls) -> "Variant":
        return cls("plain")

    @classmethod
    def nonneg(cls) -> "Variant":
        return cls("nonneg")

    @classmethod
    def clipped(cls, zeta: float) -> "Variant":
        return cls("clip", float(zeta))

    @classmethod
    def parse(cls, text: str) -> "Variant":
        """Parse ``plain``, ``nonneg``, or ``clip:ZETA``."""
        if text == "plain":
            return cls.plain()
        if text == "nonneg":
            return cls.nonneg()
        if text.startswith("clip:"):
            try:
                return cls.clipped(float(text[5:]))
            except ValueError as exc:
                raise ValueError(f"bad variant spec {text!r}: {exc}") from None
        raise ValueError(f"bad variant spec {text!r}; expected plain, "
                         f"nonneg, or clip:ZETA")

    @property
    def code(self) -> int:
        return _VARIANT_MODES.index(self.mode)

    def __str__(self) -> str:
        return self.mode if self.mode != "clip" else f"clip:{self.zeta:g}"


def apply_variant_clamp(value, variant: Variant):
    """Project a factor value onto the variant's feasible interval."""
    if variant.mode == "nonneg":
        out = np.maximum(value, 0.0)
    elif variant.mode == "clip":
        out = np.clip(value, -variant.zeta, variant.zeta)
    else:
        out = np.asarray(value, dtype=np.float64)
    return float(out) if np.isscalar(value) else out


@dataclass(frozen=True)
class SolverConfig:
    """Everything a run depends on besides the data.

    ``tau_row``/``tau_col`` are the per-pass sampling cardinalities;
    an epoch interleaves ``ceil(m / tau_row)`` row passes with
    ``ceil(n / tau_col)`` column passes one-for-one.  ``threads`` asks for
    that many worker threads; the effective count is capped by the
    runtime's limit and never changes results, only speed.
    """

    rank: int
    mu: float = 1e-3
    epochs: int = 100
    tau_row: int = 1
    tau_col: int = 1
    seed: int = 0
    variant: Variant = Variant.plain()
    threads: int = 1
    trace_every: int = 1

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive and finite, got {self.mu}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.tau_row < 1 or self.tau_col < 1:
            raise ValueError("sampling cardinalities must be >= 1")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.trace_every < 1:
            raise ValueError(f"trace_every must be >= 1, got {self.trace_every}")

    def to_kv(self) -> str:
        """Key=value block echoing the full configuration."""
        pairs = [("rank", self.rank), ("mu", repr(self.mu)),
                 ("epochs", self.epochs), ("tau_row", self.tau_row),
                 ("tau_col", self.tau_col), ("seed", self.seed),
                 ("variant", self.variant), ("threads", self.threads),
                 ("trace_every", self.trace_every)]
        return "\n".join(f"{k}={v}" for k, v in pairs)


@dataclass
class ResidualCache:
    """Products ``(L @ R)_ij`` at the constrained entries, row-major order."""

    products: np.ndarray


@dataclass
class LipschitzCache:
    """Per-coordinate curvature constants.

    ``row[i, v] = mu + sum_{j in support(i)} R[v, j]^2`` and
    ``col[v, j] = mu + sum_{i in support(j)} L[i, v]^2``.  Both are bounded
    below by ``mu``, so update steps are always well defined.
    """

    row: np.ndarray
    col: np.ndarray


@dataclass
class SolverState:
    """Mutable run state; all arrays are updated in place by the passes."""

    factors: FactorPair
    index: CsrIndex
    config: SolverConfig
    residuals: ResidualCache
    lips: LipschitzCache
    rng: np.random.Generator
    epoch: int = 0
    updates: int = 0
    objective_trace: list = field(default_factory=list)
    effective_threads: int = 1
    _dsq_row: np.ndarray = None
    _dsq_col: np.ndarray = None

    @property
    def objective(self):
        """Most recent traced objective value."""
        return self.objective_trace[-1][1] if self.objective_trace else None


def _effective_threads(requested: int) -> int:
    if requested == 1:
        return 1
    import numba
    cap = int(numba.config.NUMBA_NUM_THREADS)
    if requested > cap:
        warnings.warn(f"requested {requested} threads but the runtime "
                      f"allows {cap}; using {cap}", RuntimeWarning,
                      stacklevel=3)
    return min(requested, cap)


def rebuild_caches(factors: FactorPair, index: CsrIndex,
                   mu: float) -> tuple[ResidualCache, LipschitzCache]:
    """Recompute all caches from scratch (vectorized, kernel-free)."""
    products = _obj.entry_products(factors, index)
    m, r = factors.L.shape
    n = factors.R.shape[1]
    row_lip = np.full((m, r), mu, dtype=np.float64)
    col_lip = np.full((r, n), mu, dtype=np.float64)
    for v in range(r):
        row_lip[:, v] += np.bincount(index.ii,
                                     weights=factors.R[v, index.jj] ** 2,
                                     minlength=m)
        col_lip[v, :] += np.bincount(index.jj,
                                     weights=factors.L[index.ii, v] ** 2,
                                     minlength=n)
    return ResidualCache(products), LipschitzCache(row_lip, col_lip)


def init(obs, cfg: SolverConfig) -> SolverState:
    """Draw the starting factors and prime all caches.

    Factors start uniform on ``[-s, s]`` with ``s = 1/sqrt(rank)``, so each
    product entry has mean zero and variance ``1/(9 rank)`` regardless of
    rank.  Restricted variants project this draw onto their feasible set so
    the invariant they promise holds from the first iterate onward.
    """
    index = obs if isinstance(obs, CsrIndex) else build_index(obs)
    if cfg.tau_row > index.m:
        raise ValueError(f"tau_row={cfg.tau_row} exceeds row count {index.m}")
    if cfg.tau_col > index.n:
        raise ValueError(f"tau_col={cfg.tau_col} exceeds column count {index.n}")
    rng = np.random.default_rng(cfg.seed)
    s = 1.0 / math.sqrt(cfg.rank)
    L = rng.uniform(-s, s, size=(index.m, cfg.rank))
    R = rng.uniform(-s, s, size=(cfg.rank, index.n))
    if cfg.variant.mode != "plain":
        L = apply_variant_clamp(L, cfg.variant)
        R = apply_variant_clamp(R, cfg.variant)
    factors = FactorPair(L, R)
    residuals, lips = rebuild_caches(factors, index, cfg.mu)
    state = SolverState(factors, index, cfg, residuals, lips, rng,
                        effective_threads=_effective_threads(cfg.threads))
    state._dsq_row = np.empty(cfg.tau_row, dtype=np.float64)
    state._dsq_col = np.empty(cfg.tau_col, dtype=np.float64)
    return state


def _draw_pass(rng: np.random.Generator, dim: int, tau: int,
               rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample one pass: ``tau`` distinct indices and a component each."""
    if tau == dim:
        idx = np.arange(dim, dtype=np.int64)
    elif tau == 1:
        idx = rng.integers(0, dim, size=1, dtype=np.int64)
    else:
        idx = rng.choice(dim, size=tau, replace=False).astype(np.int64)
    rhats = rng.integers(0, rank, size=tau, dtype=np.int64)
    return idx, rhats


def _draw_epoch(rng: np.random.Generator, dim: int, tau: int,
                rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample all ``ceil(dim / tau)`` passes of one epoch at once."""
    passes = -(-dim // tau)
    if tau == 1:
        idx = rng.integers(0, dim, size=(passes, 1), dtype=np.int64)
    elif tau == dim:
        idx = np.arange(dim, dtype=np.int64).reshape(1, dim)
    else:
        idx = np.stack([rng.choice(dim, size=tau, replace=False)
                        for _ in range(passes)]).astype(np.int64)
    rhats = rng.integers(0, rank, size=(passes, tau), dtype=np.int64)
    return idx, rhats


def _set_threads(n: int):
    import numba
    numba.set_num_threads(n)


def row_pass(state: SolverState, samples=None) -> SolverState:
    """Run one row pass, drawing samples from the state's rng.

    ``samples`` may override the draw with explicit ``(rows, rhats)``
    arrays (used by tests and diagnostics).
    """
    cfg = state.config
    idx = state.index
    if samples is None:
        rows, rhats = _draw_pass(state.rng, idx.m, cfg.tau_row, cfg.rank)
    else:
        rows, rhats = (np.asarray(a, dtype=np.int64) for a in samples)
    k = _kernels()
    zeta = cfg.variant.zeta if cfg.variant.zeta is not None else 0.0
    dsq = np.empty(rows.shape[0], dtype=np.float64)
    args = (state.factors.L, state.factors.R, state.lips.row, state.lips.col,
            state.residuals.products, idx.row_ptr, idx.col, idx.lo, idx.hi,
            rows, rhats, cfg.mu, cfg.variant.code, zeta, dsq)
    if state.effective_threads == 1:
        k.row_pass(*args)
    else:
        _set_threads(state.effective_threads)
        k.row_pass_mt(*args)
    state.updates += rows.shape[0]
    return state


def col_pass(state: SolverState, samples=None) -> SolverState:
    """Run one column pass; mirrors :func:`row_pass`."""
    cfg = state.config
    idx = state.index
    if samples is None:
        cols, rhats = _draw_pass(state.rng, idx.n, cfg.tau_col, cfg.rank)
    else:
        cols, rhats = (np.asarray(a, dtype=np.int64) for a in samples)
    k = _kernels()
    zeta = cfg.variant.zeta if cfg.variant.zeta is not None else 0.0
    dsq = np.empty(cols.shape[0], dtype=np.float64)
    args = (state.factors.L, state.factors.R, state.lips.row, state.lips.col,
            state.residuals.products, idx.col_ptr, idx.row, idx.csr_pos,
            idx.lo_csc, idx.hi_csc, cols, rhats, cfg.mu, cfg.variant.code,
            zeta, dsq)
    if state.effective_threads == 1:
        k.col_pass(*args)
    else:
        _set_threads(state.effective_threads)
        k.col_pass_mt(*args)
    state.updates += cols.shape[0]
    return state


def _check_finite(state: SolverState):
    for name, arr in (("L", state.factors.L), ("R", state.factors.R)):
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise NumericalAbort(
                f"non-finite value in factor {name} at "
                f"{tuple(int(b) for b in bad)} after epoch {state.epoch}")


def _snapshot(state: SolverState, callbacks):
    ov = _obj.eval_objective(state.factors, state.index, state.config.mu)
    if (state.config.variant.mode == "plain" and state.objective_trace):
        prev = state.objective_trace[-1][1].total
        slack = 1e-9 * max(1.0, abs(prev))
        if ov.total > prev + slack:
            raise NumericalAbort(
                f"objective increased from {prev!r} to {ov.total!r} "
                f"at epoch {state.epoch}")
    state.objective_trace.append((state.epoch, ov))
    for cb in callbacks:
        cb(state, ov)


def _run_epoch(state: SolverState):
    cfg = state.config
    idx = state.index
    k = _kernels()
    zeta = cfg.variant.zeta if cfg.variant.zeta is not None else 0.0
    row_samples, row_rhats = _draw_epoch(state.rng, idx.m, cfg.tau_row,
                                         cfg.rank)
    col_samples, col_rhats = _draw_epoch(state.rng, idx.n, cfg.tau_col,
                                         cfg.rank)
    if state.effective_threads == 1:
        k.epoch(state.factors.L, state.factors.R, state.lips.row,
                state.lips.col, state.residuals.products,
                idx.row_ptr, idx.col, idx.lo, idx.hi,
                idx.col_ptr, idx.row, idx.csr_pos, idx.lo_csc, idx.hi_csc,
                row_samples, row_rhats, col_samples, col_rhats,
                cfg.mu, cfg.variant.code, zeta,
                state._dsq_row, state._dsq_col)
    else:
        _set_threads(state.effective_threads)
        n_row, n_col = row_samples.shape[0], col_samples.shape[0]
        for t in range(max(n_row, n_col)):
            if t < n_row:
                k.row_pass_mt(state.factors.L, state.factors.R,
                              state.lips.row, state.lips.col,
                              state.residuals.products, idx.row_ptr, idx.col,
                              idx.lo, idx.hi, row_samples[t], row_rhats[t],
                              cfg.mu, cfg.variant.code, zeta, state._dsq_row)
            if t < n_col:
                k.col_pass_mt(state.factors.L, state.factors.R,
                              state.lips.row, state.lips.col,
                              state.residuals.products, idx.col_ptr, idx.row,
                              idx.csr_pos, idx.lo_csc, idx.hi_csc,
                              col_samples[t], col_rhats[t], cfg.mu,
                              cfg.variant.code, zeta, state._dsq_col)
    state.updates += (row_samples.size + col_samples.size)


def run(obs, cfg: SolverConfig, callbacks=None) -> SolverState:
    """Initialize and run ``cfg.epochs`` epochs.

    The objective is evaluated exactly (from scratch) at the start and
    every ``cfg.trace_every`` epochs; each evaluation is appended to
    ``state.objective_trace`` and handed to every callback as
    ``callback(state, objective_value)``.  In the plain variant the traced
    objective is verified to be non-increasing; a violation beyond
    floating-point slack raises :class:`maco.errors.NumericalAbort`, as do
    non-finite factors.
    """
    callbacks = list(callbacks) if callbacks else []
    state = init(obs, cfg)
    _snapshot(state, callbacks)
    for _ in range(cfg.epochs):
        _run_epoch(state)
        state.epoch += 1
        _check_finite(state)
        if (state.epoch % cfg.trace_every == 0
                or state.epoch == cfg.epochs):
            _snapshot(state, callbacks)
    return state


def grad_norms(state: SolverState) -> tuple[float, float]:
    """Frobenius norms of the full gradients in ``L`` and in ``R``.

    A diagnostic: recomputes products from scratch, so it is exact but
    costs a full objective evaluation.
    """
    idx = state.index
    L, R = state.factors.L, state.factors.R
    mu = state.config.mu
    p = _obj.entry_products(state.factors, idx)
    t = _obj.interval_violation(p, idx.lo, idx.hi)
    grad_L = mu * L
    np.add.at(grad_L, idx.ii, t[:, None] * R[:, idx.jj].T)
    grad_Rt = np.ascontiguousarray((mu * R).T)
    np.add.at(grad_Rt, idx.jj, t[:, None] * L[idx.ii])
    return float(np.linalg.norm(grad_L)), float(np.linalg.norm(grad_Rt))
