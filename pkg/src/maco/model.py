"""Problem data model.

An instance of the completion problem is a set of element-wise constraints
on an ``m x n`` matrix: exact values, one-sided bounds, or two-sided
intervals.  This module defines the constraint records, their validation,
the factorized solution pair, and the compressed index structure the solver
iterates over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError

__all__ = [
    "ConstraintKind",
    "Entry",
    "ObservationSet",
    "Violation",
    "ValidationReport",
    "FactorPair",
    "CsrIndex",
    "equality",
    "lower",
    "upper",
    "box",
    "validate",
    "build_index",
    "product_entry",
]


class ConstraintKind(Enum):
    """What an observed entry tells us about the matrix value."""

    EQUALITY = "E"
    LOWER = "L"
    UPPER = "U"
    BOX = "B"


# Integer codes used in the packed index (and by the kernels).
KIND_CODE = {
    ConstraintKind.EQUALITY: 0,
    ConstraintKind.LOWER: 1,
    ConstraintKind.UPPER: 2,
    ConstraintKind.BOX: 3,
}
CODE_KIND = {v: k for k, v in KIND_CODE.items()}


@dataclass(frozen=True)
class Entry:
    """One constrained matrix entry.

    ``lo``/``hi`` presence depends on ``kind``: an equality stores its value
    in both fields, a lower bound sets only ``lo``, an upper bound only
    ``hi``, and a box sets both.  Indices are 0-based.
    """

    i: int
    j: int
    kind: ConstraintKind
    lo: float | None = None
    hi: float | None = None

    @property
    def value(self) -> float:
        """The exact target of an equality entry."""
        if self.kind is not ConstraintKind.EQUALITY:
            raise ValueError(f"entry ({self.i},{self.j}) of kind "
                             f"{self.kind.value} has no single value")
        return self.lo


def equality(i: int, j: int, value: float) -> Entry:
    return Entry(i, j, ConstraintKind.EQUALITY, lo=float(value), hi=float(value))


def lower(i: int, j: int, bound: float) -> Entry:
    return Entry(i, j, ConstraintKind.LOWER, lo=float(bound))


def upper(i: int, j: int, bound: float) -> Entry:
    return Entry(i, j, ConstraintKind.UPPER, hi=float(bound))


def box(i: int, j: int, lo: float, hi: float) -> Entry:
    return Entry(i, j, ConstraintKind.BOX, lo=float(lo), hi=float(hi))


@dataclass
class ObservationSet:
    """All constraints of one problem instance over an ``m x n`` matrix."""

    m: int
    n: int
    entries: list[Entry] = field(default_factory=list)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"matrix dimensions must be positive, "
                             f"got {self.m} x {self.n}")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Violation:
    """One validation failure, addressable by code and entry position."""

    code: str
    i: int | None
    j: int | None
    message: str


class ValidationReport:
    """Outcome of :func:`validate`: empty means the instance is well-formed."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def describe(self) -> str:
        if self.ok:
            return "ok"
        lines = [f"{len(self.violations)} validation failure(s):"]
        lines += [f"  [{v.code}] ({v.i},{v.j}): {v.message}"
                  for v in self.violations]
        return "\n".join(lines)


# Required (lo, hi) presence pattern per kind.
_PRESENCE = {
    ConstraintKind.EQUALITY: (True, True),
    ConstraintKind.LOWER: (True, False),
    ConstraintKind.UPPER: (False, True),
    ConstraintKind.BOX: (True, True),
}


def validate(obs: ObservationSet) -> ValidationReport:
    """Check an observation set against the model assumptions.

    Verifies index ranges, bound presence and finiteness, interval ordering
    (``lo <= hi``), and that no entry position is constrained twice — in
    particular an equality excludes any other constraint at its position.
    """
    out: list[Violation] = []
    for e in obs.entries:
        if not (0 <= e.i < obs.m and 0 <= e.j < obs.n):
            out.append(Violation("IndexOutOfRange", e.i, e.j,
                                 f"index outside {obs.m} x {obs.n} grid"))
            continue
        want_lo, want_hi = _PRESENCE[e.kind]
        if (e.lo is not None) != want_lo or (e.hi is not None) != want_hi:
            out.append(Violation("MalformedBounds", e.i, e.j,
                                 f"kind {e.kind.value} has wrong bound fields"))
            continue
        vals = [v for v in (e.lo, e.hi) if v is not None]
        if not all(math.isfinite(v) for v in vals):
            out.append(Violation("NonFinite", e.i, e.j,
                                 "bounds must be finite"))
            continue
        if e.kind is ConstraintKind.EQUALITY and e.lo != e.hi:
            out.append(Violation("MalformedBounds", e.i, e.j,
                                 "equality entry with lo != hi"))
            continue
        if e.kind is ConstraintKind.BOX and e.lo > e.hi:
            out.append(Violation("BoundOrder", e.i, e.j,
                                 f"box has lo={e.lo} > hi={e.hi}"))

    seen: dict[tuple[int, int], list[ConstraintKind]] = {}
    for e in obs.entries:
        seen.setdefault((e.i, e.j), []).append(e.kind)
    for (i, j), kinds in seen.items():
        if len(kinds) < 2:
            continue
        if ConstraintKind.EQUALITY in kinds and len(set(kinds)) > 1:
            out.append(Violation("OverlapWithEquality", i, j,
                                 "equality entry overlaps another constraint"))
        else:
            out.append(Violation("DuplicateIndex", i, j,
                                 f"position constrained {len(kinds)} times"))
    return ValidationReport(out)


@dataclass
class FactorPair:
    """Rank-``r`` factorization ``L @ R`` with ``L`` of shape ``(m, r)``
    and ``R`` of shape ``(r, n)``.  The solver mutates both arrays in
    place."""

    L: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.L = np.ascontiguousarray(self.L, dtype=np.float64)
        self.R = np.ascontiguousarray(self.R, dtype=np.float64)
        if self.L.ndim != 2 or self.R.ndim != 2:
            raise ValueError("factors must be 2-d arrays")
        if self.L.shape[1] != self.R.shape[0]:
            raise ValueError(f"inner dimensions differ: L is {self.L.shape}, "
                             f"R is {self.R.shape}")
        if self.L.shape[1] < 1:
            raise ValueError("rank must be at least 1")

    @property
    def m(self) -> int:
        return self.L.shape[0]

    @property
    def n(self) -> int:
        return self.R.shape[1]

    @property
    def rank(self) -> int:
        return self.L.shape[1]

    def dense(self) -> np.ndarray:
        return self.L @ self.R

    def copy(self) -> "FactorPair":
        return FactorPair(self.L.copy(), self.R.copy())


class CsrIndex:
    """Packed observation index, sorted row-major with a column-major mirror.

    Bounds are stored as one ``[lo, hi]`` interval per entry; one-sided
    constraints hold an infinite sentinel on the missing side and an
    equality holds ``lo == hi``.  That makes the objective, gradient, and
    curvature expressions uniform over all four kinds while ``kind_code``
    keeps the original kind for reporting.

    Attributes
    ----------
    row_ptr, col : CSR layout — entries of row ``i`` occupy
        ``slice(row_ptr[i], row_ptr[i+1])`` and ``col`` gives their columns.
    col_ptr, row, csr_pos : CSC mirror — entries of column ``j`` occupy
        ``slice(col_ptr[j], col_ptr[j+1])``; ``csr_pos[q]`` is the position
        of mirror slot ``q`` inside the CSR-ordered value arrays.
    lo, hi, kind_code : per-entry bounds and kind, CSR order.
    lo_csc, hi_csc : the same bounds pre-permuted into CSC order so the
        column kernels touch memory sequentially.
    """

    def __init__(self, m, n, ii, jj, lo, hi, kind_code):
        self.m = int(m)
        self.n = int(n)
        order = np.lexsort((jj, ii))
        self.ii = ii[order].astype(np.int64)
        self.jj = jj[order].astype(np.int64)
        self.lo = lo[order].astype(np.float64)
        self.hi = hi[order].astype(np.float64)
        self.kind_code = kind_code[order].astype(np.int8)
        self.nnz = int(self.ii.shape[0])

        self.row_ptr = np.zeros(self.m + 1, dtype=np.int64)
        np.add.at(self.row_ptr, self.ii + 1, 1)
        np.cumsum(self.row_ptr, out=self.row_ptr)
        self.col = self.jj

        corder = np.lexsort((self.ii, self.jj)).astype(np.int64)
        self.csr_pos = corder
        self.row = self.ii[corder]
        self.col_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(self.col_ptr, self.jj[corder] + 1, 1)
        np.cumsum(self.col_ptr, out=self.col_ptr)
        self.lo_csc = self.lo[corder]
        self.hi_csc = self.hi[corder]

        for a in (self.ii, self.jj, self.lo, self.hi, self.kind_code,
                  self.row_ptr, self.csr_pos, self.row, self.col_ptr,
                  self.lo_csc, self.hi_csc):
            a.setflags(write=False)

    def row_slice(self, i: int) -> slice:
        return slice(self.row_ptr[i], self.row_ptr[i + 1])

    def col_slice(self, j: int) -> slice:
        return slice(self.col_ptr[j], self.col_ptr[j + 1])

    def entries(self) -> list[Entry]:
        """Reconstruct the entry records (row-major order)."""
        out = []
        for k in range(self.nnz):
            kind = CODE_KIND[int(self.kind_code[k])]
            lo = None if self.lo[k] == -np.inf else float(self.lo[k])
            hi = None if self.hi[k] == np.inf else float(self.hi[k])
            out.append(Entry(int(self.ii[k]), int(self.jj[k]), kind, lo, hi))
        return out


def build_index(obs: ObservationSet) -> CsrIndex:
    """Pack a validated observation set into a :class:`CsrIndex`.

    Raises :class:`maco.errors.ValidationError` if the set is ill-formed.
    """
    report = validate(obs)
    if not report.ok:
        raise ValidationError(report)
    k = len(obs.entries)
    ii = np.empty(k, dtype=np.int64)
    jj = np.empty(k, dtype=np.int64)
    lo = np.empty(k, dtype=np.float64)
    hi = np.empty(k, dtype=np.float64)
    kind_code = np.empty(k, dtype=np.int8)
    for t, e in enumerate(obs.entries):
        ii[t] = e.i
        jj[t] = e.j
        lo[t] = -np.inf if e.lo is None else e.lo
        hi[t] = np.inf if e.hi is None else e.hi
        kind_code[t] = KIND_CODE[e.kind]
    return CsrIndex(obs.m, obs.n, ii, jj, lo, hi, kind_code)


def product_entry(factors: FactorPair, i: int, j: int) -> float:
    """Single entry of the factor product, ``L[i, :] @ R[:, j]``."""
    if not (0 <= i < factors.m and 0 <= j < factors.n):
        raise IndexError(f"entry ({i},{j}) outside "
                         f"{factors.m} x {factors.n} matrix")
    return float(factors.L[i, :] @ factors.R[:, j])
