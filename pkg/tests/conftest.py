"""Shared test fixtures and independent reference implementations.

The oracles here deliberately avoid the package's vectorized code paths:
objectives are summed entry by entry from the raw constraint records, and
gradients are estimated by finite differences, so agreement is meaningful.
"""

import numpy as np
import pytest

from maco.model import (ConstraintKind, Entry, FactorPair, ObservationSet,
                        box, equality, lower, upper)


def brute_objective(L, R, entries, mu):
    """Entry-by-entry objective; returns (total, reg, eq, lo, up)."""
    L = np.asarray(L, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    P = L @ R
    reg = 0.5 * mu * (float((L ** 2).sum()) + float((R ** 2).sum()))
    eq = lo = up = 0.0
    for e in entries:
        p = P[e.i, e.j]
        if e.kind is ConstraintKind.EQUALITY:
            eq += 0.5 * (p - e.lo) ** 2
            continue
        if e.kind in (ConstraintKind.LOWER, ConstraintKind.BOX):
            lo += 0.5 * max(e.lo - p, 0.0) ** 2
        if e.kind in (ConstraintKind.UPPER, ConstraintKind.BOX):
            up += 0.5 * max(p - e.hi, 0.0) ** 2
    return reg + eq + lo + up, reg, eq, lo, up


def random_factors(rng, m, n, r, scale=1.0):
    return FactorPair(scale * rng.standard_normal((m, r)),
                      scale * rng.standard_normal((r, n)))


def random_mixed_obs(rng, m, n, count=None, value_scale=1.0):
    """Random observation set mixing all four constraint kinds."""
    if count is None:
        count = int(rng.integers(1, m * n // 2 + 2))
    count = min(count, m * n)
    flat = rng.choice(m * n, size=count, replace=False)
    entries = []
    for f in flat:
        i, j = divmod(int(f), n)
        kind = int(rng.integers(0, 4))
        a = value_scale * float(rng.standard_normal())
        b = value_scale * float(rng.standard_normal())
        if kind == 0:
            entries.append(equality(i, j, a))
        elif kind == 1:
            entries.append(lower(i, j, a))
        elif kind == 2:
            entries.append(upper(i, j, a))
        else:
            entries.append(box(i, j, min(a, b), max(a, b)))
    return ObservationSet(m, n, entries)


def kink_free_obs(rng, factors, count=None, margin=0.5, min_margin=1e-3):
    """Observations whose bounds sit at least ``min_margin`` away from the
    current products of ``factors``, mixing active and inactive hinges.

    Keeps finite differences of the objective smooth around the factors.
    """
    m, n = factors.m, factors.n
    P = factors.L @ factors.R
    if count is None:
        count = max(1, m * n // 3)
    flat = rng.choice(m * n, size=min(count, m * n), replace=False)
    entries = []
    for f in flat:
        i, j = divmod(int(f), n)
        p = P[i, j]
        kind = int(rng.integers(0, 4))
        # offsets >= min_margin on either side of the product
        d1 = min_margin + margin * float(rng.random())
        d2 = min_margin + margin * float(rng.random())
        active = bool(rng.integers(0, 2))
        if kind == 0:
            entries.append(equality(i, j, p + (d1 if active else -d1)))
        elif kind == 1:
            entries.append(lower(i, j, p + d1 if active else p - d1))
        elif kind == 2:
            entries.append(upper(i, j, p - d1 if active else p + d1))
        else:
            if active:  # product below the box
                entries.append(box(i, j, p + d1, p + d1 + d2))
            else:       # product inside the box
                entries.append(box(i, j, p - d1, p + d2))
    return ObservationSet(m, n, entries)


def central_fd(fun, x0, h=1e-6):
    return (fun(x0 + h) - fun(x0 - h)) / (2.0 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(0xA11CE)
