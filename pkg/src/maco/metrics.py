"""Evaluation quantities: RMSE, PSNR, relative error, and the slack sweep.

The slack sweep quantifies the package's central trade-off: replacing
exact observations with intervals ``[x - delta, x + delta]`` lets a
rank-``r`` model shed the unrepresentable tail of the data, and for
``delta`` near the singular-value tail bound the completion lands closer
to the best rank-``r`` approximation than exact fitting does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg, solver
from .io import GrayImage
from .model import FactorPair, ObservationSet, box, product_entry

__all__ = [
    "MetricRow",
    "MetricReport",
    "rmse",
    "psnr",
    "relative_error",
    "delta_sweep",
]


@dataclass(frozen=True)
class MetricRow:
    """One trace line; ``rmse``/``psnr`` are None when not evaluated."""

    epoch: int
    updates: int
    objective: float
    rmse: float | None
    psnr: float | None
    seconds: float


@dataclass
class MetricReport:
    """Per-epoch evaluation trace with CSV serialization."""

    rows: list[MetricRow] = field(default_factory=list)

    def append(self, row: MetricRow):
        if self.rows:
            last = self.rows[-1]
            if row.epoch <= last.epoch:
                raise ValueError(f"epochs must strictly increase: "
                                 f"{row.epoch} after {last.epoch}")
            if row.seconds < last.seconds:
                raise ValueError(f"wall time must not decrease: "
                                 f"{row.seconds} after {last.seconds}")
        self.rows.append(row)

    def to_csv(self) -> str:
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return repr(v) if isinstance(v, float) else str(v)

        lines = ["epoch,updates,objective,rmse,psnr,seconds"]
        lines += [",".join(cell(v) for v in (r.epoch, r.updates, r.objective,
                                             r.rmse, r.psnr, r.seconds))
                  for r in self.rows]
        return "\n".join(lines) + "\n"


def rmse(factors: FactorPair, test, clip: tuple[float, float] | None = None
         ) -> float:
    """Root-mean-square error of the factor product over test triples.

    ``test`` is a sequence of ``(i, j, x)``.  Predictions are used raw
    unless ``clip`` provides an interval to project them onto first.
    """
    test = list(test)
    if not test:
        raise ValueError("test set is empty")
    total = 0.0
    for i, j, x in test:
        p = product_entry(factors, i, j)
        if clip is not None:
            p = min(max(p, clip[0]), clip[1])
        total += (p - x) ** 2
    return math.sqrt(total / len(test))


def psnr(reconstruction, reference) -> float:
    """Peak signal-to-noise ratio, ``10 log10(255^2 / MSE)``, in dB.

    The MSE runs over all pixels on the [0, 255] scale, with the
    reconstruction clipped to [0, 255] first.  A perfect reconstruction
    returns ``math.inf``.
    """
    recon = np.clip(np.asarray(reconstruction, dtype=np.float64), 0.0, 255.0)
    ref = reference.to_matrix() if isinstance(reference, GrayImage) \
        else np.asarray(reference, dtype=np.float64)
    if recon.shape != ref.shape:
        raise ValueError(f"shape mismatch: reconstruction {recon.shape} "
                         f"vs reference {ref.shape}")
    mse = float(np.mean((recon - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def relative_error(Y, X) -> float:
    """Frobenius distance over reference norm, ``||Y - X||_F / ||X||_F``."""
    denom = linalg.fro_norm(X)
    if denom == 0.0:
        raise ValueError("reference matrix is zero")
    return linalg.fro_dist(Y, X) / denom


def delta_sweep(X, mask, deltas, cfg: solver.SolverConfig,
                ) -> list[tuple[float, float]]:
    """Error of interval completion against the rank-``cfg.rank`` oracle.

    For each ``delta``, the entries of ``X`` at the flat indices in
    ``mask`` become boxes ``[x - delta, x + delta]`` (pure-inequality
    observations; ``delta = 0`` gives degenerate boxes), the solver runs
    under ``cfg``, and the relative Frobenius error of the completion
    against ``best_rank_approx(X, cfg.rank)`` is recorded.
    """
    X = np.asarray(X, dtype=np.float64)
    m, n = X.shape
    mask = np.asarray(mask, dtype=np.int64)
    vals = X.ravel()
    oracle = linalg.best_rank_approx(X, cfg.rank)
    out = []
    for delta in deltas:
        delta = float(delta)
        if delta < 0:
            raise ValueError(f"delta must be >= 0, got {delta}")
        entries = [box(int(f // n), int(f % n), vals[f] - delta,
                       vals[f] + delta) for f in mask]
        state = solver.run(ObservationSet(m, n, entries), cfg)
        out.append((delta, relative_error(state.factors.dense(), oracle)))
    return out
