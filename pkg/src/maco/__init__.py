"""Low-rank matrix completion under element-wise interval constraints.

The solver factorizes the unknown matrix as ``L @ R`` and runs alternating
parallel coordinate descent on a penalized objective: exact observations
contribute squared residuals, one-sided and two-sided bounds contribute
hinge penalties that vanish inside the feasible interval.  Updates are
closed-form coordinate steps sized by cached curvature constants, so no
spectrum computation is ever needed.
"""

from .errors import MacoError, NumericalAbort, ParseError, ValidationError
from .linalg import (SvdResult, best_rank_approx, fro_dist, fro_norm,
                     random_low_rank, svd, tail_bound)
from .metrics import MetricReport, MetricRow, delta_sweep, psnr, relative_error, rmse
from .model import (ConstraintKind, CsrIndex, Entry, FactorPair,
                    ObservationSet, ValidationReport, Violation, box,
                    build_index, equality, lower, product_entry, upper,
                    validate)
from .objective import (CoordinateUpdate, ObjectiveValue, col_directional_grad,
                        col_lipschitz, coordinate_update, eval_objective,
                        row_directional_grad, row_lipschitz)
from .io import (GrayImage, InpaintMode, build_interval_ratings,
                 image_to_observations, parse_observations, read_dense,
                 read_pgm, sample_mask, serialize_observations, write_dense,
                 write_pgm)
from .solver import (LipschitzCache, ResidualCache, SolverConfig, SolverState,
                     Variant, apply_variant_clamp, col_pass, grad_norms,
                     rebuild_caches, row_pass, run)
from .solver import init as init_state

__version__ = "0.1.0"
