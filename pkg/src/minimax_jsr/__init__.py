"""Finite-horizon brackets for joint, lower and minimax joint spectral radii.

Also: hourglass-set constructors and saddle points, and stabilizability
verdicts with controller certificates for ``x(n) = A_n B_n x(n-1)``.
"""

__version__ = "0.1.0"

from .config import DEFAULT, Tolerances
from .errors import (
    BudgetExceeded,
    ChainError,
    DimensionMismatch,
    InvalidMatrix,
    NonSquareError,
    NoSaddle,
    PositivityError,
    SchemaError,
)
from .linalg import NormKind, mat_mul, op_norm, spectral_radius
from .products import (
    Extremum,
    IndexWord,
    MatrixSet,
    SwitchedPair,
    eval_product,
    max_min_norm,
    max_min_rho,
    min_max_norm,
    min_max_rho,
    minimax_sweep,
)
from .radii import Quantity, RadiusBracket, jsr_bracket, lsr_bracket, minimax_brackets, minimax_table, set_product
from .hourglass import (
    HSetSpec,
    NoViolationFound,
    SaddleCertificate,
    Violation,
    falsify_hset,
    hset_exact_radii,
    hset_minimax_value,
    materialize,
    saddle_search,
)
from .stability import (
    Controller,
    Decision,
    Mode,
    StabilizationVerdict,
    Trajectory,
    check_asymptotic_stability,
    check_path_dependent,
    check_path_independent_periodic,
    check_uniform_stabilizability,
    simulate,
    verify_certificate,
)
