"""Hourglass sets of positive matrices: constructors, a sampling falsifier and saddle points.

Membership is never decided here.  Sets built from the guaranteed families
(linearly ordered chains, independent row uncertainty, and their Minkowski
sums and products) are trusted by construction; anything else can only be
screened by ``falsify_hset``, which may disprove membership but never
proves it.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ChainError, DimensionMismatch, NoSaddle, PositivityError
from .linalg import bmul, spectral_radii
from .products import MatrixSet, SwitchedPair

DEFAULT_SEED = 0x5EED
GRID_LEVELS = (1.0, 2.0, 10.0)


class Construction(str, enum.Enum):
    LINEARLY_ORDERED = "linearly-ordered"
    IRU = "independent-row-uncertainty"
    MINKOWSKI_SUM = "minkowski-sum"
    MINKOWSKI_PRODUCT = "minkowski-product"
    RAW = "raw"


def _require_positive(stack, what="matrix"):
    stack = np.asarray(stack, dtype=np.float64)
    if not np.all(stack > 0):
        raise PositivityError(f"every {what} entry must be strictly positive")


def require_positive_set(mset: MatrixSet):
    _require_positive(mset.stack, "set member")


@dataclass(frozen=True, eq=False)
class HSetSpec:
    """A recipe for an hourglass set; validated when built."""

    construction: Construction
    payload: object

    def __post_init__(self):
        kind = Construction(self.construction)
        object.__setattr__(self, "construction", kind)
        if kind in (Construction.LINEARLY_ORDERED, Construction.RAW):
            mats = self.payload if isinstance(self.payload, MatrixSet) else MatrixSet(tuple(self.payload))
            object.__setattr__(self, "payload", mats)
            require_positive_set(mats)
            if kind is Construction.LINEARLY_ORDERED:
                for i in range(len(mats) - 1):
                    if not np.all(mats[i] < mats[i + 1]):
                        raise ChainError(f"members {i} and {i + 1} are not strictly ordered entrywise")
        elif kind is Construction.IRU:
            rows = tuple(tuple(np.asarray(r, dtype=np.float64) for r in choices) for choices in self.payload)
            if not rows or any(not choices for choices in rows):
                raise ValueError("every row needs at least one choice")
            width = {r.shape for choices in rows for r in choices}
            if len(width) != 1 or next(iter(width)) == (0,) or len(next(iter(width))) != 1:
                raise DimensionMismatch("row choices must be non-empty vectors of one common length")
            for choices in rows:
                for r in choices:
                    if not np.all(np.isfinite(r)):
                        raise ValueError("row entries must be finite")
                    _require_positive(r, "row choice")
            object.__setattr__(self, "payload", rows)
        else:
            left, right = self.payload
            if not isinstance(left, HSetSpec) or not isinstance(right, HSetSpec):
                raise TypeError("Minkowski constructions take two HSetSpec children")
            object.__setattr__(self, "payload", (left, right))

    @classmethod
    def linearly_ordered(cls, *matrices):
        return cls(Construction.LINEARLY_ORDERED, MatrixSet.of(*matrices))

    @classmethod
    def iru(cls, rows):
        return cls(Construction.IRU, rows)

    @classmethod
    def raw(cls, *matrices):
        return cls(Construction.RAW, MatrixSet.of(*matrices))

    @classmethod
    def minkowski_sum(cls, left, right):
        return cls(Construction.MINKOWSKI_SUM, (left, right))

    @classmethod
    def minkowski_product(cls, left, right):
        return cls(Construction.MINKOWSKI_PRODUCT, (left, right))

    @property
    def guaranteed(self) -> bool:
        """True when every leaf of the recipe is a guaranteed family."""
        if self.construction is Construction.RAW:
            return False
        if self.construction in (Construction.MINKOWSKI_SUM, Construction.MINKOWSKI_PRODUCT):
            return all(child.guaranteed for child in self.payload)
        return True


def materialize(spec: HSetSpec) -> MatrixSet:
    kind = spec.construction
    if kind in (Construction.LINEARLY_ORDERED, Construction.RAW):
        return spec.payload
    if kind is Construction.IRU:
        rows = spec.payload
        members, labels = [], []
        # first row varies fastest
        for choice in itertools.product(*(range(len(r)) for r in reversed(rows))):
            choice = choice[::-1]
            members.append(np.stack([rows[i][c] for i, c in enumerate(choice)]))
            labels.append("(" + ",".join(str(c) for c in choice) + ")")
        return MatrixSet(tuple(members), labels)
    left, right = (materialize(child) for child in spec.payload)
    members, labels = [], []
    if kind is Construction.MINKOWSKI_SUM:
        if left.shape != right.shape:
            raise DimensionMismatch(f"cannot add {left.shape} and {right.shape} sets")
        for i, x in enumerate(left):
            for j, y in enumerate(right):
                members.append(x + y)
                labels.append(f"{left.label(i)}+{right.label(j)}")
    else:
        if left.shape[1] != right.shape[0]:
            raise DimensionMismatch(f"cannot multiply {left.shape} by {right.shape} sets")
        prods = bmul(left.stack[:, None], right.stack[None, :])
        for i in range(len(left)):
            for j in range(len(right)):
                members.append(prods[i, j])
                labels.append(f"{left.label(i)}*{right.label(j)}")
    return MatrixSet(tuple(members), labels)


# ---------------------------------------------------------------------------
# falsifier


@dataclass(frozen=True)
class Violation:
    """``u`` shows the hourglass condition fails for member ``matrix_index``.

    ``condition`` is 1 when nothing lies below ``A~u`` although something is
    not above it, 2 for the mirror statement.
    """

    matrix_index: int
    u: tuple
    condition: int


@dataclass(frozen=True)
class NoViolationFound:
    vectors_tested: int


def _images(stack: np.ndarray, u: np.ndarray) -> np.ndarray:
    # row-by-row sequential dot products, so rows shared between members
    # give identical image coordinates
    out = stack[:, :, 0] * u[0]
    for j in range(1, u.size):
        out = out + stack[:, :, j] * u[j]
    return out


def _check_vector(images: np.ndarray):
    """Return ``(index, condition)`` of the first failing member, or None."""
    for t, ref in enumerate(images):
        ge = np.all(images >= ref, axis=1)
        le = np.all(images <= ref, axis=1)
        differs = np.any(images != ref, axis=1)
        if not ge.all() and not np.any(le & differs):
            return t, 1
        if not le.all() and not np.any(ge & differs):
            return t, 2
    return None


def probe_vectors(dim: int, samples: int, seed: int = DEFAULT_SEED):
    """Deterministic stream of positive test vectors: grid points first, then random simplex points."""
    for point in itertools.product(GRID_LEVELS, repeat=dim):
        yield np.array(point)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        u = rng.dirichlet(np.ones(dim))
        if np.all(u > 0):
            yield u


def falsify_hset(mset: MatrixSet, samples: int = 1000, seed: int = DEFAULT_SEED):
    """Search for a positive vector witnessing that ``mset`` is not an hourglass set."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    require_positive_set(mset)
    stack = mset.stack
    tested = 0
    for u in probe_vectors(mset.shape[1], samples, seed):
        tested += 1
        hit = _check_vector(_images(stack, u))
        if hit is not None:
            return Violation(hit[0], tuple(float(x) for x in u), hit[1])
    return NoViolationFound(tested)


# ---------------------------------------------------------------------------
# saddle points


@dataclass(frozen=True)
class SaddleCertificate:
    a_index: int
    b_index: int
    value: float
    max_row_residual: float
    min_col_residual: float
    # security levels of the payoff table rho(A_i B_j)
    lower_value: float = float("nan")
    upper_value: float = float("nan")

    def valid(self, rel: float = DEFAULT.rel) -> bool:
        limit = rel * max(1.0, self.value)
        return self.max_row_residual <= limit and self.min_col_residual <= limit


def payoff_table(pair: SwitchedPair, tol: Tolerances = DEFAULT) -> np.ndarray:
    """``rho(A_i B_j)`` for every pair, rows indexed by A."""
    return spectral_radii(pair.pair_products, tol)


def _scan(pair: SwitchedPair, tol: Tolerances) -> SaddleCertificate:
    table = payoff_table(pair, tol)
    lower = float(table.min(axis=1).max())
    upper = float(table.max(axis=0).min())
    col_max = table.max(axis=0)
    row_min = table.min(axis=1)
    best = None
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            v = float(table[i, j])
            cert = SaddleCertificate(i, j, v, float(col_max[j] - v), float(v - row_min[i]), lower, upper)
            if cert.valid(tol.rel):
                return cert
            slack = max(cert.max_row_residual, 0.0) + max(cert.min_col_residual, 0.0)
            if best is None or slack < best[0]:
                best = (slack, cert)
    raise NoSaddle(
        f"no saddle point among {table.size} candidates; best residual {best[0]:.3g}", best=best[1]
    )


def saddle_search(pair: SwitchedPair, tol: Tolerances = DEFAULT) -> SaddleCertificate:
    """First (lexicographic) ``(i, j)`` with ``rho(A B_j) <= rho(A_i B_j) <= rho(A_i B)`` for all A, B."""
    require_positive_set(pair.a_set)
    require_positive_set(pair.b_set)
    return _scan(pair, tol)


def hset_exact_radii(mset: MatrixSet, assume_hset: bool = True, samples: int = 1000,
                     seed: int = DEFAULT_SEED, tol: Tolerances = DEFAULT):
    """Joint and lower spectral radius of a square hourglass set: the max and min member radius.

    With ``assume_hset=False`` the falsifier screens the set first and a
    ``ValueError`` carrying the violation is raised if one is found.
    """
    require_positive_set(mset)
    if not mset.is_square:
        raise DimensionMismatch(f"members are {mset.shape[0]}x{mset.shape[1]}; need square matrices")
    if not assume_hset:
        found = falsify_hset(mset, samples, seed)
        if isinstance(found, Violation):
            err = ValueError(f"not an hourglass set: member {found.matrix_index} fails at u={found.u}")
            err.violation = found
            raise err
    rho = spectral_radii(mset.stack, tol)
    return {"jsr": float(rho.max()), "lsr": float(rho.min())}


def hset_minimax_value(pair: SwitchedPair, tol: Tolerances = DEFAULT) -> float:
    """Common value of all six minimax radii for a pair of hourglass sets."""
    return saddle_search(pair, tol).value


SpecLike = Union[HSetSpec, MatrixSet]


def as_set(spec: SpecLike) -> MatrixSet:
    return materialize(spec) if isinstance(spec, HSetSpec) else spec


def random_iru(rng: np.random.Generator, n_rows: int = 2, n_cols: int = 2, choices: int = 2,
               low: float = 0.1, high: float = 2.0) -> HSetSpec:
    """IRU spec with every entry drawn uniformly from ``[low, high)``."""
    return HSetSpec.iru(
        [[rng.uniform(low, high, n_cols) for _ in range(choices)] for _ in range(n_rows)]
    )


def random_iru_pair(rng: np.random.Generator, n: int = 2, choices: int = 2,
                    low: float = 0.1, high: float = 2.0, m: Optional[int] = None) -> SwitchedPair:
    m = n if m is None else m
    a = materialize(random_iru(rng, n, m, choices, low, high))
    b = materialize(random_iru(rng, m, n, choices, low, high))
    return SwitchedPair(a, b)


__all__ = [
    "Construction", "HSetSpec", "materialize", "Violation", "NoViolationFound", "falsify_hset",
    "probe_vectors", "SaddleCertificate", "payoff_table", "saddle_search", "hset_exact_radii",
    "hset_minimax_value", "random_iru", "random_iru_pair", "require_positive_set", "as_set",
    "DEFAULT_SEED",
]
