"""Small dense real matrices: products, operator norms, spectral radius.

Every routine here works on a single matrix or on a stack of matrices
(shape ``(..., rows, cols)``).  Products and norms are written as explicit
elementwise sums in a fixed order so that a given product evaluates to the
same bits whether it is computed alone or inside a large batch.  The
enumeration code relies on that to make pruned and exhaustive searches
agree exactly.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import DimensionMismatch, InvalidMatrix, NonSquareError


class NormKind(str, enum.Enum):
    ROW_SUM = "row-sum"  # induced by the vector max-norm
    COL_SUM = "col-sum"  # induced by the vector 1-norm
    SPECTRAL = "spectral"

    @classmethod
    def parse(cls, value) -> "NormKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown norm {value!r}; expected one of "
                + ", ".join(k.value for k in cls)
            ) from None


def as_matrix(data) -> np.ndarray:
    """Validate ``data`` as a finite 2-D float64 matrix and return a read-only copy."""
    m = np.array(data, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidMatrix(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix entries must be finite")
    m.setflags(write=False)
    return m


def identity(n: int) -> np.ndarray:
    m = np.eye(n)
    m.setflags(write=False)
    return m


def soa_mul(a: np.ndarray, b: np.ndarray, out=None) -> np.ndarray:
    """Matrix product on component-first stacks: ``a`` is ``(n, k, ...)``, ``b`` is ``(k, m, ...)``.

    Entry ``(i, j)`` is accumulated as ``a[i,0]*b[0,j] + a[i,1]*b[1,j] + ...``
    left to right, elementwise over the broadcast batch axes.
    """
    n, inner = a.shape[:2]
    m = b.shape[1]
    if out is None:
        out = np.empty((n, m) + np.broadcast_shapes(a.shape[2:], b.shape[2:]))
    for i in range(n):
        for j in range(m):
            acc = a[i, 0] * b[0, j]
            for k in range(1, inner):
                acc = acc + a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def to_soa(stack: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.asarray(stack, dtype=np.float64), (-2, -1), (0, 1))


def from_soa(comp: np.ndarray) -> np.ndarray:
    return np.moveaxis(comp, (0, 1), (-2, -1))


def bmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Broadcasting matrix product ``a @ b`` over leading batch axes."""
    return from_soa(soa_mul(to_soa(a), to_soa(b)))


def mat_mul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
            if a.ndim == 2 and b.ndim == 2
            else f"cannot multiply arrays of shape {a.shape} and {b.shape}"
        )
    return bmul(a, b)


def _abs_sum(parts) -> np.ndarray:
    # sequential sum keeps batch and single evaluation bit-identical
    total = np.abs(parts[0])
    for p in parts[1:]:
        total = total + np.abs(p)
    return total


def soa_norms(comp: np.ndarray, kind: NormKind = NormKind.ROW_SUM, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Operator norms of a component-first stack ``(rows, cols, ...)``."""
    kind = NormKind.parse(kind)
    rows, cols = comp.shape[:2]
    if kind is NormKind.ROW_SUM:
        out = _abs_sum([comp[0, j] for j in range(cols)])
        for i in range(1, rows):
            out = np.maximum(out, _abs_sum([comp[i, j] for j in range(cols)]))
        return out
    if kind is NormKind.COL_SUM:
        out = _abs_sum([comp[i, 0] for i in range(rows)])
        for j in range(1, cols):
            out = np.maximum(out, _abs_sum([comp[i, j] for i in range(rows)]))
        return out
    gram = soa_mul(np.swapaxes(comp, 0, 1), comp)
    return np.sqrt(soa_spectral_radii(gram, tol))


def norms(stack: np.ndarray, kind: NormKind = NormKind.ROW_SUM, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Operator norms of every matrix in a stack ``(..., rows, cols)``."""
    return soa_norms(to_soa(stack), kind, tol)


def op_norm(m, kind: NormKind = NormKind.ROW_SUM, tol: Tolerances = DEFAULT) -> float:
    m = np.asarray(m, dtype=np.float64)
    return float(norms(m[None], kind, tol)[0])


def vector_norm(x, kind: NormKind = NormKind.ROW_SUM) -> np.ndarray:
    """Vector norm that induces the matrix norm ``kind`` (max, 1 or Euclidean)."""
    kind = NormKind.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    parts = np.moveaxis(x, -1, 0)
    if kind is NormKind.ROW_SUM:
        return np.abs(x).max(axis=-1)
    if kind is NormKind.COL_SUM:
        return _abs_sum(parts)
    return np.sqrt(_abs_sum(parts * parts))


def _rho_2x2(a, b, c, d) -> np.ndarray:
    half_trace = (a + d) / 2
    half_gap = (a - d) / 2
    disc = half_gap * half_gap + b * c
    real = np.abs(half_trace) + np.sqrt(np.maximum(disc, 0.0))
    # complex pair: both eigenvalues have modulus sqrt(det)
    cplx = np.sqrt(np.maximum(a * d - b * c, 0.0))
    return np.where(disc >= 0, real, cplx)


def _row_sum(stack: np.ndarray) -> np.ndarray:
    return soa_norms(to_soa(stack), NormKind.ROW_SUM)


def _rho_gelfand(stack: np.ndarray, tol: Tolerances) -> np.ndarray:
    count = stack.shape[0]
    out = np.zeros(count)
    scale = _row_sum(stack)
    idx = np.flatnonzero(scale > 0)
    if idx.size == 0:
        return out
    p = stack[idx] / scale[idx, None, None]
    log_rate = np.log(scale[idx]).astype(np.longdouble)
    est = scale[idx]
    settled = np.zeros(idx.size, dtype=bool)
    # a nilpotent N x N matrix vanishes after ceil(log2 N) squarings; do not
    # trust a stalled estimate before then
    min_squarings = max(2, math.ceil(math.log2(stack.shape[-1])) + 1)
    for j in range(1, tol.max_squarings + 1):
        q = bmul(p, p)
        qn = _row_sum(q)
        nilpotent = qn == 0
        safe = np.where(nilpotent, 1.0, qn)
        log_rate = log_rate + np.log(safe).astype(np.longdouble) / np.longdouble(2.0**j)
        new = np.exp(log_rate).astype(np.float64)
        close = np.abs(new - est) < tol.iteration * new
        # require two consecutive small steps to skip transient plateaus
        done = nilpotent | (close & settled & (j >= min_squarings))
        out[idx[done]] = np.where(nilpotent[done], 0.0, new[done])
        keep = ~done
        if not keep.any():
            return out
        idx = idx[keep]
        p = q[keep] / qn[keep, None, None]
        log_rate = log_rate[keep]
        est = new[keep]
        settled = close[keep]
    out[idx] = est
    return out


def soa_spectral_radii(comp: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Spectral radius of every matrix in a component-first stack ``(n, n, ...)``.

    2x2 matrices use the closed-form eigenvalues.  Larger ones use Gelfand
    iteration with repeated squaring, renormalizing by the row-sum norm after
    each squaring and accumulating the log scale in extended precision.
    """
    n = comp.shape[0]
    if comp.shape[1] != n:
        raise NonSquareError(f"spectral radius needs square matrices, got {n}x{comp.shape[1]}")
    if n == 1:
        return np.abs(comp[0, 0])
    if n == 2:
        return _rho_2x2(comp[0, 0], comp[0, 1], comp[1, 0], comp[1, 1])
    batch = comp.shape[2:]
    flat = from_soa(comp).reshape((-1, n, n))
    return _rho_gelfand(flat, tol).reshape(batch)


def spectral_radii(stack: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Spectral radius of every square matrix in a stack ``(..., n, n)``."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.shape[-1] != stack.shape[-2]:
        raise NonSquareError(f"spectral radius needs square matrices, got {stack.shape[-2]}x{stack.shape[-1]}")
    return soa_spectral_radii(to_soa(stack), tol)


def spectral_radius(m, tol: Tolerances = DEFAULT) -> float:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSquareError(f"spectral radius needs a square matrix, got shape {m.shape}")
    return float(spectral_radii(m[None], tol)[0])


def sigma_lower(stack: np.ndarray, kind: NormKind, tol: Tolerances = DEFAULT) -> np.ndarray:
    """``1 / ||X^-1||`` for each matrix, or 0 where X is singular or badly conditioned.

    For any submultiplicative norm ``||XY|| >= ||Y|| * sigma_lower(X)``.
    """
    stack = np.asarray(stack, dtype=np.float64)
    lead = stack.shape[:-2]
    flat = stack.reshape((-1,) + stack.shape[-2:])
    out = np.zeros(flat.shape[0])
    if stack.shape[-1] != stack.shape[-2]:
        return out.reshape(lead)
    for i, x in enumerate(flat):
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(x)
        if not math.isfinite(cond) or cond > tol.max_condition:
            continue
        inv_norm = float(norms(np.linalg.inv(x)[None], kind, tol)[0])
        if inv_norm > 0:
            out[i] = 1.0 / inv_norm
    return out.reshape(lead)
