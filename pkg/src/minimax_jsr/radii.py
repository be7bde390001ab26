"""Finite-horizon brackets for the joint, lower and minimax joint spectral radii.

Certified bounds come from two facts: for a submultiplicative norm the
sequences ``max ||P_m||^(1/m)`` and ``mu_m^(1/m)``, ``eta_m^(1/m)`` have their
limits as infima over ``m``, and ``rho(P)^(1/m)`` never exceeds the joint
spectral radius.  The spectral-radius versions of the minimax quantities
have no such guarantee, so they are reported as estimates only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .config import DEFAULT, Tolerances
from .errors import BudgetExceeded, DimensionMismatch, NonSquareError
from .linalg import NormKind, bmul, identity
from .products import Extremum, MatrixSet, SwitchedPair, minimax_sweep


class Quantity(str, enum.Enum):
    JSR = "jsr"
    LSR = "lsr"
    MU = "mu"
    ETA = "eta"
    MU_HAT = "mu_hat"
    MU_CHECK = "mu_check"
    ETA_HAT = "eta_hat"
    ETA_CHECK = "eta_check"


def root(value: float, m: int, tol: Tolerances = DEFAULT):
    """``value ** (1/m)`` via logs; returns ``(root, underflowed)``."""
    if m == 0:
        return 1.0, False
    if value < tol.underflow:
        return 0.0, True
    if m == 1:
        return float(value), False
    return math.exp(math.log(value) / m), False


@dataclass(frozen=True)
class HorizonRow:
    """Raw (un-rooted) extremal values at one horizon, with their words."""

    m: int
    norm_value: float
    rho_value: float
    norm_word: tuple
    rho_word: tuple

    @property
    def norm_root(self) -> float:
        return root(self.norm_value, self.m)[0]

    @property
    def rho_root(self) -> float:
        return root(self.rho_value, self.m)[0]


@dataclass(frozen=True)
class MinimaxRow:
    m: int
    mu: Extremum
    eta: Extremum
    mu_bar: Extremum
    eta_bar: Extremum

    def roots(self):
        return {k: root(getattr(self, k).value, self.m)[0] for k in ("mu", "eta", "mu_bar", "eta_bar")}


@dataclass(frozen=True)
class RadiusBracket:
    quantity: Quantity
    lower: float
    upper: float
    horizon: int
    norm: NormKind
    lower_witness: Optional[object] = None
    upper_witness: Optional[object] = None
    lower_m: Optional[int] = None
    upper_m: Optional[int] = None
    lower_certified: bool = True
    upper_certified: bool = True
    # raw estimate when it had to be clamped below ``upper``
    estimate: Optional[float] = None
    underflow: bool = False
    rows: tuple = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    @property
    def certified(self) -> bool:
        return self.lower_certified and self.upper_certified


def _require_square(mset: MatrixSet):
    if not mset.is_square:
        raise NonSquareError(f"set members are {mset.shape[0]}x{mset.shape[1]}; need square matrices")


def _require_horizon(n):
    if int(n) != n or n < 1:
        raise ValueError(f"horizon must be a positive integer, got {n!r}")
    return int(n)


def _identity_set(n: int) -> MatrixSet:
    return MatrixSet.of(identity(n), labels=["I"])


def _collect(step, n):
    """Run ``step(m)`` for m = 1..n; on budget overrun attach the rows finished so far."""
    rows = []
    for m in range(1, n + 1):
        try:
            rows.append(step(m))
        except BudgetExceeded as exc:
            exc.rows = tuple(rows)
            raise
    return rows


def _partial(exc, build):
    # re-raise a budget overrun with the bracket over the completed horizons
    rows = getattr(exc, "rows", ())
    if rows:
        exc.partial = build(list(rows), len(rows))
        exc.bound = "bracket"
    raise exc


def set_rows(mset: MatrixSet, n: int, largest: bool, norm=NormKind.ROW_SUM, tol=DEFAULT, budget=None, workers=1):
    """Per-horizon max (``largest``) or min of product norms and spectral radii over a square set."""
    _require_square(mset)
    eye = _identity_set(mset.shape[0])
    pair = SwitchedPair(mset, eye) if largest else SwitchedPair(eye, mset)
    pick = (lambda w: w.a_indices) if largest else (lambda w: w.b_indices)

    def step(m):
        sw = minimax_sweep(pair, m, norm, ("norm", "rho"), tol, budget, workers)
        return HorizonRow(m, sw.mu.value, sw.mu_bar.value, pick(sw.mu.witness), pick(sw.mu_bar.witness))

    return _collect(step, n)


def jsr_bracket(mset: MatrixSet, n: int, norm=NormKind.ROW_SUM, tol: Tolerances = DEFAULT, budget=None, workers=1) -> RadiusBracket:
    """Bracket the joint spectral radius with products of length up to ``n``."""
    n = _require_horizon(n)
    norm = NormKind.parse(norm)
    try:
        rows = set_rows(mset, n, True, norm, tol, budget, workers)
    except BudgetExceeded as exc:
        _partial(exc, lambda r, h: _jsr_from_rows(r, h, norm, tol))
    return _jsr_from_rows(rows, n, norm, tol)


def _finite(rows, value, tol):
    # rows whose value rooted without underflow; a clamped 0 is not a sound bound
    ok = [r for r in rows if not root(value(r), r.m, tol)[1]]
    return ok or rows


def _jsr_from_rows(rows, n, norm, tol):
    up = min(_finite(rows, lambda r: r.norm_value, tol), key=lambda r: (r.norm_root, r.m))
    lo = max(rows, key=lambda r: (r.rho_root, -r.m))
    flagged = any(root(r.norm_value, r.m, tol)[1] for r in rows)
    return RadiusBracket(
        Quantity.JSR, min(lo.rho_root, up.norm_root), up.norm_root, n, norm,
        lower_witness=lo.rho_word, upper_witness=up.norm_word,
        lower_m=lo.m, upper_m=up.m, underflow=flagged, rows=tuple(rows),
    )


def lsr_bracket(mset: MatrixSet, n: int, norm=NormKind.ROW_SUM, tol: Tolerances = DEFAULT, budget=None, workers=1) -> RadiusBracket:
    """Upper bound for the lower spectral radius; the lower end is always 0.

    Any length-m word repeated periodically is admissible, so both the
    smallest product norm and the smallest product spectral radius (each
    to the power 1/m) bound the lower spectral radius from above.
    """
    n = _require_horizon(n)
    norm = NormKind.parse(norm)
    try:
        rows = set_rows(mset, n, False, norm, tol, budget, workers)
    except BudgetExceeded as exc:
        _partial(exc, lambda r, h: _lsr_from_rows(r, h, norm, tol))
    return _lsr_from_rows(rows, n, norm, tol)


def _lsr_from_rows(rows, n, norm, tol):
    best = None
    for r in rows:
        for raw, value, word in ((r.norm_value, r.norm_root, r.norm_word), (r.rho_value, r.rho_root, r.rho_word)):
            if root(raw, r.m, tol)[1]:
                continue
            if best is None or value < best[0]:
                best = (value, word, r.m)
    if best is None:
        best = (0.0, rows[0].norm_word, rows[0].m)
    flagged = any(root(min(r.norm_value, r.rho_value), r.m, tol)[1] for r in rows)
    return RadiusBracket(
        Quantity.LSR, 0.0, best[0], n, norm,
        upper_witness=best[1], upper_m=best[2], lower_certified=True,
        underflow=flagged, rows=tuple(rows),
    )


def minimax_table(pair: SwitchedPair, n: int, norm=NormKind.ROW_SUM, tol: Tolerances = DEFAULT, budget=None, workers=1):
    """``mu_m, eta_m, mu_bar_m, eta_bar_m`` with witnesses for every ``m <= n``."""
    n = _require_horizon(n)
    norm = NormKind.parse(norm)

    def step(m):
        sw = minimax_sweep(pair, m, norm, ("norm", "rho"), tol, budget, workers)
        return MinimaxRow(m, sw.mu, sw.eta, sw.mu_bar, sw.eta_bar)

    return _collect(step, n)


def _minimax_bracket(quantity, rows, norm_key, rho_key, n, norm, tol):
    ups = [(root(getattr(r, norm_key).value, r.m, tol), r) for r in rows]
    flagged = any(u[0][1] for u in ups)
    ups = [u for u in ups if not u[0][1]] or ups
    (upper, _), up_row = min(ups, key=lambda t: (t[0][0], t[1].m))
    ests = [(root(getattr(r, rho_key).value, r.m, tol)[0], r) for r in rows]
    est, est_row = max(ests, key=lambda t: (t[0], -t[1].m))
    return RadiusBracket(
        quantity, min(est, upper), upper, n, norm,
        lower_witness=getattr(est_row, rho_key).witness,
        upper_witness=getattr(up_row, norm_key).witness,
        lower_m=est_row.m, upper_m=up_row.m,
        lower_certified=False,
        estimate=est if est > upper else None,
        underflow=flagged,
        rows=tuple(rows),
    )


def _estimate(quantity, rows, key, largest, n, norm, tol):
    vals = [(root(getattr(r, key).value, r.m, tol)[0], r) for r in rows]
    if largest:
        value, row = max(vals, key=lambda t: (t[0], -t[1].m))
    else:
        value, row = min(vals, key=lambda t: (t[0], t[1].m))
    w = getattr(row, key).witness
    return RadiusBracket(
        quantity, value, value, n, norm,
        lower_witness=w, upper_witness=w, lower_m=row.m, upper_m=row.m,
        lower_certified=False, upper_certified=False,
    )


def minimax_brackets(pair: SwitchedPair, n: int, norm=NormKind.ROW_SUM, tol: Tolerances = DEFAULT, budget=None, workers=1):
    """Brackets for mu and eta plus running estimates of the four spectral-radius variants.

    For mu and eta the upper end ``min_m value_m^(1/m)`` is certified; the
    lower end is the largest ``rho``-based value and is only an estimate.
    The hat/check quantities are the running max/min of
    ``mu_bar_m^(1/m)`` and ``eta_bar_m^(1/m)`` and are never certified.
    """
    norm = NormKind.parse(norm)
    try:
        rows = minimax_table(pair, n, norm, tol, budget, workers)
    except BudgetExceeded as exc:
        _partial(exc, lambda r, h: _brackets_from_rows(r, h, norm, tol))
    return _brackets_from_rows(rows, n, norm, tol)


def _brackets_from_rows(rows, n, norm, tol):
    return [
        _minimax_bracket(Quantity.MU, rows, "mu", "mu_bar", n, norm, tol),
        _minimax_bracket(Quantity.ETA, rows, "eta", "eta_bar", n, norm, tol),
        _estimate(Quantity.MU_HAT, rows, "mu_bar", True, n, norm, tol),
        _estimate(Quantity.MU_CHECK, rows, "mu_bar", False, n, norm, tol),
        _estimate(Quantity.ETA_HAT, rows, "eta_bar", True, n, norm, tol),
        _estimate(Quantity.ETA_CHECK, rows, "eta_bar", False, n, norm, tol),
    ]


def set_product(a: MatrixSet, b: MatrixSet) -> MatrixSet:
    """``{AB : A in a, B in b}`` in row-major (A outer) order, duplicates kept."""
    if a.shape[1] != b.shape[0] or a.shape[0] != b.shape[1]:
        raise DimensionMismatch(
            f"{a.shape[0]}x{a.shape[1]} and {b.shape[0]}x{b.shape[1]} sets do not compose to square products"
        )
    prods = bmul(a.stack[:, None], b.stack[None, :])
    members = [prods[i, j] for i in range(len(a)) for j in range(len(b))]
    labels = [f"{a.label(i)}*{b.label(j)}" for i in range(len(a)) for j in range(len(b))]
    return MatrixSet(tuple(members), labels)
