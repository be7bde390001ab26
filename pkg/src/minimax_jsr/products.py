"""Interleaved products ``A_n B_n ... A_1 B_1`` and their max-min / min-max values.

Two evaluation paths share one arithmetic kernel (``linalg.bmul`` applied as
``(A_t B_t) @ prefix``):

* an exhaustive sweep that materializes all leaf products in chunks and
  reduces the max-min and min-max of one table in a single pass;
* a depth-first branch-and-bound over the outer player's choices, carrying
  the array of surviving inner prefixes at every node.

Both visit index words in lexicographic order and only replace an incumbent
on strict improvement, so they return the same value and the same witness.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import BudgetExceeded, DimensionMismatch
from .linalg import (
    NormKind,
    as_matrix,
    bmul,
    identity,
    norms,
    sigma_lower,
    soa_mul,
    soa_norms,
    soa_spectral_radii,
    to_soa,
)


@dataclass(frozen=True, eq=False)
class MatrixSet:
    members: tuple
    labels: Optional[tuple] = None

    def __post_init__(self):
        members = tuple(as_matrix(m) for m in self.members)
        if not members:
            raise ValueError("a matrix set needs at least one member")
        shape = members[0].shape
        for i, m in enumerate(members):
            if m.shape != shape:
                raise DimensionMismatch(
                    f"member {i} has shape {m.shape[0]}x{m.shape[1]}, expected {shape[0]}x{shape[1]}"
                )
        object.__setattr__(self, "members", members)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != len(members):
                raise ValueError(f"{len(labels)} labels for {len(members)} matrices")
            if len(set(labels)) != len(labels):
                raise ValueError("labels must be unique")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def of(cls, *matrices, labels=None) -> "MatrixSet":
        return cls(tuple(matrices), labels)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    @property
    def shape(self):
        return self.members[0].shape

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    @cached_property
    def stack(self) -> np.ndarray:
        s = np.stack(self.members)
        s.setflags(write=False)
        return s

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels else str(i)


@dataclass(frozen=True, eq=False)
class SwitchedPair:
    """Compatible pair of sets: ``a_set`` is N x M, ``b_set`` is M x N."""

    a_set: MatrixSet
    b_set: MatrixSet

    def __post_init__(self):
        (n, m), (m2, n2) = self.a_set.shape, self.b_set.shape
        if m != m2 or n != n2:
            raise DimensionMismatch(
                f"A members are {n}x{m} and B members are {m2}x{n2}; need N x M and M x N"
            )

    @property
    def dim(self) -> int:
        return self.a_set.shape[0]

    @cached_property
    def pair_products(self) -> np.ndarray:
        """``AB`` for every (A, B), shape ``(|A|, |B|, N, N)``."""
        pp = bmul(self.a_set.stack[:, None], self.b_set.stack[None, :])
        pp.setflags(write=False)
        return pp

    @cached_property
    def pair_components(self) -> np.ndarray:
        """``pair_products`` laid out component-first: ``(N, N, |A|, |B|)``."""
        comp = np.ascontiguousarray(to_soa(self.pair_products))
        comp.setflags(write=False)
        return comp


@dataclass(frozen=True)
class IndexWord:
    a_indices: tuple = ()
    b_indices: tuple = ()

    def __post_init__(self):
        a = tuple(int(i) for i in self.a_indices)
        b = tuple(int(i) for i in self.b_indices)
        if len(a) != len(b):
            raise ValueError(f"word lengths differ: {len(a)} A indices, {len(b)} B indices")
        object.__setattr__(self, "a_indices", a)
        object.__setattr__(self, "b_indices", b)

    def __len__(self):
        return len(self.a_indices)

    def check(self, pair: SwitchedPair):
        for name, idx, size in (("A", self.a_indices, len(pair.a_set)), ("B", self.b_indices, len(pair.b_set))):
            for i in idx:
                if not 0 <= i < size:
                    raise IndexError(f"{name} index {i} out of range for a set of {size}")


class Extremum(NamedTuple):
    value: float
    witness: IndexWord


def eval_product(pair: SwitchedPair, word: IndexWord, kind=NormKind.ROW_SUM, tol: Tolerances = DEFAULT):
    """Return ``(A_n B_n ... A_1 B_1, norm)``; step 1 is applied first."""
    word.check(pair)
    prod = identity(pair.dim)
    pp = pair.pair_products
    for a, b in zip(word.a_indices, word.b_indices):
        prod = bmul(pp[a, b], prod)
    return prod, float(norms(prod[None], kind, tol)[0])


def word_product(mset: MatrixSet, word: Sequence[int]) -> np.ndarray:
    """``M_{w_n} ... M_{w_1}`` for a word over a square set."""
    prod = identity(mset.shape[0])
    for i in word:
        if not 0 <= i < len(mset):
            raise IndexError(f"index {i} out of range for a set of {len(mset)}")
        prod = bmul(mset[i], prod)
    return prod


def _digits(index: int, base: int, length: int) -> tuple:
    out = []
    for _ in range(length):
        index, r = divmod(index, base)
        out.append(r)
    return tuple(reversed(out))


def _leaf_values(block: np.ndarray, quantity: str, kind: NormKind, tol: Tolerances) -> np.ndarray:
    if quantity == "norm":
        return soa_norms(block, kind, tol)
    return soa_spectral_radii(block, tol)


# ---------------------------------------------------------------------------
# exhaustive sweep


class _RowReducer:
    """max over rows of (min over columns); lexicographic first on ties."""

    def __init__(self):
        self.value = -np.inf
        self.row = -1
        self.col = -1

    def update(self, values, row_start):
        row_min = values.min(axis=1)
        i = int(np.argmax(row_min))
        if row_min[i] > self.value:
            self.value = float(row_min[i])
            self.row = row_start + i
            self.col = int(np.argmin(values[i]))

    def merge(self, other: "_RowReducer"):
        if other.value > self.value:
            self.value, self.row, self.col = other.value, other.row, other.col


class _ColReducer:
    """min over columns of (max over rows); lexicographic first on ties."""

    def __init__(self, ncols):
        self.col_max = np.full(ncols, -np.inf)
        self.col_arg = np.zeros(ncols, dtype=np.int64)

    def update(self, values, row_start):
        cmax = values.max(axis=0)
        better = cmax > self.col_max
        self.col_max[better] = cmax[better]
        self.col_arg[better] = values.argmax(axis=0)[better] + row_start

    def merge(self, other: "_ColReducer"):
        better = other.col_max > self.col_max
        self.col_max[better] = other.col_max[better]
        self.col_arg[better] = other.col_arg[better]

    def result(self):
        j = int(np.argmin(self.col_max))
        return float(self.col_max[j]), int(self.col_arg[j]), j


def _expand(pp, prefix):
    """All children ``(A_a B_b) @ P``, shape ``(N, N, ka, |A|, kb, |B|)``.

    One scalar-times-array product per (a, b) keeps the inner loops long.
    """
    na, nb = pp.shape[2:]
    ka, kb = prefix.shape[2:]
    out = np.empty(prefix.shape[:2] + (ka, na, kb, nb))
    for a in range(na):
        for b in range(nb):
            soa_mul(pp[:, :, a, b], prefix, out=out[:, :, :, a, :, b])
    return out


def _blocks(pp, prefix, depth, row_start, n, limit):
    """Yield ``(row_start, block)`` covering complete rows of the leaf table in order."""
    if depth == n:
        yield row_start, prefix
        return
    na, nb = pp.shape[2:]
    ka, kb = prefix.shape[2:]
    if ka * kb * na * nb <= limit or ka == 1:
        child = _expand(pp, prefix).reshape(prefix.shape[:2] + (ka * na, kb * nb))
        yield from _blocks(pp, child, depth + 1, row_start * na, n, limit)
        return
    step = max(1, limit // (kb * na * nb))
    for s in range(0, ka, step):
        yield from _blocks(pp, prefix[:, :, s : s + step], depth, row_start + s, n, limit)


@dataclass
class SweepResult:
    """Finite-horizon max-min and min-max values of one leaf table."""

    n: int
    mu: Optional[Extremum] = None
    eta: Optional[Extremum] = None
    mu_bar: Optional[Extremum] = None
    eta_bar: Optional[Extremum] = None
    leaves: int = 0
    extra: dict = field(default_factory=dict)


def _check_horizon(n):
    if int(n) != n or n < 0:
        raise ValueError(f"horizon must be a nonnegative integer, got {n!r}")
    return int(n)


def minimax_sweep(
    pair: SwitchedPair,
    n: int,
    kind=NormKind.ROW_SUM,
    quantities=("norm", "rho"),
    tol: Tolerances = DEFAULT,
    budget: Optional[int] = None,
    workers: int = 1,
) -> SweepResult:
    """Exhaustively evaluate every length-``n`` word once and reduce all requested games.

    ``quantities`` selects ``"norm"`` (fills ``mu``/``eta``) and/or ``"rho"``
    (fills ``mu_bar``/``eta_bar``).
    """
    n = _check_horizon(n)
    kind = NormKind.parse(kind)
    budget = tol.budget if budget is None else budget
    na, nb = len(pair.a_set), len(pair.b_set)
    res = SweepResult(n)
    if n == 0:
        empty = Extremum(1.0, IndexWord())
        for q in quantities:
            if q == "norm":
                res.mu = res.eta = empty
            else:
                res.mu_bar = res.eta_bar = empty
        return res
    leaves = (na * nb) ** n
    if leaves > budget:
        raise BudgetExceeded(
            f"{leaves} leaf products at horizon {n} exceed the budget of {budget}", None, None, 0
        )
    pp = pair.pair_components

    def run(first_rows):
        reducers = {q: (_RowReducer(), _ColReducer(nb**n)) for q in quantities}
        start = identity(pair.dim)[:, :, None, None]
        for a0 in first_rows:
            prefix = soa_mul(pp[:, :, a0 : a0 + 1, :], start)
            for row_start, block in _blocks(pp, prefix, 1, a0, n, tol.chunk):
                for q, (rows, cols) in reducers.items():
                    vals = _leaf_values(block, q, kind, tol)
                    rows.update(vals, row_start)
                    cols.update(vals, row_start)
        return reducers

    if workers > 1 and na > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, [[a] for a in range(na)]))
        reducers = parts[0]
        for part in parts[1:]:
            for q in quantities:
                reducers[q][0].merge(part[q][0])
                reducers[q][1].merge(part[q][1])
    else:
        reducers = run(range(na))

    for q, (rows, cols) in reducers.items():
        mm = Extremum(rows.value, IndexWord(_digits(rows.row, na, n), _digits(rows.col, nb, n)))
        val, arow, bcol = cols.result()
        xm = Extremum(val, IndexWord(_digits(arow, na, n), _digits(bcol, nb, n)))
        if q == "norm":
            res.mu, res.eta = mm, xm
        else:
            res.mu_bar, res.eta_bar = mm, xm
    res.leaves = leaves
    return res


# ---------------------------------------------------------------------------
# branch and bound


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0
        self.lock = threading.Lock()

    def spend(self, count, partial, bound):
        with self.lock:
            self.used += count
            if self.used > self.limit:
                raise BudgetExceeded(
                    f"leaf evaluations exceeded the budget of {self.limit}", partial, bound, self.used
                )


class _Incumbent:
    def __init__(self, value):
        self.value = value
        self.outer = None
        self.inner = None


def _max_min_bb(pair, n, kind, tol, budget, first_outer, shared=None):
    """Outer player maximizes over A-words, inner minimizes over B-words."""
    pp = pair.pair_components
    na, nb = pp.shape[2:]
    pair_norms = norms(pair.pair_products, kind, tol)
    # completions: min_B ||S|| <= prod_t max_a min_b ||A_a B_b||
    grow = float(pair_norms.min(axis=1).max())
    # completions: ||S P|| >= ||P|| * prod_t min_{a,b} 1/||(A_a B_b)^-1||
    shrink = float(sigma_lower(pair.pair_products, kind, tol).min())
    lo, hi = 1.0 - tol.rel, 1.0 + tol.rel
    best = shared or _Incumbent(-np.inf)

    def rec(a_word, prefix, b_idx, depth):
        if depth == n:
            vals = soa_norms(prefix, kind, tol)
            budget.spend(vals.size, None if best.outer is None else best.value, "lower")
            i = int(np.argmin(vals))
            if vals[i] > best.value:
                best.value = float(vals[i])
                best.outer = a_word
                best.inner = int(b_idx[i])
            return
        r = n - depth
        pn = soa_norms(prefix, kind, tol)
        upper = float(pn.min()) * grow**r
        if best.outer is not None and upper * hi <= best.value:
            return
        if shrink > 0:
            keep = pn * shrink**r * lo <= upper * hi
            if not keep.all():
                prefix, b_idx = prefix[:, :, keep], b_idx[keep]
        k = prefix.shape[2]
        for a in range(na):
            child = soa_mul(pp[:, :, a, None, :], prefix[:, :, :, None]).reshape(prefix.shape[:2] + (k * nb,))
            child_idx = (b_idx[:, None] * nb + np.arange(nb)).reshape(-1)
            rec(a_word + (a,), child, child_idx, depth + 1)

    start = identity(pair.dim)[:, :, None]
    for a in first_outer:
        rec((a,), soa_mul(pp[:, :, a, :], start), np.arange(nb), 1)
    return best


def _min_max_bb(pair, n, kind, tol, budget, first_outer, shared=None):
    """Outer player minimizes over B-words, inner maximizes over A-words."""
    pp = pair.pair_components
    na, nb = pp.shape[2:]
    grow = float(norms(pair.pair_products, kind, tol).max())
    ell = float(sigma_lower(pair.pair_products, kind, tol).max(axis=0).min())
    lo, hi = 1.0 - tol.rel, 1.0 + tol.rel
    best = shared or _Incumbent(np.inf)

    def rec(b_word, prefix, a_idx, depth):
        if depth == n:
            vals = soa_norms(prefix, kind, tol)
            budget.spend(vals.size, None if best.outer is None else best.value, "upper")
            i = int(np.argmax(vals))
            if vals[i] < best.value:
                best.value = float(vals[i])
                best.outer = b_word
                best.inner = int(a_idx[i])
            return
        r = n - depth
        pn = soa_norms(prefix, kind, tol)
        lower = float(pn.max()) * ell**r
        if best.outer is not None and lower * lo >= best.value:
            return
        if lower > 0:
            keep = pn * grow**r * hi >= lower * lo
            if not keep.all():
                prefix, a_idx = prefix[:, :, keep], a_idx[keep]
        k = prefix.shape[2]
        for b in range(nb):
            child = soa_mul(pp[:, :, None, :, b], prefix[:, :, :, None]).reshape(prefix.shape[:2] + (k * na,))
            child_idx = (a_idx[:, None] * na + np.arange(na)).reshape(-1)
            rec(b_word + (b,), child, child_idx, depth + 1)

    start = identity(pair.dim)[:, :, None]
    for b in first_outer:
        rec((b,), soa_mul(pp[:, :, :, b], start), np.arange(na), 1)
    return best


def _run_bb(search, pair, n, kind, tol, budget, workers, n_outer, maximize):
    meter = _Budget(tol.budget if budget is None else budget)
    if workers > 1 and n_outer > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda o: search(pair, n, kind, tol, meter, [o]), range(n_outer))
            )
        best = parts[0]
        for p in parts[1:]:
            if (p.value > best.value) if maximize else (p.value < best.value):
                best = p
        return best
    return search(pair, n, kind, tol, meter, range(n_outer))


def max_min_norm(
    pair: SwitchedPair,
    n: int,
    kind=NormKind.ROW_SUM,
    prune: bool = True,
    tol: Tolerances = DEFAULT,
    budget: Optional[int] = None,
    workers: int = 1,
) -> Extremum:
    """max over A-words of min over B-words of ``||A_n B_n ... A_1 B_1||``.

    The witness holds the lexicographically first maximizing A-word and, for
    it, the first minimizing B-word.
    """
    n = _check_horizon(n)
    kind = NormKind.parse(kind)
    if n == 0:
        return Extremum(1.0, IndexWord())
    if not prune:
        return minimax_sweep(pair, n, kind, ("norm",), tol, budget, workers).mu
    na, nb = len(pair.a_set), len(pair.b_set)
    best = _run_bb(_max_min_bb, pair, n, kind, tol, budget, workers, na, True)
    return Extremum(best.value, IndexWord(best.outer, _digits(best.inner, nb, n)))


def min_max_norm(
    pair: SwitchedPair,
    n: int,
    kind=NormKind.ROW_SUM,
    prune: bool = True,
    tol: Tolerances = DEFAULT,
    budget: Optional[int] = None,
    workers: int = 1,
) -> Extremum:
    """min over B-words of max over A-words of the product norm (witness: B-word, then A-word)."""
    n = _check_horizon(n)
    kind = NormKind.parse(kind)
    if n == 0:
        return Extremum(1.0, IndexWord())
    if not prune:
        return minimax_sweep(pair, n, kind, ("norm",), tol, budget, workers).eta
    na, nb = len(pair.a_set), len(pair.b_set)
    best = _run_bb(_min_max_bb, pair, n, kind, tol, budget, workers, nb, False)
    return Extremum(best.value, IndexWord(_digits(best.inner, na, n), best.outer))


def max_min_rho(pair: SwitchedPair, n: int, tol: Tolerances = DEFAULT, budget=None, workers=1) -> Extremum:
    return minimax_sweep(pair, n, NormKind.ROW_SUM, ("rho",), tol, budget, workers).mu_bar


def min_max_rho(pair: SwitchedPair, n: int, tol: Tolerances = DEFAULT, budget=None, workers=1) -> Extremum:
    return minimax_sweep(pair, n, NormKind.ROW_SUM, ("rho",), tol, budget, workers).eta_bar

