import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from generators import lists, random_pair, random_set
from minimax_jsr.errors import BudgetExceeded, DimensionMismatch, NonSquareError
from minimax_jsr.linalg import NormKind, identity, op_norm, spectral_radius
from minimax_jsr.products import MatrixSet, SwitchedPair, eval_product, word_product
from minimax_jsr.radii import (
    Quantity,
    RadiusBracket,
    jsr_bracket,
    lsr_bracket,
    minimax_brackets,
    minimax_table,
    root,
    set_product,
)


def test_root_basics():
    assert root(8.0, 3) == (pytest.approx(2.0, rel=1e-15), False)
    assert root(5.0, 0) == (1.0, False)
    assert root(1e-320, 2) == (0.0, True)


def test_bracket_rejects_zero_horizon():
    with pytest.raises(ValueError):
        RadiusBracket(Quantity.JSR, 0.0, 1.0, 0, NormKind.ROW_SUM)
    with pytest.raises(ValueError):
        jsr_bracket(MatrixSet.of(np.eye(2)), 0)


def test_jsr_requires_square():
    with pytest.raises(NonSquareError):
        jsr_bracket(MatrixSet.of(np.ones((2, 3))), 2)


def test_singleton_symmetric_collapses():
    a = np.array([[1.0, 0.4], [0.4, -0.6]])
    br = jsr_bracket(MatrixSet.of(a), 1, "spectral")
    assert br.lower == pytest.approx(spectral_radius(a), rel=1e-9)
    assert br.upper == pytest.approx(spectral_radius(a), rel=1e-9)


def test_singleton_non_normal_brackets_rho():
    # upper is a norm, so it only reaches rho(A) for normal A
    a = np.array([[0.5, 3.0], [0.0, 0.4]])
    br = jsr_bracket(MatrixSet.of(a), 1)
    assert br.lower == pytest.approx(0.5, rel=1e-12)
    assert br.upper == op_norm(a)


def test_commuting_diagonals(frozen):
    d = frozen["commuting_diagonal"]["entries"]
    mset = MatrixSet.of(np.diag(d[:2]), np.diag(d[2:]))
    br = jsr_bracket(mset, 1)
    assert br.lower == pytest.approx(frozen["commuting_diagonal"]["jsr"], rel=1e-12)
    assert br.upper == frozen["commuting_diagonal"]["jsr"]


def test_example1_jsr_lower(example1):
    br = jsr_bracket(example1.resolve_set("A"), 6, "spectral")
    assert br.lower == pytest.approx(2.0, rel=1e-12)
    assert br.lower_m == 1 and br.lower_witness == (0,)
    assert br.certified


def test_example1_lsr_upper(example1, frozen):
    br = lsr_bracket(example1.resolve_set("A"), 6, "spectral")
    assert br.lower == 0.0
    assert br.upper == pytest.approx(1.0, abs=1e-9)
    for row, ref in zip(br.rows, frozen["example1_min_spectral"]):
        assert row.norm_value == pytest.approx(ref, abs=1e-12)


def test_lsr_singletons():
    a = np.array([[0.2, 1.0], [0.0, 0.3]])
    assert lsr_bracket(MatrixSet.of(a), 1).upper == pytest.approx(0.3, rel=1e-12)
    assert lsr_bracket(MatrixSet.of(np.diag([0.5, 0.25])), 1).upper == 0.5


def test_example2_minimax_brackets(example2):
    brs = minimax_brackets(example2.resolve_pair("AB"), 4)
    assert [b.quantity for b in brs] == [
        Quantity.MU, Quantity.ETA, Quantity.MU_HAT, Quantity.MU_CHECK, Quantity.ETA_HAT, Quantity.ETA_CHECK]
    mu, eta = brs[0], brs[1]
    assert mu.upper == 1.0 and mu.lower == 1.0
    assert mu.upper_certified and not mu.lower_certified
    assert eta.upper >= math.sqrt(1.5) - 1e-9
    assert all(not b.lower_certified for b in brs)
    assert all(not b.upper_certified for b in brs[2:])


def test_identity_pair_matches_jsr():
    a = np.array([[0.7, 0.2], [-0.1, 0.9]])
    j = jsr_bracket(MatrixSet.of(a), 4)
    mu, eta = minimax_brackets(SwitchedPair(MatrixSet.of(a), MatrixSet.of(identity(2))), 4)[:2]
    for br in (mu, eta):
        assert br.upper == j.upper
        assert br.lower == pytest.approx(j.lower, rel=1e-12)


def test_set_product_examples(example2):
    eye = MatrixSet.of(np.eye(2))
    assert len(set_product(eye, eye)) == 1
    prod = set_product(example2.resolve_set("A"), example2.resolve_set("B"))
    assert len(prod) == 4
    assert prod.labels == ("A1*B1", "A1*B2", "A2*B1", "A2*B2")
    assert np.allclose(prod[1], np.diag([2 / 3, 1.5]), rtol=1e-15, atol=0)
    assert sum(np.allclose(m, np.eye(2), rtol=1e-15, atol=0) for m in prod) == 2
    rect = set_product(MatrixSet.of(np.ones((2, 3))), MatrixSet.of(np.ones((3, 2))))
    assert rect.shape == (2, 2)
    with pytest.raises(DimensionMismatch):
        set_product(MatrixSet.of(np.ones((2, 3))), MatrixSet.of(np.ones((2, 3))))


def test_jsr_witnesses_replay():
    rng = np.random.default_rng(11)
    for _ in range(5):
        mset = random_set(rng, 3, 2, 2)
        for kind in NormKind:
            br = jsr_bracket(mset, 4, kind)
            up = op_norm(word_product(mset, br.upper_witness), kind) ** (1 / br.upper_m)
            lo = spectral_radius(word_product(mset, br.lower_witness)) ** (1 / br.lower_m)
            assert up == pytest.approx(br.upper, rel=1e-9)
            assert lo == pytest.approx(br.lower, rel=1e-9)


def test_jsr_against_oracle():
    rng = np.random.default_rng(12)
    mset = random_set(rng, 3, 2, 2)
    br = jsr_bracket(mset, 4)
    ups, los = [], []
    for m in range(1, 5):
        prods = [p for _, p in oracle.set_products(lists(mset), m)]
        ups.append(max(oracle.row_sum(p) for p in prods) ** (1 / m))
        los.append(max(oracle.rho2(p) for p in prods) ** (1 / m))
    assert br.upper == pytest.approx(min(ups), rel=1e-12)
    assert br.lower == pytest.approx(max(los), rel=1e-9)


def test_minimax_witnesses_replay():
    rng = np.random.default_rng(13)
    pair = random_pair(rng, 2, na=2, nb=2)
    mu, eta = minimax_brackets(pair, 3)[:2]
    for br in (mu, eta):
        _, value = eval_product(pair, br.upper_witness)
        assert root(value, br.upper_m)[0] == pytest.approx(br.upper, rel=1e-9)
        prod, _ = eval_product(pair, br.lower_witness)
        if br.estimate is None:
            assert root(spectral_radius(prod), br.lower_m)[0] == pytest.approx(br.lower, rel=1e-9)


def test_singleton_pair_rho_estimates_converge():
    a, b = np.array([[1.0, 0.5], [0.2, 0.7]]), np.array([[0.3, 0.1], [0.9, 1.1]])
    rho = spectral_radius(a @ b)
    brs = minimax_brackets(SwitchedPair(MatrixSet.of(a), MatrixSet.of(b)), 8, "spectral")
    for br in brs[2:]:
        assert br.lower == pytest.approx(rho, rel=1e-6)
    for br in brs[:2]:
        assert br.lower == pytest.approx(rho, rel=1e-6)
        assert br.upper >= rho - 1e-12


def test_underflow_flag():
    mset = MatrixSet.of(np.diag([1e-200, 1e-200]))
    br = jsr_bracket(mset, 2)
    # the length-2 product underflows; the bound comes from m = 1
    assert br.underflow
    assert br.upper == pytest.approx(1e-200, rel=1e-12) and br.upper_m == 1
    assert br.lower <= br.upper
    assert lsr_bracket(mset, 2).underflow
    assert not jsr_bracket(mset, 1).underflow


def test_underflow_everywhere_clamps_to_zero():
    br = jsr_bracket(MatrixSet.of(np.diag([1e-320, 0.0])), 1)
    assert br.underflow and br.upper == 0.0 and br.lower == 0.0


def test_budget_partial_bracket():
    rng = np.random.default_rng(14)
    mset = random_set(rng, 4, 2, 2)
    with pytest.raises(BudgetExceeded) as info:
        jsr_bracket(mset, 8, budget=300)
    part = info.value.partial
    assert info.value.bound == "bracket"
    assert isinstance(part, RadiusBracket) and 1 <= part.horizon < 8
    assert part.upper == jsr_bracket(mset, part.horizon).upper


def test_budget_partial_minimax(example2):
    with pytest.raises(BudgetExceeded) as info:
        minimax_brackets(example2.resolve_pair("AB"), 8, budget=500)
    assert len(info.value.partial) == 6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.sampled_from(list(NormKind)))
def test_jsr_lower_below_upper_and_monotone(seed, count, dim, kind):
    rng = np.random.default_rng(seed)
    mset = random_set(rng, count, dim, dim)
    prev = math.inf
    for n in range(1, 5):
        br = jsr_bracket(mset, n, kind)
        assert br.lower <= br.upper + 1e-9
        assert br.upper <= prev
        prev = br.upper


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_ordering_chain(seed, n, m):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng, n, m, na=2, nb=2)
    for row in minimax_table(pair, 3):
        r = row.roots()
        slack = 1 + 1e-9
        assert r["mu_bar"] <= r["mu"] * slack and r["eta_bar"] <= r["eta"] * slack
        assert row.mu.value <= row.eta.value and row.mu_bar.value <= row.eta_bar.value


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_lsr_below_jsr(seed, dim):
    rng = np.random.default_rng(seed)
    mset = random_set(rng, 2, dim, dim)
    assert lsr_bracket(mset, 3).upper <= jsr_bracket(mset, 3).upper * (1 + 1e-12)
