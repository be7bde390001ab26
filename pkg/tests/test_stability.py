import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from generators import lists, random_pair, random_set
from minimax_jsr.errors import DimensionMismatch
from minimax_jsr.linalg import NormKind, identity, op_norm, vector_norm
from minimax_jsr.products import MatrixSet, SwitchedPair
from minimax_jsr.stability import (
    Controller,
    ControllerKind,
    Decision,
    best_response,
    check_asymptotic_stability,
    check_path_dependent,
    check_path_independent_periodic,
    check_uniform_stabilizability,
    control_pair,
    decay_constants,
    replay_trajectory,
    simulate,
    verify_certificate,
)


def rotation(deg, scale=1.0):
    t = math.radians(deg)
    return scale * np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


def eye_set(n=2):
    return MatrixSet.of(identity(n))


def test_controller_validation():
    with pytest.raises(ValueError):
        Controller.block_greedy(0)
    with pytest.raises(ValueError):
        Controller(ControllerKind.PERIODIC, 2, (0,))
    pair = SwitchedPair(eye_set(), eye_set())
    with pytest.raises(IndexError):
        Controller.periodic((0, 3)).check(pair)
    assert Controller.periodic([1, 0]).periodic_b_indices == (1, 0)


def test_asymptotic_contraction():
    v = check_asymptotic_stability(SwitchedPair(MatrixSet.of(0.5 * np.eye(2)), eye_set()), 3)
    assert v.decision is Decision.YES and v.horizon == 1 and v.sigma == 0.5
    assert v.certificate is None and v.lam == 0.5


def test_asymptotic_example1_no(example1):
    v = check_asymptotic_stability(example1.resolve_pair("uncontrolled"), 4)
    assert v.decision is Decision.NO
    assert v.bracket.lower == pytest.approx(2.0, rel=1e-12)


def test_asymptotic_scaled_random_pair_yes():
    rng = np.random.default_rng(21)
    pair = random_pair(rng, 3, na=2, nb=2)
    worst = max(op_norm(p) for p in pair.pair_products.reshape(-1, 3, 3))
    scaled = SwitchedPair(MatrixSet(tuple(m * (0.9 / worst) for m in pair.a_set)), pair.b_set)
    v = check_asymptotic_stability(scaled, 3)
    assert v.is_yes and v.horizon == 1 and v.sigma <= 0.9 * (1 + 1e-12)


def test_asymptotic_inconclusive_between():
    # rho(A) < 1 but the norm needs a long product to drop below 1
    a = np.array([[0.9, 5.0], [0.0, 0.9]])
    v = check_asymptotic_stability(SwitchedPair(MatrixSet.of(a), eye_set()), 2)
    assert v.decision is Decision.INCONCLUSIVE


def test_asymptotic_budget_inconclusive():
    rng = np.random.default_rng(22)
    pair = random_pair(rng, 2, na=3, nb=3)
    v = check_asymptotic_stability(pair, 6, budget=200)
    assert v.decision is Decision.INCONCLUSIVE and "budget" in v.note


def test_uniform_example1_inconclusive(example1):
    v = check_uniform_stabilizability(example1.resolve_set("A"), 8, "spectral")
    assert v.decision is Decision.INCONCLUSIVE
    assert v.sigma == pytest.approx(1.0, abs=1e-9)
    assert "smallest product norm" in v.note


def test_uniform_diagonal_yes():
    mset = MatrixSet.of(np.diag([2.0, 2.0]), np.diag([0.4, 0.4]))
    v = check_uniform_stabilizability(mset, 3)
    assert v.is_yes and v.horizon == 1 and v.sigma == 0.4
    assert v.certificate.periodic_b_indices == (1,)


def test_uniform_scaled_rotations_spectral():
    mset = MatrixSet.of(rotation(30, 1.1), rotation(45, 0.8))
    v = check_uniform_stabilizability(mset, 2, "spectral")
    assert v.is_yes and v.horizon == 1
    assert v.sigma == pytest.approx(0.8, rel=1e-12)


def test_uniform_never_says_no():
    v = check_uniform_stabilizability(MatrixSet.of(3 * np.eye(2)), 3)
    assert v.decision is Decision.INCONCLUSIVE


def test_uniform_power_of_rho_word():
    # rho < 1 but every norm up to length 2 is at least 1
    a = np.array([[0.5, 4.0], [0.0, 0.5]])
    v = check_uniform_stabilizability(MatrixSet.of(a), 2)
    assert v.is_yes and v.horizon > 2 and "repeated" in v.note
    assert verify_certificate(v, control_pair(MatrixSet.of(a))).ok


def test_path_dependent_example2_no(example2):
    v = check_path_dependent(example2.resolve_pair("AB"), 4)
    assert v.decision is Decision.NO
    assert v.values == (1.0, 1.0, 1.0, 1.0)


def test_path_independent_example2_no(example2):
    v = check_path_independent_periodic(example2.resolve_pair("AB"), 4)
    assert v.decision is Decision.NO
    for k, value in enumerate(v.values, start=1):
        assert value ** (1 / k) >= math.sqrt(1.5) - 1e-9 or k % 2


def test_example2_separation(example2):
    pair = example2.resolve_pair("AB")
    mu = check_path_dependent(pair, 2).values
    eta = check_path_independent_periodic(pair, 2).values
    assert mu[1] == 1.0 < eta[1]


def test_path_dependent_singletons():
    a, b = np.array([[0.5, 0.1], [0.2, 0.3]]), np.array([[0.9, 0.0], [0.1, 0.8]])
    v = check_path_dependent(SwitchedPair(MatrixSet.of(a), MatrixSet.of(b)), 2)
    assert v.is_yes and v.horizon == 1
    assert v.sigma == op_norm(a @ b)


def test_path_dependent_diagonal_family(frozen):
    ref = frozen["diag_path_dependent"]
    pair = SwitchedPair(MatrixSet.of(*ref["a"]), MatrixSet.of(*ref["b"]))
    v = check_path_dependent(pair, 3)
    assert list(v.values) == ref["mu"]
    assert v.decision is (Decision.YES if min(ref["mu"]) < 1 else Decision.NO)


def test_path_independent_single_good_b():
    a = MatrixSet.of(np.diag([2.0, 1.0]), np.diag([1.0, 3.0]))
    b = MatrixSet.of(np.eye(2), 0.3 * np.eye(2))
    v = check_path_independent_periodic(SwitchedPair(a, b), 2)
    assert v.is_yes and v.horizon == 1
    assert v.certificate.periodic_b_indices == (1,)


def _brute_eta(pair, k):
    table = oracle.pair_table(lists(pair.a_set), lists(pair.b_set))
    na, nb = len(pair.a_set), len(pair.b_set)
    return min(
        max(oracle.row_sum(oracle.interleaved(table, a, b)) for a in itertools.product(range(na), repeat=k))
        for b in itertools.product(range(nb), repeat=k)
    )


def test_path_independent_matches_brute_force():
    rng = np.random.default_rng(23)
    for _ in range(15):
        pair = random_pair(rng, 2, na=2, nb=2, scale_b=float(rng.uniform(0.2, 0.9)))
        v = check_path_independent_periodic(pair, 3)
        brute = [_brute_eta(pair, k) for k in range(1, 4)]
        first = next((k for k, e in enumerate(brute, 1) if e < 1 - 1e-9), None)
        if first is None:
            assert not v.is_yes
            assert v.values == tuple(brute)
        else:
            assert v.is_yes and v.horizon == first and v.sigma == brute[first - 1]


def test_path_independent_yes_implies_path_dependent_yes():
    rng = np.random.default_rng(24)
    for _ in range(20):
        pair = random_pair(rng, 2, na=2, nb=2, scale_b=float(rng.uniform(0.2, 0.9)))
        pi = check_path_independent_periodic(pair, 3)
        if pi.is_yes:
            pd = check_path_dependent(pair, 3)
            assert pd.is_yes and pd.horizon <= pi.horizon


def test_budget_makes_search_inconclusive():
    rng = np.random.default_rng(25)
    pair = random_pair(rng, 2, na=3, nb=3, scale_b=5.0)
    v = check_path_dependent(pair, 6, budget=100)
    assert v.decision is Decision.INCONCLUSIVE and "budget" in v.note


def test_decay_constants():
    pair = SwitchedPair(MatrixSet.of(0.5 * np.eye(2)), eye_set())
    assert decay_constants(pair, 0.5, 1) == (1.0, 0.5)
    C, lam = decay_constants(pair, 0.25, 2)
    assert lam == 0.5 and C == 1.0


def test_best_response_lexicographic(example2):
    pair = example2.resolve_pair("AB")
    assert best_response(pair, (0,)) == ((0,), 1.0)
    # (0, 1) and (1, 0) both give I; the first wins
    assert best_response(pair, (1, 0)) == ((0, 1), 1.0)


def test_verify_rejects_non_yes(example2):
    v = check_path_dependent(example2.resolve_pair("AB"), 1)
    with pytest.raises(ValueError):
        verify_certificate(v, example2.resolve_pair("AB"))


def test_simulate_contracting_singleton_decay():
    a, b = np.array([[0.5, 0.2], [0.1, 0.4]]), np.array([[0.9, 0.1], [0.0, 0.7]])
    pair = SwitchedPair(MatrixSet.of(a), MatrixSet.of(b))
    v = check_path_dependent(pair, 2)
    traj = simulate(pair, v.certificate, "worst-case-greedy", [1.0, -2.0], 20)
    assert len(traj.states) == 21 and replay_trajectory(pair, traj)
    for n in range(21):
        assert traj.norms[n] <= v.C * v.lam**n * traj.norms[0] * (1 + 1e-12)


def test_simulate_example2_block_greedy_keeps_norm(example2):
    pair = example2.resolve_pair("AB")
    for adversary, kw in (("fixed-word", {"a_word": (1, 0, 0, 1, 1)}), ("seeded-random", {"seed": 3}),
                          ("worst-case-greedy", {})):
        traj = simulate(pair, Controller.block_greedy(1), adversary, [1.0, 1.0], 12, **kw)
        assert np.all(traj.norms == 1.0)
        assert traj.a_word == traj.b_word


def test_simulate_zero_state():
    rng = np.random.default_rng(26)
    pair = random_pair(rng, 3)
    traj = simulate(pair, None, "seeded-random", np.zeros(3), 15)
    assert not traj.states.any() and math.isnan(traj.rate())


def test_simulate_errors(example2):
    pair = example2.resolve_pair("AB")
    with pytest.raises(DimensionMismatch):
        simulate(pair, None, "seeded-random", [1.0, 2.0, 3.0], 4)
    with pytest.raises(IndexError):
        simulate(pair, Controller.periodic((5,)), "seeded-random", [1.0, 1.0], 4)
    with pytest.raises(ValueError):
        simulate(pair, None, "fixed-word", [1.0, 1.0], 4)
    with pytest.raises(ValueError):
        simulate(pair, None, "sometimes", [1.0, 1.0], 4)
    with pytest.raises(ValueError):
        simulate(pair, None, "seeded-random", [1.0, 1.0], -1)


def test_simulate_is_seeded(example2):
    pair = example2.resolve_pair("AB")
    one = simulate(pair, None, "seeded-random", [1.0, 1.0], 10, seed=5)
    two = simulate(pair, None, "seeded-random", [1.0, 1.0], 10, seed=5)
    assert one.a_word == two.a_word and np.array_equal(one.states, two.states)


def test_simulate_partial_last_block():
    rng = np.random.default_rng(27)
    pair = random_pair(rng, 2, scale_b=0.3)
    traj = simulate(pair, Controller.periodic((0, 1, 1)), "seeded-random", [1.0, 1.0], 7, seed=1)
    assert traj.b_word == (0, 1, 1, 0, 1, 1, 0)


def test_simulate_norm_matches_vector_norm():
    rng = np.random.default_rng(28)
    pair = random_pair(rng, 3)
    for kind in NormKind:
        traj = simulate(pair, None, "seeded-random", [1.0, -1.0, 0.5], 5, norm=kind, seed=2)
        assert traj.norms[3] == vector_norm(traj.states[3], kind)


def test_trajectory_csv(example2):
    traj = simulate(example2.resolve_pair("AB"), Controller.block_greedy(1), "fixed-word",
                    [1.0, 1.0], 3, a_word=(1,))
    buf = io.StringIO()
    traj.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,x0,x1,norm,a_index,b_index"
    assert lines[1] == "0,1,1,1,,"
    assert len(lines) == 5 and lines[2].endswith(",1,1")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(NormKind)))
def test_yes_verdicts_replay(seed, kind):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng, 2, na=2, nb=2, scale_b=float(rng.uniform(0.1, 0.8)))
    for check in (check_path_dependent, check_path_independent_periodic, check_asymptotic_stability):
        v = check(pair, 3, kind)
        if v.is_yes:
            assert v.sigma < 1 and v.lam < 1
            rep = verify_certificate(v, pair)
            assert rep.ok and rep.max_block_norm <= v.sigma + 1e-9
    mset = random_set(rng, 2, 2, 2, float(rng.uniform(0.3, 1.5)))
    v = check_uniform_stabilizability(mset, 3, kind)
    assert v.decision is not Decision.NO
    if v.is_yes:
        assert verify_certificate(v, control_pair(mset)).ok
