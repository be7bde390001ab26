"""Stabilizability verdicts, controller certificates and trajectory simulation.

The system is ``x(n) = A_n B_n x(n-1)`` with ``A_n`` chosen by an adversary
and ``B_n`` by a controller.  A finite horizon can certify a *yes* (some
block of length k contracts by ``sigma < 1``) but only a horizon-bounded
*no*: the decision ``no-at-horizon`` means no certificate of length at most
``k_max`` exists, not that the system is unstabilizable.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import BudgetExceeded, DimensionMismatch
from .linalg import NormKind, bmul, identity, op_norm, vector_norm
from .products import IndexWord, MatrixSet, SwitchedPair, eval_product, max_min_norm, min_max_norm
from .radii import jsr_bracket, lsr_bracket, set_product


class Mode(str, enum.Enum):
    ASYMPTOTIC = "asymptotic-stability"
    UNIFORM = "uniform-stabilizability"
    PATH_DEPENDENT = "path-dependent"
    PATH_INDEPENDENT = "path-independent-periodic"


class Decision(str, enum.Enum):
    YES = "yes"
    NO = "no-at-horizon"
    INCONCLUSIVE = "inconclusive"


class ControllerKind(str, enum.Enum):
    BLOCK_GREEDY = "block-greedy"
    PERIODIC = "periodic"


class Adversary(str, enum.Enum):
    WORST_CASE_GREEDY = "worst-case-greedy"
    FIXED_WORD = "fixed-word"
    SEEDED_RANDOM = "seeded-random"


@dataclass(frozen=True)
class Controller:
    kind: ControllerKind
    block_length: int
    periodic_b_indices: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ControllerKind(self.kind))
        if self.block_length < 1:
            raise ValueError("block length must be at least 1")
        if self.kind is ControllerKind.PERIODIC:
            if self.periodic_b_indices is None or len(self.periodic_b_indices) != self.block_length:
                raise ValueError("a periodic controller needs exactly block_length B indices")
            object.__setattr__(self, "periodic_b_indices", tuple(int(i) for i in self.periodic_b_indices))

    @classmethod
    def periodic(cls, b_indices):
        b_indices = tuple(b_indices)
        return cls(ControllerKind.PERIODIC, len(b_indices), b_indices)

    @classmethod
    def block_greedy(cls, k: int):
        return cls(ControllerKind.BLOCK_GREEDY, k)

    def check(self, pair: SwitchedPair):
        if self.kind is ControllerKind.PERIODIC:
            nb = len(pair.b_set)
            bad = [i for i in self.periodic_b_indices if not 0 <= i < nb]
            if bad:
                raise IndexError(f"periodic B indices {bad} out of range for a set of {nb}")

    def respond(self, pair: SwitchedPair, a_block: Sequence[int], kind=NormKind.ROW_SUM, tol=DEFAULT) -> tuple:
        """B indices for one block, given the adversary's (revealed) A indices."""
        if self.kind is ControllerKind.PERIODIC:
            return self.periodic_b_indices[: len(a_block)]
        return best_response(pair, tuple(a_block), kind, tol)[0]


def best_response(pair: SwitchedPair, a_block: tuple, kind=NormKind.ROW_SUM, tol=DEFAULT):
    """Lexicographically first B-block minimizing the block product norm; returns ``(b_block, norm)``."""
    best = None
    for b_block in itertools.product(range(len(pair.b_set)), repeat=len(a_block)):
        value = eval_product(pair, IndexWord(a_block, b_block), kind, tol)[1]
        if best is None or value < best[1]:
            best = (b_block, value)
    return best


@dataclass(frozen=True)
class StabilizationVerdict:
    mode: Mode
    decision: Decision
    horizon: int
    sigma: float
    certificate: Optional[Controller] = None
    norm: NormKind = NormKind.ROW_SUM
    # constants of ||x(n)|| <= C * lam**n * ||x(0)||, set for yes verdicts
    C: Optional[float] = None
    lam: Optional[float] = None
    values: tuple = ()
    note: str = ""
    bracket: Optional[object] = field(default=None, compare=False)

    @property
    def is_yes(self) -> bool:
        return self.decision is Decision.YES


def control_pair(mset: MatrixSet) -> SwitchedPair:
    """Pair ``({I}, set)``: the controller picks every factor and there is no adversary."""
    return SwitchedPair(MatrixSet.of(identity(mset.shape[0]), labels=["I"]), mset)


def _below_one(value, tol):
    # strict margin: a value one rounding error under 1 is not a certificate
    return value < 1.0 - tol.rel


def decay_constants(pair: SwitchedPair, sigma: float, k: int, kind=NormKind.ROW_SUM, tol=DEFAULT):
    """``(C, lam)`` with ``lam = sigma**(1/k)`` and C covering the partial steps inside a block."""
    lam = sigma ** (1.0 / k) if sigma > 0 else 0.0
    step_max = max(op_norm(p, kind, tol) for p in pair.pair_products.reshape((-1,) + pair.pair_products.shape[2:]))
    if lam == 0.0:
        return max(1.0, step_max ** (k - 1)), 0.0
    ratio = step_max / lam
    return max(ratio**r for r in range(k)), lam


def _yes(mode, pair, sigma, k, controller, kind, tol, values, bracket=None, note=""):
    C, lam = decay_constants(pair, sigma, k, kind, tol)
    return StabilizationVerdict(mode, Decision.YES, k, sigma, controller, kind, C, lam, tuple(values), note, bracket)


def check_asymptotic_stability(pair: SwitchedPair, n_max: int = 4, norm=NormKind.ROW_SUM,
                               tol: Tolerances = DEFAULT, budget=None, workers=1) -> StabilizationVerdict:
    """Stability under arbitrary switching of both factors, from a bracket of ``rho(AB)``.

    There is no controller, so a yes verdict carries no certificate; ``sigma``
    is then the largest norm of a length-``horizon`` product from ``AB``.
    """
    norm = NormKind.parse(norm)
    prods = set_product(pair.a_set, pair.b_set)
    try:
        br = jsr_bracket(prods, n_max, norm, tol, budget, workers)
    except BudgetExceeded as exc:
        return StabilizationVerdict(Mode.ASYMPTOTIC, Decision.INCONCLUSIVE, n_max, math.inf, None, norm,
                                    note=f"budget exceeded: {exc}", bracket=exc.partial)
    values = tuple(r.norm_root for r in br.rows)
    # shortest horizon whose worst block norm contracts
    row = next((r for r in br.rows if _below_one(r.norm_value, tol)), None)
    if row is not None:
        return _yes(Mode.ASYMPTOTIC, pair, row.norm_value, row.m, None, norm, tol, values, br)
    decision = Decision.NO if br.lower >= 1.0 else Decision.INCONCLUSIVE
    return StabilizationVerdict(Mode.ASYMPTOTIC, decision, n_max, br.upper ** br.upper_m, None, norm,
                                values=values, bracket=br)


def _power_below_one(mset, word, kind, tol, max_power=1 << 16):
    # smallest p with ||P^p|| < 1 for the periodic word's block product P
    block = eval_product(control_pair(mset), IndexWord((0,) * len(word), word), kind, tol)[0]
    power, p = block, 1
    while p <= max_power:
        value = op_norm(power, kind, tol)
        if _below_one(value, tol):
            return p, value
        power = bmul(block, power)
        p += 1
    return None


def check_uniform_stabilizability(mset: MatrixSet, n_max: int = 4, norm=NormKind.ROW_SUM,
                                  tol: Tolerances = DEFAULT, budget=None, workers=1) -> StabilizationVerdict:
    """Yes when some periodic word contracts; never no, as no lower bound for the lower spectral radius is certified.

    The certificate is a periodic controller on ``control_pair(mset)``.
    """
    norm = NormKind.parse(norm)
    try:
        br = lsr_bracket(mset, n_max, norm, tol, budget, workers)
    except BudgetExceeded as exc:
        return StabilizationVerdict(Mode.UNIFORM, Decision.INCONCLUSIVE, n_max, math.inf, None, norm,
                                    note=f"budget exceeded: {exc}", bracket=exc.partial)
    pair = control_pair(mset)
    values = tuple(min(r.norm_root, r.rho_root) for r in br.rows)
    # prefer a word whose own norm contracts; else use a power of a word with rho < 1
    for r in br.rows:
        if _below_one(r.norm_value, tol):
            ctrl = Controller.periodic(r.norm_word)
            return _yes(Mode.UNIFORM, pair, r.norm_value, r.m, ctrl, norm, tol, values, br)
    for r in br.rows:
        if _below_one(r.rho_value, tol):
            found = _power_below_one(mset, r.rho_word, norm, tol)
            if found is not None:
                p, value = found
                ctrl = Controller.periodic(tuple(r.rho_word) * p)
                return _yes(Mode.UNIFORM, pair, value, r.m * p, ctrl, norm, tol, values, br,
                            note=f"word of length {r.m} repeated {p} times")
    min_norm = min(r.norm_value ** (1.0 / r.m) for r in br.rows)
    return StabilizationVerdict(
        Mode.UNIFORM, Decision.INCONCLUSIVE, n_max, br.upper, None, norm, values=values, bracket=br,
        note=f"no contracting word up to length {n_max}; smallest product norm root {min_norm!r}",
    )


def _search(mode, pair, k_max, norm, tol, budget, workers, game):
    norm = NormKind.parse(norm)
    values = []
    for k in range(1, k_max + 1):
        try:
            ext = game(pair, k, norm, True, tol, budget, workers)
        except BudgetExceeded as exc:
            return StabilizationVerdict(mode, Decision.INCONCLUSIVE, k, math.inf, None, norm,
                                        values=tuple(values), note=f"budget exceeded at k={k}: {exc}")
        values.append(ext.value)
        if _below_one(ext.value, tol):
            if mode is Mode.PATH_DEPENDENT:
                ctrl = Controller.block_greedy(k)
            else:
                ctrl = Controller.periodic(ext.witness.b_indices)
            return _yes(mode, pair, ext.value, k, ctrl, norm, tol, values, ext.witness)
    decision = Decision.NO if all(v >= 1.0 for v in values) else Decision.INCONCLUSIVE
    return StabilizationVerdict(mode, decision, k_max, min(values), None, norm, values=tuple(values))


def check_path_dependent(pair: SwitchedPair, k_max: int = 4, norm=NormKind.ROW_SUM,
                         tol: Tolerances = DEFAULT, budget=None, workers=1) -> StabilizationVerdict:
    """Search k = 1..k_max for a max-min block norm below one (block-greedy controller)."""
    return _search(Mode.PATH_DEPENDENT, pair, k_max, norm, tol, budget, workers, max_min_norm)


def check_path_independent_periodic(pair: SwitchedPair, k_max: int = 4, norm=NormKind.ROW_SUM,
                                    tol: Tolerances = DEFAULT, budget=None, workers=1) -> StabilizationVerdict:
    """Search k = 1..k_max for a min-max block norm below one (periodic controller)."""
    return _search(Mode.PATH_INDEPENDENT, pair, k_max, norm, tol, budget, workers, min_max_norm)


@dataclass(frozen=True)
class Replay:
    max_block_norm: float
    worst_a_block: tuple
    blocks: int
    ok: bool


def verify_certificate(verdict: StabilizationVerdict, pair: SwitchedPair, tol: Tolerances = DEFAULT,
                       budget=None) -> Replay:
    """Re-enumerate every adversary block and check the certificate's block norm against sigma.

    For the uniform mode pass ``control_pair(set)``.  Asymptotic verdicts
    have no controller, so every (A, B) block is enumerated.
    """
    if not verdict.is_yes:
        raise ValueError("only yes verdicts carry a certificate")
    k, kind = verdict.horizon, verdict.norm
    budget = tol.budget if budget is None else budget
    na, nb = len(pair.a_set), len(pair.b_set)
    ctrl = verdict.certificate
    if ctrl is not None:
        ctrl.check(pair)
        inner = nb**k if ctrl.kind is ControllerKind.BLOCK_GREEDY else 1
    else:
        inner = nb**k
    if na**k * inner > budget:
        raise BudgetExceeded(f"replay needs {na**k * inner} products, budget {budget}")
    worst, worst_block = -math.inf, None
    for a_block in itertools.product(range(na), repeat=k):
        if ctrl is None:
            value = max(eval_product(pair, IndexWord(a_block, b), kind, tol)[1]
                        for b in itertools.product(range(nb), repeat=k))
        else:
            b_block = ctrl.respond(pair, a_block, kind, tol)
            value = eval_product(pair, IndexWord(a_block, b_block), kind, tol)[1]
        if value > worst:
            worst, worst_block = value, a_block
    return Replay(worst, worst_block, na**k, worst <= verdict.sigma + 1e-9)


# ---------------------------------------------------------------------------
# simulation


@dataclass
class Trajectory:
    states: np.ndarray
    a_word: tuple
    b_word: tuple
    norms: np.ndarray
    norm: NormKind = NormKind.ROW_SUM
    adversary: str = ""

    @property
    def steps(self) -> int:
        return len(self.a_word)

    def rate(self) -> float:
        """Empirical per-step rate ``(|x(T)| / |x(0)|)^(1/T)``."""
        if self.steps == 0 or self.norms[0] == 0:
            return float("nan")
        if self.norms[-1] == 0:
            return 0.0
        return float((self.norms[-1] / self.norms[0]) ** (1.0 / self.steps))

    def write_csv(self, handle):
        w = csv.writer(handle, lineterminator="\n")
        dim = self.states.shape[1]
        w.writerow(["step"] + [f"x{i}" for i in range(dim)] + ["norm", "a_index", "b_index"])
        for t in range(self.states.shape[0]):
            a = self.a_word[t - 1] if t else ""
            b = self.b_word[t - 1] if t else ""
            w.writerow([t] + [format(v, ".17g") for v in self.states[t]] + [format(self.norms[t], ".17g"), a, b])


def step_state(pair: SwitchedPair, a: int, b: int, x: np.ndarray) -> np.ndarray:
    return bmul(pair.pair_products[a, b], x[:, None])[:, 0]


def _block_value(pair, a_block, ctrl, kind, tol):
    if ctrl is None:
        return best_response_max(pair, a_block, kind, tol)
    b_block = ctrl.respond(pair, a_block, kind, tol)
    return b_block, eval_product(pair, IndexWord(a_block, b_block), kind, tol)[1]


def best_response_max(pair, a_block, kind=NormKind.ROW_SUM, tol=DEFAULT):
    # uncontrolled: the adversary also picks B, taking the largest block norm
    best = None
    for b_block in itertools.product(range(len(pair.b_set)), repeat=len(a_block)):
        value = eval_product(pair, IndexWord(a_block, b_block), kind, tol)[1]
        if best is None or value > best[1]:
            best = (b_block, value)
    return best


def _worst_block(pair, k, ctrl, kind, tol):
    best = None
    for a_block in itertools.product(range(len(pair.a_set)), repeat=k):
        b_block, value = _block_value(pair, a_block, ctrl, kind, tol)
        if best is None or value > best[2]:
            best = (a_block, b_block, value)
    return best


def simulate(pair: SwitchedPair, controller: Optional[Controller], adversary="worst-case-greedy",
             x0=None, steps: int = 10, norm=NormKind.ROW_SUM, a_word: Sequence[int] = (),
             b_word: Sequence[int] = (), seed: int = 0, tol: Tolerances = DEFAULT) -> Trajectory:
    """Run the switched system for ``steps`` steps.

    The controller acts per block of ``block_length`` steps and sees the
    adversary's whole A-block before committing to B (path-dependent
    semantics).  Without a controller the adversary picks B as well: the
    worst-case-greedy adversary maximizes the single-step norm, the random
    one draws B uniformly, and a fixed word uses ``b_word`` (default index 0).

    The worst-case-greedy adversary is block-myopic: per block it takes the
    A-block whose best controller response has the largest block norm.
    """
    adversary = Adversary(adversary)
    norm = NormKind.parse(norm)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    n = pair.dim
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    if x.shape != (n,):
        raise DimensionMismatch(f"initial state has shape {x.shape}, system dimension is {n}")
    if controller is not None:
        controller.check(pair)
    k = controller.block_length if controller is not None else 1
    na, nb = len(pair.a_set), len(pair.b_set)
    if adversary is Adversary.FIXED_WORD:
        if not a_word:
            raise ValueError("the fixed-word adversary needs a non-empty A word")
        if any(not 0 <= a < na for a in a_word):
            raise IndexError("A word index out of range")
    rng = np.random.default_rng(seed)
    worst = _worst_block(pair, k, controller, norm, tol) if adversary is Adversary.WORST_CASE_GREEDY else None

    a_seq, b_seq = [], []
    t = 0
    while t < steps:
        if adversary is Adversary.WORST_CASE_GREEDY:
            a_block, b_block = worst[0], worst[1]
        else:
            if adversary is Adversary.FIXED_WORD:
                a_block = tuple(a_word[(t + i) % len(a_word)] for i in range(k))
            else:
                a_block = tuple(int(v) for v in rng.integers(0, na, k))
            if controller is not None:
                b_block = controller.respond(pair, a_block, norm, tol)
            elif adversary is Adversary.FIXED_WORD:
                b_block = tuple(b_word[(t + i) % len(b_word)] for i in range(k)) if b_word else (0,) * k
            else:
                b_block = tuple(int(v) for v in rng.integers(0, nb, k))
        take = min(k, steps - t)
        a_seq.extend(a_block[:take])
        b_seq.extend(b_block[:take])
        t += take

    states = np.empty((steps + 1, n))
    states[0] = x
    for i, (a, b) in enumerate(zip(a_seq, b_seq)):
        states[i + 1] = step_state(pair, a, b, states[i])
    norms_ = vector_norm(states, norm)
    return Trajectory(states, tuple(a_seq), tuple(b_seq), norms_, norm, adversary.value)


def replay_trajectory(pair: SwitchedPair, traj: Trajectory) -> bool:
    """True when every stored state equals the recomputed step exactly."""
    for i, (a, b) in enumerate(zip(traj.a_word, traj.b_word)):
        if not np.array_equal(traj.states[i + 1], step_state(pair, a, b, traj.states[i])):
            return False
    return True
