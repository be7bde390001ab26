"""Command-line front end.

Exit codes: 0 success / yes, 1 no-at-horizon, 2 bad input, 3 budget exceeded,
4 inconclusive, 5 no saddle point.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT, Tolerances
from .errors import BudgetExceeded, DimensionMismatch, NoSaddle, SchemaError
from .hourglass import (
    DEFAULT_SEED,
    Violation,
    _scan,
    falsify_hset,
    hset_exact_radii,
    require_positive_set,
    saddle_search,
)
from .linalg import NormKind, identity
from .problem import dumps, load_problem, set_to_json, to_jsonable
from .products import MatrixSet, SwitchedPair
from .radii import jsr_bracket, lsr_bracket, minimax_brackets
from .stability import (
    Controller,
    Decision,
    Mode,
    check_asymptotic_stability,
    check_path_dependent,
    check_path_independent_periodic,
    check_uniform_stabilizability,
    control_pair,
    simulate,
    verify_certificate,
)

EXIT_OK = 0
EXIT_NO = 1
EXIT_SCHEMA = 2
EXIT_BUDGET = 3
EXIT_INCONCLUSIVE = 4
EXIT_NO_SADDLE = 5

DECISION_EXIT = {Decision.YES: EXIT_OK, Decision.NO: EXIT_NO, Decision.INCONCLUSIVE: EXIT_INCONCLUSIVE}

MODES = {
    "asymptotic": Mode.ASYMPTOTIC,
    "uniform": Mode.UNIFORM,
    "path-dep": Mode.PATH_DEPENDENT,
    "path-indep": Mode.PATH_INDEPENDENT,
}


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{x:.9f}" if isinstance(x, float) else str(x)


def _word(w) -> str:
    if w is None:
        return "-"
    if hasattr(w, "a_indices"):
        return f"a={','.join(map(str, w.a_indices))} b={','.join(map(str, w.b_indices))}"
    return ",".join(map(str, w))


def _ints(text: str, what: str):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated integers, got {text!r}") from None


def _floats(text: str, what: str):
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not all(np.isfinite(vals)):
        raise UsageError(f"{what}: numbers must be finite")
    return vals


# ---------------------------------------------------------------------------
# reports


def _set_report(name, br, command):
    rows = []
    for r in br.rows:
        rows.append({
            "m": r.m,
            "norm": r.norm_value,
            "norm_root": r.norm_root,
            "rho": r.rho_value,
            "rho_root": r.rho_root,
            "norm_word": list(r.norm_word),
            "rho_word": list(r.rho_word),
        })
    return {
        "command": command,
        "set": name,
        "norm": br.norm.value,
        "horizon": br.horizon,
        "lower": br.lower,
        "upper": br.upper,
        "lower_witness": br.lower_witness,
        "upper_witness": br.upper_witness,
        "lower_m": br.lower_m,
        "upper_m": br.upper_m,
        "certified": br.certified,
        "underflow": br.underflow,
        "rows": rows,
    }


def _print_set_report(rep, out):
    largest = rep["command"] == "jsr"
    head = "max" if largest else "min"
    print(f"{rep['command']} of {rep['set']} ({rep['norm']} norm, horizon {rep['horizon']})", file=out)
    print(f"{'m':>3}  {head + ' |P|^(1/m)':>16}  {head + ' rho^(1/m)':>16}  norm word / rho word", file=out)
    for r in rep["rows"]:
        print(f"{r['m']:>3}  {_fmt(r['norm_root']):>16}  {_fmt(r['rho_root']):>16}  "
              f"{_word(r['norm_word'])} / {_word(r['rho_word'])}", file=out)
    print(f"bracket: [{_fmt(rep['lower'])}, {_fmt(rep['upper'])}]"
          + (" (underflow clamped)" if rep["underflow"] else ""), file=out)


def _minimax_report(name, brackets):
    rows = []
    for r in brackets[0].rows:
        roots = r.roots()
        rows.append({
            "m": r.m,
            **{k: getattr(r, k).value for k in ("mu", "eta", "mu_bar", "eta_bar")},
            **{k + "_root": v for k, v in roots.items()},
            **{k + "_witness": {"a": list(getattr(r, k).witness.a_indices), "b": list(getattr(r, k).witness.b_indices)}
               for k in ("mu", "eta", "mu_bar", "eta_bar")},
        })
    out = []
    for br in brackets:
        out.append({
            "quantity": br.quantity.value,
            "lower": br.lower,
            "upper": br.upper,
            "lower_certified": br.lower_certified,
            "upper_certified": br.upper_certified,
            "lower_m": br.lower_m,
            "upper_m": br.upper_m,
            "estimate": br.estimate,
            "underflow": br.underflow,
        })
    return {"command": "minimax", "pair": name, "norm": brackets[0].norm.value,
            "horizon": brackets[0].horizon, "rows": rows, "brackets": out}


def _print_minimax(rep, out):
    print(f"minimax radii of {rep['pair']} ({rep['norm']} norm, horizon {rep['horizon']})", file=out)
    print(f"{'m':>3}  {'mu^(1/m)':>13}  {'eta^(1/m)':>13}  {'mu_bar^(1/m)*':>13}  {'eta_bar^(1/m)*':>14}", file=out)
    for r in rep["rows"]:
        print(f"{r['m']:>3}  {_fmt(r['mu_root']):>13}  {_fmt(r['eta_root']):>13}  "
              f"{_fmt(r['mu_bar_root']):>13}  {_fmt(r['eta_bar_root']):>14}", file=out)
    print("* spectral-radius columns are non-certified estimates", file=out)
    for b in rep["brackets"]:
        lo = "" if b["lower_certified"] else " (non-certified)"
        hi = "" if b["upper_certified"] else " (non-certified)"
        print(f"{b['quantity']:>9}: lower {_fmt(b['lower'])}{lo}, upper {_fmt(b['upper'])}{hi}", file=out)


def _verdict_report(name, verdict, replay=None):
    cert = verdict.certificate
    return {
        "command": "stabilize",
        "target": name,
        "mode": verdict.mode.value,
        "decision": verdict.decision.value,
        "horizon": verdict.horizon,
        "sigma": verdict.sigma,
        "C": verdict.C,
        "lambda": verdict.lam,
        "norm": verdict.norm.value,
        "values": list(verdict.values),
        "note": verdict.note,
        "certificate": None if cert is None else {
            "kind": cert.kind.value,
            "block_length": cert.block_length,
            "periodic_b_indices": None if cert.periodic_b_indices is None else list(cert.periodic_b_indices),
        },
        "replay": None if replay is None else to_jsonable(replay),
    }


def _print_verdict(rep, out):
    print(f"{rep['mode']} for {rep['target']} ({rep['norm']} norm): {rep['decision']}", file=out)
    print(f"  horizon k = {rep['horizon']}, sigma = {_fmt(rep['sigma'])}", file=out)
    if rep["C"] is not None:
        print(f"  ||x(n)|| <= C * lambda^n * ||x(0)|| with C = {_fmt(rep['C'])}, lambda = {_fmt(rep['lambda'])}", file=out)
    cert = rep["certificate"]
    if cert:
        if cert["kind"] == "periodic":
            print(f"  controller: periodic B word {_word(cert['periodic_b_indices'])}", file=out)
        else:
            print(f"  controller: block-greedy with block length {cert['block_length']}", file=out)
    if rep["replay"]:
        r = rep["replay"]
        print(f"  replay over {r['blocks']} adversary blocks: max block norm {_fmt(r['max_block_norm'])} "
              f"({'ok' if r['ok'] else 'FAILED'})", file=out)
    if rep["values"]:
        print("  per-k values: " + ", ".join(_fmt(v) for v in rep["values"]), file=out)
    if rep["note"]:
        print(f"  note: {rep['note']}", file=out)


# ---------------------------------------------------------------------------
# commands


def _emit(args, rep, printer):
    text = dumps(rep)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.json:
        print(text, file=args.stdout)
    else:
        printer(rep, args.stdout)


def _tol(args) -> Tolerances:
    return DEFAULT


def cmd_set_radius(args, problem):
    mset = problem.resolve_set(args.name)
    fn = jsr_bracket if args.command == "jsr" else lsr_bracket
    try:
        br = fn(mset, args.n, args.norm, _tol(args), args.budget, args.threads)
    except BudgetExceeded as exc:
        rep = _set_report(args.name, exc.partial, args.command) if exc.partial is not None else {
            "command": args.command, "set": args.name, "rows": []}
        rep["budget_exceeded"] = str(exc)
        if exc.partial is not None:
            _emit(args, rep, _print_set_report)
        else:
            _emit(args, rep, lambda r, out: None)
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    _emit(args, _set_report(args.name, br, args.command), _print_set_report)
    return EXIT_OK


def cmd_minimax(args, problem):
    pair = problem.resolve_pair(args.name)
    try:
        brackets = minimax_brackets(pair, args.n, args.norm, _tol(args), args.budget, args.threads)
    except BudgetExceeded as exc:
        if exc.partial is not None:
            rep = _minimax_report(args.name, exc.partial)
            rep["budget_exceeded"] = str(exc)
            _emit(args, rep, _print_minimax)
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    _emit(args, _minimax_report(args.name, brackets), _print_minimax)
    return EXIT_OK


def _pair_or_set(problem, name):
    kind = problem.kind_of(name)
    if kind == "pair":
        return problem.resolve_pair(name), None
    return None, problem.resolve_set(name)


def cmd_stabilize(args, problem):
    mode = MODES[args.mode]
    pair, mset = _pair_or_set(problem, args.name)
    tol = _tol(args)
    common = dict(norm=args.norm, tol=tol, budget=args.budget, workers=args.threads)
    if mode is Mode.UNIFORM:
        if mset is None:
            raise SchemaError("uniform mode needs a set name, not a pair")
        verdict = check_uniform_stabilizability(mset, args.k_max, **common)
        target = control_pair(mset)
    elif mode is Mode.ASYMPTOTIC:
        if pair is None:
            pair = SwitchedPair(mset, MatrixSet.of(identity(mset.shape[0]), labels=["I"]))
        verdict = check_asymptotic_stability(pair, args.k_max, **common)
        target = pair
    else:
        if pair is None:
            raise SchemaError(f"{args.mode} mode needs a pair name")
        check = check_path_dependent if mode is Mode.PATH_DEPENDENT else check_path_independent_periodic
        verdict = check(pair, args.k_max, **common)
        target = pair
    replay = None
    if verdict.is_yes:
        try:
            replay = verify_certificate(verdict, target, tol, args.budget)
        except BudgetExceeded:
            replay = None
    _emit(args, _verdict_report(args.name, verdict, replay), _print_verdict)
    return DECISION_EXIT[verdict.decision]


def _saddle_report(name, pair, cert):
    return {
        "command": "hset",
        "action": "saddle",
        "name": name,
        "a_index": cert.a_index,
        "b_index": cert.b_index,
        "a_label": pair.a_set.label(cert.a_index),
        "b_label": pair.b_set.label(cert.b_index),
        "value": cert.value,
        "max_row_residual": cert.max_row_residual,
        "min_col_residual": cert.min_col_residual,
        "row_security_level": cert.lower_value,
        "col_security_level": cert.upper_value,
    }


def _print_generic(rep, out):
    for key, value in rep.items():
        if key == "set":
            rows, cols = value["rows"], value["cols"]
            for label, flat in zip(value["labels"], value["matrices"]):
                print(f"{label}:", file=out)
                for i in range(rows):
                    print("  " + "  ".join(f"{x:.9g}" for x in flat[i * cols:(i + 1) * cols]), file=out)
        else:
            print(f"{key}: {_fmt(value) if isinstance(value, float) else value}", file=out)


def cmd_hset(args, problem):
    kind = problem.kind_of(args.name)
    action = args.action
    if action == "saddle":
        if kind == "pair":
            pair = problem.resolve_pair(args.name)
            search = saddle_search
        else:
            # a lone square set is paired with {I}; the saddle then sits at its largest radius
            mset = problem.resolve_set(args.name)
            require_positive_set(mset)
            if not mset.is_square:
                raise SchemaError("saddle on a single set needs square members")
            pair = SwitchedPair(mset, MatrixSet.of(identity(mset.shape[0]), labels=["I"]))
            search = _scan
        try:
            cert = search(pair, _tol(args))
        except NoSaddle as exc:
            rep = {"command": "hset", "action": "saddle", "name": args.name, "error": str(exc)}
            if exc.best is not None:
                rep.update({k: v for k, v in _saddle_report(args.name, pair, exc.best).items() if k not in rep})
            _emit(args, rep, _print_generic)
            return EXIT_NO_SADDLE
        _emit(args, _saddle_report(args.name, pair, cert), _print_generic)
        return EXIT_OK
    if kind == "pair":
        if action != "exact":
            raise SchemaError(f"action {action!r} needs a set or hset name")
        pair = problem.resolve_pair(args.name)
        try:
            cert = saddle_search(pair, _tol(args))
        except NoSaddle as exc:
            _emit(args, {"command": "hset", "action": action, "name": args.name, "error": str(exc)}, _print_generic)
            return EXIT_NO_SADDLE
        rep = {"command": "hset", "action": action, "name": args.name, "minimax_value": cert.value,
               "a_index": cert.a_index, "b_index": cert.b_index}
        _emit(args, rep, _print_generic)
        return EXIT_OK
    mset = problem.resolve_set(args.name)
    spec = problem.hsets.get(args.name)
    if action == "materialize":
        rep = {"command": "hset", "action": action, "name": args.name, "members": len(mset), "set": set_to_json(mset)}
    elif action == "falsify":
        found = falsify_hset(mset, args.samples, args.seed)
        rep = {"command": "hset", "action": action, "name": args.name, "samples": args.samples, "seed": args.seed}
        if isinstance(found, Violation):
            rep.update(result="violation", matrix_index=found.matrix_index,
                       matrix_label=mset.label(found.matrix_index), u=list(found.u), condition=found.condition)
        else:
            rep.update(result="no-violation-found", vectors_tested=found.vectors_tested,
                       note="absence of a violation does not prove membership")
    else:
        guaranteed = spec is not None and spec.guaranteed
        radii = hset_exact_radii(mset, assume_hset=guaranteed, samples=args.samples, seed=args.seed, tol=_tol(args))
        rep = {"command": "hset", "action": action, "name": args.name, **radii,
               "membership": "by construction" if guaranteed else "falsifier-screened"}
    _emit(args, rep, _print_generic)
    return EXIT_OK


def _load_controller(text: str, pair: SwitchedPair):
    if text == "none":
        return None
    if text.startswith("periodic:"):
        return Controller.periodic(_ints(text.split(":", 1)[1], "--controller"))
    if text.startswith("block-greedy:"):
        ks = _ints(text.split(":", 1)[1], "--controller")
        if len(ks) != 1:
            raise UsageError("block-greedy takes one block length")
        return Controller.block_greedy(ks[0])
    path = Path(text)
    if not path.exists():
        raise UsageError(f"--controller: {text!r} is neither a controller spec nor a file")
    try:
        obj = json.loads(path.read_text())
        cert = obj["certificate"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"cannot read a certificate from {text}: {exc}") from None
    if cert is None:
        raise SchemaError(f"{text} holds no certificate (decision {obj.get('decision')!r})")
    if cert["kind"] == "periodic":
        return Controller.periodic(cert["periodic_b_indices"])
    return Controller.block_greedy(int(cert["block_length"]))


def cmd_simulate(args, problem):
    pair, mset = _pair_or_set(problem, args.name)
    if pair is None:
        pair = control_pair(mset)
    ctrl = _load_controller(args.controller, pair)
    x0 = np.ones(pair.dim) if args.x0 is None else np.array(_floats(args.x0, "--x0"))
    if x0.shape != (pair.dim,):
        raise DimensionMismatch(f"--x0 has {x0.size} entries, system dimension is {pair.dim}")
    traj = simulate(
        pair, ctrl, args.adversary, x0, args.steps, args.norm,
        a_word=_ints(args.a_word, "--a-word") if args.a_word else (),
        b_word=_ints(args.b_word, "--b-word") if args.b_word else (),
        seed=args.seed,
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            traj.write_csv(fh)
        summary_out = args.stdout
    else:
        traj.write_csv(args.stdout)
        summary_out = sys.stderr
    rate = traj.rate()
    summary = {"steps": traj.steps, "final_norm": float(traj.norms[-1]), "rate": rate, "adversary": traj.adversary}
    if args.json:
        print(json.dumps(to_jsonable(summary)), file=summary_out)
    else:
        print(f"final norm {float(traj.norms[-1])!r} after {traj.steps} steps; empirical rate {rate!r} "
              f"({traj.adversary} adversary)", file=summary_out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minimax-jsr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="problem file (JSON)")
    common.add_argument("name", help="set, pair or hset name in the problem file")
    common.add_argument("--norm", default="row-sum", choices=[k.value for k in NormKind])
    common.add_argument("--json", action="store_true", help="print the JSON report instead of a table")
    common.add_argument("--out", help="also write the report (CSV for simulate) to this file")
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--budget", type=_positive, default=DEFAULT.budget, help="leaf-evaluation cap per enumeration")
    common.add_argument("--seed", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("jsr", "lsr", "minimax"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--n", type=_positive, default=4, help="largest product length")
    p = sub.add_parser("stabilize", parents=[common])
    p.add_argument("--mode", choices=list(MODES), required=True)
    p.add_argument("--k-max", type=_positive, default=4)
    p = sub.add_parser("hset", parents=[common])
    p.add_argument("--action", choices=["materialize", "falsify", "saddle", "exact"], required=True)
    p.add_argument("--samples", type=_positive, default=1000)
    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--controller", default="none",
                   help="'none', 'periodic:i,j,...', 'block-greedy:k' or a stabilize JSON report")
    p.add_argument("--adversary", default="worst-case-greedy",
                   choices=["worst-case-greedy", "fixed-word", "seeded-random"])
    p.add_argument("--a-word", help="A indices for the fixed-word adversary (cycled)")
    p.add_argument("--b-word", help="B indices when there is no controller (cycled)")
    p.add_argument("--x0", help="initial state, comma-separated (default all ones)")
    p.add_argument("--steps", type=_nonneg, default=20)
    return parser


HANDLERS = {
    "jsr": cmd_set_radius,
    "lsr": cmd_set_radius,
    "minimax": cmd_minimax,
    "stabilize": cmd_stabilize,
    "hset": cmd_hset,
    "simulate": cmd_simulate,
}


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    args.stdout = stdout or sys.stdout
    if args.seed is None:
        args.seed = DEFAULT_SEED if args.command == "hset" else 0
    try:
        problem = load_problem(args.file)
        return HANDLERS[args.command](args, problem)
    except (SchemaError, UsageError, DimensionMismatch, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
