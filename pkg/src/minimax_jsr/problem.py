"""Problem files (JSON) and JSON-ready report encoding.

A problem file looks like::

    {"version": "1",
     "sets":  {"A": {"rows": 2, "cols": 2, "matrices": [[2, 0, 0, 0.5], ...], "labels": [...]}},
     "pairs": {"P": {"a": "A", "b": "B"}},
     "hsets": {"H": {"construction": "independent-row-uncertainty",
                     "payload": [[[1, 2], [2, 1]], [[1, 3], [2, 2]]]}}}

Matrices are row-major, either flat (``rows*cols`` numbers) or nested.
Pairs may name a set or an hourglass set on either side.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .hourglass import Construction, HSetSpec, materialize
from .products import MatrixSet, SwitchedPair

SCHEMA_VERSION = "1"


def _finite_number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise SchemaError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _matrix(data, rows, cols, where):
    if not isinstance(data, list):
        raise SchemaError(f"{where}: matrix must be a list")
    flat = data
    if data and all(isinstance(r, list) for r in data):
        if len(data) != rows or any(len(r) != cols for r in data):
            raise SchemaError(f"{where}: nested matrix is not {rows}x{cols}")
        flat = [x for r in data for x in r]
    if len(flat) != rows * cols:
        raise SchemaError(f"{where}: expected {rows * cols} entries, got {len(flat)}")
    vals = [_finite_number(x, where) for x in flat]
    return np.array(vals).reshape(rows, cols)


def _positive_int(x, where):
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise SchemaError(f"{where}: expected a positive integer, got {x!r}")
    return x


def parse_set(obj, where="set") -> MatrixSet:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    for key in ("rows", "cols", "matrices"):
        if key not in obj:
            raise SchemaError(f"{where}: missing '{key}'")
    rows = _positive_int(obj["rows"], f"{where}.rows")
    cols = _positive_int(obj["cols"], f"{where}.cols")
    mats = obj["matrices"]
    if not isinstance(mats, list) or not mats:
        raise SchemaError(f"{where}.matrices: expected a non-empty list")
    members = tuple(_matrix(m, rows, cols, f"{where}.matrices[{i}]") for i, m in enumerate(mats))
    labels = obj.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise SchemaError(f"{where}.labels: expected a list of strings")
    try:
        return MatrixSet(members, labels)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


@dataclass
class Problem:
    sets: dict = field(default_factory=dict)
    pairs: dict = field(default_factory=dict)
    hsets: dict = field(default_factory=dict)
    raw_hsets: dict = field(default_factory=dict)

    def resolve_set(self, name: str) -> MatrixSet:
        if name in self.sets:
            return self.sets[name]
        if name in self.hsets:
            return materialize(self.hsets[name])
        raise SchemaError(f"unknown set {name!r}")

    def resolve_pair(self, name: str) -> SwitchedPair:
        if name not in self.pairs:
            raise SchemaError(f"unknown pair {name!r}")
        a, b = self.pairs[name]
        try:
            return SwitchedPair(self.resolve_set(a), self.resolve_set(b))
        except ValueError as exc:
            raise SchemaError(f"pair {name!r}: {exc}") from None

    def kind_of(self, name: str) -> str:
        for kind, table in (("pair", self.pairs), ("set", self.sets), ("hset", self.hsets)):
            if name in table:
                return kind
        raise SchemaError(f"no set, pair or hset named {name!r}")


def _parse_hset(obj, problem: Problem, where: str, stack=()):
    if isinstance(obj, str):
        if obj in stack:
            raise SchemaError(f"{where}: cyclic reference to {obj!r}")
        if obj in problem.raw_hsets:
            return _parse_hset(problem.raw_hsets[obj], problem, f"hsets.{obj}", stack + (obj,))
        if obj in problem.sets:
            return HSetSpec(Construction.RAW, problem.sets[obj])
        raise SchemaError(f"{where}: unknown set or hset {obj!r}")
    if not isinstance(obj, dict) or "construction" not in obj or "payload" not in obj:
        raise SchemaError(f"{where}: expected {{construction, payload}}")
    try:
        kind = Construction(obj["construction"])
    except ValueError:
        raise SchemaError(f"{where}: unknown construction {obj['construction']!r}") from None
    payload = obj["payload"]
    try:
        if kind in (Construction.LINEARLY_ORDERED, Construction.RAW):
            mset = problem.sets.get(payload) if isinstance(payload, str) else parse_set(payload, f"{where}.payload")
            if mset is None:
                raise SchemaError(f"{where}.payload: unknown set {payload!r}")
            return HSetSpec(kind, mset)
        if kind is Construction.IRU:
            if not isinstance(payload, list):
                raise SchemaError(f"{where}.payload: expected a list of row-choice lists")
            rows = []
            for i, choices in enumerate(payload):
                if not isinstance(choices, list) or not choices:
                    raise SchemaError(f"{where}.payload[{i}]: expected a non-empty list of rows")
                if not all(isinstance(r, list) for r in choices):
                    raise SchemaError(f"{where}.payload[{i}]: each row choice must be a list of numbers")
                rows.append([[_finite_number(x, f"{where}.payload[{i}]") for x in r] for r in choices])
            return HSetSpec(kind, rows)
        if not isinstance(payload, list) or len(payload) != 2:
            raise SchemaError(f"{where}.payload: expected [left, right]")
        left, right = (_parse_hset(c, problem, f"{where}.payload[{i}]", stack) for i, c in enumerate(payload))
        return HSetSpec(kind, (left, right))
    except SchemaError:
        raise
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{where}: {exc}") from None


def parse_problem(obj) -> Problem:
    if not isinstance(obj, dict):
        raise SchemaError("problem file must be a JSON object")
    version = obj.get("version")
    if str(version) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version!r}; expected {SCHEMA_VERSION!r}")
    problem = Problem()
    sets = obj.get("sets", {})
    if not isinstance(sets, dict):
        raise SchemaError("'sets' must be an object")
    for name, spec in sets.items():
        problem.sets[name] = parse_set(spec, f"sets.{name}")
    hsets = obj.get("hsets", {}) or {}
    if not isinstance(hsets, dict):
        raise SchemaError("'hsets' must be an object")
    problem.raw_hsets = dict(hsets)
    for name in hsets:
        if name in problem.sets:
            raise SchemaError(f"name {name!r} used for both a set and an hset")
        problem.hsets[name] = _parse_hset(name, problem, f"hsets.{name}")
    pairs = obj.get("pairs", {}) or {}
    if not isinstance(pairs, dict):
        raise SchemaError("'pairs' must be an object")
    for name, spec in pairs.items():
        if not isinstance(spec, dict) or not isinstance(spec.get("a"), str) or not isinstance(spec.get("b"), str):
            raise SchemaError(f"pairs.{name}: expected {{a: name, b: name}}")
        for side in ("a", "b"):
            if spec[side] not in problem.sets and spec[side] not in problem.hsets:
                raise SchemaError(f"pairs.{name}.{side}: unknown set {spec[side]!r}")
        problem.pairs[name] = (spec["a"], spec["b"])
    return problem


def load_problem(path) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    try:
        obj = json.loads(text, parse_constant=lambda c: _finite_number(float(c), "number"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return parse_problem(obj)


def set_to_json(mset: MatrixSet) -> dict:
    rows, cols = mset.shape
    return {
        "rows": rows,
        "cols": cols,
        "matrices": [[float(v) for v in m.ravel()] for m in mset],
        "labels": [mset.label(i) for i in range(len(mset))],
    }


def to_jsonable(obj):
    """Recursively convert report objects to plain JSON types.

    Floats pass through unchanged; ``json`` writes the shortest repr, which
    reads back to the same double.
    """
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, MatrixSet):
        return set_to_json(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if hasattr(obj, "_asdict"):
        return {k: to_jsonable(v) for k, v in obj._asdict().items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False)
