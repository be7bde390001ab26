"""Numerical tolerances and limits shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-9
    iteration: float = 1e-12
    max_squarings: int = 64
    budget: int = 10**8
    underflow: float = 1e-300
    # Above this condition number a pair product is treated as singular
    # when computing lower completion bounds.
    max_condition: float = 1e8
    # Largest number of leaf products materialized at once by a sweep.
    chunk: int = 1 << 20


DEFAULT = Tolerances()
