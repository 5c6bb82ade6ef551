"""Exact rational reference implementation of the predictors and error series.

Independent of the log-domain float path: every quantity is a Fraction built
from ``Model.exact_prob``, ties are exact equalities, and only log-valued
metrics are converted to float at the very end.  Exponential in depth; meant
for validation at small horizons.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .predictors import OffSupportError, TieBreak, WeightedClass

__all__ = ["joint", "xi", "rho", "map_index", "prediction", "error_series"]


def joint(cls: WeightedClass, x: tuple) -> list[Fraction]:
    return [w * m.exact_prob(x) for w, m in zip(cls.weights, cls.models)]


def xi(cls: WeightedClass, x: tuple) -> Fraction:
    return sum(joint(cls, x), Fraction(0))


def rho(cls: WeightedClass, x: tuple) -> Fraction:
    return max(joint(cls, x))


def map_index(cls: WeightedClass, x: tuple, tiebreak: TieBreak | None = None) -> int:
    tiebreak = tiebreak or cls.tiebreak
    values = joint(cls, x)
    best = max(values)
    return tiebreak.choose([i for i, v in enumerate(values) if v == best], cls.weights, len(x))


def prediction(cls: WeightedClass, x: tuple, mode: str, tiebreak: TieBreak | None = None) -> list[Fraction]:
    m = cls.alphabet_size
    children = [tuple(x) + (a,) for a in range(m)]
    if mode == "mixture":
        den, nums = xi(cls, x), [xi(cls, y) for y in children]
    elif mode == "dynamic":
        den, nums = rho(cls, x), [rho(cls, y) for y in children]
    elif mode == "static":
        model = cls.models[map_index(cls, x, tiebreak)]
        den, nums = model.exact_prob(x), [model.exact_prob(y) for y in children]
    elif mode == "hybrid":
        den = cls.models[map_index(cls, x, tiebreak)].exact_prob(x)
        nums = [cls.models[map_index(cls, y, tiebreak)].exact_prob(y) for y in children]
    else:
        raise ValueError(f"unknown prediction mode {mode!r}")
    if den == 0:
        raise OffSupportError(f"{mode}: denominator is zero")
    return [n / den for n in nums]


def _metric(name: str, truth: list[Fraction], phi: list[Fraction]):
    if name == "squared":
        return sum((p - q) ** 2 for p, q in zip(truth, phi))
    s = sum(phi)
    if name == "abs-sum":
        return abs(1 - s)
    if name == "abs-log-sum":
        return abs(math.log(s))
    if name == "kl":
        total = 0.0
        for p, q in zip(truth, phi):
            if p == 0:
                continue
            if q == 0:
                return math.inf
            total += float(p) * math.log(p / q)
        return total
    raise ValueError(f"unknown metric {name!r}")


def error_series(
    cls: WeightedClass,
    mode: str,
    normalized: bool,
    metric: str,
    n: int,
    tiebreak: TieBreak | None = None,
) -> list[float]:
    """Per-step ``E metric`` for ``t = 1..n`` by exact tree enumeration."""
    mu = cls.true_model
    m = cls.alphabet_size
    per_step = []
    level = [((), Fraction(1))]
    for _ in range(n):
        acc = []
        nxt = []
        for x, p in level:
            truth = [mu.exact_prob(x + (a,)) / p for a in range(m)]
            phi = prediction(cls, x, mode, tiebreak)
            if normalized:
                s = sum(phi)
                phi = [q / s for q in phi]
            acc.append((p, _metric(metric, truth, phi)))
            nxt.extend((x + (a,), p * truth[a]) for a in range(m) if truth[a] > 0)
        if any(v == math.inf for _, v in acc):
            per_step.append(math.inf)
        else:
            exact = sum((p * v for p, v in acc if isinstance(v, Fraction)), Fraction(0))
            per_step.append(float(exact) + math.fsum(float(p) * v for p, v in acc if not isinstance(v, Fraction)))
        level = nxt
    return per_step
