"""Weighted model classes, the Bayes mixture and the MDL (MAP) predictors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .measures import NEG_INF, Model, as_string, kl_divergence, parse_fraction, random_model

MODES = ("mixture", "dynamic", "static", "hybrid")

# float path: values within this relative distance count as tied
TIE_RTOL = 1e-12


class ClassError(ValueError):
    """Invalid weighted class."""


class OffSupportError(ArithmeticError):
    """A predictor denominator vanished."""


@dataclass(frozen=True)
class TieBreak:
    """Rule selecting one index from a tie set.

    ``weight-then-index`` takes the largest weight, then the lowest index.
    ``index`` takes the lowest index.  ``alternating`` cycles through the tie
    set (sorted by index) as ``len(x) // period`` advances; if ``members`` is
    given, it only applies to tie sets inside ``members``, otherwise it falls
    back to ``weight-then-index``.
    """

    strategy: str = "weight-then-index"
    period: int = 1
    members: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.strategy not in ("weight-then-index", "index", "alternating"):
            raise ValueError(f"unknown tie-break strategy {self.strategy!r}")
        if self.period < 1:
            raise ValueError("period must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "TieBreak":
        """Parse ``weight-then-index``, ``index`` or ``alternating[:period]``."""
        name, _, arg = text.partition(":")
        if name == "alternating" and arg:
            return cls("alternating", int(arg))
        if arg:
            raise ValueError(f"strategy {name!r} takes no argument")
        return cls(name)

    def __str__(self) -> str:
        if self.strategy == "alternating" and self.period != 1:
            return f"alternating:{self.period}"
        return self.strategy

    def choose(self, candidates: Sequence[int], weights: Sequence, length: int) -> int:
        cands = sorted(candidates)
        if len(cands) == 1:
            return cands[0]
        if self.strategy == "index":
            return cands[0]
        if self.strategy == "alternating" and (self.members is None or set(cands) <= set(self.members)):
            return cands[(length // self.period) % len(cands)]
        best = max(weights[i] for i in cands)
        return next(i for i in cands if weights[i] == best)


DEFAULT_TIEBREAK = TieBreak()


@dataclass(frozen=True)
class WeightedClass:
    """Finite class of models with positive rational weights summing to <= 1.

    Indices are 0-based positions in ``models`` and never change.
    """

    models: tuple[Model, ...]
    weights: tuple[Fraction, ...]
    names: tuple[str, ...] | None = None
    true_index: int | None = None
    tiebreak: TieBreak = DEFAULT_TIEBREAK
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        models = tuple(self.models)
        weights = tuple(parse_fraction(w) for w in self.weights)
        if not models:
            raise ClassError("class must contain at least one model")
        if len(models) != len(weights):
            raise ClassError("models and weights differ in length")
        for i, w in enumerate(weights):
            if w <= 0:
                raise ClassError(f"weight of model {i} must be positive, got {w}")
        total = sum(weights)
        if total > 1:
            raise ClassError(f"weights sum to {total} > 1")
        sizes = {m.alphabet_size for m in models}
        if len(sizes) != 1:
            raise ClassError(f"models disagree on alphabet size: {sorted(sizes)}")
        names = tuple(self.names) if self.names is not None else tuple(f"m{i}" for i in range(len(models)))
        if len(names) != len(models) or len(set(names)) != len(names):
            raise ClassError("names must be unique, one per model")
        if self.true_index is not None:
            if not 0 <= self.true_index < len(models):
                raise ClassError(f"true model index {self.true_index} out of range")
            if not models[self.true_index].is_measure:
                raise ClassError(f"true model {names[self.true_index]!r} is not a measure")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_log_w", np.array([math.log(w.numerator) - math.log(w.denominator) for w in weights]))

    def __len__(self) -> int:
        return len(self.models)

    @property
    def alphabet_size(self) -> int:
        return self.models[0].alphabet_size

    @property
    def true_model(self) -> Model:
        if self.true_index is None:
            raise ClassError("class has no designated true model")
        return self.models[self.true_index]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def log_joint(self, x) -> np.ndarray:
        """Vector of ``ln(w_nu * nu(x))`` over the class (``-inf`` for zero)."""
        key = as_string(x) if isinstance(x, str) else tuple(x)
        out = self._cache.get(key)
        if out is None:
            x = as_string(key, self.alphabet_size)
            out = self._log_w + np.array([m.log_prob(x) for m in self.models])
            out.setflags(write=False)
            self._cache[key] = out
        return out


def _tie_set(lj: np.ndarray) -> list[int]:
    best = lj.max()
    if best == NEG_INF:
        return list(range(len(lj)))
    return [int(i) for i in np.flatnonzero(lj >= best - TIE_RTOL)]


def logsumexp(values: np.ndarray) -> float:
    return float(np.logaddexp.reduce(values))


def mixture_log(cls: WeightedClass, x) -> float:
    return logsumexp(cls.log_joint(x))


def mixture(cls: WeightedClass, x) -> float:
    """Bayes mixture ``xi(x) = sum_nu w_nu nu(x)``."""
    return math.exp(mixture_log(cls, x))


def map_estimator(cls: WeightedClass, x, tiebreak: TieBreak | None = None) -> int:
    """Index of the maximizing element ``argmax_nu w_nu nu(x)``."""
    tiebreak = tiebreak or cls.tiebreak
    x = as_string(x) if isinstance(x, str) else tuple(x)
    return tiebreak.choose(_tie_set(cls.log_joint(x)), cls.weights, len(x))


def two_part_log(cls: WeightedClass, x, basis=None, tiebreak: TieBreak | None = None) -> float:
    lj = cls.log_joint(x)
    if basis is None:
        return float(lj.max())
    return float(lj[map_estimator(cls, basis, tiebreak)])


def two_part_value(cls: WeightedClass, x, basis=None, tiebreak: TieBreak | None = None) -> float:
    """Two-part MDL value ``max_nu w_nu nu(x)``.

    With ``basis=y`` the model is fixed by the MAP estimate at ``y`` instead,
    giving ``w_{nu^y} nu^y(x)``.
    """
    return math.exp(two_part_log(cls, x, basis, tiebreak))


@dataclass(frozen=True)
class Prediction:
    mode: str
    values: tuple[float, ...]

    @property
    def total(self) -> float:
        return math.fsum(self.values)

    @property
    def normalized(self) -> tuple[float, ...]:
        s = self.total
        if not s > 0:
            raise OffSupportError(f"{self.mode}: prediction sums to zero, cannot normalize")
        return tuple(v / s for v in self.values)

    def vector(self, normalized: bool = False) -> tuple[float, ...]:
        return self.normalized if normalized else self.values


def _ratio(num: float, den: float) -> float:
    return 0.0 if num == NEG_INF else math.exp(num - den)


def predict(cls: WeightedClass, x, mode: str, tiebreak: TieBreak | None = None) -> Prediction:
    """One-step prediction vector for ``mode`` in mixture/dynamic/static/hybrid.

    dynamic: ``rho(xa)/rho(x)``; static: ``nu^x(xa)/nu^x(x)``;
    hybrid: ``nu^{xa}(xa)/nu^x(x)``; mixture: ``xi(xa)/xi(x)``.
    """
    tiebreak = tiebreak or cls.tiebreak
    x = as_string(x, cls.alphabet_size)
    children = [x + (a,) for a in range(cls.alphabet_size)]
    if mode == "mixture":
        den = mixture_log(cls, x)
        nums = [mixture_log(cls, y) for y in children]
    elif mode == "dynamic":
        den = two_part_log(cls, x)
        nums = [two_part_log(cls, y) for y in children]
    elif mode == "static":
        k = map_estimator(cls, x, tiebreak)
        model = cls.models[k]
        den = model.log_prob(x)
        nums = [model.log_prob(y) for y in children]
    elif mode == "hybrid":
        den = cls.models[map_estimator(cls, x, tiebreak)].log_prob(x)
        nums = [cls.models[map_estimator(cls, y, tiebreak)].log_prob(y) for y in children]
    else:
        raise ValueError(f"unknown prediction mode {mode!r}")
    if den == NEG_INF:
        raise OffSupportError(f"{mode}: denominator is zero at x={''.join(map(str, x))!r}")
    return Prediction(mode, tuple(_ratio(n, den) for n in nums))


def normalizer_trace(predictor: Callable, x, alphabet_size: int) -> tuple[list[float], float]:
    """Per-step factors ``sum_a v(x_<t a) / v(x_<t)`` for ``t = 1..len(x)+1``.

    ``predictor`` maps a string to its (semi)measure value.  Returns the
    factor list and their product.
    """
    x = as_string(x, alphabet_size)
    factors = []
    for t in range(len(x) + 1):
        prefix = x[:t]
        den = predictor(prefix)
        if not den > 0:
            raise OffSupportError(f"predictor vanishes on prefix of length {t}")
        factors.append(math.fsum(predictor(prefix + (a,)) for a in range(alphabet_size)) / den)
    return factors, math.exp(math.fsum(math.log(f) if f > 0 else NEG_INF for f in factors))


def weight_codelength(w) -> int:
    """Prefix-code length ``ceil(-log2 w)`` for a prior weight (Kraft)."""
    w = parse_fraction(w)
    if not 0 < w <= 1:
        raise ValueError(f"weight must lie in (0, 1], got {w}")
    # smallest k with 2^-k <= w, i.e. num * 2^k >= den
    k = 0
    while w.numerator << k < w.denominator:
        k += 1
    return k


def codelength_weight(bits: int) -> Fraction:
    if bits < 0:
        raise ValueError("code length must be nonnegative")
    return Fraction(1, 2**bits)


def kl_argmax(cls: WeightedClass, x, tiebreak: TieBreak | None = None) -> int:
    """MAP index of an all-i.i.d. class via the KL form.

    Maximizes ``ln w(theta) - t * D(alpha || theta)`` with ``alpha`` the
    empirical symbol frequencies of ``x``.
    """
    tiebreak = tiebreak or cls.tiebreak
    x = as_string(x, cls.alphabet_size)
    t = len(x)
    counts = np.bincount(np.array(x, dtype=int), minlength=cls.alphabet_size) if t else np.zeros(cls.alphabet_size)
    alpha = counts / t if t else counts
    scores = []
    for w, model in zip(cls.weights, cls.models):
        if model.kind != "iid":
            raise TypeError("kl_argmax requires an all-i.i.d. class")
        d = kl_divergence(alpha, model.theta) if t else 0.0
        scores.append(math.log(w) - t * d if d != math.inf else NEG_INF)
    scores = np.array(scores)
    best = scores.max()
    # t*D carries t*log terms, so compare with a tolerance scaled by t
    if best == NEG_INF:
        cands = list(range(len(scores)))
    else:
        cands = [int(i) for i in np.flatnonzero(scores >= best - TIE_RTOL * max(1, t) * 10)]
    return tiebreak.choose(cands, cls.weights, t)


def random_class(rng: np.random.Generator, size: int | None = None, m: int = 2, denom: int = 60) -> WeightedClass:
    """Random class of zoo models with random rational weights, sum <= 1.

    The first model is always an i.i.d. measure and is designated true.
    """
    size = size or int(rng.integers(2, 7))
    models = [random_model(rng, m, "iid")] + [random_model(rng, m) for _ in range(size - 1)]
    k = rng.integers(1, denom, size=size)
    total = max(int(k.sum()), int(rng.integers(int(k.sum()), 2 * int(k.sum()) + 1)))
    weights = tuple(Fraction(int(v), total) for v in k)
    return WeightedClass(tuple(models), weights, true_index=0)
