"""Semimeasures over finite strings and measure-level utilities.

Strings are tuples of integer symbols ``0..m-1``.  Every model evaluates in
the natural-log domain, with ``-inf`` standing for probability zero, and also
exposes an exact :class:`~fractions.Fraction` path used as a validation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

NEG_INF = -math.inf

Symbols = tuple  # tuple[int, ...]


class ModelError(ValueError):
    """Invalid model parameters."""


class AlphabetError(ValueError):
    """A symbol lies outside the model alphabet."""


class UnsupportedKindError(TypeError):
    """Operation not defined for this kind of model."""


def parse_fraction(value) -> Fraction:
    """Parse an exact rational from ``"p/q"``, an int, or a Fraction.

    Floats and decimal strings are rejected so that ties stay exact.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ModelError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "." in text or "e" in text.lower():
            raise ModelError(f"decimal literal not allowed, use p/q: {value!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"malformed rational {value!r}") from exc
    raise ModelError(f"not a rational: {value!r}")


def as_string(x, alphabet_size: int | None = None) -> tuple:
    """Coerce ``"0101"`` or a sequence of ints to a symbol tuple."""
    if isinstance(x, str):
        try:
            out = tuple(int(c) for c in x)
        except ValueError as exc:
            raise AlphabetError(f"non-digit symbol in {x!r}") from exc
    else:
        out = tuple(int(c) for c in x)
    if alphabet_size is not None:
        for s in out:
            if not 0 <= s < alphabet_size:
                raise AlphabetError(f"symbol {s} outside alphabet of size {alphabet_size}")
    return out


def format_string(x: Sequence[int]) -> str:
    return "".join(str(s) for s in x)


def _log(p: Fraction) -> float:
    if p == 0:
        return NEG_INF
    # math.log handles big Fractions without float overflow of num/den
    return math.log(p.numerator) - math.log(p.denominator)


def _distribution(values, m: int, name: str, *, total: str) -> tuple[Fraction, ...]:
    dist = tuple(parse_fraction(v) for v in values)
    if len(dist) != m:
        raise ModelError(f"{name}: expected {m} entries, got {len(dist)}")
    for p in dist:
        if not 0 <= p <= 1:
            raise ModelError(f"{name}: entry {p} outside [0, 1]")
    s = sum(dist)
    if total == "eq" and s != 1:
        raise ModelError(f"{name}: entries sum to {s}, expected 1")
    if total == "le" and s > 1:
        raise ModelError(f"{name}: entries sum to {s} > 1")
    return dist


class Model:
    """Base class for semimeasures ``nu: X* -> [0, 1]``.

    Subclasses implement :meth:`log_prob` and :meth:`exact_prob`.  Instances
    are immutable.
    """

    kind: str = ""
    alphabet_size: int
    is_measure: bool
    factorizable: bool = False

    def log_prob(self, x: tuple) -> float:
        raise NotImplementedError

    def exact_prob(self, x: tuple) -> Fraction:
        raise NotImplementedError

    def prob(self, x: tuple) -> float:
        return math.exp(self.log_prob(x))

    def step_distribution(self, i: int) -> tuple[Fraction, ...]:
        """Per-step distribution ``nu_i`` (1-based) of a factorizable model."""
        raise UnsupportedKindError(f"{self.kind} model is not factorizable")

    def spec(self) -> dict:
        """Parameter stanza that rebuilds this model via :func:`build_model`."""
        raise NotImplementedError

    def _check(self, x) -> tuple:
        return as_string(x, self.alphabet_size)


class FactorizableBase(Model):
    """Models of the form ``nu(x) = prod_i nu_i(x_i)``."""

    factorizable = True

    def step_log(self, i: int) -> tuple[float, ...]:
        return tuple(_log(p) for p in self.step_distribution(i))

    def log_prob(self, x) -> float:
        x = self._check(x)
        total = 0.0
        for i, s in enumerate(x, start=1):
            lp = self.step_log(i)[s]
            if lp == NEG_INF:
                return NEG_INF
            total += lp
        return total

    def exact_prob(self, x) -> Fraction:
        x = self._check(x)
        p = Fraction(1)
        for i, s in enumerate(x, start=1):
            p *= self.step_distribution(i)[s]
            if p == 0:
                break
        return p


@dataclass(frozen=True, eq=True)
class IidModel(FactorizableBase):
    """I.i.d. measure with rational symbol probabilities ``theta``."""

    theta: tuple[Fraction, ...]
    kind: str = field(default="iid", init=False)

    def __post_init__(self):
        if len(self.theta) < 2:
            raise ModelError("theta: alphabet size must be at least 2")
        object.__setattr__(self, "theta", _distribution(self.theta, len(self.theta), "theta", total="eq"))
        object.__setattr__(self, "_logs", tuple(_log(p) for p in self.theta))

    @property
    def alphabet_size(self) -> int:
        return len(self.theta)

    @property
    def is_measure(self) -> bool:
        return True

    def step_distribution(self, i: int):
        return self.theta

    def step_log(self, i: int):
        return self._logs

    def spec(self) -> dict:
        return {"kind": "iid", "theta": [str(p) for p in self.theta]}


@dataclass(frozen=True, eq=True)
class DeterministicModel(FactorizableBase):
    """Measure concentrated on ``prefix`` followed by ``period`` repeated forever."""

    prefix: tuple
    period: tuple
    size: int = 2
    kind: str = field(default="deterministic", init=False)

    def __post_init__(self):
        if self.size < 2:
            raise ModelError("alphabet size must be at least 2")
        if len(self.period) == 0:
            raise ModelError("period: must be nonempty")
        try:
            object.__setattr__(self, "prefix", as_string(self.prefix, self.size))
            object.__setattr__(self, "period", as_string(self.period, self.size))
        except AlphabetError as exc:
            raise ModelError(f"prefix/period: {exc}") from exc

    @property
    def alphabet_size(self) -> int:
        return self.size

    @property
    def is_measure(self) -> bool:
        return True

    def symbol_at(self, i: int) -> int:
        """Symbol at 1-based position ``i`` of the generated sequence."""
        if i <= len(self.prefix):
            return self.prefix[i - 1]
        return self.period[(i - len(self.prefix) - 1) % len(self.period)]

    def step_distribution(self, i: int):
        s = self.symbol_at(i)
        return tuple(Fraction(int(a == s)) for a in range(self.size))

    def log_prob(self, x) -> float:
        x = self._check(x)
        for i, s in enumerate(x, start=1):
            if s != self.symbol_at(i):
                return NEG_INF
        return 0.0

    def exact_prob(self, x) -> Fraction:
        return Fraction(int(self.log_prob(x) == 0.0))

    def spec(self) -> dict:
        return {
            "kind": "deterministic",
            "alphabet": self.size,
            "prefix": format_string(self.prefix),
            "period": format_string(self.period),
        }


def _oscillating_mu(i: int) -> tuple[Fraction, Fraction]:
    q = Fraction(1, 2 ** (2 * math.ceil(i / 2)))
    return (q, 1 - q)


def _oscillating_nu(i: int) -> tuple[Fraction, Fraction]:
    q = Fraction(1, 2 ** (2 * math.ceil((i + 1) / 2) - 1))
    return (q, 1 - q)


GENERATORS: dict[str, Callable[[int], tuple[Fraction, ...]]] = {
    "oscillating-mu": _oscillating_mu,
    "oscillating-nu": _oscillating_nu,
}


@lru_cache(maxsize=None)
def _generator_step(name: str, i: int):
    dist = GENERATORS[name](i)
    return dist, tuple(_log(p) for p in dist)


@dataclass(frozen=True, eq=True)
class FactorizableModel(FactorizableBase):
    """Product of per-step (semi)distributions.

    Either an explicit ``table`` of rows for steps ``1..len(table)`` followed by
    a constant ``tail`` row, or a named closed-form ``generator``.
    """

    table: tuple = ()
    tail: tuple | None = None
    generator: str | None = None
    kind: str = field(default="factorizable", init=False)

    def __post_init__(self):
        if self.generator is not None:
            if self.generator not in GENERATORS:
                raise ModelError(f"generator: unknown {self.generator!r}")
            if self.table or self.tail is not None:
                raise ModelError("generator: cannot combine with table/tail")
            object.__setattr__(self, "_size", 2)
            object.__setattr__(self, "_measure", True)
            return
        if self.tail is None:
            raise ModelError("tail: required when no generator is given")
        m = len(self.tail)
        if m < 2:
            raise ModelError("tail: alphabet size must be at least 2")
        tail = _distribution(self.tail, m, "tail", total="le")
        rows = tuple(_distribution(r, m, f"table[{k}]", total="le") for k, r in enumerate(self.table))
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "table", rows)
        object.__setattr__(self, "_size", m)
        object.__setattr__(self, "_measure", all(sum(r) == 1 for r in rows + (tail,)))
        object.__setattr__(self, "_logs", tuple(tuple(_log(p) for p in r) for r in rows + (tail,)))

    @property
    def alphabet_size(self) -> int:
        return self._size

    @property
    def is_measure(self) -> bool:
        return self._measure

    def step_distribution(self, i: int):
        if self.generator is not None:
            return _generator_step(self.generator, i)[0]
        return self.table[i - 1] if i <= len(self.table) else self.tail

    def step_log(self, i: int):
        if self.generator is not None:
            return _generator_step(self.generator, i)[1]
        return self._logs[min(i, len(self.table) + 1) - 1]

    def spec(self) -> dict:
        if self.generator is not None:
            return {"kind": "factorizable", "generator": self.generator}
        return {
            "kind": "factorizable",
            "table": [[str(p) for p in r] for r in self.table],
            "tail": [str(p) for p in self.tail],
        }


@dataclass(frozen=True, eq=True)
class TabularModel(Model):
    """Semimeasure given by explicit values on strings up to ``depth``.

    Strings of length ``<= depth`` missing from ``values`` have value 0.
    Beyond ``depth`` the value continues as ``value(x[:depth]) * prod tail(x_i)``.
    """

    values: tuple  # sorted ((string, Fraction), ...)
    size: int = 2
    tail: tuple | None = None
    kind: str = field(default="tabular", init=False)

    def __post_init__(self):
        if self.size < 2:
            raise ModelError("alphabet size must be at least 2")
        table: dict[tuple, Fraction] = {}
        items = self.values.items() if isinstance(self.values, Mapping) else self.values
        for key, v in items:
            try:
                k = as_string(key, self.size)
            except AlphabetError as exc:
                raise ModelError(f"values: {exc}") from exc
            p = parse_fraction(v)
            if not 0 <= p <= 1:
                raise ModelError(f"values: value({format_string(k)!r}) = {p} outside [0, 1]")
            table[k] = p
        if () not in table:
            raise ModelError("values: the empty string must be given")
        depth = max(len(k) for k in table)
        tail = self.tail if self.tail is not None else (Fraction(1, self.size),) * self.size
        tail = _distribution(tail, self.size, "tail", total="le")
        measure = table[()] == 1 and sum(tail) == 1
        for k in _all_strings(self.size, depth - 1):
            p = table.get(k, Fraction(0))
            children = sum(table.get(k + (a,), Fraction(0)) for a in range(self.size))
            if children > p:
                raise ModelError(
                    f"values: semimeasure condition fails at {format_string(k)!r} ({children} > {p})"
                )
            measure = measure and children == p
        object.__setattr__(self, "values", tuple(sorted(table.items())))
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "_table", table)
        object.__setattr__(self, "_depth", depth)
        object.__setattr__(self, "_measure", measure)
        object.__setattr__(self, "_tail_logs", tuple(_log(p) for p in tail))

    @property
    def alphabet_size(self) -> int:
        return self.size

    @property
    def is_measure(self) -> bool:
        return self._measure

    @property
    def depth(self) -> int:
        return self._depth

    def exact_prob(self, x) -> Fraction:
        x = self._check(x)
        p = self._table.get(x[: self._depth], Fraction(0))
        for s in x[self._depth :]:
            if p == 0:
                break
            p *= self.tail[s]
        return p

    def log_prob(self, x) -> float:
        x = self._check(x)
        lp = _log(self._table.get(x[: self._depth], Fraction(0)))
        for s in x[self._depth :]:
            if lp == NEG_INF:
                break
            lp += self._tail_logs[s]
        return lp

    def spec(self) -> dict:
        return {
            "kind": "tabular",
            "alphabet": self.size,
            "values": {format_string(k): str(v) for k, v in self.values},
            "tail": [str(p) for p in self.tail],
        }


def _all_strings(m: int, max_len: int) -> Iterable[tuple]:
    level = [()]
    for _ in range(max_len + 1):
        yield from level
        level = [x + (a,) for x in level for a in range(m)]


def build_model(spec: Mapping) -> Model:
    """Construct a model from a parameter stanza.

    Recognized kinds and fields::

        iid            theta: list of rationals summing to 1
        deterministic  prefix, period: digit strings; alphabet (default 2)
        factorizable   generator: name  |  table: list of rows, tail: row
        tabular        values: {string: rational}; alphabet; tail (optional)
        uniform        alphabet (default 2), shorthand for iid(1/m, ..., 1/m)
    """
    kind = spec.get("kind")
    if kind == "iid":
        if "theta" not in spec:
            raise ModelError("theta: missing")
        return IidModel(tuple(spec["theta"]))
    if kind == "uniform":
        m = int(spec.get("alphabet", 2))
        return IidModel((Fraction(1, m),) * m)
    if kind == "deterministic":
        return DeterministicModel(
            as_string(spec.get("prefix", "")), as_string(spec.get("period", "")), int(spec.get("alphabet", 2))
        )
    if kind == "factorizable":
        if spec.get("generator"):
            return FactorizableModel(generator=spec["generator"])
        table = tuple(tuple(r) for r in spec.get("table", ()))
        tail = spec.get("tail")
        return FactorizableModel(table=table, tail=None if tail is None else tuple(tail))
    if kind == "tabular":
        values = spec.get("values")
        if not values:
            raise ModelError("values: missing")
        tail = spec.get("tail")
        return TabularModel(
            tuple(dict(values).items()), int(spec.get("alphabet", 2)), None if tail is None else tuple(tail)
        )
    raise ModelError(f"kind: unknown model kind {kind!r}")


def uniform(m: int = 2) -> IidModel:
    return IidModel((Fraction(1, m),) * m)


def probability(model: Model, x) -> float:
    return model.prob(x)


def conditional(model: Model, a: int, x) -> float:
    """``nu(a | x) = nu(xa) / nu(x)``, defined as 0 when ``nu(x) = 0``."""
    x = as_string(x, model.alphabet_size)
    if not 0 <= a < model.alphabet_size:
        raise AlphabetError(f"symbol {a} outside alphabet of size {model.alphabet_size}")
    lx = model.log_prob(x)
    if lx == NEG_INF:
        return 0.0
    return math.exp(model.log_prob(x + (a,)) - lx)


def deficiency(model, x, alphabet_size: int | None = None) -> float:
    """``value(x) - sum_a value(xa)`` for a model or any string function.

    Nonnegative for semimeasures, zero for measures.
    """
    if isinstance(model, Model):
        f, m = model.prob, model.alphabet_size
    else:
        if alphabet_size is None:
            raise TypeError("alphabet_size is required for plain functions")
        f, m = model, alphabet_size
    x = as_string(x, m)
    return f(x) - math.fsum(f(x + (a,)) for a in range(m))


@dataclass(frozen=True)
class StochasticityCheck:
    uniform: bool
    min_positive: Fraction | None
    witness: tuple[int, int] | None = None  # (step, symbol)

    def __bool__(self) -> bool:
        return self.uniform


def is_uniformly_stochastic(model: Model, delta, horizon: int) -> StochasticityCheck:
    """Check ``nu_i(a) > 0 => nu_i(a) >= delta`` for steps ``1..horizon``.

    Only a finite prefix of steps can be certified; the smallest positive
    per-step probability seen is reported alongside.
    """
    if not model.factorizable:
        raise UnsupportedKindError(f"{model.kind} model is not factorizable")
    delta = parse_fraction(delta) if not isinstance(delta, float) else Fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    smallest = None
    for i in range(1, horizon + 1):
        for a, p in enumerate(model.step_distribution(i)):
            if p > 0:
                smallest = p if smallest is None else min(smallest, p)
                if p < delta:
                    return StochasticityCheck(False, smallest, (i, a))
    return StochasticityCheck(True, smallest)


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """``sum_i p_i ln(p_i / q_i)``; ``0 ln 0 = 0`` and ``p_i > 0 = q_i`` gives inf."""
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    terms = []
    for pi, qi in zip(p, q):
        if pi == 0:
            continue
        if qi == 0:
            return math.inf
        terms.append(float(pi) * math.log(float(pi) / float(qi)))
    return math.fsum(terms)


def random_model(rng: np.random.Generator, m: int = 2, kind: str | None = None, denom: int = 12) -> Model:
    """Random rational model from the zoo (used by property suites)."""
    kind = kind or rng.choice(["iid", "deterministic", "factorizable", "tabular"])

    def row(total: str) -> tuple[Fraction, ...]:
        k = rng.integers(0, denom + 1, size=m)
        if total == "eq":
            if k.sum() == 0:
                k[rng.integers(m)] = 1
            return tuple(Fraction(int(v), int(k.sum())) for v in k)
        s = max(int(k.sum()), denom)
        return tuple(Fraction(int(v), s) for v in k)

    if kind == "iid":
        return IidModel(row("eq"))
    if kind == "deterministic":
        prefix = tuple(int(v) for v in rng.integers(0, m, size=rng.integers(0, 4)))
        period = tuple(int(v) for v in rng.integers(0, m, size=rng.integers(1, 4)))
        return DeterministicModel(prefix, period, m)
    if kind == "factorizable":
        table = tuple(row("le" if rng.random() < 0.5 else "eq") for _ in range(rng.integers(0, 4)))
        return FactorizableModel(table=table, tail=row("le" if rng.random() < 0.3 else "eq"))
    if kind == "tabular":
        depth = int(rng.integers(1, 4))
        values = {(): Fraction(int(rng.integers(denom // 2, denom + 1)), denom)}
        for x in _all_strings(m, depth - 1):
            r = row("le" if rng.random() < 0.5 else "eq")
            for a in range(m):
                values[x + (a,)] = values[x] * r[a]
        return TabularModel(tuple(values.items()), m, row("le" if rng.random() < 0.5 else "eq"))
    raise ValueError(f"unknown kind {kind!r}")
