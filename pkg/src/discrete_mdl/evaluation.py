"""Expected prediction-error series under the true measure, and their bounds.

Three engines compute ``E f(x_{<t})`` for each step ``t``:

* ``exact-tree``   full prefix-tree enumeration, pruning mu-null subtrees
* ``exact-counts`` dynamic programming over symbol-count vectors (i.i.d. only)
* ``monte-carlo``  seeded sampling from mu with a normal 99% interval
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .measures import NEG_INF, Model, as_string, conditional, deficiency, kl_divergence
from .predictors import (
    TIE_RTOL,
    OffSupportError,
    TieBreak,
    WeightedClass,
    map_estimator,
    mixture,
    predict,
    two_part_value,
)

METRICS = ("squared", "abs-sum", "abs-log-sum", "kl")
ENGINES = ("exact-tree", "exact-counts", "monte-carlo")
DEFAULT_BUDGET = 2**22
Z99 = NormalDist().inv_cdf(0.995)


class BudgetError(RuntimeError):
    """Enumeration would exceed the node budget."""


def metric_value(metric: str, truth: Sequence[float], phi: Sequence[float]) -> float:
    if metric == "squared":
        return math.fsum((p - q) ** 2 for p, q in zip(truth, phi))
    if metric == "abs-sum":
        return abs(1.0 - math.fsum(phi))
    if metric == "abs-log-sum":
        return abs(math.log(math.fsum(phi)))
    if metric == "kl":
        return kl_divergence(truth, phi)
    raise ValueError(f"unknown metric {metric!r}")


# --------------------------------------------------------------------------
# theorem bounds

BOUNDS: dict[str, Callable[[float], float]] = {
    "thm1": lambda inv: math.log(inv),
    "thm3": lambda inv: inv + math.log(inv),
    "thm4i": lambda inv: 2 * inv,
    "thm4ii": lambda inv: 2 * inv,
    "thm5": lambda inv: inv,
    "cor6-dyn-norm": lambda inv: 2 * inv,
    "cor6-dyn": lambda inv: 8 * inv,
    "cor6-static": lambda inv: 21 * inv,
    "cor6-static-norm": lambda inv: 32 * inv,
}

# (mode, normalized, metric) -> theorem whose left-hand side the series is
THEOREM_FOR = {
    ("mixture", False, "squared"): "thm1",
    ("dynamic", True, "squared"): "thm3",
    ("dynamic", False, "abs-log-sum"): "thm4i",
    ("dynamic", False, "abs-sum"): "thm4ii",
    ("static", False, "abs-sum"): "thm5",
    ("dynamic", False, "squared"): "cor6-dyn",
    ("static", False, "squared"): "cor6-static",
    ("static", True, "squared"): "cor6-static-norm",
}


def bound_for(theorem: str, w_mu) -> float:
    """Numeric bound of ``theorem`` for prior weight ``w_mu`` of the true model."""
    if theorem not in BOUNDS:
        raise KeyError(f"unknown theorem {theorem!r}; expected one of {sorted(BOUNDS)}")
    w = Fraction(w_mu)
    if not 0 < w <= 1:
        raise ValueError(f"w_mu must lie in (0, 1], got {w}")
    return BOUNDS[theorem](float(1 / w))


# --------------------------------------------------------------------------
# engines


def _require_measure(mu: Model):
    if not mu.is_measure:
        raise ValueError("expectations need a measure, got a strict semimeasure")


def _tree_levels(mu: Model, n: int, budget: int):
    """Yield ``[(x, mu(x)), ...]`` for lengths ``0..n``, skipping mu-null strings."""
    m = mu.alphabet_size
    advice = f"prefix tree exceeds {budget} surviving nodes; use the exact-counts or monte-carlo engine"
    if mu.factorizable:
        # surviving nodes per level are the product of per-step support sizes
        width, nodes = 1, 1
        for i in range(1, n + 1):
            width *= sum(1 for p in mu.step_distribution(i) if p > 0)
            nodes += width
            if nodes > budget:
                raise BudgetError(advice)
    level = [((), math.exp(mu.log_prob(())))]
    nodes = 1
    yield level
    for _ in range(n):
        nxt = []
        for x, _p in level:
            for a in range(m):
                y = x + (a,)
                lp = mu.log_prob(y)
                if lp != NEG_INF:
                    nxt.append((y, math.exp(lp)))
            if nodes + len(nxt) > budget:
                raise BudgetError(advice)
        nodes += len(nxt)
        level = nxt
        yield level


def exact_expectation(f: Callable[[tuple], float], mu: Model, n: int, budget: int = DEFAULT_BUDGET) -> float:
    """``sum_{x in X^n} mu(x) f(x)`` by prefix-tree enumeration."""
    _require_measure(mu)
    for level in _tree_levels(mu, n, budget):
        pass
    return math.fsum(p * f(x) for x, p in level)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for k in range(total, -1, -1):
        for rest in _compositions(total - k, parts - 1):
            yield (k,) + rest


def _count_states(mu: Model, n: int, budget: int):
    """``[(alpha, P(alpha)), ...]`` over count vectors of strings of length n."""
    if mu.kind != "iid":
        raise TypeError("the counts engine requires an i.i.d. true model")
    m = mu.alphabet_size
    if math.comb(n + m - 1, m - 1) > budget:
        raise BudgetError(f"count-vector space exceeds {budget} states; use the monte-carlo engine")
    states = []
    for alpha in _compositions(n, m):
        p = Fraction(math.factorial(n))
        for k, th in zip(alpha, mu.theta):
            p = p / math.factorial(k) * th**k
        if p > 0:
            states.append((alpha, float(p)))
    return states


def representative(alpha: Sequence[int]) -> tuple:
    """Sorted string with symbol counts ``alpha``."""
    return tuple(a for a, k in enumerate(alpha) for _ in range(k))


def counts_expectation(
    f: Callable[[tuple], float],
    mu: Model,
    n: int,
    cls: WeightedClass | None = None,
    budget: int = DEFAULT_BUDGET,
) -> float:
    """``E f`` where ``f`` depends on ``x in X^n`` only through its counts.

    ``f`` receives the count vector.  With ``cls`` given, every member must be
    i.i.d. (that is what makes predictor values count-dependent only).
    """
    if cls is not None:
        _require_iid_class(cls)
    _require_measure(mu)
    return math.fsum(p * f(alpha) for alpha, p in _count_states(mu, n, budget))


def _require_iid_class(cls: WeightedClass):
    bad = [cls.names[i] for i, m in enumerate(cls.models) if m.kind != "iid"]
    if bad:
        raise TypeError(f"the counts engine requires an all-i.i.d. class; not i.i.d.: {', '.join(bad)}")


def sample_sequences(mu: Model, n: int, samples: int, seed: int) -> np.ndarray:
    """``samples x n`` array of sequences drawn from ``mu``; deterministic in seed."""
    _require_measure(mu)
    m = mu.alphabet_size
    rng = np.random.default_rng(seed)
    u = rng.random((samples, n))
    out = np.zeros((samples, n), dtype=np.int64)
    if mu.factorizable:
        for i in range(n):
            cum = np.cumsum([float(p) for p in mu.step_distribution(i + 1)])
            cum[-1] = 1.0
            out[:, i] = np.minimum(np.searchsorted(cum, u[:, i], side="right"), m - 1)
            # a draw landing on a trailing zero-probability symbol falls back to the last positive one
            last = max(a for a, p in enumerate(mu.step_distribution(i + 1)) if p > 0)
            out[:, i] = np.minimum(out[:, i], last)
        return out
    for s in range(samples):
        x: tuple = ()
        for i in range(n):
            probs = np.array([conditional(mu, a, x) for a in range(m)])
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            a = int(min(np.searchsorted(cum, u[s, i], side="right"), m - 1))
            while probs[a] == 0:
                a -= 1
            x = x + (a,)
        out[s] = x
    return out


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    half_width: float
    samples: int
    seed: int

    def covers(self, value: float) -> bool:
        return abs(value - self.mean) <= self.half_width


def _weighted_stats(values: np.ndarray, counts: np.ndarray, total: int) -> tuple[float, float]:
    mean = float(np.dot(counts, values) / total)
    if total < 2:
        return mean, 0.0
    var = float(np.dot(counts, (values - mean) ** 2) / (total - 1))
    return mean, Z99 * math.sqrt(var / total)


def mc_expectation(f: Callable[[tuple], float], mu: Model, n: int, samples: int, seed: int) -> MCEstimate:
    """Monte-Carlo ``E f(x_{1:n})`` with a normal-approximation 99% half-width.

    ``f`` is evaluated once per distinct sampled string.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    seqs = sample_sequences(mu, n, samples, seed)
    uniq, counts = np.unique(seqs, axis=0, return_counts=True)
    values = np.array([f(tuple(int(s) for s in row)) for row in uniq], dtype=float)
    mean, half = _weighted_stats(values, counts, samples)
    return MCEstimate(mean, half, samples, seed)


# --------------------------------------------------------------------------
# error series


@dataclass
class ErrorSeries:
    metric: str
    mode: str
    normalized: bool
    engine: str
    per_step: list[float]
    theorem: str | None = None
    bound: float | None = None
    seed: int | None = None
    samples: int | None = None
    half_width: list[float] | None = None
    cumulative: list[float] = field(default_factory=list)
    # steps whose expected metric is +inf; they are left out of ``cumulative``
    infinite_steps: list[int] = field(default_factory=list)

    def __post_init__(self):
        running, self.cumulative, self.infinite_steps = [], [], []
        for t, v in enumerate(self.per_step, start=1):
            if math.isinf(v):
                self.infinite_steps.append(t)
            else:
                running.append(v)
            self.cumulative.append(math.fsum(running))

    @property
    def total(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0

    def within_bound(self, tol: float = 1e-9) -> bool | None:
        if self.bound is None:
            return None
        return all(c <= self.bound + tol for c in self.cumulative)


def _step_metric(cls, mu, x, mode, normalized, metric, tiebreak) -> float:
    m = cls.alphabet_size
    lx = mu.log_prob(x)
    truth = [math.exp(mu.log_prob(x + (a,)) - lx) for a in range(m)]
    phi = predict(cls, x, mode, tiebreak).vector(normalized)
    return metric_value(metric, truth, phi)


def _expect_level(pairs) -> float:
    vals = [(p, v) for p, v in pairs]
    if any(math.isinf(v) and p > 0 for p, v in vals):
        return math.inf
    return math.fsum(p * v for p, v in vals)


def error_series(
    cls: WeightedClass,
    mode: str,
    metric: str,
    n: int,
    normalized: bool = False,
    engine: str = "exact-tree",
    tiebreak: TieBreak | None = None,
    samples: int = 10_000,
    seed: int = 0,
    theorem: str | None = None,
    budget: int = DEFAULT_BUDGET,
) -> ErrorSeries:
    """Expected metric at each step ``t = 1..n`` for the class's true model.

    The theorem bound is attached when ``(mode, normalized, metric)`` matches
    one (override with ``theorem``).
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    mu = cls.true_model
    _require_measure(mu)
    tiebreak = tiebreak or cls.tiebreak

    def f(x):
        return _step_metric(cls, mu, x, mode, normalized, metric, tiebreak)

    half = None
    if engine == "exact-tree":
        per_step = []
        for t, level in enumerate(_tree_levels(mu, n - 1, budget), start=1):
            per_step.append(_expect_level((p, f(x)) for x, p in level))
    elif engine == "exact-counts":
        _require_iid_class(cls)
        per_step = []
        for t in range(1, n + 1):
            states = _count_states(mu, t - 1, budget)
            per_step.append(_expect_level((p, f(representative(alpha))) for alpha, p in states))
    elif engine == "monte-carlo":
        seqs = sample_sequences(mu, max(n - 1, 0), samples, seed)
        per_step, half = [], []
        for t in range(1, n + 1):
            uniq, counts = np.unique(seqs[:, : t - 1], axis=0, return_counts=True)
            values = np.array([f(tuple(int(s) for s in row)) for row in uniq], dtype=float)
            if np.isinf(values).any():
                per_step.append(math.inf)
                half.append(math.inf)
                continue
            mean, hw = _weighted_stats(values, counts, samples)
            per_step.append(mean)
            half.append(hw)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    theorem = theorem or THEOREM_FOR.get((mode, bool(normalized), metric))
    bound = bound_for(theorem, cls.weights[cls.true_index]) if theorem else None
    return ErrorSeries(
        metric=metric,
        mode=mode,
        normalized=bool(normalized),
        engine=engine,
        per_step=per_step,
        theorem=theorem,
        bound=bound,
        seed=seed if engine == "monte-carlo" else None,
        samples=samples if engine == "monte-carlo" else None,
        half_width=half,
    )


# --------------------------------------------------------------------------
# normalizer and stabilization


def _check_on_support(cls: WeightedClass, x: tuple):
    if cls.true_index is not None and cls.true_model.log_prob(x) == NEG_INF:
        raise OffSupportError("source sequence has zero probability under the true model")


@dataclass(frozen=True)
class NormalizerTrace:
    factors: list[float]
    partial_products: list[float]
    last_nonunit: int | None  # last t with |factor - 1| > 1e-9

    @property
    def value(self) -> float:
        return self.partial_products[-1]


def normalizer_convergence(cls: WeightedClass, source, T: int) -> NormalizerTrace:
    """Factors ``sum_a rho(x_<t a) / rho(x_<t)`` of the two-part normalizer, ``t = 1..T``."""
    x = as_string(source, cls.alphabet_size)[: T - 1]
    if len(x) < T - 1:
        raise ValueError(f"source has {len(x)} symbols, need {T - 1}")
    _check_on_support(cls, x)
    factors, partial, last = [], [], None
    log_total = 0.0
    for t in range(1, T + 1):
        prefix = x[: t - 1]
        den = two_part_value(cls, prefix)
        if not den > 0:
            raise OffSupportError(f"two-part value vanishes at t={t}")
        fac = math.fsum(two_part_value(cls, prefix + (a,)) for a in range(cls.alphabet_size)) / den
        factors.append(fac)
        log_total += math.log(fac)
        partial.append(math.exp(log_total))
        if abs(fac - 1) > 1e-9:
            last = t
    return NormalizerTrace(factors, partial, last)


@dataclass(frozen=True)
class StabilizationReport:
    map_indices: list[int]  # MAP index at x_{<t}, t = 1..T
    switch_times: list[int]
    final_index: int
    stabilized_by: int | None  # smallest t with no later switch

    @property
    def switches(self) -> int:
        return len(self.switch_times)


def map_path(cls: WeightedClass, seqs: np.ndarray, tiebreak: TieBreak | None = None) -> np.ndarray:
    """MAP index at every prefix length ``0..n`` for each row of ``seqs``.

    Vectorized for factorizable classes; agrees with :func:`map_estimator`.
    """
    tiebreak = tiebreak or cls.tiebreak
    seqs = np.atleast_2d(np.asarray(seqs, dtype=np.int64))
    S, n = seqs.shape
    if not all(m.factorizable for m in cls.models):
        out = np.empty((S, n + 1), dtype=np.int64)
        for s in range(S):
            x = tuple(int(v) for v in seqs[s])
            out[s] = [map_estimator(cls, x[:t], tiebreak) for t in range(n + 1)]
        return out
    lj = np.empty((S, n + 1, len(cls)))
    for k, model in enumerate(cls.models):
        steps = np.empty((S, n))
        for i in range(n):
            steps[:, i] = np.asarray(model.step_log(i + 1))[seqs[:, i]]
        lj[:, 0, k] = 0.0
        with np.errstate(invalid="ignore"):
            lj[:, 1:, k] = np.cumsum(steps, axis=1)
    lj += cls._log_w
    out = np.argmax(lj, axis=2)
    best = lj.max(axis=2, keepdims=True)
    tied = (lj >= best - TIE_RTOL) | np.isneginf(best)
    multi = np.argwhere(tied.sum(axis=2) > 1)
    for s, t in multi:
        out[s, t] = tiebreak.choose(list(np.flatnonzero(tied[s, t])), cls.weights, int(t))
    return out


def _report(indices: Sequence[int]) -> StabilizationReport:
    idx = [int(i) for i in indices]
    switches = [t for t in range(2, len(idx) + 1) if idx[t - 1] != idx[t - 2]]
    return StabilizationReport(idx, switches, idx[-1], switches[-1] if switches else 1)


def stabilization_report(cls: WeightedClass, source, T: int, tiebreak: TieBreak | None = None) -> StabilizationReport:
    """MAP switch times along prefixes ``x_{<t}``, ``t = 1..T``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    x = as_string(source, cls.alphabet_size)[: T - 1]
    if len(x) < T - 1:
        raise ValueError(f"source has {len(x)} symbols, need {T - 1}")
    path = map_path(cls, np.array([x], dtype=np.int64).reshape(1, T - 1), tiebreak)[0]
    return _report(path)


def stabilization_fraction(
    cls: WeightedClass,
    T: int,
    cutoff: int,
    samples: int = 1000,
    seed: int = 0,
    tiebreak: TieBreak | None = None,
) -> tuple[float, np.ndarray]:
    """Fraction of mu-sampled sequences with no MAP switch at any ``t > cutoff``.

    Also returns the per-``t`` fraction of sequences switching at ``t``.
    """
    seqs = sample_sequences(cls.true_model, T - 1, samples, seed)
    path = map_path(cls, seqs, tiebreak)
    switched = np.zeros((samples, T), dtype=bool)
    switched[:, 1:] = path[:, 1:] != path[:, :-1]
    late = switched[:, cutoff:].any(axis=1)
    return float(1.0 - late.mean()), switched.mean(axis=0)


# --------------------------------------------------------------------------
# invariant suites


def all_strings(m: int, max_len: int):
    for k in range(max_len + 1):
        yield from product(range(m), repeat=k)


def telescoping(cls: WeightedClass, n: int) -> tuple[float, float]:
    """Both sides of ``sum_{t<=n} sum_{l(x)=t-1} [sum_a rho(xa) - rho(x)] = sum_{l(x)=n} rho(x) - rho(eps)``."""
    m = cls.alphabet_size
    lhs = math.fsum(
        math.fsum(two_part_value(cls, x + (a,)) for a in range(m)) - two_part_value(cls, x)
        for x in all_strings(m, n - 1)
    )
    rhs = math.fsum(two_part_value(cls, x) for x in product(range(m), repeat=n)) - two_part_value(cls, ())
    return lhs, rhs


def check_class(cls: WeightedClass, depth: int, tol: float = 1e-12) -> Counter:
    """Count violations of the semimeasure, ordering, range and two-part deficiency invariants.

    Every string of length ``< depth`` is a node; children reach ``depth``.
    """
    m = cls.alphabet_size
    v: Counter = Counter()

    def xi_minus_rho(y):
        return mixture(cls, y) - two_part_value(cls, y)

    if xi_minus_rho(()) > 1 + tol:
        v["xi-minus-rho-root"] += 1
    for model in cls.models:
        if model.is_measure and abs(model.prob(()) - 1) > tol:
            v["measure-root"] += 1
    for x in all_strings(m, depth - 1):
        for model in cls.models:
            d = deficiency(model, x)
            if d < -tol or (model.is_measure and abs(d) > tol):
                v["deficiency"] += 1
            if any(model.prob(x + (a,)) > model.prob(x) + tol for a in range(m)):
                v["monotone"] += 1
        d_xi = deficiency(lambda y: mixture(cls, y), x, m)
        if deficiency(lambda y: two_part_value(cls, y), x, m) > d_xi + tol:
            v["lemma1-i"] += 1
        rho_x = two_part_value(cls, x, basis=x)
        if rho_x - math.fsum(two_part_value(cls, x + (a,), basis=x) for a in range(m)) > d_xi + tol:
            v["lemma1-ii"] += 1
        if deficiency(xi_minus_rho, x, m) < -tol:
            v["xi-minus-rho"] += 1
        if two_part_value(cls, x) > 0:
            for mode in ("dynamic", "static"):
                vals = predict(cls, x, mode).values
                if any(not -tol <= p <= 1 + tol for p in vals):
                    v[f"{mode}-range"] += 1
    for x in all_strings(m, depth):
        xi_x, rho_x = mixture(cls, x), two_part_value(cls, x)
        if rho_x > xi_x + tol:
            v["ordering"] += 1
        for k in range(len(x) + 1):
            if two_part_value(cls, x, basis=x[:k]) > rho_x + tol:
                v["ordering"] += 1
    return v


def lemma2_violations(rng: np.random.Generator, pairs: int = 1000, denom: int = 50, tol: float = 1e-12) -> int:
    """Count random strictly positive rational pairs with ``sum (p-q)^2 > D(p||q)``."""
    bad = 0
    for _ in range(pairs):
        m = int(rng.integers(2, 6))
        p = rng.integers(1, denom, size=m)
        q = rng.integers(1, denom, size=m)
        p = [Fraction(int(k), int(p.sum())) for k in p]
        q = [Fraction(int(k), int(q.sum())) for k in q]
        quad = float(sum((a - b) ** 2 for a, b in zip(p, q)))
        if quad > kl_divergence(p, q) + tol:
            bad += 1
    return bad
