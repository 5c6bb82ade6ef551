"""Registry of reproducible experiments and their CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .config import parse_class_config
from .evaluation import (
    ErrorSeries,
    check_class,
    error_series,
    lemma2_violations,
    normalizer_convergence,
    stabilization_fraction,
    stabilization_report,
    telescoping,
)
from .measures import FactorizableModel
from .predictors import TieBreak, WeightedClass, predict, random_class

HEADER = ("experiment", "t", "metric", "per_step", "cumulative", "bound", "engine", "seed")
SWITCH_HEADER = ("t", "switched", "map_index")

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_BOUND = 0, 1, 2, 3

# --------------------------------------------------------------------------
# canonical classes

TIE_CONFIG = """\
[class]
true = lambda

[model lambda]
kind = iid
theta = 1/2 1/2
weight = 2/3

[model nu]
kind = factorizable
table = 0 1
tail = 1/2 1/2
weight = 1/3
"""

EXCEEDS_CONFIG = """\
[class]
true = A

[model A]
kind = iid
theta = 1/2 1/2
weight = 7/10

[model B]
kind = iid
theta = 9/10 1/10
weight = 3/10
"""

BERNOULLI_CONFIG = """\
[class]
true = bern1/2

[family grid]
family = bernoulli
thetas = 0 1/4 1/2 3/4 1
"""


def example5_class(n: int = 8, tiebreak: str = "weight-then-index") -> WeightedClass:
    """Deterministic ``1^(i-1) 0^inf`` for ``i < n`` plus ``mu = 1^inf``, weights ``1/n``."""
    return parse_class_config(f"[class]\ntie-break = {tiebreak}\n\n[family lower]\nfamily = example-lowerbound\nn = {n}\n")


def bernoulli_class() -> WeightedClass:
    return parse_class_config(BERNOULLI_CONFIG)


def tie_class(tiebreak: str = "weight-then-index") -> WeightedClass:
    return parse_class_config(TIE_CONFIG.replace("true = lambda", f"true = lambda\ntie-break = {tiebreak}"))


def exceeds_class() -> WeightedClass:
    return parse_class_config(EXCEEDS_CONFIG)


def example6_weights(horizon: int = 200, max_denominator: int = 10**15) -> tuple[Fraction, Fraction]:
    """Weights ``(w_mu, w_nu)`` whose ratio sits at the limit of ``nu(1^t)/mu(1^t)``.

    The ratio converges while alternating around its limit, so with
    ``w_mu/w_nu`` equal to the (rationalized) limit the maximizing element
    keeps switching along ``1^inf``.
    """
    mu = FactorizableModel(generator="oscillating-mu")
    nu = FactorizableModel(generator="oscillating-nu")
    ratio = Fraction(1)
    for i in range(1, horizon + 1):
        ratio *= nu.step_distribution(i)[1] / mu.step_distribution(i)[1]
    q = ratio.limit_denominator(max_denominator)
    return q / (1 + q), 1 / (1 + q)


def example6_class() -> WeightedClass:
    w_mu, w_nu = example6_weights()
    text = f"""\
[class]
true = mu

[model mu]
kind = factorizable
generator = oscillating-mu
weight = {w_mu}

[model nu]
kind = factorizable
generator = oscillating-nu
weight = {w_nu}
"""
    return parse_class_config(text)


# --------------------------------------------------------------------------
# specs and results


@dataclass
class ExperimentSpec:
    experiment: str
    n: int | None = None
    samples: int | None = None
    seed: int | None = None
    params: dict = field(default_factory=dict)
    out: str | None = None


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[tuple]
    header: tuple = HEADER
    status: int = EXIT_OK
    notes: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def series_rows(label: str, series: ErrorSeries) -> list[tuple]:
    rows = []
    for t, (v, c) in enumerate(zip(series.per_step, series.cumulative), start=1):
        rows.append(
            (label, t, series.metric, fmt(v), fmt(c), fmt(series.bound), series.engine, fmt(series.seed))
        )
    return rows


def _series_result(exp_id: str, runs: list[tuple[str, ErrorSeries]]) -> ExperimentResult:
    rows, status, notes = [], EXIT_OK, []
    for label, s in runs:
        rows += series_rows(f"{exp_id}/{label}" if label else exp_id, s)
        ok = s.within_bound()
        if ok is False:
            status = EXIT_BOUND
        if s.bound is not None:
            notes.append(f"{label or exp_id}: {s.theorem} cumulative {s.total:.6g} <= {s.bound:.6g}: {ok}")
    return ExperimentResult(exp_id, rows, status=status, notes=notes)


def _bound_series(exp_id, spec, mode, normalized, metric, default_n, classes=("example5", "bernoulli"), theorem=None):
    n_by = {"example5": default_n, "bernoulli": 12}
    runs = []
    for name in classes:
        cls = example5_class(int(spec.params.get("N", 8))) if name == "example5" else bernoulli_class()
        n = spec.n or n_by[name]
        runs.append((name, error_series(cls, mode, metric, n, normalized=normalized, theorem=theorem)))
    return _series_result(exp_id, runs)


def _cor6(spec: ExperimentSpec) -> ExperimentResult:
    cls, n = bernoulli_class(), spec.n or 12
    rows = [
        ("dyn-norm", "dynamic", True, "cor6-dyn-norm"),
        ("dyn", "dynamic", False, "cor6-dyn"),
        ("static", "static", False, "cor6-static"),
        ("static-norm", "static", True, "cor6-static-norm"),
    ]
    runs = [(label, error_series(cls, mode, "squared", n, normalized=nz, theorem=thm)) for label, mode, nz, thm in rows]
    return _series_result("cor6-all", runs)


def _example_lowerbound(spec: ExperimentSpec) -> ExperimentResult:
    big_n = int(spec.params.get("N", 8))
    s = error_series(example5_class(big_n), "dynamic", "squared", spec.n or big_n - 1, normalized=True)
    return _series_result("example-lowerbound", [("", s)])


def _observed_hybrid(exp_id: str, cls: WeightedClass, seq: tuple) -> ExperimentResult:
    rows, running = [], []
    for t in range(1, len(seq) + 1):
        v = predict(cls, seq[: t - 1], "hybrid").values[seq[t - 1]]
        running.append(v)
        rows.append((exp_id, t, "raw-hybrid-at-observed-symbol", fmt(v), fmt(math.fsum(running)), "", "exact-tree", ""))
    return ExperimentResult(exp_id, rows)


def _hybrid_tie(spec: ExperimentSpec) -> ExperimentResult:
    return _observed_hybrid("hybrid-tie-oscillation", tie_class("alternating"), (1,) * (spec.n or 10))


def _hybrid_exceeds(spec: ExperimentSpec) -> ExperimentResult:
    return _observed_hybrid("hybrid-exceeds-one", exceeds_class(), (0,) * (spec.n or 2))


def _switch_result(exp_id: str, report) -> ExperimentResult:
    switches = set(report.switch_times)
    rows = [(t, int(t in switches), idx) for t, idx in enumerate(report.map_indices, start=1)]
    notes = [f"{report.switches} switches; stabilized by t={report.stabilized_by}"]
    return ExperimentResult(exp_id, rows, header=SWITCH_HEADER, notes=notes)


def _stabilize_example6(spec: ExperimentSpec) -> ExperimentResult:
    T = spec.n or 60
    return _switch_result("stabilize-example6", stabilization_report(example6_class(), (1,) * T, T))


def _stabilize_iid(spec: ExperimentSpec) -> ExperimentResult:
    T = spec.n or 80
    samples = spec.samples or 1000
    seed = 0 if spec.seed is None else spec.seed
    cutoff = int(spec.params.get("cutoff", T // 2))
    frac, per_t = stabilization_fraction(bernoulli_class(), T, cutoff, samples, seed)
    cum = np.cumsum(per_t)
    rows = [
        ("stabilize-iid", t, "switch-fraction", fmt(v), fmt(c), "", "monte-carlo", fmt(seed))
        for t, (v, c) in enumerate(zip(per_t, cum), start=1)
    ]
    notes = [f"fraction of {samples} sequences without a switch after t={cutoff}: {frac:.4f}"]
    return ExperimentResult("stabilize-iid", rows, notes=notes)


def _normalizer(spec: ExperimentSpec) -> ExperimentResult:
    T = spec.n or 20
    trace = normalizer_convergence(example5_class(int(spec.params.get("N", 8))), (1,) * T, T)
    rows, running = [], []
    for t, f in enumerate(trace.factors, start=1):
        running.append(math.log(f))
        rows.append(
            ("normalizer-example5", t, "log-normalizer-factor", fmt(running[-1]), fmt(math.fsum(running)), "", "exact-tree", "")
        )
    notes = [f"normalizer {trace.value:.17g}; last non-unit factor at t={trace.last_nonunit}"]
    return ExperimentResult("normalizer-example5", rows, notes=notes)


def run_suites(classes: int = 100, depth: int = 8, seed: int = 0) -> dict[str, int]:
    """Violation counts of every invariant suite over random classes."""
    rng = np.random.default_rng(seed)
    totals = {
        "deficiency": 0, "monotone": 0, "lemma1-i": 0, "lemma1-ii": 0, "xi-minus-rho": 0,
        "ordering": 0, "dynamic-range": 0, "static-range": 0, "telescoping": 0,
    }
    for _ in range(classes):
        cls = random_class(rng)
        for k, v in check_class(cls, depth).items():
            totals[k] = totals.get(k, 0) + v
        lhs, rhs = telescoping(cls, depth)
        totals["telescoping"] += int(abs(lhs - rhs) > 1e-10)
    totals["lemma2"] = lemma2_violations(rng, 1000)
    return totals


def _lemma_suites(spec: ExperimentSpec) -> ExperimentResult:
    seed = 0 if spec.seed is None else spec.seed
    totals = run_suites(int(spec.params.get("classes", 100)), spec.n or 8, seed)
    rows, running = [], 0
    for t, (name, v) in enumerate(totals.items(), start=1):
        running += v
        rows.append(("lemma-suites", t, name, fmt(v), fmt(running), "0", "exact-tree", fmt(seed)))
    return ExperimentResult("lemma-suites", rows, status=EXIT_BOUND if running else EXIT_OK)


REGISTRY: dict[str, Callable[[ExperimentSpec], ExperimentResult]] = {
    "thm1-mixture": lambda s: _bound_series("thm1-mixture", s, "mixture", False, "squared", 12),
    "thm3-dyn-norm": lambda s: _bound_series("thm3-dyn-norm", s, "dynamic", True, "squared", 12),
    "thm4i-lognorm": lambda s: _bound_series("thm4i-lognorm", s, "dynamic", False, "abs-log-sum", 20),
    "thm4ii-absnorm": lambda s: _bound_series("thm4ii-absnorm", s, "dynamic", False, "abs-sum", 20),
    "thm5-static": lambda s: _bound_series("thm5-static", s, "static", False, "abs-sum", 12),
    "cor6-all": _cor6,
    "example-lowerbound": _example_lowerbound,
    "hybrid-tie-oscillation": _hybrid_tie,
    "hybrid-exceeds-one": _hybrid_exceeds,
    "stabilize-example6": _stabilize_example6,
    "stabilize-iid": _stabilize_iid,
    "normalizer-example5": _normalizer,
    "lemma-suites": _lemma_suites,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    if spec.experiment not in REGISTRY:
        raise KeyError(f"unknown experiment {spec.experiment!r}; known: {', '.join(REGISTRY)}")
    return REGISTRY[spec.experiment](spec)
