import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from discrete_mdl import oracle
from discrete_mdl.experiments import example5_class, exceeds_class, tie_class
from discrete_mdl.measures import IidModel, uniform
from discrete_mdl.predictors import (
    ClassError,
    OffSupportError,
    TieBreak,
    WeightedClass,
    codelength_weight,
    kl_argmax,
    map_estimator,
    mixture,
    normalizer_trace,
    predict,
    random_class,
    two_part_value,
    weight_codelength,
)

ONES = lambda k: (1,) * k  # noqa: E731


class TestWeightedClass:
    def test_weights_must_sum_to_at_most_one(self):
        with pytest.raises(ClassError, match="7/6"):
            WeightedClass((uniform(), uniform()), ("1/2", "2/3"))

    def test_positive_weights(self):
        with pytest.raises(ClassError):
            WeightedClass((uniform(),), ("0",))

    def test_true_model_must_be_measure(self):
        from discrete_mdl.measures import TabularModel

        semi = TabularModel((((), "1"), ((0,), "1/4"), ((1,), "1/4")))
        with pytest.raises(ClassError, match="not a measure"):
            WeightedClass((semi,), ("1",), true_index=0)


class TestMixture:
    def test_section6(self):
        cls = tie_class()
        assert mixture(cls, "1") == pytest.approx(2 / 3, rel=1e-12)
        assert oracle.xi(cls, (1,)) == Fraction(2, 3)

    def test_root(self):
        cls = random_class(np.random.default_rng(1))
        assert mixture(cls, ()) <= 1 + 1e-15

    def test_example5_survivors(self):
        cls = example5_class(8)
        assert mixture(cls, "111") == pytest.approx(5 / 8, rel=1e-12)
        # oracle: count deterministic models consistent with 111
        alive = sum(1 for m in cls.models if m.exact_prob((1, 1, 1)) == 1)
        assert alive == 5

    def test_dominance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            cls = random_class(rng)
            for x in [(), (0,), (1, 1, 0), (0, 1, 0, 1)]:
                xi = mixture(cls, x)
                for w, m in zip(cls.weights, cls.models):
                    assert xi >= float(w) * m.prob(x) * (1 - 1e-12)


class TestMapEstimator:
    def test_section6_tie_prefers_heavier(self):
        cls = tie_class()
        assert map_estimator(cls, "1") == cls.index("lambda")

    def test_singleton(self):
        cls = WeightedClass((IidModel(("1/3", "2/3")),), ("1/2",))
        for x in ["", "0", "0110"]:
            assert map_estimator(cls, x) == 0

    def test_example5_index_tiebreak(self):
        cls = example5_class(8)
        # oracle: enumerate w*nu(11) and take the lowest index of the maximum
        vals = [w * m.exact_prob((1, 1)) for w, m in zip(cls.weights, cls.models)]
        expected = vals.index(max(vals))
        got = map_estimator(cls, "11", TieBreak("index"))
        assert got == expected == cls.index("nu3")

    def test_all_zero_uses_full_class(self):
        cls = example5_class(4)
        # no model gives positive probability to 0 1
        assert map_estimator(cls, (0, 1), TieBreak("index")) == 0

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            cls = random_class(rng)
            scaled = WeightedClass(cls.models, tuple(w / 3 for w in cls.weights), true_index=0)
            for x in [(), (0,), (1, 0), (1, 1, 1, 0)]:
                assert map_estimator(cls, x) == map_estimator(scaled, x)

    def test_kl_form_agrees(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            m = int(rng.integers(2, 4))
            size = int(rng.integers(2, 6))
            models = []
            for _ in range(size):
                k = rng.integers(0, 8, size=m)
                k[rng.integers(m)] += 1
                models.append(IidModel(tuple(Fraction(int(v), int(k.sum())) for v in k)))
            ws = rng.integers(1, 20, size=size)
            cls = WeightedClass(tuple(models), tuple(Fraction(int(v), int(ws.sum())) for v in ws))
            for _ in range(5):
                x = tuple(int(v) for v in rng.integers(0, m, size=int(rng.integers(0, 12))))
                assert kl_argmax(cls, x) == map_estimator(cls, x)

    @given(st.lists(st.integers(0, 1), max_size=12), st.sampled_from(["weight-then-index", "index", "alternating"]))
    @settings(max_examples=60, deadline=None)
    def test_deterministic(self, x, strategy):
        cls = tie_class()
        tb = TieBreak(strategy)
        assert map_estimator(cls, x, tb) == map_estimator(cls, list(x), tb)


class TestTwoPart:
    def test_example5(self):
        cls = example5_class(8)
        assert two_part_value(cls, "1111") == pytest.approx(1 / 8, rel=1e-12)
        assert oracle.rho(cls, (1, 1, 1, 1)) == Fraction(1, 8)

    def test_basis_equal_to_argument(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            cls = random_class(rng)
            for x in [(), (1,), (0, 1, 1)]:
                assert two_part_value(cls, x, basis=x) == two_part_value(cls, x)

    def test_section6_basis(self):
        cls = tie_class()
        assert two_part_value(cls, "11", basis="1") == pytest.approx(1 / 6, rel=1e-12)
        w = cls.weights[cls.index("lambda")]
        assert w * cls.models[cls.index("lambda")].exact_prob((1, 1)) == Fraction(1, 6)


class TestPredict:
    def test_example5_dynamic(self):
        cls = example5_class(8)
        for t in range(1, 8):
            p = predict(cls, ONES(t - 1), "dynamic")
            assert p.values == pytest.approx((1.0, 1.0), rel=1e-12)
            assert p.normalized == pytest.approx((0.5, 0.5), rel=1e-12)

    def test_hybrid_oscillation(self):
        cls = tie_class("alternating")
        got = [predict(cls, ONES(t - 1), "hybrid").values[1] for t in range(2, 11)]
        exact = [oracle.prediction(cls, ONES(t - 1), "hybrid")[1] for t in range(2, 11)]
        assert exact == [Fraction(1, 4), Fraction(1)] * 4 + [Fraction(1, 4)]
        assert got == pytest.approx([float(v) for v in exact], abs=1e-12)

    def test_static_dynamic_constant_under_alternating(self):
        cls = tie_class("alternating")
        for t in range(2, 11):
            for mode in ("static", "dynamic"):
                assert predict(cls, ONES(t - 1), mode).normalized == pytest.approx((0.5, 0.5), abs=1e-12)

    def test_hybrid_exceeds_one(self):
        cls = exceeds_class()
        # oracle: brute-force MAP at both nodes
        a, b = cls.models
        assert cls.weights[0] * a.exact_prob((0,)) > cls.weights[1] * b.exact_prob((0,))
        assert cls.weights[1] * b.exact_prob((0, 0)) > cls.weights[0] * a.exact_prob((0, 0))
        expected = b.exact_prob((0, 0)) / a.exact_prob((0,))
        assert expected == Fraction(162, 100)
        assert predict(cls, "0", "hybrid").values[0] == pytest.approx(1.62, abs=1e-12)

    def test_off_support(self):
        cls = example5_class(4)
        with pytest.raises(OffSupportError, match="dynamic"):
            predict(cls, (0, 1), "dynamic")

    def test_mixture_singleton_matches_model(self):
        mu = IidModel(("1/3", "2/3"))
        cls = WeightedClass((mu,), ("1/2",), true_index=0)
        assert predict(cls, "0110", "mixture").values == pytest.approx((1 / 3, 2 / 3), rel=1e-12)

    @pytest.mark.parametrize("mode", ["mixture", "dynamic", "static", "hybrid"])
    def test_float_path_matches_rational_oracle(self, mode):
        rng = np.random.default_rng(13)
        for _ in range(25):
            cls = random_class(rng)
            for x in [(), (0,), (1,), (0, 1), (1, 1, 0), (0, 0, 1, 1)]:
                try:
                    exact = oracle.prediction(cls, x, mode)
                except OffSupportError:
                    with pytest.raises(OffSupportError):
                        predict(cls, x, mode)
                    continue
                got = predict(cls, x, mode).values
                assert got == pytest.approx([float(v) for v in exact], rel=1e-9, abs=1e-300)


class TestNormalizer:
    def test_measure(self):
        mu = IidModel(("1/3", "2/3"))
        factors, prod = normalizer_trace(mu.prob, (0, 1, 1, 0), 2)
        assert factors == pytest.approx([1.0] * 5, abs=1e-12)
        assert prod == pytest.approx(1.0, abs=1e-12)

    def test_example5(self):
        cls = example5_class(8)
        factors, prod = normalizer_trace(lambda y: two_part_value(cls, y), ONES(10), 2)
        # oracle: exact rho at every prefix and both children
        exact = [
            (oracle.rho(cls, ONES(t) + (0,)) + oracle.rho(cls, ONES(t) + (1,))) / oracle.rho(cls, ONES(t))
            for t in range(11)
        ]
        assert exact == [2] * 7 + [1] * 4
        assert factors == pytest.approx([float(e) for e in exact], rel=1e-12)
        assert prod == pytest.approx(128.0, rel=1e-12)

    def test_singleton(self):
        cls = WeightedClass((IidModel(("1/4", "3/4")),), ("1/5",))
        factors, _ = normalizer_trace(lambda y: two_part_value(cls, y), (1, 0, 1), 2)
        assert factors == pytest.approx([1.0] * 4, abs=1e-12)

    def test_zero_prefix(self):
        with pytest.raises(OffSupportError):
            normalizer_trace(lambda y: 0.0, (1,), 2)


class TestKraft:
    @pytest.mark.parametrize("w, bits", [("1/8", 3), ("1/3", 2), ("1", 0), ("3/4", 1), ("1/1024", 10), ("1/1025", 11)])
    def test_examples(self, w, bits):
        assert weight_codelength(w) == bits

    def test_one_third_against_log(self):
        assert weight_codelength("1/3") == math.ceil(-math.log2(1 / 3))

    @pytest.mark.parametrize("w", ["0", "-1/2", "3/2"])
    def test_invalid(self, w):
        with pytest.raises(ValueError):
            weight_codelength(w)

    def test_inverse_is_dyadic(self):
        assert codelength_weight(3) == Fraction(1, 8)

    @given(st.fractions(min_value=Fraction(1, 10**6), max_value=1).filter(lambda f: f > 0))
    def test_code_is_shortest_valid(self, w):
        k = weight_codelength(w)
        assert codelength_weight(k) <= w
        assert k == 0 or codelength_weight(k - 1) > w

    @given(st.lists(st.integers(1, 50), min_size=1, max_size=8))
    def test_kraft_sum(self, ks):
        total = sum(ks)
        ws = [Fraction(k, total) for k in ks]
        assert sum(codelength_weight(weight_codelength(w)) for w in ws) <= 1
