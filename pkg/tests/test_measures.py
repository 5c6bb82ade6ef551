import math
from fractions import Fraction

import numpy as np
import pytest

from discrete_mdl.measures import (
    AlphabetError,
    DeterministicModel,
    FactorizableModel,
    IidModel,
    ModelError,
    TabularModel,
    UnsupportedKindError,
    build_model,
    conditional,
    deficiency,
    is_uniformly_stochastic,
    kl_divergence,
    probability,
    random_model,
    uniform,
)
from discrete_mdl.evaluation import all_strings

LAM = uniform(2)
NU6 = build_model({"kind": "factorizable", "table": [["0", "1"]], "tail": ["1/2", "1/2"]})


def zoo():
    return [
        LAM,
        NU6,
        IidModel(("1/3", "2/3")),
        IidModel(("1/5", "1/2", "3/10")),
        DeterministicModel((1, 1), (0,)),
        DeterministicModel((), (1,)),
        DeterministicModel((0,), (1, 0)),
        FactorizableModel(generator="oscillating-mu"),
        FactorizableModel(generator="oscillating-nu"),
        FactorizableModel(table=(("1/2", "1/4"),), tail=("1/3", "1/3")),
        TabularModel((((), "1"), ((0,), "1/4"), ((1,), "1/4"))),
    ]


class TestBuildModel:
    def test_deterministic_example(self):
        m = build_model({"kind": "deterministic", "prefix": "11", "period": "0"})
        assert probability(m, "110") == 1.0
        assert probability(m, "111") == 0.0

    def test_iid_product(self):
        m = build_model({"kind": "iid", "theta": ["1/3", "2/3"]})
        assert m.exact_prob((0, 1)) == Fraction(2, 9)
        assert probability(m, "01") == pytest.approx(2 / 9, rel=1e-15)

    def test_oscillating_mu_first_step(self):
        m = build_model({"kind": "factorizable", "generator": "oscillating-mu"})
        assert m.step_distribution(1)[1] == Fraction(3, 4)
        assert m.step_distribution(3)[1] == Fraction(15, 16)

    def test_oscillating_nu_steps(self):
        m = build_model({"kind": "factorizable", "generator": "oscillating-nu"})
        assert [m.step_distribution(i)[1] for i in (1, 2, 3, 4)] == [
            Fraction(1, 2), Fraction(7, 8), Fraction(7, 8), Fraction(31, 32)
        ]

    @pytest.mark.parametrize(
        "spec, field",
        [
            ({"kind": "iid", "theta": ["1/2", "2/3"]}, "theta"),
            ({"kind": "iid", "theta": ["3/2", "-1/2"]}, "theta"),
            ({"kind": "deterministic", "prefix": "1", "period": ""}, "period"),
            ({"kind": "factorizable", "table": [["1/2", "2/3"]], "tail": ["1/2", "1/2"]}, "table"),
            ({"kind": "tabular", "values": {"": "1", "0": "2/3", "1": "2/3"}}, "values"),
            ({"kind": "iid", "theta": ["0.5", "0.5"]}, "decimal"),
        ],
    )
    def test_invalid_parameters_name_field(self, spec, field):
        with pytest.raises(ModelError, match=field):
            build_model(spec)

    def test_unknown_kind(self):
        with pytest.raises(ModelError, match="kind"):
            build_model({"kind": "markov"})

    def test_measure_flags(self):
        assert LAM.is_measure and NU6.is_measure
        assert not FactorizableModel(table=(("1/2", "1/4"),), tail=("1/2", "1/2")).is_measure
        assert not TabularModel((((), "1"), ((0,), "1/4"), ((1,), "1/4"))).is_measure


class TestProbability:
    def test_uniform(self):
        assert LAM.exact_prob((0, 1, 0)) == Fraction(1, 8)
        assert probability(LAM, "010") == pytest.approx(1 / 8, rel=1e-12)

    def test_empty_string(self):
        for m in zoo():
            assert probability(m, ()) <= 1.0

    def test_section6_nu_zero(self):
        assert probability(NU6, "0") == 0.0
        assert NU6.exact_prob((1, 0, 1, 1)) == Fraction(1, 8)
        assert probability(NU6, "1011") == pytest.approx(1 / 8, rel=1e-12)

    def test_out_of_alphabet(self):
        with pytest.raises(AlphabetError):
            probability(LAM, (0, 2))

    def test_long_string_no_underflow(self):
        x = (0, 1) * 1000
        assert LAM.log_prob(x) == pytest.approx(-2000 * math.log(2), rel=1e-12)
        assert probability(LAM, x) == 0.0  # float underflow, log value intact


class TestConditional:
    def test_uniform_symmetry(self):
        assert conditional(LAM, 1, "0") == 0.5

    def test_iid_history_free(self):
        m = IidModel(("2/3", "1/3"))
        assert conditional(m, 0, "000") == pytest.approx(2 / 3, rel=1e-14)

    def test_zero_denominator_convention(self):
        ones = DeterministicModel((), (1,))
        assert conditional(ones, 1, "0") == 0.0

    def test_sums(self):
        for m in zoo():
            for x in all_strings(m.alphabet_size, 4):
                total = sum(conditional(m, a, x) for a in range(m.alphabet_size))
                assert total <= 1 + 1e-12
                if m.is_measure and m.prob(x) > 0:
                    assert total == pytest.approx(1.0, abs=1e-12)


class TestDeficiency:
    def test_measures_zero(self):
        for m in (LAM, IidModel(("1/3", "2/3")), DeterministicModel((1,), (0, 1))):
            for x in all_strings(2, 6):
                assert abs(deficiency(m, x)) <= 1e-12

    def test_hand_built_semimeasure(self):
        m = build_model({"kind": "tabular", "values": {"": "1", "0": "1/4", "1": "1/4"}})
        assert deficiency(m, ()) == pytest.approx(0.5, abs=1e-15)

    def test_plain_function_needs_alphabet(self):
        with pytest.raises(TypeError):
            deficiency(lambda x: 1.0, ())
        assert deficiency(lambda x: 2.0 ** -len(x), (), alphabet_size=2) == 0.0


class TestUniformStochasticity:
    def test_deterministic_always(self):
        m = DeterministicModel((1, 1, 1), (0,))
        assert is_uniformly_stochastic(m, 1, 50)

    def test_iid(self):
        assert is_uniformly_stochastic(IidModel(("1/3", "2/3")), "1/3", 20)

    def test_oscillating_mu_witness(self):
        mu = FactorizableModel(generator="oscillating-mu")
        # oracle: scan the closed form mu_i(0) = 2^(-2 ceil(i/2)) directly
        expected = next(i for i in range(1, 21) if 2.0 ** (-2 * math.ceil(i / 2)) < 0.01)
        res = is_uniformly_stochastic(mu, "1/100", 20)
        assert not res
        assert res.witness == (expected, 0)
        assert expected == 7

    def test_non_factorizable_rejected(self):
        m = TabularModel((((), "1"), ((0,), "1/2"), ((1,), "1/2")))
        with pytest.raises(UnsupportedKindError):
            is_uniformly_stochastic(m, "1/2", 3)


class TestKL:
    def test_identity(self):
        for p in ([1, 0], [0.25, 0.75], [0.2, 0.3, 0.5]):
            assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-15)

    def test_point_mass_vs_uniform(self):
        assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), rel=1e-15)
        assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(0.693147, abs=1e-6)

    def test_two_terms(self):
        expected = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, rel=1e-15)
        assert expected == pytest.approx(0.143841, abs=1e-6)

    def test_infinite(self):
        assert kl_divergence([0.5, 0.5], [1, 0]) == math.inf

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([1], [0.5, 0.5])


def _zoo_with_random(seed=3, count=40):
    rng = np.random.default_rng(seed)
    return zoo() + [random_model(rng, 2) for _ in range(count)] + [random_model(rng, 3) for _ in range(10)]


def test_zoo_semimeasure_invariants():
    for m in _zoo_with_random():
        if m.alphabet_size != 2:
            continue
        assert m.prob(()) <= 1
        if m.is_measure:
            assert m.prob(()) == 1.0
        for x in all_strings(2, 11):
            p = m.prob(x)
            assert 0.0 <= p <= 1.0
            d = deficiency(m, x)
            assert d >= -1e-12
            if m.is_measure:
                assert abs(d) <= 1e-12
            for a in range(2):
                assert m.prob(x + (a,)) <= p + 1e-15


def test_log_domain_matches_rational_oracle():
    for m in _zoo_with_random():
        for x in all_strings(m.alphabet_size, 10 if m.alphabet_size == 2 else 5):
            exact = m.exact_prob(x)
            approx = m.prob(x)
            if exact == 0:
                assert approx == 0.0
            else:
                assert abs(approx - float(exact)) <= 1e-9 * float(exact)


def test_models_are_immutable_and_hashable():
    m = IidModel(("1/2", "1/2"))
    with pytest.raises(AttributeError):
        m.theta = (Fraction(1), Fraction(0))
    assert hash(m) == hash(IidModel((Fraction(1, 2), Fraction(1, 2))))
