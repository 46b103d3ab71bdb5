"""Lattice, pushforward, kernel and overlap operations on discrete measures."""

import math

import pytest

from src.config.exception_handler import DomainError
from src.entities.measure.algebra import (
    add,
    compose,
    marginal,
    meet,
    meet_mass_from_density,
    overlap_lower_bound,
    overlap_lower_bound_inverse,
    product,
    pushforward,
    restrict,
    subtract,
    total_variation,
)
from src.entities.measure.models import DiscreteKernel, DiscreteMeasure
from tests.helpers import random_measure

TOL = 1e-12
RANDOM_PAIRS = 10_000
POINTS = list("abcdef")


class TestDiscreteMeasure:
    def test_zero_weights_are_dropped(self):
        mu = DiscreteMeasure({"a": 0.5, "b": 0.0})
        assert mu.support == ["a"]
        assert mu["b"] == 0.0

    def test_negative_weight_rejected(self):
        with pytest.raises(DomainError, match="negative weight"):
            DiscreteMeasure({"a": -0.1})

    def test_from_pairs_merges_duplicates(self):
        mu = DiscreteMeasure.from_pairs([("a", 0.25), ("a", 0.25), ("b", 0.5)])
        assert mu["a"] == pytest.approx(0.5)
        assert mu.is_probability()

    def test_json_keeps_tuple_points(self, measure_cases):
        mu = measure_cases["pairs"]["mu"]
        assert mu[("b", 2)] == pytest.approx(0.75)
        assert DiscreteMeasure.from_json(mu.to_json()).isclose(mu)

    def test_kernel_rows_must_be_probabilities(self):
        with pytest.raises(DomainError, match="not a probability"):
            DiscreteKernel({"s": DiscreteMeasure({"s": 0.4})})


class TestLattice:
    def test_meet_example(self, measure_cases):
        case = measure_cases["lattice"]
        assert meet(case["mu"], case["nu"]).isclose(case["meet"])

    def test_subtract_example(self, measure_cases):
        case = measure_cases["lattice"]
        result = subtract(case["mu"], case["nu"])
        assert result.isclose(case["subtract"])
        assert result.support == ["a"]

    def test_meet_with_itself(self, measure_cases):
        mu = measure_cases["lattice"]["mu"]
        assert meet(mu, mu).isclose(mu)

    def test_disjoint_meet_is_empty(self):
        assert meet(DiscreteMeasure.dirac("a"), DiscreteMeasure.dirac("b")).mass() == 0.0

    def test_subtract_identities(self, measure_cases):
        mu = measure_cases["lattice"]["mu"]
        assert len(subtract(mu, mu)) == 0
        assert subtract(mu, DiscreteMeasure()).isclose(mu)

    def test_decomposition_on_random_pairs(self, rng):
        for _ in range(RANDOM_PAIRS):
            mu = random_measure(rng, POINTS)
            nu = random_measure(rng, POINTS)
            assert add(meet(mu, nu), subtract(mu, nu)).isclose(mu, tol=TOL)

    def test_total_variation_and_meet(self, rng):
        # ||mu - nu|| = 2 (1 - ||mu ^ nu||) for probability measures.
        for _ in range(200):
            mu = random_measure(rng, POINTS)
            nu = random_measure(rng, POINTS)
            assert total_variation(mu, nu) == pytest.approx(2.0 * (1.0 - meet(mu, nu).mass()), abs=1e-12)

    def test_restrict(self, measure_cases):
        mu = measure_cases["lattice"]["nu"]
        assert restrict(mu, {"b"}).isclose(DiscreteMeasure({"b": 0.7}))


class TestPushforward:
    def test_identity(self, measure_cases):
        mu = measure_cases["lattice"]["mu"]
        assert pushforward(lambda p: p, mu).isclose(mu)

    def test_constant_map(self, measure_cases):
        mu = measure_cases["lattice"]["nu"]
        assert pushforward(lambda p: "c", mu).isclose(DiscreteMeasure({"c": mu.mass()}))

    def test_collision_sums_weights(self, measure_cases):
        case = measure_cases["collision"]
        assert pushforward({"a": "c", "b": "c"}, case["mu"]).isclose(case["image"])

    def test_partial_map(self, measure_cases):
        with pytest.raises(DomainError, match="partial map"):
            pushforward({"a": "c"}, measure_cases["collision"]["mu"])

    def test_inequalities_on_random_pairs(self, rng):
        images = ["u", "v", "w"]
        for _ in range(RANDOM_PAIRS):
            f = {p: images[i] for p, i in zip(POINTS, rng.integers(len(images), size=len(POINTS)))}
            mu = random_measure(rng, POINTS)
            nu = random_measure(rng, POINTS)
            pushed_meet = pushforward(f, meet(mu, nu))
            pushed_diff = pushforward(f, subtract(mu, nu))
            assert pushed_meet.dominated_by(meet(pushforward(f, mu), pushforward(f, nu)), tol=TOL)
            assert subtract(pushforward(f, mu), pushforward(f, nu)).dominated_by(pushed_diff, tol=TOL)

    def test_injective_map_gives_equality(self, rng):
        f = {p: p.upper() for p in POINTS}
        for _ in range(500):
            mu = random_measure(rng, POINTS)
            nu = random_measure(rng, POINTS)
            assert pushforward(f, meet(mu, nu)).isclose(meet(pushforward(f, mu), pushforward(f, nu)), tol=TOL)
            assert pushforward(f, subtract(mu, nu)).isclose(
                subtract(pushforward(f, mu), pushforward(f, nu)), tol=TOL
            )


class TestKernels:
    def test_deterministic_composition(self):
        q = DiscreteKernel.deterministic({"s": "t"})
        r = DiscreteKernel.deterministic({"t": "u"})
        assert compose(r, q, "s").isclose(DiscreteMeasure.dirac(("t", "u")))

    def test_two_state_product_weights(self):
        half = DiscreteMeasure.uniform(["s", "t"])
        q = DiscreteKernel({"s": half, "t": half})
        r = DiscreteKernel({"s": half, "t": half})
        joint = compose(r, q, "s")
        assert len(joint) == 4
        for path in [(z, w) for z in "st" for w in "st"]:
            assert joint[path] == pytest.approx(0.25)

    def test_dirac_row_lifts_r(self):
        r = DiscreteKernel({"z": DiscreteMeasure({"a": 0.3, "b": 0.7})})
        q = DiscreteKernel.deterministic({"y": "z"})
        assert compose(r, q, "y").isclose(DiscreteMeasure({("z", "a"): 0.3, ("z", "b"): 0.7}))

    def test_domain_mismatch(self):
        q = DiscreteKernel.deterministic({"s": "t"})
        r = DiscreteKernel.deterministic({"s": "s"})
        with pytest.raises(DomainError, match="kernel domain mismatch"):
            compose(r, q, "s")

    def test_marginals_of_product(self, measure_cases):
        mu = measure_cases["lattice"]["mu"]
        nu = measure_cases["lattice"]["nu"]
        joint = product(mu, nu)
        assert marginal(joint, 0).isclose(mu)
        assert marginal(joint, 1).isclose(nu)


class TestOverlapBounds:
    def test_equal_measures(self, measure_cases):
        mu = measure_cases["lattice"]["mu"]
        lhs, rhs = overlap_lower_bound(mu, mu, mu.support)
        assert (lhs, rhs) == pytest.approx((1.0, 1.0))

    def test_uniform_against_skewed(self, measure_cases):
        case = measure_cases["overlap"]
        lhs, rhs = overlap_lower_bound(case["mu1"], case["mu2"], ["a", "b"])
        assert lhs == pytest.approx(case["lhs"])
        assert rhs == pytest.approx(case["rhs"])

    def test_empty_set(self, measure_cases):
        case = measure_cases["overlap"]
        lhs, rhs = overlap_lower_bound(case["mu1"], case["mu2"], [])
        assert lhs == 0.0
        assert rhs <= 0.0

    def test_not_absolutely_continuous(self):
        with pytest.raises(DomainError, match="not absolutely continuous"):
            overlap_lower_bound(DiscreteMeasure.dirac("a"), DiscreteMeasure.uniform("ab"), ["a", "b"])

    def test_both_bounds_on_random_pairs(self, rng):
        for _ in range(RANDOM_PAIRS):
            mu1 = random_measure(rng, POINTS)
            mu2 = random_measure(rng, POINTS)
            a = [p for p in POINTS if mu1[p] > 0 and rng.random() < 0.8]
            lhs, rhs = overlap_lower_bound(mu1, mu2, a)
            assert lhs >= rhs - TOL
            lhs_inv, rhs_inv = overlap_lower_bound_inverse(mu1, mu2, a)
            assert lhs_inv == pytest.approx(lhs)
            assert lhs_inv >= rhs_inv - TOL

    def test_inverse_bound_vanishes_with_zero_density(self):
        lhs, rhs = overlap_lower_bound_inverse(DiscreteMeasure.uniform("ab"), DiscreteMeasure.dirac("a"), ["a", "b"])
        assert lhs == pytest.approx(0.5)
        assert rhs == 0.0

    def test_meet_mass_from_density(self, measure_cases):
        case = measure_cases["overlap"]
        p = case["mu1"]
        density = {x: case["mu2"][x] / p[x] for x in p.support}
        assert meet_mass_from_density(p, density) == pytest.approx(meet(p, case["mu2"]).mass())
        assert math.isclose(meet_mass_from_density(p, {}), 0.0)
