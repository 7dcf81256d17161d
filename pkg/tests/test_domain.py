import itertools

import pytest
from hypothesis import given, strategies as st

from itinopt.catalog import GeneratorSpec, generate_catalog
from itinopt.domain import (
    AttributePreference,
    Catalog,
    Itinerary,
    ObjectiveVector,
    Preferences,
    Segment,
    TravelOption,
    dominates,
    evaluate,
    is_feasible,
)
from itinopt.exceptions import IndexOutOfRange, InvalidSpec, SchemaViolation
from itinopt.oracle import enumerate_itineraries

from conftest import make_catalog

vec = st.tuples(*[st.integers(0, 5).map(float)] * 3)


def test_evaluate_single_and_two_segments():
    assert evaluate(Itinerary((0,)), make_catalog([(100, 2, 50)])) == (100, 2, 50)
    cat = make_catalog([(100, 2, 50)], [(200, 3, 30)])
    assert evaluate(Itinerary((0, 0)), cat) == ObjectiveVector(300, 5, 80)


def test_evaluate_matches_oracle_resummation():
    cat = generate_catalog(GeneratorSpec(seed=5, options_per_segment=3))
    en = enumerate_itineraries(cat)
    assert tuple(en.choices[0]) == (0, 0, 0, 0)
    assert tuple(evaluate(Itinerary((0, 0, 0, 0)), cat)) == pytest.approx(tuple(en.objectives[0]), abs=1e-9)


def test_evaluate_is_additive_over_segments(catalog42):
    it = Itinerary((1, 2, 3, 4))
    parts = [evaluate(Itinerary((c,)), Catalog((Segment(0, seg.label, tuple(
        TravelOption(o.id, 0, o.kind, o.cost, o.duration, o.emissions, o.attributes) for o in seg.options)),)))
             for c, seg in zip(it.choices, catalog42.segments)]
    total = evaluate(it, catalog42)
    for k in range(3):
        assert total[k] == pytest.approx(sum(p[k] for p in parts))


def test_evaluate_rejects_bad_itineraries(catalog42):
    with pytest.raises(IndexOutOfRange):
        evaluate(Itinerary((0, 0)), catalog42)
    with pytest.raises(IndexOutOfRange):
        evaluate(Itinerary((0, 0, 0, 6)), catalog42)


@pytest.mark.parametrize("a,b,expected", [
    ((100, 5, 10), (120, 6, 12), True),
    ((100, 5, 10), (100, 5, 10), False),
    ((100, 7, 10), (120, 6, 12), False),
])
def test_dominates_examples(a, b, expected):
    assert dominates(a, b) is expected


@given(vec, vec)
def test_dominance_irreflexive_antisymmetric(a, b):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))


@given(vec, vec, vec)
def test_dominance_transitive(a, b, c):
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


def test_dominance_transitive_exhaustive_small_grid():
    grid = list(itertools.product([0.0, 1.0], repeat=3))
    for a, b, c in itertools.product(grid, repeat=3):
        if dominates(a, b) and dominates(b, c):
            assert dominates(a, c)


def test_feasible_within_bounds():
    cat = make_catalog([(300, 5, 10)])
    rep = is_feasible(Itinerary((0,)), cat, Preferences(budget=500, max_time=10))
    assert rep.feasible and rep.total_violation == 0.0


def test_budget_violation_normalized():
    cat = make_catalog([(600, 5, 10)])
    rep = is_feasible(Itinerary((0,)), cat, Preferences(budget=500, max_time=10))
    assert not rep.feasible
    assert rep.total_violation == pytest.approx(0.2)


def test_required_attribute_violation_listed():
    cat = make_catalog([(100, 1, 10)], attrs={(0, 0): {"carrier": "SkyJet"}})
    prefs = Preferences(budget=500, max_time=10, required_attributes=[("flight", "carrier", "EcoAir")])
    rep = is_feasible(Itinerary((0,)), cat, prefs)
    assert not rep.feasible
    assert any("flight.carrier=EcoAir" in v for v in rep.violations)


@given(st.floats(1, 1000), st.floats(1, 50), st.integers(0, 5), st.integers(0, 5))
def test_zero_violation_iff_feasible(budget, max_time, c0, c1):
    cat = generate_catalog(GeneratorSpec(seed=1, num_segments=2))
    rep = is_feasible(Itinerary((c0, c1)), cat, Preferences(budget=budget, max_time=max_time))
    assert (rep.total_violation == 0.0) == rep.feasible


def test_preferences_validation_and_weights():
    p = Preferences(budget=10, max_time=5, objective_weights=(2, 1, 1))
    assert p.objective_weights == pytest.approx((0.5, 0.25, 0.25))
    with pytest.raises(SchemaViolation):
        Preferences(budget=0, max_time=5)
    with pytest.raises(SchemaViolation):
        Preferences(budget=10, max_time=5, objective_weights=(0, 0, 0))


def test_option_and_catalog_invariants():
    with pytest.raises((SchemaViolation, InvalidSpec)):
        TravelOption("x", 0, "flight", -1.0, 1.0, 1.0)
    with pytest.raises((SchemaViolation, InvalidSpec)):
        Segment(0, "empty", ())


def test_json_roundtrip(catalog42):
    prefs = Preferences(budget=900, max_time=20, required_attributes=[AttributePreference("flight", "tier", "basic")])
    assert Catalog.from_dict(catalog42.to_dict()) == catalog42
    assert Preferences.from_dict(prefs.to_dict()) == prefs
    assert Itinerary.from_dict(Itinerary((1, 2)).to_dict()) == Itinerary((1, 2))
