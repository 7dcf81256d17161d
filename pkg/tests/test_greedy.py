import math

import pytest
from hypothesis import given, strategies as st

from itinopt.catalog import GeneratorSpec, generate_catalog
from itinopt.domain import Itinerary, Preferences, evaluate, is_feasible
from itinopt.exceptions import InvalidStart
from itinopt.greedy import (
    AnnealConfig,
    GreedyResult,
    GreedySustainOptimizer,
    OpCounter,
    anneal_refine,
    greedy_optimize,
)
from itinopt.oracle import min_emissions

from conftest import make_catalog


def test_single_step_picks_lowest_emission():
    cat = make_catalog([(100, 1, 50), (80, 1, 70)])
    res = greedy_optimize(cat, Preferences(budget=500, max_time=10))
    assert res.itinerary == Itinerary((0,))
    assert tuple(res.totals) == (100, 1, 50)


def test_skips_option_over_budget():
    cat = make_catalog([(100, 1, 50), (80, 1, 70)])
    res = greedy_optimize(cat, Preferences(budget=90, max_time=10))
    assert res.itinerary == Itinerary((1,))


def test_ties_broken_by_cost_then_id():
    cat = make_catalog([(90, 1, 50), (80, 1, 50), (80, 1, 50)])
    assert greedy_optimize(cat, Preferences(500, 10)).itinerary == Itinerary((1,))


def test_stuck_returns_partial():
    cat = make_catalog([(100, 1, 1)], [(500, 1, 1)])
    res = greedy_optimize(cat, Preferences(budget=300, max_time=10))
    assert not res.completed and res.stuck_segment == 1
    assert res.itinerary == Itinerary((0,))


@pytest.mark.parametrize("seed", range(10))
def test_generous_bounds_match_enumerated_minimum(seed, loose_prefs):
    cat = generate_catalog(GeneratorSpec(seed=seed))
    res = greedy_optimize(cat, loose_prefs)
    _, best = min_emissions(cat, loose_prefs)
    assert res.totals.emissions == pytest.approx(best)


@given(st.integers(0, 200), st.floats(100, 2000), st.floats(4, 48))
def test_completed_runs_respect_bounds(seed, budget, max_time):
    cat = generate_catalog(GeneratorSpec(seed=seed))
    prefs = Preferences(budget=budget, max_time=max_time)
    res = greedy_optimize(cat, prefs)
    if res.completed:
        assert is_feasible(res.itinerary, cat, prefs).feasible
        assert tuple(res.totals) == pytest.approx(tuple(evaluate(res.itinerary, cat)))


def test_one_sort_and_linear_scan_per_segment(catalog42, loose_prefs):
    counter = OpCounter()
    greedy_optimize(catalog42, loose_prefs, counter)
    n, segs = 6, catalog42.n_segments
    assert counter.sorts == segs
    assert counter.scanned <= n * segs
    assert counter.comparisons <= segs * n * math.ceil(math.log2(n))


def test_comparisons_scale_n_log_n():
    counts = {}
    for n in (8, 64, 512):
        cat = generate_catalog(GeneratorSpec(seed=1, num_segments=1, options_per_segment=n))
        c = OpCounter()
        greedy_optimize(cat, Preferences(1e9, 1e9), c)
        counts[n] = c.comparisons
        assert c.sorts == 1 and c.scanned == 1
        assert c.comparisons <= n * math.ceil(math.log2(n))


def test_anneal_rejects_incomplete_start(catalog42):
    stuck = GreedyResult(Itinerary((0,)), (0.0, 0.0, 0.0), completed=False, stuck_segment=1)
    with pytest.raises(InvalidStart):
        anneal_refine(stuck, catalog42, Preferences(1, 1))


def test_anneal_single_infeasible_step_keeps_start():
    cat = make_catalog([(10, 1, 50), (1000, 1, 1)])
    prefs = Preferences(budget=100, max_time=10)
    start = greedy_optimize(cat, prefs)
    assert anneal_refine(start, cat, prefs, AnnealConfig(iterations=1)) == start


def test_anneal_keeps_global_minimum(catalog42, loose_prefs):
    start = greedy_optimize(catalog42, loose_prefs)
    out = anneal_refine(start, catalog42, loose_prefs, AnnealConfig(iterations=2000, seed=4))
    assert out.itinerary == start.itinerary


def test_anneal_never_worse_and_feasible():
    completed = 0
    for seed in range(15):
        cat = generate_catalog(GeneratorSpec(seed=seed))
        unconstrained, _ = min_emissions(cat)
        prefs = Preferences(budget=0.9 * evaluate(unconstrained, cat).cost, max_time=1000)
        start = greedy_optimize(cat, prefs)
        if not start.completed:
            continue
        completed += 1
        out = anneal_refine(start, cat, prefs, AnnealConfig(iterations=500, seed=seed))
        assert out.totals.emissions <= start.totals.emissions
        assert is_feasible(out.itinerary, cat, prefs).feasible
    assert completed >= 8


def test_anneal_reaches_constrained_optimum_on_default_catalog():
    cat = generate_catalog(GeneratorSpec(seed=0))
    unconstrained, _ = min_emissions(cat)
    prefs = Preferences(budget=0.9 * evaluate(unconstrained, cat).cost, max_time=1000)
    start = greedy_optimize(cat, prefs)
    _, best = min_emissions(cat, prefs)
    out = anneal_refine(start, cat, prefs, AnnealConfig(iterations=5000))
    assert out.totals.emissions == pytest.approx(best)
    assert out.totals.emissions <= start.totals.emissions


def test_estimator_wrapper(catalog42, loose_prefs):
    est = GreedySustainOptimizer(anneal=True, iterations=200).fit(catalog42, loose_prefs)
    assert est.itinerary_ == greedy_optimize(catalog42, loose_prefs).itinerary
    assert est.get_params()["iterations"] == 200
