import csv
import io
import math

import pytest

from itinopt import bench
from itinopt.catalog import GeneratorSpec, generate_catalog
from itinopt.domain import Preferences
from itinopt.exceptions import ServerUnreachable
from itinopt.nsga2 import GaConfig
from itinopt.orchestrator.gateway import Gateway

from conftest import make_catalog

SMALL_GA = GaConfig(population_size=30, max_generations=40)


@pytest.fixture
def gateway(catalog42):
    gw = Gateway({"default": catalog42})
    yield gw
    gw.close()


def test_single_sample_load_report(gateway):
    res = bench.cmd_loadtest([1], 1, bench.default_load_template(0), 0, bench.gateway_sender(gateway))
    (r,) = res.levels
    assert r.p50_ms == r.p90_ms == r.p99_ms
    assert r.availability == r.answered / r.requests == 1.0


def test_load_errors_counted():
    calls = []

    def flaky(body):
        calls.append(body["request_id"])
        if len(calls) % 2:
            raise RuntimeError("bad")
        return {"complete": True}

    res = bench.cmd_loadtest([1, 2], 2, {"catalog_ref": "x"}, 0, flaky)
    for r in res.levels:
        assert r.errors + r.answered == r.requests
        assert r.error_rate == r.errors / r.requests
        assert 0 <= r.availability <= 1


def test_load_payloads_deterministic():
    t = bench.default_load_template(3)
    assert bench._load_payload(t, 3, 1, 2, 0) == bench._load_payload(t, 3, 1, 2, 0)
    assert bench._load_payload(t, 3, 1, 2, 0) != bench._load_payload(t, 3, 1, 2, 1)


def test_unreachable_server():
    with pytest.raises(ServerUnreachable):
        bench.check_reachable("http://127.0.0.1:9", timeout=1)
    with pytest.raises(ServerUnreachable):
        bench.http_sender("http://127.0.0.1:9", timeout=1)({"request_id": "x"})


def test_p50_trend():
    mk = lambda u, p: bench.LoadReport(u, 1, 1, 0, p, p, p, p, 0.0, 1.0)
    assert bench.p50_trend([mk(1, 1.0), mk(10, 2.0), mk(50, 3.0)]) == pytest.approx(1.0)
    assert bench.p50_trend([mk(1, 1.0), mk(10, 1.0)]) == 0.0


def test_accuracy_request_is_satisfiable():
    for i in range(30):
        cat, prefs = bench.accuracy_request(7, i)
        assert 1 <= len(prefs.required_attributes) <= 2
        assert prefs.budget > 0 and prefs.max_time > 0
    # the witness construction guarantees at least one fully matching itinerary
    from itinopt.oracle import enumerate_itineraries
    from itinopt.preferences import matching_rate
    from itinopt.domain import Itinerary

    cat, prefs = bench.accuracy_request(7, 0)
    en = enumerate_itineraries(cat, prefs)
    assert any(matching_rate(Itinerary(tuple(c)), cat, prefs).rate == 1.0 for c in en.choices[en.feasible])


def test_accuracy_bounds_only_requests_score_one():
    def factory(seed, i):
        return generate_catalog(GeneratorSpec(seed=seed + i)), Preferences(budget=1e5, max_time=1e5)

    rep = bench.cmd_accuracy(5, 0, mode="greedy", request_factory=factory)
    assert rep.mean_rate == 1.0 and rep.budget_compliance == 1.0


def test_accuracy_histogram_sums_to_n():
    rep = bench.cmd_accuracy(12, 3, ga_config=SMALL_GA)
    assert sum(rep.histogram) == rep.n_requests == len(rep.rates)
    assert 0 <= rep.min_rate <= rep.mean_rate <= 1


def test_convergence_dominated_by_one():
    cat = make_catalog([(10, 1, 1), (20, 2, 2)], [(5, 5, 5), (6, 6, 6), (7, 7, 7)])
    rep = bench.cmd_convergence([0, 1], GaConfig(population_size=10), catalog=cat)
    for run in rep.runs:
        assert run.converged_generation <= GaConfig().stagnation_window
        assert run.front_size == 1 and run.reached_oracle
        assert run.efficiency.normalized_quality == 1.0


def test_convergence_report_fields():
    rep = bench.cmd_convergence([0, 1, 2])
    doc = rep.to_dict()
    assert doc["evaluations_exact"] and doc["share_reached_oracle"] == 1.0
    for run in rep.runs:
        assert run.history_monotone
        assert 0 < run.efficiency.normalized_quality <= 1
        assert run.efficiency.efficiency == pytest.approx(
            run.efficiency.normalized_quality / run.efficiency.time_taken)
    lines = rep.history_csv().splitlines()
    assert lines[0] == "seed,generation,best_score"
    assert len(lines) == 1 + sum(len(r.history) for r in rep.runs)


def test_improvement_rate():
    assert bench.improvement_rate([1.0, 0.5, 0.25]) == pytest.approx(0.5)
    assert bench.improvement_rate([math.inf, 1.0]) == 0.0


def test_sustainability_self_comparison():
    rep = bench.cmd_sustainability(4, 1, eco_weights=(1, 0, 0), baseline_weights=(1, 0, 0), ga_config=SMALL_GA)
    assert rep.reduction_pct == 0.0


def test_sustainability_eco_not_worse_per_request():
    rep = bench.cmd_sustainability(6, 2, ga_config=SMALL_GA)
    assert rep.eco_not_worse_share == 1.0
    assert rep.mean_emissions_eco <= rep.mean_emissions_baseline
    assert rep.reduction_pct == pytest.approx(100 * (1 - rep.mean_emissions_eco / rep.mean_emissions_baseline))


def test_sustainability_requests_are_satisfiable():
    from itinopt.oracle import enumerate_itineraries

    for i in range(10):
        cat, prefs = bench.sustainability_request(7, i)
        assert enumerate_itineraries(cat, prefs).feasible.mean() > 0.5


def test_report_json_and_csv_agree():
    rep = bench.SustainabilityReport(3, 101.25, 150.5, 32.72425249169435, 2 / 3, 1.0)
    doc = rep.to_dict()
    (row,) = csv.DictReader(io.StringIO(bench.rows_to_csv([doc])))
    assert {k: type(doc[k])(v) for k, v in row.items()} == doc


def test_strip_wall_clock():
    doc = {"a": 1, "p50_ms": 3.0, "levels": [{"p99_ms": 1, "users": 2}], "timings": {"x": 1}}
    assert bench.strip_wall_clock(doc) == {"a": 1, "levels": [{"users": 2}]}


def test_oracle_report(catalog42):
    doc = bench.oracle_report(catalog42, Preferences(budget=1200, max_time=30))
    assert doc["n_itineraries"] == 1296
    assert doc["front"] and doc["min_emissions"]["emissions"] > 0
    assert [f["choices"] for f in doc["front"]] == sorted(f["choices"] for f in doc["front"])
