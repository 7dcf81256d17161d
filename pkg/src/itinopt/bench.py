"""Evaluation harness: load, accuracy, convergence and sustainability runs.

Every report is deterministic per seed apart from the fields named in
``WALL_CLOCK_FIELDS``. Absolute latencies depend on the local machine; the
harness checks shapes and ratios, not absolute numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import spearmanr

from ._rng import SplitMix64
from .catalog import GeneratorSpec, generate_catalog
from .domain import Catalog, Itinerary, Preferences, chosen_options, evaluate
from .exceptions import ServerUnreachable
from .nsga2 import GaConfig, catalog_scale, run_nsga2, static_score
from .oracle import dominated_by_reference, enumerate_itineraries, min_emissions, pareto_front
from .orchestrator.gateway import Gateway, OptimizeRequest
from .orchestrator.metrics import percentile

WALL_CLOCK_FIELDS = frozenset({
    "p50_ms", "p90_ms", "p99_ms", "mean_ms", "spearman_p50", "time_taken", "efficiency", "elapsed_s", "timings",
})
MACHINE_NOTE = "absolute latencies and timings are local-machine measurements; only shapes and ratios are checked"

ECO_WEIGHTS = (0.15, 0.15, 0.7)
BASELINE_WEIGHTS = (1.0, 0.0, 0.0)
HISTOGRAM_BINS = 10


def strip_wall_clock(obj):
    """Drop wall-clock keys recursively; used for determinism comparisons."""
    if isinstance(obj, dict):
        return {k: strip_wall_clock(v) for k, v in obj.items() if k not in WALL_CLOCK_FIELDS}
    if isinstance(obj, list):
        return [strip_wall_clock(v) for v in obj]
    return obj


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _csv_cell(v) for k, v in r.items()})
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    if v is None:
        return ""
    return v


# ---------------------------------------------------------------- shared setup

def benchmark_preferences(catalog: Catalog, weights=(1, 1, 1), budget_pct: float = 60.0,
                          time_pct: float = 70.0) -> Preferences:
    """Bounds at given percentiles of all itinerary costs/durations (binding but satisfiable)."""
    en = enumerate_itineraries(catalog)
    budget = float(np.percentile(en.objectives[:, 0], budget_pct))
    max_time = float(np.percentile(en.objectives[:, 1], time_pct))
    return Preferences(budget=budget, max_time=max_time, objective_weights=weights)


def _catalog_for(seed: int) -> Catalog:
    return generate_catalog(GeneratorSpec(seed=seed))


def accuracy_request(seed: int, index: int) -> tuple[Catalog, Preferences]:
    """A satisfiable request built around a random witness itinerary.

    Attribute preferences are read off the witness options, and the bounds are
    the witness totals scaled by U(1.1, 1.5), so the witness satisfies every
    preference.
    """
    rng = SplitMix64(seed).spawn(index)
    catalog = _catalog_for(int(rng.integers(2**31)))
    witness = Itinerary(tuple(int(rng.integers(n)) for n in catalog.sizes))
    cost, duration, _ = evaluate(witness, catalog)
    pool = []
    for opt in chosen_options(witness, catalog):
        for tag in sorted(opt.attributes):
            pool.append((opt.kind, tag, opt.attributes[tag]))
    picks = []
    n_required = 1 + int(rng.integers(2))
    n_preferred = 1 + int(rng.integers(2))
    while len(picks) < min(len(pool), n_required + n_preferred):
        cand = pool[int(rng.integers(len(pool)))]
        if all(cand[:2] != p[:2] for p in picks):
            picks.append(cand)
    prefs = Preferences(
        budget=round(cost * rng.uniform(1.1, 1.5), 2),
        max_time=round(duration * rng.uniform(1.1, 1.5), 2),
        required_attributes=picks[:n_required],
        preferred_attributes=picks[n_required:],
    )
    return catalog, prefs


def sustainability_request(seed: int, index: int) -> tuple[Catalog, Preferences]:
    rng = SplitMix64(seed).spawn(index)
    catalog = _catalog_for(int(rng.integers(2**31)))
    # generous bounds: 80% of the worst-case totals
    scale = catalog_scale(catalog)
    return catalog, Preferences(budget=float(0.8 * scale[0]), max_time=float(0.8 * scale[1]))


# ---------------------------------------------------------------- load test

@dataclass
class LoadReport:
    users: int
    requests: int
    answered: int
    errors: int
    p50_ms: float
    p90_ms: float
    p99_ms: float
    mean_ms: float
    error_rate: float
    availability: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LoadTestResult:
    levels: list[LoadReport]
    spearman_p50: float
    note: str = MACHINE_NOTE

    def to_dict(self) -> dict:
        return {"note": self.note, "spearman_p50": self.spearman_p50, "levels": [r.to_dict() for r in self.levels]}

    def rows(self) -> list[dict]:
        return [r.to_dict() for r in self.levels]


def default_load_template(seed: int) -> dict:
    # loose bounds: repricing can scale costs several-fold and load runs must not fail on feasibility
    scale = catalog_scale(_catalog_for(seed))
    prefs = Preferences(budget=float(10 * scale[0]), max_time=float(scale[1]))
    return {"catalog_ref": "default", "prefs": prefs.to_dict(), "mode": "greedy"}


def _load_payload(template: dict, seed: int, level: int, user: int, k: int) -> dict:
    rng = SplitMix64(seed).spawn((level << 32) | (user << 16) | k)
    body = json.loads(json.dumps(template))
    body["request_id"] = f"lt-{level}-{user}-{k}"
    body.setdefault("pricing_ctx", {
        "days_to_departure": round(rng.uniform(0, 90), 1),
        "season_index": int(rng.integers(4)),
        "demand_factor": round(rng.uniform(0.5, 2.0), 2),
        "distance": round(rng.uniform(200, 3000), 0),
    })
    return body


def http_sender(url: str, timeout: float = 30.0) -> Callable[[dict], dict]:
    endpoint = url.rstrip("/") + "/v1/itineraries:optimize"

    def send(body: dict) -> dict:
        req = urllib.request.Request(endpoint, data=json.dumps(body).encode("utf-8"),
                                     headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise RuntimeError(f"HTTP {exc.code}: {exc.read().decode('utf-8', 'replace')}") from None
        except (urllib.error.URLError, ConnectionError, TimeoutError) as exc:
            raise ServerUnreachable(f"cannot reach {endpoint}: {exc}") from None

    return send


def gateway_sender(gateway: Gateway) -> Callable[[dict], dict]:
    def send(body: dict) -> dict:
        return gateway.handle_optimize(OptimizeRequest.from_dict(body)).to_dict()

    return send


def check_reachable(url: str, timeout: float = 5.0) -> None:
    try:
        with urllib.request.urlopen(url.rstrip("/") + "/v1/health", timeout=timeout):
            pass
    except (urllib.error.URLError, ConnectionError, TimeoutError) as exc:
        raise ServerUnreachable(f"server at {url} is unreachable: {exc}") from None


def cmd_loadtest(users_list: Sequence[int], requests_per_user: int, request_template: dict, seed: int,
                 send: Callable[[dict], dict]) -> LoadTestResult:
    """Closed-loop load: each virtual user issues its requests back to back."""
    reports = []
    for level, users in enumerate(users_list):
        latencies: list[float] = []
        errors = 0
        answered = 0
        lock = threading.Lock()

        def user_loop(u: int):
            nonlocal errors, answered
            for k in range(requests_per_user):
                body = _load_payload(request_template, seed, level, u, k)
                t0 = time.perf_counter()
                try:
                    resp = send(body)
                    ok = bool(resp.get("complete", True))
                except Exception:  # incl. resets mid-run; reachability is checked before the run
                    ok = None
                ms = (time.perf_counter() - t0) * 1000.0
                with lock:
                    if ok is None:
                        errors += 1
                    else:
                        latencies.append(ms)
                        answered += int(ok)

        threads = [threading.Thread(target=user_loop, args=(u,), daemon=True) for u in range(users)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        issued = users * requests_per_user
        lat = np.asarray(latencies) if latencies else np.zeros(1)
        reports.append(LoadReport(
            users=users,
            requests=issued,
            answered=answered,
            errors=errors,
            p50_ms=percentile(lat, 50),
            p90_ms=percentile(lat, 90),
            p99_ms=percentile(lat, 99),
            mean_ms=float(lat.mean()),
            error_rate=errors / issued if issued else 0.0,
            availability=answered / issued if issued else 1.0,
        ))
    return LoadTestResult(reports, p50_trend(reports))


def p50_trend(reports: Sequence[LoadReport]) -> float:
    """Spearman correlation of p50 against users; a flat curve counts as 0."""
    p50 = [r.p50_ms for r in reports]
    if len(reports) < 2 or min(p50) == max(p50):
        return 0.0
    rho = spearmanr([r.users for r in reports], p50).statistic
    return 0.0 if math.isnan(rho) else float(rho)


# ---------------------------------------------------------------- accuracy

@dataclass
class AccuracyReport:
    n_requests: int
    mean_rate: float
    min_rate: float
    histogram: list[int]
    bin_edges: list[float]
    budget_compliance: float
    time_compliance: float
    rates: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [{"request": i, "rate": r} for i, r in enumerate(self.rates)]


def cmd_accuracy(n_requests: int, seed: int, mode: str = "pareto", ga_config: GaConfig | None = None,
                 gateway: Gateway | None = None,
                 request_factory: Callable[[int, int], tuple[Catalog, Preferences]] | None = None) -> AccuracyReport:
    request_factory = request_factory or accuracy_request
    own = gateway is None
    gateway = gateway or Gateway()
    rates, within_budget, within_time = [], 0, 0
    try:
        for i in range(n_requests):
            catalog, prefs = request_factory(seed, i)
            resp = gateway.handle_optimize(OptimizeRequest(f"acc-{seed}-{i}", catalog, prefs, mode=mode,
                                                           ga_config=ga_config))
            rates.append(resp.match_report.rate if resp.match_report else 0.0)
            cost, duration, _ = resp.recommended.objectives
            within_budget += cost <= prefs.budget
            within_time += duration <= prefs.max_time
    finally:
        if own:
            gateway.close()
    hist, edges = np.histogram(rates, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    n = max(n_requests, 1)
    return AccuracyReport(
        n_requests=n_requests,
        mean_rate=float(np.mean(rates)) if rates else 1.0,
        min_rate=float(np.min(rates)) if rates else 1.0,
        histogram=[int(h) for h in hist],
        bin_edges=[float(e) for e in edges],
        budget_compliance=within_budget / n,
        time_compliance=within_time / n,
        rates=rates,
    )


# ---------------------------------------------------------------- convergence

@dataclass
class EfficiencyReport:
    quality: float
    normalized_quality: float
    time_taken: float
    efficiency: float
    evaluations: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConvergenceRun:
    seed: int
    generations_run: int
    converged_generation: int
    evaluations: int
    population_size: int
    front_size: int
    true_front_size: int
    dominated_members: int
    coverage: float
    history_monotone: bool
    improvement_rate: float
    efficiency: EfficiencyReport
    history: list[float] = field(repr=False, default_factory=list)

    @property
    def reached_oracle(self) -> bool:
        return self.dominated_members == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reached_oracle"] = self.reached_oracle
        d["history"] = [None if math.isinf(h) else h for h in self.history]
        return d


@dataclass
class ConvergenceReport:
    runs: list[ConvergenceRun]

    @property
    def mean_generations_to_stagnation(self) -> float:
        return float(np.mean([r.converged_generation for r in self.runs])) if self.runs else 0.0

    def to_dict(self) -> dict:
        runs = self.runs
        return {
            "note": MACHINE_NOTE,
            "n_runs": len(runs),
            "mean_generations_to_stagnation": self.mean_generations_to_stagnation,
            "share_reached_oracle": float(np.mean([r.reached_oracle for r in runs])) if runs else 1.0,
            "min_coverage": min((r.coverage for r in runs), default=1.0),
            "mean_improvement_rate": float(np.mean([r.improvement_rate for r in runs])) if runs else 0.0,
            "evaluations_exact": all(r.evaluations == r.population_size * (r.generations_run + 1) for r in runs),
            "runs": [r.to_dict() for r in runs],
        }

    def rows(self) -> list[dict]:
        keys = ("seed", "generations_run", "converged_generation", "evaluations", "front_size",
                "true_front_size", "dominated_members", "coverage", "improvement_rate")
        return [{**{k: getattr(r, k) for k in keys}, "quality": r.efficiency.quality,
                 "normalized_quality": r.efficiency.normalized_quality} for r in self.runs]

    def history_csv(self) -> str:
        buf = io.StringIO()
        buf.write("seed,generation,best_score\n")
        for r in self.runs:
            for g, h in enumerate(r.history):
                buf.write(f"{r.seed},{g},{'' if math.isinf(h) else repr(h)}\n")
        return buf.getvalue()


def improvement_rate(history: Sequence[float]) -> float:
    """Per-generation geometric improvement of the best score over the run."""
    finite = [h for h in history if math.isfinite(h)]
    if len(finite) < 2 or finite[0] <= 0 or finite[-1] <= 0:
        return 0.0
    return 1.0 - (finite[-1] / finite[0]) ** (1.0 / (len(finite) - 1))


def convergence_run(catalog: Catalog, prefs: Preferences, config: GaConfig, seed: int = 0) -> ConvergenceRun:
    t0 = time.perf_counter()
    outcome = run_nsga2(catalog, prefs, config)
    elapsed = time.perf_counter() - t0
    ref = pareto_front(catalog, prefs)
    got = np.array([r.objectives for r in outcome.pareto_front], dtype=float)
    dominated = int(dominated_by_reference(got, ref.objectives).sum())
    true_set = ref.vector_set()
    got_set = {tuple(map(float, v)) for v in got}
    coverage = len(got_set & true_set) / len(true_set) if true_set else 1.0

    scale = catalog_scale(catalog)
    en = enumerate_itineraries(catalog, prefs)
    optimum = float(np.min(static_score(en.objectives[en.feasible], prefs.objective_weights, scale)))
    quality = float(np.min(static_score(got, prefs.objective_weights, scale)))
    normalized = optimum / quality if quality > 0 else 1.0
    hist = outcome.history
    monotone = all(b <= a for a, b in zip(hist, hist[1:]))
    return ConvergenceRun(
        seed=seed,
        generations_run=outcome.generations_run,
        converged_generation=outcome.converged_generation,
        evaluations=outcome.evaluations,
        population_size=outcome.population_size,
        front_size=len(outcome.pareto_front),
        true_front_size=len(true_set),
        dominated_members=dominated,
        coverage=coverage,
        history_monotone=monotone,
        improvement_rate=improvement_rate(hist),
        efficiency=EfficiencyReport(quality, normalized, elapsed, normalized / max(elapsed, 1e-9),
                                    outcome.evaluations),
        history=list(hist),
    )


def cmd_convergence(seeds: Sequence[int], ga_config: GaConfig | None = None,
                    catalog: Catalog | None = None) -> ConvergenceReport:
    """One NSGA-II run per seed, each on its own seeded catalog unless ``catalog`` is fixed."""
    base = ga_config or GaConfig()
    runs = []
    for seed in seeds:
        cat = catalog if catalog is not None else _catalog_for(seed)
        runs.append(convergence_run(cat, benchmark_preferences(cat), replace(base, seed=seed), seed))
    return ConvergenceReport(runs)


# ---------------------------------------------------------------- sustainability

@dataclass
class SustainabilityReport:
    n_requests: int
    mean_emissions_eco: float
    mean_emissions_baseline: float
    reduction_pct: float
    green_share: float
    eco_not_worse_share: float

    def to_dict(self) -> dict:
        return asdict(self)


def cmd_sustainability(n_requests: int, seed: int, eco_weights=ECO_WEIGHTS, baseline_weights=BASELINE_WEIGHTS,
                       mode: str = "pareto", ga_config: GaConfig | None = None,
                       gateway: Gateway | None = None) -> SustainabilityReport:
    own = gateway is None
    gateway = gateway or Gateway()
    eco_em, base_em, green, not_worse = [], [], 0, 0
    try:
        for i in range(n_requests):
            catalog, prefs = sustainability_request(seed, i)
            arms = []
            for tag, w in (("eco", eco_weights), ("base", baseline_weights)):
                p = replace(prefs, objective_weights=tuple(w))
                arms.append(gateway.handle_optimize(
                    OptimizeRequest(f"sus-{seed}-{i}-{tag}", catalog, p, mode=mode, ga_config=ga_config)))
            eco, base = arms
            eco_em.append(eco.recommended.objectives[2])
            base_em.append(base.recommended.objectives[2])
            green += bool(eco.green)
            not_worse += eco_em[-1] <= base_em[-1]
    finally:
        if own:
            gateway.close()
    mean_eco = float(np.mean(eco_em)) if eco_em else 0.0
    mean_base = float(np.mean(base_em)) if base_em else 0.0
    n = max(n_requests, 1)
    return SustainabilityReport(
        n_requests=n_requests,
        mean_emissions_eco=mean_eco,
        mean_emissions_baseline=mean_base,
        reduction_pct=100.0 * (1.0 - mean_eco / mean_base) if mean_base > 0 else 0.0,
        green_share=green / n,
        eco_not_worse_share=not_worse / n,
    )


# ---------------------------------------------------------------- oracle

def oracle_report(catalog: Catalog, prefs: Preferences | None = None) -> dict:
    """Exact Pareto front plus the enumerated minimum-emission itinerary."""
    ref = pareto_front(catalog, prefs)
    best, best_em = min_emissions(catalog, prefs)
    return {
        "n_itineraries": int(np.prod(catalog.sizes)),
        "prefs": prefs.to_dict() if prefs else None,
        "front": [
            {"choices": list(it.choices), "cost": float(o[0]), "time": float(o[1]), "emissions": float(o[2])}
            for it, o in sorted(zip(ref.itineraries, ref.objectives.tolist()), key=lambda t: t[0].choices)
        ],
        "min_emissions": None if best is None else {"choices": list(best.choices), "emissions": best_em},
    }


__all__ = [
    "AccuracyReport",
    "ConvergenceReport",
    "ConvergenceRun",
    "EfficiencyReport",
    "LoadReport",
    "LoadTestResult",
    "SustainabilityReport",
    "WALL_CLOCK_FIELDS",
    "accuracy_request",
    "benchmark_preferences",
    "check_reachable",
    "cmd_accuracy",
    "cmd_convergence",
    "cmd_loadtest",
    "cmd_sustainability",
    "default_load_template",
    "gateway_sender",
    "http_sender",
    "oracle_report",
    "rows_to_csv",
    "strip_wall_clock",
    "sustainability_request",
]
