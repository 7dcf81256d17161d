"""Gateway: synchronous service chain plus bus-driven scoring and aggregation.

Per request the gateway resolves the catalog (user service), compiles and
prunes preferences (preference service), reprices (cost service) and runs an
optimizer (itinerary service), all synchronously. It then publishes the
itinerary; the sustainability and preference-matching services consume it
from the bus and publish their results back, and the gateway waits for both
up to the aggregation deadline before answering.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping


from ..catalog import catalog_from_document, green_flags, load_catalog
from ..costmodel import REFERENCE_CONTEXT, CostModel, PricingContext, default_cost_model, reprice_catalog
from ..domain import Catalog, Itinerary, Preferences, evaluate
from ..exceptions import (
    DuplicateRequest,
    InvalidSpec,
    ItinOptError,
    NoFeasibleSolution,
    OptimizerFailed,
    ParseError,
    UnknownCatalog,
)
from ..greedy import AnnealConfig, anneal_refine, greedy_optimize
from ..nsga2 import GaConfig, run_nsga2, scalarize
from ..preferences import MatchReport, compile, matching_rate, prune
from .bus import BusEvent, MessageBus
from .metrics import Metrics

logger = logging.getLogger(__name__)

MODES = ("pareto", "greedy", "greedy_annealed")
MAX_ALTERNATIVES = 10
DEFAULT_DEADLINE_S = 10.0

TOPIC_ITINERARY = "itinerary.completed"
TOPIC_SUSTAINABILITY = "sustainability.result"
TOPIC_MATCHING = "matching.result"

SERVICES = ("user", "preference", "cost", "itinerary", "sustainability", "matching")


@dataclass(frozen=True)
class OptimizeRequest:
    request_id: str
    catalog_ref: str | Catalog
    prefs: Preferences
    pricing_ctx: PricingContext = REFERENCE_CONTEXT
    mode: str = "pareto"
    ga_config: GaConfig | None = None
    anneal_config: AnnealConfig | None = None

    def validate(self) -> None:
        if not self.request_id:
            raise InvalidSpec("request_id must be non-empty")
        if self.mode not in MODES:
            raise InvalidSpec(f"mode must be one of {MODES}, got {self.mode!r}")
        PricingContext(*self.pricing_ctx).validate()

    def to_dict(self) -> dict:
        ref = self.catalog_ref
        return {
            "request_id": self.request_id,
            "catalog_ref": ref if isinstance(ref, str) else {"schema_version": 1, **ref.to_dict()},
            "prefs": self.prefs.to_dict(),
            "pricing_ctx": PricingContext(*self.pricing_ctx).to_dict(),
            "mode": self.mode,
            "ga_config": self.ga_config.to_dict() if self.ga_config else None,
            "anneal_config": asdict(self.anneal_config) if self.anneal_config else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OptimizeRequest":
        try:
            ref = d["catalog_ref"]
            if isinstance(ref, Mapping):
                ref = catalog_from_document(ref, "catalog_ref")
            elif not isinstance(ref, str):
                raise ParseError("catalog_ref must be a catalog id or an inline catalog")
            ga = d.get("ga_config")
            an = d.get("anneal_config")
            req = cls(
                request_id=str(d["request_id"]),
                catalog_ref=ref,
                prefs=Preferences.from_dict(d["prefs"]),
                pricing_ctx=PricingContext.from_dict(d.get("pricing_ctx") or {}),
                mode=d.get("mode", "pareto"),
                ga_config=GaConfig.from_dict(ga) if ga else None,
                anneal_config=AnnealConfig(**an) if an else None,
            )
        except KeyError as exc:
            raise ParseError(f"missing field {exc}") from None
        except TypeError as exc:
            raise ParseError(str(exc)) from None
        req.validate()
        return req


@dataclass(frozen=True)
class PlanSummary:
    choices: tuple[int, ...]
    option_ids: tuple[str, ...]
    objectives: tuple[float, float, float]

    def to_dict(self) -> dict:
        cost, time_, em = self.objectives
        return {
            "choices": list(self.choices),
            "option_ids": list(self.option_ids),
            "objectives": {"cost": cost, "time": time_, "emissions": em},
        }


@dataclass
class OptimizeResponse:
    request_id: str
    mode: str
    recommended: PlanSummary
    alternatives: list[PlanSummary]
    match_report: MatchReport | None
    green: bool | None
    diagnostics: list[str]
    timings: dict[str, float] = field(default_factory=dict)
    complete: bool = True

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "request_id": self.request_id,
            "mode": self.mode,
            "recommended": self.recommended.to_dict(),
            "alternatives": [a.to_dict() for a in self.alternatives],
            "match_report": self.match_report.to_dict() if self.match_report else None,
            "green": self.green,
            "diagnostics": list(self.diagnostics),
            "complete": self.complete,
        }
        if timings:
            d["timings"] = {k: round(v, 3) for k, v in self.timings.items()}
        return d


def summarize(itinerary: Itinerary, catalog: Catalog, original: Catalog) -> PlanSummary:
    """Describe ``itinerary`` over ``catalog`` with choices indexed into ``original``."""
    ids, choices = [], []
    for seg, orig, c in zip(catalog.segments, original.segments, itinerary.choices):
        oid = seg.options[c].id
        ids.append(oid)
        choices.append(next(i for i, o in enumerate(orig.options) if o.id == oid))
    return PlanSummary(tuple(choices), tuple(ids), tuple(evaluate(itinerary, catalog)))


def rank_alternatives(front, prefs: Preferences, limit: int = MAX_ALTERNATIVES):
    scores = scalarize(front, prefs.objective_weights)
    order = sorted(range(len(front)), key=lambda i: (scores[i], front[i].itinerary.choices))
    return [front[i].itinerary for i in order[:limit]]


def itinerary_payload(catalog: Catalog, choices, prefs: Preferences) -> str:
    return json.dumps({"catalog": catalog.to_dict(), "choices": list(choices), "prefs": prefs.to_dict()})


def is_green(catalog: Catalog, choices) -> bool:
    flags = green_flags(catalog)
    return any(flags[s][c] for s, c in enumerate(choices))


class _SeenSet:
    """Bounded memory of processed event keys."""

    def __init__(self, capacity: int = 100_000):
        self.capacity = capacity
        self._keys: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def first_time(self, key) -> bool:
        with self._lock:
            if key in self._keys:
                return False
            self._keys[key] = None
            if len(self._keys) > self.capacity:
                self._keys.popitem(last=False)
            return True


class _ScoringService:
    """Consumes itinerary events and publishes one result per distinct event."""

    name = ""
    result_topic = ""

    def __init__(self, bus: MessageBus):
        self.publisher = bus.publisher(self.name)
        self._seen = _SeenSet()
        self.processed = 0
        self.subscription = bus.subscribe(TOPIC_ITINERARY, self.handle, self.name)

    def handle(self, event: BusEvent) -> None:
        if not self._seen.first_time(event.dedup_key):
            return
        t0 = time.perf_counter()
        body = json.loads(event.payload)
        result = self.score(Catalog.from_dict(body["catalog"]), Itinerary(tuple(body["choices"])),
                            Preferences.from_dict(body["prefs"]))
        result["elapsed_ms"] = (time.perf_counter() - t0) * 1000.0
        self.processed += 1
        self.publisher.publish(self.result_topic, event.request_id, json.dumps(result))

    def score(self, catalog: Catalog, itinerary: Itinerary, prefs: Preferences) -> dict:
        raise NotImplementedError


class SustainabilityService(_ScoringService):
    name = "sustainability"
    result_topic = TOPIC_SUSTAINABILITY

    def score(self, catalog, itinerary, prefs):
        return {"green": is_green(catalog, itinerary.choices)}


class MatchingService(_ScoringService):
    name = "matching"
    result_topic = TOPIC_MATCHING

    def score(self, catalog, itinerary, prefs):
        return {"match_report": matching_rate(itinerary, catalog, prefs).to_dict()}


@dataclass
class _Pending:
    done: threading.Event = field(default_factory=threading.Event)
    green: bool | None = None
    match: MatchReport | None = None
    async_ms: dict = field(default_factory=dict)

    def complete(self) -> bool:
        return self.green is not None and self.match is not None


class Gateway:
    """Single entry point; see the module docstring for the request flow."""

    def __init__(
        self,
        catalogs: Mapping[str, Catalog] | None = None,
        catalog_dir: str | Path | None = None,
        cost_model: CostModel | None = None,
        deadline_s: float = DEFAULT_DEADLINE_S,
        default_ga_config: GaConfig | None = None,
        bus: MessageBus | None = None,
    ):
        self.catalogs = dict(catalogs or {})
        self.catalog_dir = Path(catalog_dir) if catalog_dir else None
        self.cost_model = cost_model or default_cost_model()
        self.deadline_s = deadline_s
        self.default_ga_config = default_ga_config or GaConfig()
        self._owns_bus = bus is None
        self.bus = bus or MessageBus()
        self.metrics = Metrics()
        self._status = {name: {"up": True, "last_error": None} for name in SERVICES}
        self._pending: dict[str, _Pending] = {}
        self._lock = threading.Lock()
        self._seen_results = _SeenSet()
        self.sustainability = SustainabilityService(self.bus)
        self.matching = MatchingService(self.bus)
        self._publisher = self.bus.publisher("itinerary")
        self._result_subs = [
            self.bus.subscribe(TOPIC_SUSTAINABILITY, self._on_result, "gateway.sustainability"),
            self.bus.subscribe(TOPIC_MATCHING, self._on_result, "gateway.matching"),
        ]

    # ------------------------------------------------------------ catalogs

    def register_catalog(self, name: str, catalog: Catalog) -> None:
        self.catalogs[name] = catalog

    def resolve_catalog(self, ref) -> Catalog:
        if isinstance(ref, Catalog):
            return ref
        if ref in self.catalogs:
            return self.catalogs[ref]
        if self.catalog_dir is not None:
            path = self.catalog_dir / f"{ref}.json"
            if "/" not in ref and path.is_file():
                catalog = load_catalog(path)
                self.catalogs[ref] = catalog
                return catalog
        raise UnknownCatalog(f"unknown catalog {ref!r}")

    # ------------------------------------------------------------ aggregation

    def _on_result(self, event: BusEvent) -> None:
        if not self._seen_results.first_time(event.dedup_key):
            return
        body = json.loads(event.payload)
        with self._lock:
            rec = self._pending.get(event.request_id)
            if rec is None:
                return  # already answered or timed out
            if event.topic == TOPIC_SUSTAINABILITY and rec.green is None:
                rec.green = bool(body["green"])
                rec.async_ms["sustainability"] = body.get("elapsed_ms", 0.0)
            elif event.topic == TOPIC_MATCHING and rec.match is None:
                rec.match = MatchReport.from_dict(body["match_report"])
                rec.async_ms["matching"] = body.get("elapsed_ms", 0.0)
            if rec.complete():
                rec.done.set()

    def _stage(self, name: str, timings: dict, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        except Exception as exc:
            self._status[name]["last_error"] = f"{type(exc).__name__}: {exc}"
            raise
        finally:
            ms = (time.perf_counter() - t0) * 1000.0
            timings[name] = ms
            self.metrics.observe(name, ms)

    def _optimize(self, req: OptimizeRequest, catalog: Catalog, diagnostics: list):
        if req.mode == "pareto":
            try:
                outcome = run_nsga2(catalog, req.prefs, req.ga_config or self.default_ga_config)
                return outcome.recommended, rank_alternatives(outcome.pareto_front, req.prefs)
            except NoFeasibleSolution as exc:
                diagnostics.append(f"pareto front empty ({exc}); fell back to greedy")
        result = greedy_optimize(catalog, req.prefs)
        if not result.completed:
            raise OptimizerFailed(f"greedy stuck at segment {result.stuck_segment}", diagnostics=diagnostics)
        if req.mode == "greedy_annealed":
            result = anneal_refine(result, catalog, req.prefs, req.anneal_config or AnnealConfig())
        return result.itinerary, []

    def handle_optimize(self, req: OptimizeRequest) -> OptimizeResponse:
        self.metrics.incr("requests_total")
        t_start = time.perf_counter()
        rec = _Pending()
        with self._lock:
            if req.request_id in self._pending:
                self.metrics.incr("errors_total")
                raise DuplicateRequest(f"request {req.request_id!r} is already in flight")
            self._pending[req.request_id] = rec
        try:
            response = self._run(req, rec, t_start)
        except Exception:
            self.metrics.incr("errors_total")
            raise
        finally:
            with self._lock:
                self._pending.pop(req.request_id, None)
        self.metrics.incr("responses_total")
        if not response.complete:
            self.metrics.incr("timeouts_total")
        total = (time.perf_counter() - t_start) * 1000.0
        response.timings["total"] = total
        self.metrics.observe("total", total)
        return response

    def _run(self, req: OptimizeRequest, rec: _Pending, t_start: float) -> OptimizeResponse:
        req.validate()
        timings: dict[str, float] = {}
        diagnostics: list[str] = []
        catalog = self._stage("user", timings, self.resolve_catalog, req.catalog_ref)

        def preference_stage():
            return prune(catalog, compile(req.prefs), diagnostics)

        pruned = self._stage("preference", timings, preference_stage)
        ctx = PricingContext(*req.pricing_ctx)

        def cost_stage():
            return reprice_catalog(pruned, self.cost_model, ctx), reprice_catalog(catalog, self.cost_model, ctx)

        priced, priced_full = self._stage("cost", timings, cost_stage)

        def itinerary_stage():
            try:
                return self._optimize(req, priced, diagnostics)
            except OptimizerFailed:
                raise
            except ItinOptError as exc:
                raise OptimizerFailed(f"{req.mode} optimizer failed: {exc}", inner=exc,
                                      diagnostics=diagnostics) from exc

        best, alternatives = self._stage("itinerary", timings, itinerary_stage)
        recommended = summarize(best, priced, catalog)
        alts = [summarize(a, priced, catalog) for a in alternatives]

        t_async = time.perf_counter()
        self._publisher.publish(TOPIC_ITINERARY, req.request_id,
                                itinerary_payload(priced_full, recommended.choices, req.prefs))
        complete = rec.done.wait(self.deadline_s)
        with self._lock:
            green, match, async_ms = rec.green, rec.match, dict(rec.async_ms)
        if not complete:
            missing = [n for n, v in (("sustainability", green), ("matching", match)) if v is None]
            diagnostics.append(f"timeout after {self.deadline_s:g}s waiting for: {', '.join(missing)}")
        timings.update(async_ms)
        timings["aggregation"] = (time.perf_counter() - t_async) * 1000.0
        for name, ms in async_ms.items():
            self.metrics.observe(name, ms)
        return OptimizeResponse(
            request_id=req.request_id,
            mode=req.mode,
            recommended=recommended,
            alternatives=alts,
            match_report=match,
            green=green,
            diagnostics=diagnostics,
            timings=timings,
            complete=bool(complete),
        )

    # ------------------------------------------------------------ ops

    def health(self) -> dict:
        status = {k: dict(v) for k, v in self._status.items()}
        for svc in (self.sustainability, self.matching):
            if svc.subscription.last_error:
                status[svc.name]["last_error"] = svc.subscription.last_error
            status[svc.name]["up"] = svc.subscription._thread.is_alive()
        return {"status": "ok" if all(s["up"] for s in status.values()) else "degraded", "services": status}

    def metrics_snapshot(self) -> dict:
        snap = self.metrics.snapshot()
        for name in ("requests_total", "responses_total", "errors_total", "timeouts_total"):
            snap["counters"].setdefault(name, 0)
        snap["bus"] = {"depth": self.bus.depth(), "published": self.bus.published}
        with self._lock:
            snap["in_flight"] = len(self._pending)
        return snap

    def close(self) -> None:
        if self._owns_bus:
            self.bus.shutdown()
        else:
            for sub in self._result_subs + [self.sustainability.subscription, self.matching.subscription]:
                sub.cancel()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
