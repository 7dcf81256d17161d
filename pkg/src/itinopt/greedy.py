"""Greedy lowest-emission construction and simulated-annealing refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._rng import SplitMix64
from .domain import Catalog, Itinerary, ObjectiveVector, Preferences, evaluate
from .exceptions import InvalidSpec, InvalidStart


@dataclass(frozen=True)
class GreedyResult:
    itinerary: Itinerary
    totals: ObjectiveVector
    completed: bool
    stuck_segment: int | None = None

    def to_dict(self) -> dict:
        return {
            "itinerary": self.itinerary.to_dict(),
            "totals": self.totals.to_dict(),
            "completed": self.completed,
            "stuck_segment": self.stuck_segment,
        }


@dataclass(frozen=True)
class AnnealConfig:
    initial_temperature: float = 0.0  # 0 selects the automatic temperature
    cooling_factor: float = 0.95
    iterations: int = 1000
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.cooling_factor < 1.0:
            raise InvalidSpec("cooling_factor must lie in (0, 1)")
        if self.iterations < 1:
            raise InvalidSpec("iterations must be >= 1")
        if not self.initial_temperature >= 0:
            raise InvalidSpec("initial_temperature must be >= 0")


REHEAT_RATIO = 1e-3


@dataclass
class OpCounter:
    """Instrumentation for tests: sort calls, key comparisons, options scanned."""

    sorts: int = 0
    comparisons: int = 0
    scanned: int = 0


class _CountingKey:
    __slots__ = ("key", "counter")

    def __init__(self, key, counter):
        self.key = key
        self.counter = counter

    def __lt__(self, other):
        self.counter.comparisons += 1
        return self.key < other.key


def _sort_key(opt):
    return (opt.emissions, opt.cost, opt.id)


def greedy_optimize(catalog: Catalog, prefs: Preferences, counter: OpCounter | None = None) -> GreedyResult:
    """Per segment, take the lowest-emission option that still fits budget and time.

    Options are scanned in (emissions, cost, id) order. Only the running
    budget and max_time totals are guarded; there is no backtracking, and a
    segment with no fitting option ends the run with ``completed=False``.
    """
    if counter is None:
        key = _sort_key
    else:
        def key(opt):
            return _CountingKey(_sort_key(opt), counter)

    choices = []
    total_cost = total_time = total_emissions = 0.0
    for seg in catalog.segments:
        ranked = sorted(range(len(seg.options)), key=lambda i: key(seg.options[i]))
        if counter is not None:
            counter.sorts += 1
        for i in ranked:
            opt = seg.options[i]
            if counter is not None:
                counter.scanned += 1
            if total_cost + opt.cost <= prefs.budget and total_time + opt.duration <= prefs.max_time:
                choices.append(i)
                total_cost += opt.cost
                total_time += opt.duration
                total_emissions += opt.emissions
                break
        else:
            return GreedyResult(
                Itinerary(tuple(choices)),
                ObjectiveVector(total_cost, total_time, total_emissions),
                completed=False,
                stuck_segment=seg.index,
            )
    return GreedyResult(Itinerary(tuple(choices)), ObjectiveVector(total_cost, total_time, total_emissions), True)


def auto_temperature(catalog: Catalog) -> float:
    """Per-segment emission spread (standard deviation), averaged over segments.

    Falls back to 1.0 when every segment has identical emissions.
    """
    t = float(np.mean([np.std([o.emissions for o in s.options]) for s in catalog.segments]))
    return t if t > 0 else 1.0


def anneal_refine(start: GreedyResult, catalog: Catalog, prefs: Preferences, config: AnnealConfig | None = None) -> GreedyResult:
    """Simulated annealing on total emissions, starting from a completed greedy result.

    A move resamples one uniformly chosen segment's option. Only moves that
    keep total cost within budget and total time within max_time are
    considered; downhill moves are always taken and uphill ones with
    probability ``exp(-delta / T)``. ``T`` is multiplied by the cooling factor
    after every iteration and reset to its initial value once it falls below
    ``REHEAT_RATIO`` times that value. The best itinerary ever visited is
    returned, so the result never has higher emissions than ``start``.
    """
    config = config or AnnealConfig()
    config.validate()
    if not start.completed:
        raise InvalidStart(f"greedy run stuck at segment {start.stuck_segment}; nothing to refine")
    rng = SplitMix64(config.seed)
    t0 = config.initial_temperature or auto_temperature(catalog)
    temperature = t0
    sizes = catalog.sizes

    current = list(start.itinerary.choices)
    cur = evaluate(start.itinerary, catalog)
    best, best_obj = tuple(current), cur
    for _ in range(config.iterations):
        s = rng.integers(len(sizes))
        j = rng.integers(sizes[s])
        u = rng.random()
        candidate = current.copy()
        candidate[s] = j
        # full re-sum keeps the bound check identical to evaluate()
        obj = evaluate(Itinerary(tuple(candidate)), catalog)
        if obj.cost <= prefs.budget and obj.time <= prefs.max_time:
            delta = obj.emissions - cur.emissions
            if delta <= 0 or u < math.exp(-delta / temperature):
                current, cur = candidate, obj
                if cur.emissions < best_obj.emissions:
                    best, best_obj = tuple(current), cur
        temperature *= config.cooling_factor
        if temperature < t0 * REHEAT_RATIO:
            temperature = t0
    return GreedyResult(Itinerary(best), best_obj, True)


class GreedySustainOptimizer(BaseEstimator):
    """Estimator front-end: ``fit(catalog, prefs)`` runs greedy, optionally annealed.

    Fitted attributes: ``result_`` (the :class:`GreedyResult`), ``itinerary_``
    and ``objectives_``.
    """

    def __init__(self, anneal=False, initial_temperature=0.0, cooling_factor=0.95, iterations=1000, seed=0):
        self.anneal = anneal
        self.initial_temperature = initial_temperature
        self.cooling_factor = cooling_factor
        self.iterations = iterations
        self.seed = seed

    def fit(self, X: Catalog, y: Preferences):
        result = greedy_optimize(X, y)
        if self.anneal and result.completed:
            cfg = AnnealConfig(self.initial_temperature, self.cooling_factor, self.iterations, self.seed)
            result = anneal_refine(result, X, y, cfg)
        self.result_ = result
        self.itinerary_ = result.itinerary
        self.objectives_ = result.totals
        return self
