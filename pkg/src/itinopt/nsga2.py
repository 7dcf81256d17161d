"""NSGA-II over itinerary chromosomes.

A chromosome holds one option index per segment. Constraint handling uses
feasibility dominance: feasible beats infeasible, two infeasible compare by
total violation, two feasible by Pareto dominance. Survivor selection is
elitist (parents and offspring compete), which keeps the best feasible
score per generation non-increasing.
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ._rng import SplitMix64
from .domain import Catalog, Itinerary, ObjectiveVector, Preferences, dominates
from .exceptions import EmptyFront, InvalidSpec, LengthMismatch, NoFeasibleSolution
from .preferences import soft_match_count

INF = math.inf


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    max_generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None: 1 / number of segments
    tournament_size: int = 2
    seed: int = 0
    stagnation_window: int = 20

    def validate(self) -> None:
        if self.population_size < 4 or self.population_size % 2:
            raise InvalidSpec("population_size must be even and >= 4")
        if self.max_generations < 1:
            raise InvalidSpec("max_generations must be >= 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise InvalidSpec("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise InvalidSpec("mutation_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise InvalidSpec("tournament_size must be >= 1")
        if self.stagnation_window < 1:
            raise InvalidSpec("stagnation_window must be >= 1")

    def resolved_mutation_rate(self, n_segments: int) -> float:
        return 1.0 / n_segments if self.mutation_rate is None else self.mutation_rate

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "GaConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidSpec(f"unknown GaConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class RankedIndividual:
    itinerary: Itinerary
    objectives: ObjectiveVector
    violation: float = 0.0
    rank: int = 0
    crowding: float = 0.0
    id: int = 0

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0

    def to_dict(self) -> dict:
        return {
            "choices": list(self.itinerary.choices),
            "objectives": self.objectives.to_dict(),
            "violation": self.violation,
            "rank": self.rank,
            "crowding": None if math.isinf(self.crowding) else self.crowding,
        }


@dataclass(frozen=True)
class GaOutcome:
    pareto_front: list[RankedIndividual]
    recommended: Itinerary
    generations_run: int
    evaluations: int
    history: list[float]
    converged_generation: int = 0
    population_size: int = 0

    def to_dict(self) -> dict:
        return {
            "pareto_front": [r.to_dict() for r in self.pareto_front],
            "recommended": self.recommended.to_dict(),
            "generations_run": self.generations_run,
            "evaluations": self.evaluations,
            "converged_generation": self.converged_generation,
            "history": [None if math.isinf(h) else h for h in self.history],
        }

    def history_csv(self) -> str:
        buf = io.StringIO()
        buf.write("generation,best_score\n")
        for g, h in enumerate(self.history):
            buf.write(f"{g},{'' if math.isinf(h) else repr(h)}\n")
        return buf.getvalue()


# ---------------------------------------------------------------- relations

def constrained_dominates(a: RankedIndividual, b: RankedIndividual) -> bool:
    a_ok, b_ok = a.violation == 0.0, b.violation == 0.0
    if a_ok and not b_ok:
        return True
    if b_ok and not a_ok:
        return False
    if not a_ok:
        return a.violation < b.violation
    return dominates(a.objectives, b.objectives)


def _dominance_matrix(objs: np.ndarray, viol: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when individual i constrained-dominates j."""
    n = len(objs)
    le = np.ones((n, n), dtype=bool)
    lt = np.zeros((n, n), dtype=bool)
    for col in objs.T:  # per objective; cheaper than one 3-D broadcast
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    feas = viol == 0.0
    fi, fj = feas[:, None], feas[None, :]
    return (fi & fj & le & lt) | (fi & ~fj) | (~fi & ~fj & (viol[:, None] < viol[None, :]))


def _front_indices(objs: np.ndarray, viol: np.ndarray) -> list[np.ndarray]:
    dom = _dominance_matrix(objs, viol)
    count = dom.sum(axis=0)
    remaining = np.ones(len(objs), dtype=bool)
    fronts = []
    while remaining.any():
        current = np.flatnonzero(remaining & (count == 0))
        fronts.append(current)
        remaining[current] = False
        count = count - dom[current].sum(axis=0)
    return fronts


def non_dominated_sort(population: Sequence[RankedIndividual]) -> list[list[RankedIndividual]]:
    if not population:
        raise ValueError("population must be non-empty")
    objs = np.array([p.objectives for p in population], dtype=float)
    viol = np.array([p.violation for p in population], dtype=float)
    return [[population[i] for i in front] for front in _front_indices(objs, viol)]


def _crowding(objs: np.ndarray, ids: np.ndarray) -> np.ndarray:
    n = len(objs)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = INF
        return dist
    for m in range(objs.shape[1]):
        order = np.lexsort((ids, objs[:, m]))
        col = objs[order, m]
        span = col[-1] - col[0]
        if span == 0:
            continue  # zero-range objective contributes nothing
        dist[order[0]] = INF
        dist[order[-1]] = INF
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def crowding_distance(front: Sequence[RankedIndividual]) -> list[float]:
    if not front:
        return []
    objs = np.array([p.objectives for p in front], dtype=float)
    ids = np.array([p.id for p in front])
    return _crowding(objs, ids).tolist()


def _tournament_key(ind: RankedIndividual):
    return (ind.rank, -ind.crowding, ind.id)


def select_parent(population: Sequence[RankedIndividual], rng: SplitMix64, tournament_size: int = 2):
    """Tournament: lowest rank wins, then larger crowding, then smaller id."""
    entrants = [population[rng.integers(len(population))] for _ in range(tournament_size)]
    return min(entrants, key=_tournament_key)


# ---------------------------------------------------------------- variation

def crossover(parent_a: Itinerary, parent_b: Itinerary, rng: SplitMix64, crossover_rate: float = 0.9):
    """Uniform per-segment crossover applied with probability ``crossover_rate``."""
    a, b = list(parent_a.choices), list(parent_b.choices)
    if len(a) != len(b):
        raise LengthMismatch(f"parents have {len(a)} and {len(b)} genes")
    if rng.random() < crossover_rate:
        for i in range(len(a)):
            if rng.random() < 0.5:
                a[i], b[i] = b[i], a[i]
    return Itinerary(tuple(a)), Itinerary(tuple(b))


def mutate(child: Itinerary, catalog: Catalog | Sequence[int], rng: SplitMix64, mutation_rate: float) -> Itinerary:
    """Resample each gene uniformly from its segment with probability ``mutation_rate``."""
    sizes = catalog.sizes if isinstance(catalog, Catalog) else tuple(catalog)
    genes = list(child.choices)
    for i, n in enumerate(sizes):
        if rng.random() < mutation_rate:
            genes[i] = rng.integers(n)
    return Itinerary(tuple(genes))


# ---------------------------------------------------------------- evaluation

class _Evaluator:
    """Vectorized objectives and violation, bit-identical to ``evaluate``/``is_feasible``."""

    def __init__(self, catalog: Catalog, prefs: Preferences):
        self.sizes = catalog.sizes
        self.cost = [np.array([o.cost for o in s.options]) for s in catalog.segments]
        self.time = [np.array([o.duration for o in s.options]) for s in catalog.segments]
        self.em = [np.array([o.emissions for o in s.options]) for s in catalog.segments]
        self.prefs = prefs
        # per requirement, per segment: which options break it
        self.req_miss = [
            [
                np.array([o.kind == r.kind and o.attributes.get(r.tag) != r.value for o in s.options])
                for s in catalog.segments
            ]
            for r in prefs.required_attributes
        ]
        self.calls = 0

    def __call__(self, pop: np.ndarray):
        n = len(pop)
        self.calls += n
        cost, time, em = np.zeros(n), np.zeros(n), np.zeros(n)
        for s in range(len(self.sizes)):
            col = pop[:, s]
            cost += self.cost[s][col]
            time += self.time[s][col]
            em += self.em[s][col]
        p = self.prefs
        viol = np.zeros(n)
        for value, bound in ((cost, p.budget), (time, p.max_time), (em, p.emissions_cap)):
            if bound is not None:
                viol += np.where(value > bound, (value - bound) / bound, 0.0)
        for miss in self.req_miss:
            broken = np.zeros(n, dtype=bool)
            for s, m in enumerate(miss):
                broken |= m[pop[:, s]]
            viol += np.where(broken, 1.0, 0.0)
        return np.column_stack([cost, time, em]), viol


def catalog_scale(catalog: Catalog) -> np.ndarray:
    """Largest attainable total per objective; fixed normalizer for history scores."""
    scale = np.zeros(3)
    for s in catalog.segments:
        scale += [max(o.cost for o in s.options), max(o.duration for o in s.options),
                  max(o.emissions for o in s.options)]
    scale[scale == 0] = 1.0
    return scale


def static_score(objectives, weights, scale) -> np.ndarray | float:
    return np.asarray(objectives, dtype=float) / scale @ np.asarray(weights, dtype=float)


# ---------------------------------------------------------------- main loop

def _rank_and_crowd(objs, viol):
    n = len(objs)
    rank = np.zeros(n, dtype=np.int64)
    crowd = np.zeros(n)
    ids = np.arange(n)
    for r, front in enumerate(_front_indices(objs, viol)):
        rank[front] = r
        crowd[front] = _crowding(objs[front], ids[front])
    return rank, crowd


def _front_key(objs, viol, rank):
    sel = (rank == 0) & (viol == 0.0)
    return frozenset(map(tuple, objs[sel].tolist()))


def _best_score(objs, viol, weights, scale):
    feas = viol == 0.0
    if not feas.any():
        return INF
    return float(np.min(static_score(objs[feas], weights, scale)))


def _make_offspring(pop, rank, crowd, rng, config, sizes, mutation_rate):
    parents = [
        RankedIndividual(Itinerary(tuple(row)), ObjectiveVector(0.0, 0.0, 0.0), 0.0, int(rank[i]), float(crowd[i]), i)
        for i, row in enumerate(pop.tolist())
    ]
    children = []
    while len(children) < config.population_size:
        a = select_parent(parents, rng, config.tournament_size)
        b = select_parent(parents, rng, config.tournament_size)
        ca, cb = crossover(a.itinerary, b.itinerary, rng, config.crossover_rate)
        children.append(mutate(ca, sizes, rng, mutation_rate).choices)
        children.append(mutate(cb, sizes, rng, mutation_rate).choices)
    return np.array(children[: config.population_size], dtype=np.int64)


def _duplicate_mask(pop):
    """True for every repeat of a chromosome already seen earlier in ``pop``."""
    _, first = np.unique(pop, axis=0, return_index=True)
    mask = np.ones(len(pop), dtype=bool)
    mask[first] = False
    return mask


def _incumbent_mask(objs, viol, weights, scale):
    """Marks the first feasible individual with the lowest history score."""
    mask = np.zeros(len(objs), dtype=bool)
    feas = np.flatnonzero(viol == 0.0)
    if len(feas):
        mask[feas[np.argmin(static_score(objs[feas], weights, scale))]] = True
    return mask


def _environmental_selection(pop, objs, viol, size, protect=None):
    """Best ``size`` by rank, then crowding (descending), then position.

    Repeated chromosomes are ranked after all distinct ones so copies do not
    crowd distinct front members out of the population. Individuals flagged in
    ``protect`` always survive, which keeps the best-score history monotone
    when crowding truncates an oversized first front.
    """
    rank, crowd = _rank_and_crowd(objs, viol)
    keep_first = ~protect if protect is not None else np.zeros(len(objs), dtype=bool)
    order = np.lexsort((np.arange(len(objs)), -crowd, rank, _duplicate_mask(pop), keep_first))
    return np.sort(order[:size]), rank, crowd


def run_nsga2(catalog: Catalog, prefs: Preferences, config: GaConfig | None = None) -> GaOutcome:
    config = config or GaConfig()
    config.validate()
    rng = SplitMix64(config.seed)
    evaluator = _Evaluator(catalog, prefs)
    sizes = catalog.sizes
    n_seg = len(sizes)
    mutation_rate = config.resolved_mutation_rate(n_seg)
    weights = prefs.objective_weights
    scale = catalog_scale(catalog)
    P = config.population_size

    pop = np.array([[rng.integers(sizes[s]) for s in range(n_seg)] for _ in range(P)], dtype=np.int64)
    objs, viol = evaluator(pop)
    rank, crowd = _rank_and_crowd(objs, viol)
    history = [_best_score(objs, viol, weights, scale)]
    key = _front_key(objs, viol, rank)
    last_change = 0
    generation = 0
    for generation in range(1, config.max_generations + 1):
        kids = _make_offspring(pop, rank, crowd, rng, config, sizes, mutation_rate)
        k_objs, k_viol = evaluator(kids)
        u_pop = np.vstack([pop, kids])
        u_objs = np.vstack([objs, k_objs])
        u_viol = np.concatenate([viol, k_viol])
        keep, u_rank, u_crowd = _environmental_selection(
            u_pop, u_objs, u_viol, P, _incumbent_mask(u_objs, u_viol, weights, scale))
        pop, objs, viol = u_pop[keep], u_objs[keep], u_viol[keep]
        rank, crowd = u_rank[keep], u_crowd[keep]
        history.append(_best_score(objs, viol, weights, scale))
        new_key = _front_key(objs, viol, rank)
        if new_key != key:
            key = new_key
            last_change = generation
        if generation - last_change >= config.stagnation_window:
            break

    final_rank, final_crowd = _rank_and_crowd(objs, viol)
    front, seen = [], set()
    for i in np.flatnonzero((final_rank == 0) & (viol == 0.0)):
        genes = tuple(int(g) for g in pop[i])
        if genes in seen:
            continue
        seen.add(genes)
        front.append(RankedIndividual(Itinerary(genes), ObjectiveVector(*map(float, objs[i])), 0.0, 0,
                                      float(final_crowd[i]), int(i)))
    if not front:
        raise NoFeasibleSolution(
            f"no feasible itinerary after {generation} generations (best violation {float(viol.min()):.4g})"
        )
    front.sort(key=lambda r: r.itinerary.choices)
    return GaOutcome(
        pareto_front=front,
        recommended=pick_recommended(front, prefs, catalog),
        generations_run=generation,
        evaluations=evaluator.calls,
        history=history,
        converged_generation=last_change,
        population_size=P,
    )


def scalarize(front: Sequence[RankedIndividual], weights) -> np.ndarray:
    """Weighted sum of min-max normalized objectives over ``front``; zero range gives 0."""
    objs = np.array([r.objectives for r in front], dtype=float)
    lo, hi = objs.min(axis=0), objs.max(axis=0)
    span = hi - lo
    norm = np.divide(objs - lo, span, out=np.zeros_like(objs), where=span > 0)
    return norm @ np.asarray(weights, dtype=float)


def pick_recommended(front: Sequence[RankedIndividual], prefs: Preferences, catalog: Catalog | None = None) -> Itinerary:
    """Front member minimizing the weighted normalized objectives.

    With ``catalog`` given and soft preferences declared, only members that
    match the most soft preferences are eligible; normalization still spans
    the whole front. Ties go to the lexicographically smallest chromosome.
    """
    if not front:
        raise EmptyFront("cannot recommend from an empty front")
    scores = scalarize(front, prefs.objective_weights)
    eligible = range(len(front))
    if catalog is not None and prefs.preferred_attributes:
        matches = [soft_match_count(r.itinerary, catalog, prefs) for r in front]
        best = max(matches)
        eligible = [i for i in eligible if matches[i] == best]
    i = min(eligible, key=lambda k: (scores[k], front[k].itinerary.choices))
    return front[i].itinerary


class NSGA2Optimizer(BaseEstimator):
    """Estimator front-end for :func:`run_nsga2`.

    ``fit(catalog, prefs)`` stores the outcome in ``outcome_`` and exposes
    ``pareto_front_``, ``recommended_`` and ``n_evaluations_``.
    """

    def __init__(self, population_size=100, max_generations=100, crossover_rate=0.9, mutation_rate=None,
                 tournament_size=2, seed=0, stagnation_window=20):
        self.population_size = population_size
        self.max_generations = max_generations
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.tournament_size = tournament_size
        self.seed = seed
        self.stagnation_window = stagnation_window

    @property
    def config(self) -> GaConfig:
        return GaConfig(**self.get_params())

    def fit(self, X: Catalog, y: Preferences):
        self.outcome_ = run_nsga2(X, y, self.config)
        self.pareto_front_ = self.outcome_.pareto_front
        self.recommended_ = self.outcome_.recommended
        self.n_evaluations_ = self.outcome_.evaluations
        return self
