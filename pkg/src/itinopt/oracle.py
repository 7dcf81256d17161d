"""Exhaustive reference solutions for small catalogs.

Enumerates every itinerary with :func:`itertools.product` and plain Python
summation. Shares nothing with the optimizers beyond the domain types, so it
can serve as an independent check on them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .domain import Catalog, Itinerary, Preferences, attribute_satisfied

MAX_ENUMERATION = 200_000


@dataclass(frozen=True)
class Enumeration:
    choices: np.ndarray  # (n, segments) int
    objectives: np.ndarray  # (n, 3) float
    within_bounds: np.ndarray  # budget and max_time only
    feasible: np.ndarray  # all hard constraints

    def __len__(self):
        return len(self.choices)


def enumerate_itineraries(catalog: Catalog, prefs: Preferences | None = None) -> Enumeration:
    total = math.prod(catalog.sizes)
    if total > MAX_ENUMERATION:
        raise ValueError(f"{total} itineraries exceed the enumeration limit of {MAX_ENUMERATION}")
    rows, objs, bounded, feas = [], [], [], []
    for combo in itertools.product(*(range(n) for n in catalog.sizes)):
        opts = [catalog.segments[s].options[c] for s, c in enumerate(combo)]
        cost = sum(o.cost for o in opts)
        time = sum(o.duration for o in opts)
        em = sum(o.emissions for o in opts)
        rows.append(combo)
        objs.append((cost, time, em))
        if prefs is None:
            bounded.append(True)
            feas.append(True)
            continue
        ok = cost <= prefs.budget and time <= prefs.max_time
        bounded.append(ok)
        if prefs.emissions_cap is not None and em > prefs.emissions_cap:
            ok = False
        if not all(attribute_satisfied(r, opts) for r in prefs.required_attributes):
            ok = False
        feas.append(ok)
    return Enumeration(
        np.array(rows, dtype=np.int64),
        np.array(objs, dtype=np.float64),
        np.array(bounded, dtype=bool),
        np.array(feas, dtype=bool),
    )


def pareto_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of points not dominated by any other point (minimization)."""
    n = len(points)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        le = np.all(points <= points[i], axis=1)
        lt = np.any(points < points[i], axis=1)
        if np.any(le & lt):
            keep[i] = False
    return keep


@dataclass(frozen=True)
class ParetoReference:
    itineraries: list[Itinerary]
    objectives: np.ndarray

    def vector_set(self) -> set[tuple[float, float, float]]:
        return {tuple(map(float, v)) for v in self.objectives}


def pareto_front(catalog: Catalog, prefs: Preferences | None = None) -> ParetoReference:
    """True constrained Pareto set: feasible itineraries no feasible itinerary dominates."""
    en = enumerate_itineraries(catalog, prefs)
    idx = np.flatnonzero(en.feasible)
    mask = pareto_mask(en.objectives[idx])
    sel = idx[mask]
    return ParetoReference([Itinerary(tuple(r)) for r in en.choices[sel]], en.objectives[sel])


def min_emissions(catalog: Catalog, prefs: Preferences | None = None, bounds_only: bool = True):
    """Minimum-emission itinerary (subject to budget/max_time if ``prefs`` given)."""
    en = enumerate_itineraries(catalog, prefs)
    ok = en.within_bounds if bounds_only else en.feasible
    if not ok.any():
        return None, math.inf
    idx = np.flatnonzero(ok)
    best = idx[np.argmin(en.objectives[idx, 2])]
    return Itinerary(tuple(en.choices[best])), float(en.objectives[best, 2])


def dominated_by_reference(points, reference: np.ndarray) -> np.ndarray:
    """For each point, whether some reference vector dominates it."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(points), dtype=bool)
    for i, p in enumerate(points):
        le = np.all(reference <= p, axis=1)
        lt = np.any(reference < p, axis=1)
        out[i] = bool(np.any(le & lt))
    return out
