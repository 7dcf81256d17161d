"""Preference constraints: compile, catalog pruning and the matching rate."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .domain import (
    AttributePreference,
    Catalog,
    Itinerary,
    Preferences,
    Segment,
    TravelOption,
    attribute_satisfied,
    chosen_options,
    evaluate,
)

BOUND_KINDS = ("budget", "max_time", "emissions_cap")


class AttributeRequirement(NamedTuple):
    segment_kind: str
    tag: str
    value: str
    hard: bool

    @property
    def preference(self) -> AttributePreference:
        return AttributePreference(self.segment_kind, self.tag, self.value)


@dataclass(frozen=True)
class ConstraintSet:
    bounds: tuple[tuple[str, float], ...]
    attribute_requirements: tuple[AttributeRequirement, ...] = ()

    def __post_init__(self):
        kinds = [k for k, _ in self.bounds]
        if len(kinds) != len(set(kinds)):
            raise ValueError(f"duplicate bound kinds in {kinds}")
        for k, v in self.bounds:
            if k not in BOUND_KINDS or v < 0:
                raise ValueError(f"invalid bound ({k}, {v})")

    def bound(self, kind: str) -> float | None:
        return dict(self.bounds).get(kind)

    @property
    def hard(self) -> tuple[AttributeRequirement, ...]:
        return tuple(r for r in self.attribute_requirements if r.hard)


@dataclass(frozen=True)
class MatchReport:
    satisfied: int
    total: int
    rate: float
    per_preference: tuple[tuple[str, bool], ...]

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "total": self.total,
            "rate": self.rate,
            "per_preference": [{"preference": p, "satisfied": ok} for p, ok in self.per_preference],
        }

    @classmethod
    def from_dict(cls, d) -> "MatchReport":
        return cls(
            satisfied=int(d["satisfied"]),
            total=int(d["total"]),
            rate=float(d["rate"]),
            per_preference=tuple((p["preference"], bool(p["satisfied"])) for p in d["per_preference"]),
        )


def compile(prefs: Preferences) -> ConstraintSet:  # noqa: A001 - mirrors the service verb
    bounds = [("budget", prefs.budget), ("max_time", prefs.max_time)]
    if prefs.emissions_cap is not None:
        bounds.append(("emissions_cap", prefs.emissions_cap))
    reqs = [AttributeRequirement(*p, hard=True) for p in prefs.required_attributes]
    reqs += [AttributeRequirement(*p, hard=False) for p in prefs.preferred_attributes]
    return ConstraintSet(tuple(bounds), tuple(reqs))


def _within_solo_bounds(opt: TravelOption, cs: ConstraintSet) -> bool:
    budget = cs.bound("budget")
    max_time = cs.bound("max_time")
    return (budget is None or opt.cost <= budget) and (max_time is None or opt.duration <= max_time)


def _meets_hard(opt: TravelOption, cs: ConstraintSet) -> bool:
    return all(
        opt.attributes.get(r.tag) == r.value for r in cs.hard if r.segment_kind == opt.kind
    )


def prune(catalog: Catalog, cs: ConstraintSet, diagnostics: list | None = None) -> Catalog:
    """Drop options that break a hard attribute requirement or alone exceed a bound.

    A segment is never emptied: hard attribute filters are relaxed first, and
    if the bounds alone still empty it the segment is kept whole. Each
    relaxation appends a message to ``diagnostics`` when given.
    """
    segments = []
    for seg in catalog.segments:
        kept = [o for o in seg.options if _within_solo_bounds(o, cs) and _meets_hard(o, cs)]
        if not kept:
            kept = [o for o in seg.options if _within_solo_bounds(o, cs)]
            if kept:
                msg = f"relaxed hard attribute requirements for segment {seg.index} ({seg.label})"
            else:
                kept = list(seg.options)
                msg = f"no option in segment {seg.index} ({seg.label}) fits the bounds; segment kept unpruned"
            if diagnostics is not None:
                diagnostics.append(msg)
        segments.append(seg if len(kept) == len(seg.options) else Segment(seg.index, seg.label, tuple(kept)))
    return replace(catalog, segments=tuple(segments))


def matching_rate(itinerary: Itinerary, catalog: Catalog, prefs: Preferences) -> MatchReport:
    """Share of budget, max_time and every hard or soft attribute preference that holds."""
    options = chosen_options(itinerary, catalog)
    obj = evaluate(itinerary, catalog)
    results = [
        ("budget", obj.cost <= prefs.budget),
        ("max_time", obj.time <= prefs.max_time),
    ]
    results += [(f"required:{p.label()}", attribute_satisfied(p, options)) for p in prefs.required_attributes]
    results += [(f"preferred:{p.label()}", attribute_satisfied(p, options)) for p in prefs.preferred_attributes]
    satisfied = sum(ok for _, ok in results)
    return MatchReport(satisfied, len(results), satisfied / len(results), tuple(results))


def soft_match_count(itinerary: Itinerary, catalog: Catalog, prefs: Preferences) -> int:
    options = chosen_options(itinerary, catalog)
    return sum(attribute_satisfied(p, options) for p in prefs.preferred_attributes)


class PreferenceFilter(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`compile` and :func:`prune`.

    ``fit`` compiles the preferences; ``transform`` prunes a catalog and keeps
    the relaxation messages in ``diagnostics_``.
    """

    def __init__(self, preferences: Preferences | None = None):
        self.preferences = preferences

    def fit(self, X=None, y=None):
        if self.preferences is None:
            raise ValueError("PreferenceFilter needs preferences")
        self.constraints_ = compile(self.preferences)
        return self

    def transform(self, X: Catalog) -> Catalog:
        check_is_fitted(self, "constraints_")
        self.diagnostics_ = []
        return prune(X, self.constraints_, self.diagnostics_)
