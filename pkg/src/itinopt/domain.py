"""Shared domain types plus the dominance and feasibility primitives.

All objectives are minimized. Types are frozen dataclasses and every function
here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .exceptions import IndexOutOfRange, SchemaViolation

KINDS = ("flight", "lodging", "ground", "activity")


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise SchemaViolation(f"{name} must be finite and >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class TravelOption:
    id: str
    segment_index: int
    kind: str
    cost: float
    duration: float
    emissions: float
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaViolation(f"option {self.id!r}: unknown kind {self.kind!r}")
        for name in ("cost", "duration", "emissions"):
            object.__setattr__(self, name, _check_nonneg(f"option {self.id!r} {name}", getattr(self, name)))
        object.__setattr__(self, "attributes", dict(self.attributes))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "segment_index": self.segment_index,
            "kind": self.kind,
            "cost": self.cost,
            "duration": self.duration,
            "emissions": self.emissions,
            "attributes": dict(sorted(self.attributes.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TravelOption":
        return cls(
            id=str(d["id"]),
            segment_index=int(d["segment_index"]),
            kind=d["kind"],
            cost=d["cost"],
            duration=d["duration"],
            emissions=d["emissions"],
            attributes={str(k): str(v) for k, v in d.get("attributes", {}).items()},
        )


@dataclass(frozen=True)
class Segment:
    index: int
    label: str
    options: tuple[TravelOption, ...]

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise SchemaViolation(f"segment {self.index} ({self.label!r}) has no options")
        for opt in self.options:
            if opt.segment_index != self.index:
                raise SchemaViolation(
                    f"segment {self.index}: option {opt.id!r} carries segment_index {opt.segment_index}"
                )

    @property
    def kind(self) -> str:
        return self.options[0].kind

    def to_dict(self) -> dict:
        return {"index": self.index, "label": self.label, "options": [o.to_dict() for o in self.options]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Segment":
        return cls(
            index=int(d["index"]),
            label=str(d.get("label", "")),
            options=tuple(TravelOption.from_dict(o) for o in d["options"]),
        )


@dataclass(frozen=True)
class Catalog:
    segments: tuple[Segment, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise SchemaViolation("catalog has no segments")
        seen = set()
        for i, seg in enumerate(self.segments):
            if seg.index != i:
                raise SchemaViolation(f"segment at position {i} has index {seg.index}; expected {i}")
            for opt in seg.options:
                if opt.id in seen:
                    raise SchemaViolation(f"duplicate option id {opt.id!r}")
                seen.add(opt.id)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s.options) for s in self.segments)

    def option(self, segment: int, choice: int) -> TravelOption:
        return self.segments[segment].options[choice]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Catalog":
        return cls(segments=tuple(Segment.from_dict(s) for s in d["segments"]), seed=int(d.get("seed", 0)))


@dataclass(frozen=True)
class Itinerary:
    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))

    def __len__(self):
        return len(self.choices)

    def to_dict(self) -> dict:
        return {"choices": list(self.choices)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Itinerary":
        return cls(tuple(d["choices"]))


class ObjectiveVector(NamedTuple):
    cost: float
    time: float
    emissions: float

    def to_dict(self) -> dict:
        return {"cost": self.cost, "time": self.time, "emissions": self.emissions}


class AttributePreference(NamedTuple):
    kind: str
    tag: str
    value: str

    def label(self) -> str:
        return f"{self.kind}.{self.tag}={self.value}"


def _as_attr_prefs(items: Iterable) -> tuple[AttributePreference, ...]:
    out = []
    for it in items:
        if isinstance(it, Mapping):
            it = (it["kind"], it["tag"], it["value"])
        pref = AttributePreference(*(str(x) for x in it))
        if pref.kind not in KINDS:
            raise SchemaViolation(f"attribute preference {pref.label()}: unknown kind")
        out.append(pref)
    return tuple(out)


@dataclass(frozen=True)
class Preferences:
    """Hard bounds, attribute preferences and objective weights of one request.

    ``objective_weights`` are normalized to sum to 1 on construction.
    """

    budget: float
    max_time: float
    emissions_cap: float | None = None
    required_attributes: tuple[AttributePreference, ...] = ()
    preferred_attributes: tuple[AttributePreference, ...] = ()
    objective_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        for name in ("budget", "max_time"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise SchemaViolation(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)
        if self.emissions_cap is not None:
            cap = float(self.emissions_cap)
            if not math.isfinite(cap) or cap <= 0:
                raise SchemaViolation(f"emissions_cap must be finite and > 0, got {cap!r}")
            object.__setattr__(self, "emissions_cap", cap)
        object.__setattr__(self, "required_attributes", _as_attr_prefs(self.required_attributes))
        object.__setattr__(self, "preferred_attributes", _as_attr_prefs(self.preferred_attributes))
        w = tuple(float(x) for x in self.objective_weights)
        if len(w) != 3 or any(not math.isfinite(x) or x < 0 for x in w) or sum(w) <= 0:
            raise SchemaViolation(f"objective_weights must be three non-negative numbers, not all 0: {w!r}")
        total = sum(w)
        object.__setattr__(self, "objective_weights", tuple(x / total for x in w))

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "max_time": self.max_time,
            "emissions_cap": self.emissions_cap,
            "required_attributes": [p._asdict() for p in self.required_attributes],
            "preferred_attributes": [p._asdict() for p in self.preferred_attributes],
            "objective_weights": list(self.objective_weights),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Preferences":
        return cls(
            budget=d["budget"],
            max_time=d["max_time"],
            emissions_cap=d.get("emissions_cap"),
            required_attributes=d.get("required_attributes", ()),
            preferred_attributes=d.get("preferred_attributes", ()),
            objective_weights=tuple(d.get("objective_weights", (1, 1, 1))),
        )


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[str, ...]
    total_violation: float

    @property
    def feasible(self) -> bool:
        return not self.violations


def check_itinerary(itinerary: Itinerary, catalog: Catalog) -> None:
    if len(itinerary.choices) != catalog.n_segments:
        raise IndexOutOfRange(
            f"itinerary has {len(itinerary.choices)} choices for {catalog.n_segments} segments"
        )
    for s, (c, n) in enumerate(zip(itinerary.choices, catalog.sizes)):
        if not 0 <= c < n:
            raise IndexOutOfRange(f"choice {c} out of range for segment {s} with {n} options")


def chosen_options(itinerary: Itinerary, catalog: Catalog) -> list[TravelOption]:
    check_itinerary(itinerary, catalog)
    return [seg.options[c] for seg, c in zip(catalog.segments, itinerary.choices)]


def evaluate(itinerary: Itinerary, catalog: Catalog) -> ObjectiveVector:
    cost = time = emissions = 0.0
    for opt in chosen_options(itinerary, catalog):
        cost += opt.cost
        time += opt.duration
        emissions += opt.emissions
    return ObjectiveVector(cost, time, emissions)


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    strictly = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


def attribute_satisfied(pref: AttributePreference, options: Sequence[TravelOption]) -> bool:
    """Every chosen option of ``pref.kind`` carries ``tag == value``; vacuous if none."""
    return all(o.attributes.get(pref.tag) == pref.value for o in options if o.kind == pref.kind)


def is_feasible(itinerary: Itinerary, catalog: Catalog, prefs: Preferences) -> FeasibilityReport:
    options = chosen_options(itinerary, catalog)
    obj = evaluate(itinerary, catalog)
    violations = []
    total = 0.0
    for name, value, bound in (
        ("budget", obj.cost, prefs.budget),
        ("max_time", obj.time, prefs.max_time),
        ("emissions_cap", obj.emissions, prefs.emissions_cap),
    ):
        if bound is not None and value > bound:
            violations.append(name)
            total += (value - bound) / bound
    # a violated attribute requirement counts as one full bound's worth of excess
    for req in prefs.required_attributes:
        if not attribute_satisfied(req, options):
            violations.append(f"required:{req.label()}")
            total += 1.0
    return FeasibilityReport(tuple(violations), total)
