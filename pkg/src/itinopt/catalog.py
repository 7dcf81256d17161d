"""Synthetic catalogs, cost-history datasets and catalog files.

Generation draws from :class:`~itinopt._rng.SplitMix64` in a fixed order, so
catalogs are a pure function of the :class:`GeneratorSpec`. Per segment, per
option: cost uniform, duration uniform, emissions uniform, then one integer
per attribute tag in sorted tag order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from ._rng import SplitMix64
from .domain import KINDS, Catalog, Segment, TravelOption
from .exceptions import InvalidSpec, ParseError, SchemaViolation

SCHEMA_VERSION = 1
EMISSIONS_MODELS = ("independent", "cost_anticorrelated")
COST_HISTORY_HEADER = ("days_to_departure", "season_index", "demand_factor", "distance", "observed_price")

DEFAULT_VOCAB = {
    "carrier": ("EcoAir", "SkyJet", "BudgetWings"),
    "tier": ("basic", "standard", "premium"),
}

# share of the emissions draw taken from the inverted cost quantile
_ANTICORRELATION = 0.6


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int = 0
    num_segments: int = 4
    options_per_segment: int = 6
    cost_range: tuple[float, float] = (50.0, 500.0)
    duration_range: tuple[float, float] = (1.0, 12.0)
    emissions_range: tuple[float, float] = (10.0, 300.0)
    emissions_model: str = "cost_anticorrelated"
    attribute_vocab: Mapping[str, Sequence[str]] = field(default_factory=lambda: dict(DEFAULT_VOCAB))

    def validate(self) -> None:
        if self.num_segments < 1:
            raise InvalidSpec("num_segments must be >= 1")
        if self.options_per_segment < 2:
            raise InvalidSpec("options_per_segment must be >= 2")
        for name in ("cost_range", "duration_range", "emissions_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or not lo < hi:
                raise InvalidSpec(f"{name} must satisfy 0 <= min < max, got {(lo, hi)}")
        if self.emissions_model not in EMISSIONS_MODELS:
            raise InvalidSpec(f"emissions_model must be one of {EMISSIONS_MODELS}")
        for tag, values in self.attribute_vocab.items():
            if not values:
                raise InvalidSpec(f"attribute_vocab[{tag!r}] is empty")


def generate_catalog(spec: GeneratorSpec) -> Catalog:
    spec.validate()
    rng = SplitMix64(spec.seed)
    c_lo, c_hi = spec.cost_range
    d_lo, d_hi = spec.duration_range
    e_lo, e_hi = spec.emissions_range
    tags = sorted(spec.attribute_vocab)
    segments = []
    for s in range(spec.num_segments):
        kind = KINDS[s % len(KINDS)]
        options = []
        for j in range(spec.options_per_segment):
            u_cost = rng.random()
            u_dur = rng.random()
            u_em = rng.random()
            if spec.emissions_model == "cost_anticorrelated":
                u_em = _ANTICORRELATION * (1.0 - u_cost) + (1.0 - _ANTICORRELATION) * u_em
            attrs = {}
            for tag in tags:
                values = spec.attribute_vocab[tag]
                attrs[tag] = str(values[rng.integers(len(values))])
            options.append(
                TravelOption(
                    id=f"s{s}o{j}",
                    segment_index=s,
                    kind=kind,
                    cost=round(c_lo + (c_hi - c_lo) * u_cost, 2),
                    duration=round(d_lo + (d_hi - d_lo) * u_dur, 2),
                    emissions=round(e_lo + (e_hi - e_lo) * u_em, 2),
                    attributes=attrs,
                )
            )
        segments.append(Segment(index=s, label=f"{kind}-{s}", options=tuple(options)))
    return Catalog(segments=tuple(segments), seed=spec.seed)


def green_flags(catalog: Catalog) -> list[list[bool]]:
    """Per option: emissions at or below the 25th percentile of its segment."""
    flags = []
    for seg in catalog.segments:
        em = np.array([o.emissions for o in seg.options])
        threshold = np.percentile(em, 25)
        flags.append([bool(e <= threshold) for e in em])
    return flags


class CostHistoryRow(NamedTuple):
    days_to_departure: float
    season_index: int
    demand_factor: float
    distance: float
    observed_price: float

    @property
    def features(self) -> tuple[float, float, float, float]:
        return (self.days_to_departure, float(self.season_index), self.demand_factor, self.distance)


def generate_cost_history(
    seed: int,
    n_rows: int,
    true_coefficients: Sequence[float],
    sigma: float = 5.0,
) -> list[CostHistoryRow]:
    """Rows with ``price = coef . [1, days, season, demand, distance] + N(0, sigma)``, clamped at 0.

    Features: days ~ U[0, 90), season uniform on {0..3}, demand ~ U[0.5, 2),
    distance ~ U[200, 3000).
    """
    if n_rows < 1:
        raise InvalidSpec("n_rows must be >= 1")
    if len(true_coefficients) != 5:
        raise InvalidSpec("true_coefficients must have 5 entries (intercept + 4 features)")
    if not sigma >= 0:
        raise InvalidSpec("sigma must be >= 0")
    b = [float(x) for x in true_coefficients]
    rng = SplitMix64(seed)
    rows = []
    for _ in range(n_rows):
        days = rng.uniform(0.0, 90.0)
        season = rng.integers(4)
        demand = rng.uniform(0.5, 2.0)
        distance = rng.uniform(200.0, 3000.0)
        price = b[0] + b[1] * days + b[2] * season + b[3] * demand + b[4] * distance
        if sigma > 0:
            price += rng.normal(0.0, sigma)
        rows.append(CostHistoryRow(days, season, demand, distance, max(0.0, price)))
    return rows


def write_cost_history(rows: Sequence[CostHistoryRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COST_HISTORY_HEADER)
        for r in rows:
            writer.writerow([repr(float(r.days_to_departure)), r.season_index, repr(float(r.demand_factor)),
                             repr(float(r.distance)), repr(float(r.observed_price))])


def read_cost_history(path) -> list[CostHistoryRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COST_HISTORY_HEADER:
            raise ParseError(f"{path}: line 1: expected header {','.join(COST_HISTORY_HEADER)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                d, s, dem, dist, p = rec
                rows.append(CostHistoryRow(float(d), int(s), float(dem), float(dist), float(p)))
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    return rows


def catalog_to_json(catalog: Catalog) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **catalog.to_dict()}
    return json.dumps(doc, indent=2, sort_keys=False)


def catalog_from_document(doc, source: str = "<document>") -> Catalog:
    if not isinstance(doc, Mapping):
        raise ParseError(f"{source}: top level must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"{source}: field 'schema_version': expected {SCHEMA_VERSION}, got {version!r}")
    if not isinstance(doc.get("segments"), list):
        raise ParseError(f"{source}: field 'segments': expected a list")
    segments = []
    for i, seg in enumerate(doc["segments"]):
        where = f"segments[{i}]"
        try:
            options = seg["options"]
            if not isinstance(options, list):
                raise ParseError(f"{source}: field '{where}.options': expected a list")
            if not options:
                raise SchemaViolation(f"{source}: segment {i} ({seg.get('label', '')!r}) has no options")
            opts = []
            for j, o in enumerate(options):
                try:
                    opts.append(TravelOption.from_dict(o))
                except (KeyError, TypeError, ValueError) as exc:
                    if isinstance(exc, SchemaViolation):
                        raise
                    raise ParseError(f"{source}: field '{where}.options[{j}]': {exc!r}") from None
            segments.append(Segment(index=int(seg["index"]), label=str(seg.get("label", "")), options=tuple(opts)))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{source}: field '{where}': missing or malformed {exc}") from None
    return Catalog(segments=tuple(segments), seed=int(doc.get("seed", 0)))


def load_catalog(path) -> Catalog:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return catalog_from_document(doc, str(path))


def save_catalog(catalog: Catalog, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(catalog_to_json(catalog) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def cost_history_to_csv(rows: Sequence[CostHistoryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COST_HISTORY_HEADER)
    for r in rows:
        writer.writerow(list(r))
    return buf.getvalue()
