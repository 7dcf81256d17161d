"""Sustainable multi-objective itinerary optimization.

Typical use::

    from itinopt import GeneratorSpec, Preferences, generate_catalog, run_nsga2

    catalog = generate_catalog(GeneratorSpec(seed=42))
    outcome = run_nsga2(catalog, Preferences(budget=1200, max_time=30))
"""

from .catalog import GeneratorSpec, generate_catalog, green_flags, load_catalog, save_catalog
from .costmodel import CatalogRepricer, CostModel, CostRegressor, PricingContext, reprice_catalog
from .domain import (
    Catalog,
    FeasibilityReport,
    Itinerary,
    ObjectiveVector,
    Preferences,
    Segment,
    TravelOption,
    dominates,
    evaluate,
    is_feasible,
)
from .exceptions import ItinOptError
from .greedy import AnnealConfig, GreedySustainOptimizer, anneal_refine, greedy_optimize
from .nsga2 import GaConfig, GaOutcome, NSGA2Optimizer, pick_recommended, run_nsga2
from .preferences import MatchReport, PreferenceFilter, matching_rate, prune

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig",
    "Catalog",
    "CatalogRepricer",
    "CostModel",
    "CostRegressor",
    "FeasibilityReport",
    "GaConfig",
    "GaOutcome",
    "GeneratorSpec",
    "GreedySustainOptimizer",
    "ItinOptError",
    "Itinerary",
    "MatchReport",
    "NSGA2Optimizer",
    "ObjectiveVector",
    "PreferenceFilter",
    "Preferences",
    "PricingContext",
    "Segment",
    "TravelOption",
    "anneal_refine",
    "dominates",
    "evaluate",
    "generate_catalog",
    "green_flags",
    "greedy_optimize",
    "is_feasible",
    "load_catalog",
    "matching_rate",
    "pick_recommended",
    "prune",
    "reprice_catalog",
    "run_nsga2",
    "save_catalog",
]
