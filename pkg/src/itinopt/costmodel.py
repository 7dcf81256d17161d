"""Least-squares price model and catalog repricing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .catalog import CostHistoryRow, generate_cost_history
from .domain import Catalog, Segment
from .exceptions import InsufficientData, InvalidSpec, SingularDesign

RIDGE_LAMBDA = 1e-8
MIN_ROWS = 5
N_COEF = 5
# above this condition number the plain normal equations are treated as singular
_COND_LIMIT = 1e12


class PricingContext(NamedTuple):
    days_to_departure: float = 30.0
    season_index: int = 0
    demand_factor: float = 1.0
    distance: float = 0.0

    def validate(self) -> None:
        vals = (self.days_to_departure, self.season_index, self.demand_factor, self.distance)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidSpec("pricing context values must be finite")
        if self.days_to_departure < 0:
            raise InvalidSpec("days_to_departure must be >= 0")
        if self.season_index not in (0, 1, 2, 3):
            raise InvalidSpec("season_index must be one of 0..3")
        if self.demand_factor < 0:
            raise InvalidSpec("demand_factor must be >= 0")

    def features(self) -> np.ndarray:
        return np.array([1.0, self.days_to_departure, float(self.season_index), self.demand_factor, self.distance])

    def to_dict(self) -> dict:
        return self._asdict()

    @classmethod
    def from_dict(cls, d) -> "PricingContext":
        ctx = cls(
            float(d.get("days_to_departure", 30.0)),
            int(d.get("season_index", 0)),
            float(d.get("demand_factor", 1.0)),
            float(d.get("distance", 0.0)),
        )
        ctx.validate()
        return ctx


REFERENCE_CONTEXT = PricingContext(days_to_departure=30.0, season_index=0, demand_factor=1.0, distance=0.0)


@dataclass(frozen=True)
class CostModel:
    coefficients: tuple[float, ...]
    residual_std: float
    n_trained: int
    standard_errors: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.coefficients) != N_COEF or not all(math.isfinite(c) for c in self.coefficients):
            raise InvalidSpec(f"CostModel needs {N_COEF} finite coefficients")

    def to_json(self) -> str:
        return json.dumps({
            "coefficients": list(self.coefficients),
            "residual_std": self.residual_std,
            "n_trained": self.n_trained,
            "standard_errors": list(self.standard_errors),
        })

    @classmethod
    def from_json(cls, text: str) -> "CostModel":
        d = json.loads(text)
        return cls(tuple(d["coefficients"]), float(d["residual_std"]), int(d["n_trained"]),
                   tuple(d.get("standard_errors", ())))


def _solve_normal_equations(X: np.ndarray, y: np.ndarray):
    xtx = X.T @ X
    xty = X.T @ y
    if np.linalg.cond(xtx) < _COND_LIMIT:
        try:
            return np.linalg.solve(xtx, xty), xtx
        except np.linalg.LinAlgError:
            pass
    ridged = xtx + RIDGE_LAMBDA * np.eye(len(xtx))
    try:
        beta = np.linalg.solve(ridged, xty)
    except np.linalg.LinAlgError:
        raise SingularDesign("design matrix is singular even with ridge stabilization") from None
    if not np.all(np.isfinite(beta)):
        raise SingularDesign("ridge-stabilized solve produced non-finite coefficients")
    return beta, ridged


def fit_arrays(X: np.ndarray, y: np.ndarray) -> CostModel:
    """OLS on a feature matrix without intercept column; the intercept is added here."""
    n = len(y)
    if n < MIN_ROWS:
        raise InsufficientData(f"need at least {MIN_ROWS} rows, got {n}")
    design = np.column_stack([np.ones(n), X])
    beta, xtx = _solve_normal_equations(design, y)
    resid = y - design @ beta
    dof = n - design.shape[1]
    residual_std = float(math.sqrt(resid @ resid / dof)) if dof > 0 else 0.0
    try:
        cov = residual_std ** 2 * np.linalg.inv(xtx)
        se = tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(cov))
    except np.linalg.LinAlgError:
        se = ()
    return CostModel(tuple(float(b) for b in beta), residual_std, n, se)


def fit(history: Sequence[CostHistoryRow]) -> CostModel:
    if len(history) < MIN_ROWS:
        raise InsufficientData(f"need at least {MIN_ROWS} rows, got {len(history)}")
    X = np.array([r.features for r in history], dtype=float)
    y = np.array([r.observed_price for r in history], dtype=float)
    return fit_arrays(X, y)


def predict(model: CostModel, ctx: PricingContext) -> float:
    return max(0.0, float(np.dot(model.coefficients, PricingContext(*ctx).features())))


def reprice_catalog(catalog: Catalog, model: CostModel, ctx: PricingContext) -> Catalog:
    """Scale every option cost by ``predict(ctx) / predict(REFERENCE_CONTEXT)``.

    A non-positive reference prediction leaves the catalog unchanged.
    """
    ref = predict(model, REFERENCE_CONTEXT)
    ratio = predict(model, ctx) / ref if ref > 0 else 1.0
    if ratio == 1.0:
        return catalog
    segments = tuple(
        Segment(seg.index, seg.label, tuple(replace(o, cost=o.cost * ratio) for o in seg.options))
        for seg in catalog.segments
    )
    return replace(catalog, segments=segments)


class CostRegressor(RegressorMixin, BaseEstimator):
    """scikit-learn regressor over the four pricing features.

    ``X`` columns: days_to_departure, season_index, demand_factor, distance.
    Predictions are clamped at zero.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if X.shape[1] != N_COEF - 1:
            raise ValueError(f"expected {N_COEF - 1} feature columns, got {X.shape[1]}")
        self.model_ = fit_arrays(X, y)
        self.intercept_ = self.model_.coefficients[0]
        self.coef_ = np.array(self.model_.coefficients[1:])
        self.residual_std_ = self.model_.residual_std
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return np.maximum(0.0, self.intercept_ + X @ self.coef_)


class CatalogRepricer(TransformerMixin, BaseEstimator):
    """Transformer applying :func:`reprice_catalog` with a fitted model."""

    def __init__(self, model: CostModel | None = None, context: PricingContext = REFERENCE_CONTEXT):
        self.model = model
        self.context = context

    def fit(self, X=None, y=None):
        if self.model is None:
            raise ValueError("CatalogRepricer needs a fitted CostModel")
        PricingContext(*self.context).validate()
        return self

    def transform(self, X: Catalog) -> Catalog:
        return reprice_catalog(X, self.model, PricingContext(*self.context))


DEFAULT_TRUE_COEFFICIENTS = (50.0, -0.5, 20.0, 30.0, 0.1)


def default_cost_model(seed: int = 0, n_rows: int = 500) -> CostModel:
    """Model fitted on a seeded synthetic history; used when no model is supplied."""
    return fit(generate_cost_history(seed, n_rows, DEFAULT_TRUE_COEFFICIENTS))
