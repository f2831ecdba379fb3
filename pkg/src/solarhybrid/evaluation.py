"""Error metrics, reference forecasts, seasonal ranking and reliability bands."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .ingest import NBH


class EvaluationError(ValueError):
    pass


def nrmse(measured, predicted) -> float:
    """Root-mean-square error normalized by the root mean square of the measurements."""
    x = np.asarray(measured, dtype=np.float64)
    y = np.asarray(predicted, dtype=np.float64)
    if x.shape != y.shape or x.size == 0:
        raise EvaluationError("nrmse needs two non-empty arrays of equal shape")
    denom = np.mean(x ** 2)
    if denom <= 0:
        raise EvaluationError("all-zero measurements")
    return float(np.sqrt(np.mean((x - y) ** 2) / denom))


def coefficient_of_variation(values) -> float:
    """Population standard deviation divided by the mean."""
    v = np.asarray(values, dtype=np.float64)
    mean = v.mean()
    if mean == 0:
        raise EvaluationError("zero mean")
    return float(v.std() / mean)


class Baseline(str, Enum):
    PERSISTENCE = "Persistence"
    CLEAR_SKY = "Clear Sky"
    AVERAGE = "Average"


def persistence_forecast(measured) -> np.ndarray:
    """``out[t] = measured[t-1]``; the first entry has no predecessor and is NaN."""
    x = np.asarray(measured, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    out[1:] = x[:-1]
    return out


def slot_climatology(values, slots, nbh: int = NBH) -> np.ndarray:
    """Mean of ``values`` per slot; NaN where a slot has no sample."""
    values = np.asarray(values, dtype=np.float64)
    slots = np.asarray(slots, dtype=np.int64)
    ok = np.isfinite(values)
    sums = np.bincount(slots[ok], weights=values[ok], minlength=nbh)[:nbh]
    counts = np.bincount(slots[ok], minlength=nbh)[:nbh]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def baseline_forecast(kind: Baseline | str, *, measured=None, clearsky=None,
                      climatology=None, slots=None) -> np.ndarray:
    """Reference forecasts aligned with the target samples.

    Persistence repeats the previous measurement, Clear Sky returns the clear-sky
    radiation at the target hour, Average returns the training mean of the target's
    (day-of-year, hour) slot.
    """
    kind = Baseline(kind)
    if kind is Baseline.PERSISTENCE:
        if measured is None or len(measured) < 2:
            raise EvaluationError("persistence needs at least one prior sample")
        return persistence_forecast(measured)
    if kind is Baseline.CLEAR_SKY:
        if clearsky is None:
            raise EvaluationError("clear-sky baseline needs fitted clear-sky radiation")
        return np.asarray(clearsky, dtype=np.float64).copy()
    if climatology is None or slots is None:
        raise EvaluationError("average baseline needs a training climatology and target slots")
    out = np.asarray(climatology, dtype=np.float64)[np.asarray(slots, dtype=np.int64)]
    if np.isnan(out).any():
        raise EvaluationError(f"{int(np.isnan(out).sum())} target(s) fall in slots missing from the climatology")
    return out


def rank_predictors(table: pd.DataFrame) -> pd.DataFrame:
    """Seasonal point ranking.

    ``table`` has columns ``station, season, model, nrmse``. Within each
    station-season the best predictor gets 1 point, the next 2, and so on; points
    are summed over stations. Equal nRMSE values are ordered by model name and
    flagged in the ``tie`` column.

    Returns one row per (season, model) with ``points``, ``position`` (competition
    ranking of the point totals) and ``tie``.
    """
    need = {"station", "season", "model", "nrmse"}
    if not need <= set(table.columns):
        raise EvaluationError(f"ranking table needs columns {sorted(need)}")
    df = table.sort_values(["station", "season", "nrmse", "model"], kind="mergesort").copy()
    df["points"] = df.groupby(["station", "season"]).cumcount() + 1
    dup = df.duplicated(["station", "season", "nrmse"], keep=False)
    df["tie"] = dup
    out = (df.groupby(["season", "model"], sort=False)
             .agg(points=("points", "sum"), tie=("tie", "any"))
             .reset_index())
    out["position"] = out.groupby("season")["points"].rank(method="min").astype(int)
    return out.sort_values(["season", "position", "model"], kind="mergesort").reset_index(drop=True)


def ordinal(n: int) -> str:
    suffix = "th" if 10 <= n % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def reliability_index(measured, predicted) -> np.ndarray:
    """Per-hour reliability in percent, ``100 * (1 - |xhat - x| / x)`` clamped at 0.

    Hours with ``x <= 0`` are excluded and come back as NaN.
    """
    x = np.asarray(measured, dtype=np.float64)
    xh = np.asarray(predicted, dtype=np.float64)
    eta = np.full(x.shape, np.nan)
    ok = x > 0
    with np.errstate(over="ignore"):
        eta[ok] = 100.0 * (1.0 - np.abs(xh[ok] - x[ok]) / x[ok])
    eta[ok] = np.clip(eta[ok], 0.0, 100.0)
    return eta


def reliability_climatology(eta, slots, nbh: int = NBH) -> np.ndarray:
    """Average reliability per slot. Slots never observed take the overall mean."""
    clim = slot_climatology(eta, slots, nbh)
    finite = np.asarray(eta)[np.isfinite(eta)]
    fill = float(finite.mean()) if finite.size else 0.0
    return np.where(np.isnan(clim), fill, clim)


def interval_confidence(forecast, eta) -> np.ndarray:
    """Half-width of the band ``xhat +/- IC`` from a reliability in percent."""
    eta = np.asarray(eta, dtype=np.float64)
    if np.any((eta < 0) | (eta > 100)):
        raise EvaluationError("reliability must lie in [0, 100]")
    return np.asarray(forecast, dtype=np.float64) * (1.0 - eta / 100.0)


SEASON_COLUMNS = ("Winter", "Spring", "Summer", "Autumn")


@dataclass
class ModelScores:
    annual: float
    seasonal: dict[str, float]
    cv: float = float("nan")


@dataclass
class EvaluationReport:
    per_model: dict[str, ModelScores] = field(default_factory=dict)
    ranking: pd.DataFrame | None = None
    reliability: np.ndarray | None = None
    reliability_climatology: np.ndarray | None = None
    confidence: np.ndarray | None = None

    def nrmse_table(self) -> pd.DataFrame:
        rows = []
        for name, s in self.per_model.items():
            row = {"Model": name, "Annual": s.annual}
            row.update({k: s.seasonal.get(k, np.nan) for k in SEASON_COLUMNS})
            rows.append(row)
        return pd.DataFrame(rows, columns=["Model", "Annual", *SEASON_COLUMNS])


def score_model(measured, predicted, season_labels, cv: float = float("nan")) -> ModelScores:
    measured = np.asarray(measured, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    labels = np.asarray(season_labels)
    seasonal = {}
    for name in SEASON_COLUMNS:
        m = labels == name
        if m.any() and np.mean(measured[m] ** 2) > 0:
            seasonal[name] = nrmse(measured[m], predicted[m])
    return ModelScores(nrmse(measured, predicted), seasonal, cv)
