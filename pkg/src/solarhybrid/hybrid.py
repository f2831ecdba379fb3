"""Season-switched and error-switched combinations of an ARMA and an MLP forecaster.

Mode A uses the ARMA in spring/summer and the MLP otherwise. Mode B applies the
same calendar rule but trains each branch only on its own seasons. Mode C picks
the branch whose absolute residual at the previous hour was smaller (ties go to
the ARMA).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from . import arma as arma_mod
from . import mlp as mlp_mod
from .arma import ArmaModel
from .mlp import MlpArchitecture, MlpModel, TrainConfig

AR, ANN = "AR", "ANN"
MODES = ("A", "B", "C")


class HybridError(ValueError):
    pass


class Season(IntEnum):
    WINTER = 0
    SPRING = 1
    SUMMER = 2
    AUTUMN = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


WARM = (Season.SPRING, Season.SUMMER)
_MONTH_SEASON = np.array([0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])
# approximate equinox / solstice dates as (month, day)
_ASTRO_STARTS = ((3, 20, Season.SPRING), (6, 21, Season.SUMMER), (9, 22, Season.AUTUMN), (12, 21, Season.WINTER))


def season_of(timestamps, scheme: str = "meteorological"):
    """Season of each timestamp.

    ``meteorological``: Dec-Feb winter, Mar-May spring, Jun-Aug summer, Sep-Nov autumn.
    ``astronomical``: boundaries at Mar 20, Jun 21, Sep 22 and Dec 21.
    Scalars give a :class:`Season`, arrays give an int array of season codes.
    """
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    month = ts.astype("datetime64[M]").astype(np.int64) % 12
    if scheme == "meteorological":
        codes = _MONTH_SEASON[month]
    elif scheme == "astronomical":
        day = (ts.astype("datetime64[D]") - ts.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64) + 1
        md = (month + 1) * 100 + day
        codes = np.full(ts.shape, int(Season.WINTER))
        for m, d, season in _ASTRO_STARTS[:3]:
            codes = np.where(md >= m * 100 + d, int(season), codes)
        codes = np.where(md >= 1221, int(Season.WINTER), codes)
    else:
        raise HybridError(f"unknown season scheme {scheme!r}")
    if ts.ndim == 0:
        return Season(int(codes))
    return codes.astype(np.int64)


def is_warm(codes) -> np.ndarray:
    codes = np.asarray(codes)
    return (codes == Season.SPRING) | (codes == Season.SUMMER)


@dataclass(frozen=True)
class ArmaSpec:
    order: tuple[int, int] | None = None
    p_max: int = 5
    q_max: int = 2


@dataclass(frozen=True)
class MlpSpec:
    architecture: MlpArchitecture
    train: TrainConfig = TrainConfig()
    seeds: tuple[int, ...] = (0,)
    validation_fraction: float = 0.10


@dataclass(frozen=True)
class HybridModel:
    mode: str
    arma: ArmaModel
    mlp: MlpModel
    arma_train_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    mlp_train_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    season_scheme: str = "meteorological"

    def __post_init__(self):
        if self.mode not in MODES:
            raise HybridError(f"unknown hybrid mode {self.mode!r}")


def fit_arma(values, spec: ArmaSpec) -> ArmaModel:
    if spec.order is None:
        return arma_mod.select_order(values, spec.p_max, spec.q_max).model
    return arma_mod.fit_yule_walker(values, *spec.order)


def _window_allowed(allowed: np.ndarray, targets: np.ndarray, max_lag: int) -> np.ndarray:
    """True for targets whose whole input window (and the target) lies in ``allowed``."""
    bad = np.concatenate(([0], np.cumsum(~allowed)))
    return (bad[targets + 1] - bad[targets - max_lag]) == 0


def fit_mlp(values, spec: MlpSpec, channels: Mapping[str, np.ndarray] | None = None,
            allowed: np.ndarray | None = None) -> tuple[MlpModel, np.ndarray]:
    """Train one net per seed on chronological train/validation rows; keep the best.

    Returns the model and the positions (targets and lagged inputs) it saw.
    """
    values = np.asarray(values, dtype=np.float64)
    arch = spec.architecture
    targets = np.arange(arch.max_lag, len(values))
    if allowed is not None:
        targets = targets[_window_allowed(np.asarray(allowed, bool), targets, arch.max_lag)]
    if len(targets) < 2:
        raise HybridError("not enough rows to train the MLP branch")
    X, index = mlp_mod.lagged_design(values, arch, channels, targets=targets)
    y = values[index]
    n_val = max(1, int(round(spec.validation_fraction * len(y))))
    n_tr = len(y) - n_val
    best = None
    for seed in spec.seeds:
        net = mlp_mod.build(arch, seed)
        net = mlp_mod.normalize_inputs(net, X[:n_tr])
        net = mlp_mod.train_lm(net, X[:n_tr], y[:n_tr], X[n_tr:], y[n_tr:], spec.train)
        val = net.training_log[net.best_epoch].val_mse
        if best is None or val < best[0]:
            best = (val, net)
    used = np.unique((index[:, None] - np.arange(arch.max_lag + 1)[None, :]).ravel())
    return best[1], used


def fit_hybrid(mode: str, values, timestamps, arma_spec: ArmaSpec, mlp_spec: MlpSpec,
               channels: Mapping[str, np.ndarray] | None = None,
               season_scheme: str = "meteorological") -> HybridModel:
    """Fit both branches. Mode B restricts the ARMA to spring/summer samples and the
    MLP to autumn/winter windows; modes A and C use every sample."""
    if mode not in MODES:
        raise HybridError(f"unknown hybrid mode {mode!r}")
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if mode == "B":
        warm = is_warm(season_of(timestamps, season_scheme))
        if not warm.any() or warm.all():
            raise HybridError("mode B needs both spring/summer and autumn/winter training samples")
        arma_index = np.flatnonzero(warm)
        arma_model = fit_arma(values[arma_index], arma_spec)
        mlp_model, mlp_index = fit_mlp(values, mlp_spec, channels, allowed=~warm)
    else:
        arma_index = np.arange(n)
        arma_model = fit_arma(values, arma_spec)
        mlp_model, mlp_index = fit_mlp(values, mlp_spec, channels)
    return HybridModel(mode, arma_model, mlp_model, arma_index, mlp_index, season_scheme)


def from_branches(mode: str, arma_model: ArmaModel, mlp_model: MlpModel,
                  season_scheme: str = "meteorological") -> HybridModel:
    """Combine already-fitted full-data branches (modes A and C)."""
    if mode == "B":
        raise HybridError("mode B needs seasonal training; use fit_hybrid")
    return HybridModel(mode, arma_model, mlp_model, season_scheme=season_scheme)


def select_branch(mode: str, season, ar_residual: float | None = None,
                  ann_residual: float | None = None) -> tuple[str, bool]:
    """Branch for the next forecast and whether the seasonal fallback was used."""
    if mode == "C" and ar_residual is not None and ann_residual is not None:
        return (AR if abs(ar_residual) <= abs(ann_residual) else ANN), False
    branch = AR if Season(int(season)) in WARM else ANN
    return branch, mode == "C"


@dataclass(frozen=True)
class StepContext:
    """Everything needed to forecast ``x(t+1)``.

    ``timestamp`` is the time ``t`` of the last observation. The residuals are the
    branch errors at ``t`` (``None`` before any forecast has been scored).
    """

    timestamp: np.datetime64
    arma_history: Sequence[float]
    mlp_inputs: Sequence[float]
    arma_residuals: Sequence[float] = ()
    ar_residual: float | None = None
    ann_residual: float | None = None


@dataclass(frozen=True)
class StepForecast:
    value: float
    branch: str
    ar_forecast: float
    ann_forecast: float
    fallback: bool


def forecast_one_step(model: HybridModel, ctx: StepContext) -> StepForecast:
    ar_f = arma_mod.forecast_one_step(model.arma, ctx.arma_history, ctx.arma_residuals)
    ann_f = mlp_mod.forecast_one_step(model.mlp, ctx.mlp_inputs)
    season = season_of(np.datetime64(ctx.timestamp, "s"), model.season_scheme)
    branch, fallback = select_branch(model.mode, season, ctx.ar_residual, ctx.ann_residual)
    return StepForecast(ar_f if branch == AR else ann_f, branch, ar_f, ann_f, fallback)


@dataclass
class SelectionLog:
    timestamps: np.ndarray
    positions: np.ndarray
    branch: np.ndarray
    ar_forecast: np.ndarray
    ann_forecast: np.ndarray
    ar_residual: np.ndarray
    ann_residual: np.ndarray
    selected: np.ndarray
    fallback: np.ndarray

    def __len__(self):
        return len(self.positions)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "branch", "ar_forecast", "ann_forecast",
                        "ar_residual", "ann_residual", "selected_forecast"])
            for k in range(len(self)):
                w.writerow([str(self.timestamps[k]), self.branch[k],
                            f"{self.ar_forecast[k]:.10g}", f"{self.ann_forecast[k]:.10g}",
                            f"{self.ar_residual[k]:.10g}", f"{self.ann_residual[k]:.10g}",
                            f"{self.selected[k]:.10g}"])


def branch_forecasts(model: HybridModel, values, positions, channels=None) -> tuple[np.ndarray, np.ndarray]:
    """ARMA and MLP one-step forecasts for ``values[positions]`` from the preceding history."""
    values = np.asarray(values, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.int64)
    ar_all = arma_mod.one_step_predictions(model.arma, values)
    X, _ = mlp_mod.lagged_design(values, model.mlp.architecture, channels, targets=positions)
    return ar_all[positions], mlp_mod.predict(model.mlp, X)


def run_hybrid(model: HybridModel, values, timestamps, positions, channels=None) -> SelectionLog:
    """Replay the hybrid over ``positions`` of a series (observed values arrive after each forecast).

    Branch residuals at ``t`` exist only when ``t`` itself was forecast earlier in
    this stream; otherwise mode C falls back to the seasonal rule.
    """
    values = np.asarray(values, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.int64)
    if len(positions) == 0:
        raise HybridError("nothing to forecast")
    if np.any(np.diff(positions) <= 0):
        raise HybridError("positions must be strictly increasing")
    ar_f, ann_f = branch_forecasts(model, values, positions, channels)
    truth = values[positions]
    ar_res, ann_res = truth - ar_f, truth - ann_f
    seasons = season_of(np.asarray(timestamps)[positions - 1], model.season_scheme)
    n = len(positions)
    branch = np.empty(n, dtype=object)
    fallback = np.zeros(n, dtype=bool)
    for k in range(n):
        scored = k > 0 and positions[k - 1] == positions[k] - 1
        branch[k], fallback[k] = select_branch(
            model.mode, seasons[k],
            ar_res[k - 1] if scored else None,
            ann_res[k - 1] if scored else None,
        )
    selected = np.where(branch == AR, ar_f, ann_f)
    return SelectionLog(np.asarray(timestamps)[positions], positions, branch.astype(str), ar_f, ann_f,
                        ar_res, ann_res, selected, fallback)


def branch_shares(log: SelectionLog) -> tuple[int, int]:
    if len(log) == 0:
        raise HybridError("empty selection log")
    n_ar = int(np.count_nonzero(log.branch == AR))
    return n_ar, len(log) - n_ar
