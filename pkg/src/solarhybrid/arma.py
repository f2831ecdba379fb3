"""AR / ARMA(p, q) estimation by Yule-Walker and one-step-ahead forecasting."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, solve_toeplitz
from scipy.signal import lfilter

from .stats import significance_bound

FORMAT_VERSION = 1


class ArmaError(ValueError):
    pass


@dataclass(frozen=True)
class ArmaModel:
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    mean: float
    loss_function: float
    akaike_fpe: float
    n_obs: int = 0
    residual_acf_max: float = float("nan")
    white_residuals: bool = False

    def __post_init__(self):
        if len(self.phi) != self.p or len(self.theta) != self.q:
            raise ArmaError("coefficient vectors do not match the model orders")

    @property
    def order(self) -> tuple[int, int]:
        return self.p, self.q

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "arma",
            "p": self.p,
            "q": self.q,
            "phi": [float(v) for v in self.phi],
            "theta": [float(v) for v in self.theta],
            "mean": float(self.mean),
            "loss_function": float(self.loss_function),
            "akaike_fpe": float(self.akaike_fpe),
            "n_obs": int(self.n_obs),
            "residual_acf_max": float(self.residual_acf_max),
            "white_residuals": bool(self.white_residuals),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaModel":
        if d.get("kind") != "arma" or d.get("format_version") != FORMAT_VERSION:
            raise ArmaError(f"unsupported ARMA record (kind={d.get('kind')}, version={d.get('format_version')})")
        return cls(d["p"], d["q"], np.array(d["phi"], dtype=float), np.array(d["theta"], dtype=float),
                   d["mean"], d["loss_function"], d["akaike_fpe"], d["n_obs"],
                   d["residual_acf_max"], d["white_residuals"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ArmaModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample autocovariances ``gamma(0..max_lag)`` of an already-centered series."""
    n = len(x)
    return np.array([np.dot(x[: n - k], x[k:]) / n for k in range(max_lag + 1)])


def is_stationary(phi) -> bool:
    """True when ``1 - sum(phi_i z^i)`` has every root outside the unit circle."""
    phi = np.asarray(phi, dtype=np.float64)
    if len(phi) == 0:
        return True
    roots = np.roots(np.concatenate((-phi[::-1], [1.0])))
    return bool(np.all(np.abs(roots) > 1.0 + 1e-10))


def innovations_ma(gamma: np.ndarray, q: int, m: int) -> np.ndarray:
    """MA coefficients from autocovariances by the innovations algorithm (Brockwell & Davis 5.1.3)."""
    v = np.zeros(m + 1)
    theta = np.zeros((m + 1, m + 1))
    v[0] = gamma[0]
    for n in range(1, m + 1):
        for k in range(n):
            s = sum(theta[k, k - j] * theta[n, n - j] * v[j] for j in range(k))
            theta[n, n - k] = (gamma[n - k] - s) / v[k]
        v[n] = gamma[0] - sum(theta[n, n - j] ** 2 * v[j] for j in range(n))
        if v[n] <= 0:
            raise ArmaError("innovations algorithm broke down (non-positive variance)")
    return theta[m, 1: q + 1].copy()


def residuals(x: np.ndarray, phi: np.ndarray, theta: np.ndarray, mean: float) -> np.ndarray:
    """One-step residuals ``x(t) - xhat(t)`` for ``t >= p`` (earlier residuals taken as 0)."""
    d = np.asarray(x, dtype=np.float64) - mean
    p = len(phi)
    n = len(d)
    u = d[p:].copy()
    for i in range(1, p + 1):
        u -= phi[i - 1] * d[p - i: n - i]
    if len(theta) == 0:
        return u
    return lfilter([1.0], np.concatenate(([1.0], theta)), u)


def fit_yule_walker(series, p: int, q: int = 0, whiteness_lags: int = 20) -> ArmaModel:
    """Fit ARMA(p, q) on the mean-centered series.

    The AR part solves the Yule-Walker Toeplitz system. For ``q > 0`` the MA part is
    estimated by the innovations algorithm applied to the AR residuals.
    Loss is the mean squared one-step residual and FPE = loss * (n + k) / (n - k).
    """
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if p < 0 or q < 0 or p + q == 0:
        raise ArmaError(f"invalid order ({p}, {q})")
    if n < 10 * (p + q):
        raise ArmaError(f"series length {n} < 10 * (p + q) = {10 * (p + q)}")
    mean = float(x.mean())
    d = x - mean
    gamma = autocovariance(d, max(p, 1))
    if gamma[0] <= 0:
        raise ArmaError("zero variance")
    if p > 0:
        try:
            phi = solve_toeplitz(gamma[:p], gamma[1: p + 1])
        except LinAlgError as exc:
            raise ArmaError(f"singular Toeplitz system: {exc}") from None
        phi = np.atleast_1d(phi).astype(np.float64)
        if not np.all(np.isfinite(phi)):
            raise ArmaError("singular Toeplitz system")
        if not is_stationary(phi):
            raise ArmaError(f"non-stationary AR polynomial for phi={phi}")
    else:
        phi = np.zeros(0)

    theta = np.zeros(0)
    if q > 0:
        ar_resid = residuals(x, phi, np.zeros(0), mean)
        ar_resid = ar_resid - ar_resid.mean()
        m = max(q, 20)
        theta = innovations_ma(autocovariance(ar_resid, m), q, m)

    eps = residuals(x, phi, theta, mean)
    n_eff = len(eps)
    k = p + q
    loss = float(np.mean(eps ** 2))
    fpe = loss * (n_eff + k) / (n_eff - k)
    lags = min(whiteness_lags, n_eff - 1)
    racf = _resid_acf(eps, lags)
    max_racf = float(np.max(np.abs(racf))) if len(racf) else float("nan")
    white = bool(max_racf < significance_bound(n_eff))
    return ArmaModel(p, q, phi, theta, mean, loss, fpe, n, max_racf, white)


def _resid_acf(eps: np.ndarray, lags: int) -> np.ndarray:
    e = eps - eps.mean()
    c0 = np.dot(e, e)
    if c0 == 0 or lags < 1:
        return np.zeros(0)
    return np.array([np.dot(e[:-k], e[k:]) / c0 for k in range(1, lags + 1)])


def forecast_one_step(model: ArmaModel, history, resid_history=None) -> float:
    """Forecast ``x(t+1)`` from chronological ``history`` (last element is ``x(t)``).

    ``resid_history`` holds the most recent residuals, also chronological.
    """
    h = np.asarray(history, dtype=np.float64)
    if len(h) < model.p:
        raise ArmaError(f"need {model.p} past values, got {len(h)}")
    value = model.mean
    for i in range(1, model.p + 1):
        value += model.phi[i - 1] * (h[-i] - model.mean)
    if model.q:
        r = np.asarray(resid_history if resid_history is not None else [], dtype=np.float64)
        if len(r) < model.q:
            raise ArmaError(f"need {model.q} past residuals, got {len(r)}")
        for j in range(1, model.q + 1):
            value += model.theta[j - 1] * r[-j]
    return float(value)


def one_step_predictions(model: ArmaModel, series) -> np.ndarray:
    """In-stream forecasts: ``out[t]`` predicts ``series[t]`` from ``series[:t]``.

    The first ``p`` entries are NaN. MA residuals start at zero.
    """
    x = np.asarray(series, dtype=np.float64)
    out = np.full(len(x), np.nan)
    if len(x) <= model.p:
        return out
    eps = residuals(x, model.phi, model.theta, model.mean)
    out[model.p:] = x[model.p:] - eps
    return out


def _flat_model(x: np.ndarray) -> ArmaModel:
    """AR(1) with zero coefficient: the forecast is the series mean."""
    eps = x[1:] - x.mean()
    loss = float(np.mean(eps ** 2)) if len(eps) else 0.0
    n = max(len(eps), 2)
    return ArmaModel(1, 0, np.zeros(1), np.zeros(0), float(x.mean()), loss, loss * (n + 1) / (n - 1),
                     len(x), 0.0, True)


@dataclass
class OrderSelection:
    order: tuple[int, int]
    model: ArmaModel
    grid: dict[tuple[int, int], float] = field(default_factory=dict)


def select_order(series, p_max: int = 5, q_max: int = 2, rel_tol: float = 1e-3) -> OrderSelection:
    """Grid search over ``1..p_max`` x ``0..q_max`` on Akaike's FPE.

    Returns the smallest model (fewest parameters, then lowest FPE) whose FPE is
    within ``rel_tol`` of the grid minimum. Falls back to (1, 0) when nothing fits.
    """
    x = np.asarray(series, dtype=np.float64)
    fits: dict[tuple[int, int], ArmaModel] = {}
    for p in range(1, p_max + 1):
        for q in range(0, q_max + 1):
            try:
                m = fit_yule_walker(x, p, q)
            except ArmaError:
                continue
            if np.isfinite(m.akaike_fpe):
                fits[(p, q)] = m
    if not fits:
        try:
            m = fit_yule_walker(x, 1, 0)
        except ArmaError:
            m = _flat_model(x)
        return OrderSelection((1, 0), m, {(1, 0): m.akaike_fpe})
    best = min(m.akaike_fpe for m in fits.values())
    ok = [o for o, m in fits.items() if m.akaike_fpe <= best * (1.0 + rel_tol)]
    order = min(ok, key=lambda o: (o[0] + o[1], fits[o].akaike_fpe, o))
    return OrderSelection(order, fits[order], {o: m.akaike_fpe for o, m in fits.items()})
