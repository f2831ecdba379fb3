"""Autocorrelation, partial autocorrelation, Pearson correlation and lag selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import norm

# canonical-form symbol for each exogenous channel
CHANNEL_SYMBOLS = {"cloudiness": "N", "pressure": "P", "precipitation": "RP"}
DEFAULT_THRESHOLDS = {"cloudiness": 0.50, "pressure": 0.15, "precipitation": 0.15}


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationProfile:
    acf: np.ndarray
    pacf: np.ndarray
    sample_size: int
    significance_bound: float

    @property
    def max_lag(self) -> int:
        return len(self.acf)

    def to_csv(self, path) -> None:
        rows = ["lag,acf,pacf,bound"]
        for i, (a, p) in enumerate(zip(self.acf, self.pacf), start=1):
            rows.append(f"{i},{a:.10f},{p:.10f},{self.significance_bound:.10f}")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags ``1..max_lag`` (biased, mean-removed estimator)."""
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if max_lag < 1:
        raise StatsError("max_lag must be >= 1")
    if n <= max_lag:
        raise StatsError(f"series length {n} must exceed max_lag {max_lag}")
    d = x - x.mean()
    c0 = np.dot(d, d)
    if c0 <= 1e-300 * n:
        raise StatsError("zero variance")
    return np.array([np.dot(d[:-k], d[k:]) / c0 for k in range(1, max_lag + 1)])


def pacf(acf_values) -> np.ndarray:
    """Partial autocorrelations from autocorrelations by the Durbin-Levinson recursion."""
    rho = np.asarray(acf_values, dtype=np.float64)
    k = len(rho)
    if k < 1:
        raise StatsError("need at least one autocorrelation")
    out = np.empty(k)
    phi = np.zeros(0)
    for i in range(1, k + 1):
        if i == 1:
            phi_ii = rho[0]
        else:
            num = rho[i - 1] - np.dot(phi, rho[i - 2::-1])
            den = 1.0 - np.dot(phi, rho[: i - 1])
            if abs(den) < 1e-14:
                raise StatsError(f"singular recursion at lag {i}")
            phi_ii = num / den
        phi = np.concatenate((phi - phi_ii * phi[::-1], [phi_ii]))
        out[i - 1] = phi_ii
    return out


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise StatsError("pearson needs two 1-d arrays of equal length")
    if len(x) < 2:
        raise StatsError("pearson needs at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise StatsError("zero variance")
    r = np.dot(dx, dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def significance_bound(n: int, alpha: float = 0.05) -> float:
    """Two-sided large-sample bound for a zero autocorrelation, ``z_{1-alpha/2} / sqrt(n)``."""
    return float(norm.ppf(1.0 - alpha / 2.0) / np.sqrt(n))


def correlation_profile(series, max_lag: int = 20, alpha: float = 0.05) -> CorrelationProfile:
    rho = acf(series, max_lag)
    n = len(series)
    return CorrelationProfile(rho, pacf(rho), n, significance_bound(n, alpha))


def select_endogenous_lags(profile: CorrelationProfile, max_lags: int = 10,
                           bound: float | None = None) -> list[int]:
    """Leading run of lags whose |ACF| exceeds the significance bound, capped at ``max_lags``."""
    bound = profile.significance_bound if bound is None else bound
    lags = []
    for lag, r in enumerate(profile.acf[:max_lags], start=1):
        if abs(r) <= bound:
            break
        lags.append(lag)
    if not lags:
        raise StatsError("no significant lags")
    return lags


def exogenous_lag_correlations(radiation, channel, max_lags: int = 10) -> np.ndarray:
    """Pearson R between ``radiation(t)`` and ``channel(t - k)`` for ``k = 0..max_lags-1``.

    A channel with ``c`` leading lags passing the threshold enters the forecast of
    ``x(t+1)`` as ``channel(t), ..., channel(t-c+1)``.
    """
    rad = np.asarray(radiation, dtype=np.float64)
    ch = np.asarray(channel, dtype=np.float64)
    if rad.shape != ch.shape:
        raise StatsError("channel is not time-aligned with radiation")
    out = np.full(max_lags, np.nan)
    for k in range(max_lags):
        if len(rad) - k < 2:
            break
        x = ch[: len(ch) - k]
        if np.ptp(x) == 0:
            out[k] = 0.0
            continue
        out[k] = pearson(x, rad[k:])
    return out


def select_exogenous_lags(radiation, channels: Mapping[str, np.ndarray],
                          thresholds: Mapping[str, float] | None = None,
                          max_lags: int = 10) -> dict[str, int]:
    """Number of contiguous lags (t, t-1, ...) per channel with ``|R| >= threshold``.

    A count of zero means the channel is dropped.
    """
    thresholds = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    counts = {}
    for name, values in channels.items():
        if name not in thresholds:
            raise StatsError(f"no correlation threshold for channel {name!r}")
        r = exogenous_lag_correlations(radiation, values, max_lags)
        n = 0
        for value in r:
            if not np.isfinite(value) or abs(value) < thresholds[name]:
                break
            n += 1
        counts[name] = n
    return counts
