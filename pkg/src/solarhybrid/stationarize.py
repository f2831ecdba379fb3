"""Clearness index, clear-sky index and periodic-coefficient stationarization.

Every transform keeps the state needed to map index-space predictions back to
Wh/m2 (:func:`destationarize`).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .ingest import NBH, HourlySeries
from .solar_geometry import StationMeta, clearsky_ghi, extraterrestrial, solar_instant


class Method(str, Enum):
    NONE = "none"
    CI = "CI"
    CSI = "CSI"
    CSI_PC = "CSI_PC"

    @classmethod
    def parse(cls, text: str) -> "Method":
        key = text.strip().upper().replace("+", "_").replace("-", "_")
        for m in cls:
            if m.value.upper() == key:
                return m
        raise ValueError(f"unknown stationarization method {text!r}")


class StationarizeError(ValueError):
    pass


@dataclass(frozen=True)
class StationarizedSeries:
    method: Method
    values: np.ndarray
    denominators: np.ndarray
    slots: np.ndarray
    periodic_coefficients: np.ndarray | None = None

    def __len__(self):
        return len(self.values)

    @property
    def scale(self) -> np.ndarray:
        """Per-sample factor mapping index values back to Wh/m2."""
        if self.periodic_coefficients is None:
            return self.denominators
        return self.denominators * self.periodic_coefficients[self.slots]

    def take(self, index) -> "StationarizedSeries":
        return replace(self, values=self.values[index], denominators=self.denominators[index],
                       slots=self.slots[index])


def _slots_of(series: HourlySeries) -> np.ndarray:
    if series.slots is not None:
        return series.slots
    return np.arange(len(series)) % NBH


def _checked_ratio(radiation, denominators, what: str) -> np.ndarray:
    if np.any(~(denominators > 0)):
        raise StationarizeError(f"{what} denominator <= 0 at {int(np.sum(~(denominators > 0)))} sample(s)")
    return np.asarray(radiation, dtype=np.float64) / denominators


def identity(series: HourlySeries) -> StationarizedSeries:
    """The untransformed series wrapped as a stationarized series (denominator 1)."""
    rad = np.asarray(series.radiation, dtype=np.float64)
    return StationarizedSeries(Method.NONE, rad.copy(), np.ones_like(rad), _slots_of(series))


def to_clearness_index(series: HourlySeries, meta: StationMeta) -> StationarizedSeries:
    instant = solar_instant(meta, series.timestamps)
    h0 = extraterrestrial(meta, instant)
    values = _checked_ratio(series.radiation, h0, "extraterrestrial")
    return StationarizedSeries(Method.CI, values, h0, _slots_of(series))


def to_clearsky_index(series: HourlySeries, meta: StationMeta) -> StationarizedSeries:
    instant = solar_instant(meta, series.timestamps)
    clear = clearsky_ghi(meta, instant)
    values = _checked_ratio(series.radiation, clear, "clear-sky")
    return StationarizedSeries(Method.CSI, values, clear, _slots_of(series))


def centered_moving_average(values: np.ndarray, period: int = NBH) -> np.ndarray:
    """Centered moving average over ``period`` samples.

    Near the edges the window shrinks symmetrically (half-width ``min(k, i, n-1-i)``).
    An even period uses the usual 2 x period centering with half weights at the ends.
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    i = np.arange(n)
    half = period // 2
    k = np.minimum(half, np.minimum(i, n - 1 - i))
    total = csum[i + k + 1] - csum[i - k]
    count = 2 * k + 1
    if period % 2 == 0:
        full = k == half
        total = np.where(full, total - 0.5 * (x[np.clip(i - k, 0, n - 1)] + x[np.clip(i + k, 0, n - 1)]), total)
        count = np.where(full, period, count)
    return total / count


def periodic_coefficients(csi: StationarizedSeries, nbh: int = NBH) -> np.ndarray:
    """Multiplicative periodic coefficients, one per daytime slot of the year.

    CSI is divided by its centered moving average over one year, and the ratio is
    averaged across years at fixed slot.
    """
    if csi.method != Method.CSI:
        raise StationarizeError(f"periodic coefficients need a CSI series, got {csi.method.value}")
    n = len(csi)
    if n < 2 * nbh:
        raise StationarizeError(f"need at least 2 years ({2 * nbh} samples), got {n}")
    trend = centered_moving_average(csi.values, nbh)
    if np.any(trend == 0):
        raise StationarizeError("moving average is zero; cannot form ratio to trend")
    ratio = csi.values / trend
    sums = np.bincount(csi.slots, weights=ratio, minlength=nbh)[:nbh]
    counts = np.bincount(csi.slots, minlength=nbh)[:nbh]
    if np.any(counts == 0):
        raise StationarizeError(f"{int(np.sum(counts == 0))} slot(s) have no samples")
    return sums / counts


def to_csi_pc(csi: StationarizedSeries, pc: np.ndarray) -> StationarizedSeries:
    pc = np.asarray(pc, dtype=np.float64)
    if np.any(~(pc > 0)):
        raise StationarizeError("periodic coefficients must all be > 0")
    if csi.slots.size and csi.slots.max() >= len(pc):
        raise StationarizeError("slot index beyond the periodic coefficient table")
    return StationarizedSeries(Method.CSI_PC, csi.values / pc[csi.slots], csi.denominators,
                               csi.slots, pc)


def stationarize(series: HourlySeries, meta: StationMeta, method: Method | str,
                 pc: np.ndarray | None = None) -> StationarizedSeries:
    """Apply ``method``. For CSI_PC, ``pc`` is estimated from ``series`` when omitted."""
    method = Method.parse(method) if isinstance(method, str) else method
    if method is Method.NONE:
        return identity(series)
    if method is Method.CI:
        return to_clearness_index(series, meta)
    csi = to_clearsky_index(series, meta)
    if method is Method.CSI:
        return csi
    if pc is None:
        pc = periodic_coefficients(csi)
    return to_csi_pc(csi, pc)


def destationarize(s: StationarizedSeries, predictions, index=None) -> tuple[np.ndarray, int]:
    """Map index-space predictions to Wh/m2.

    ``index`` selects the positions of ``s`` the predictions belong to (all of them
    when omitted). Negative results are clamped to zero; the clamp count is returned.
    """
    pred = np.asarray(predictions, dtype=np.float64)
    scale = s.scale if index is None else s.scale[index]
    if pred.shape != np.shape(scale):
        raise StationarizeError(f"prediction/slot misalignment: {pred.shape} vs {np.shape(scale)}")
    out = pred * scale
    negative = out < 0
    out[negative] = 0.0
    return out, int(np.count_nonzero(negative))


def save_coefficients(pc: np.ndarray, path) -> None:
    lines = ["slot,pc"] + [f"{i},{float(v)!r}" for i, v in enumerate(np.asarray(pc, dtype=float))]
    Path(path).write_text("\n".join(lines) + "\n")


def load_coefficients(path, nbh: int = NBH) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != nbh or not np.array_equal(data[:, 0], np.arange(nbh)):
        raise StationarizeError(f"{path}: expected {nbh} rows with slots 0..{nbh - 1}")
    return data[:, 1].copy()
