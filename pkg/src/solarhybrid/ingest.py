"""Loading, repairing, daytime filtering and splitting hourly station series."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
import pandas as pd

from .solar_geometry import StationMeta, true_solar_time

log = logging.getLogger(__name__)

DAYTIME_FIRST_HOUR = 8
DAYTIME_LAST_HOUR = 16
HOURS_PER_DAY = DAYTIME_LAST_HOUR - DAYTIME_FIRST_HOUR + 1
NBH = 365 * HOURS_PER_DAY

DEFAULT_SCHEMA = {
    "timestamp": "timestamp",
    "radiation": "ghi_whm2",
    "pressure": "pressure_pa",
    "cloudiness": "cloud_octas",
    "precipitation": "precip_mm",
}
EXOGENOUS = ("pressure", "pressure_gradient", "cloudiness", "precipitation")


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class HourlySeries:
    """Hourly observations of one station.

    ``radiation`` uses NaN for missing samples until :func:`repair_missing` runs.
    ``slots`` (day-of-year x daytime hour, ``0 .. NBH-1``) is only present after
    :func:`daytime_filter`.
    """

    station_id: str
    timestamps: np.ndarray
    radiation: np.ndarray
    pressure: np.ndarray | None = None
    pressure_gradient: np.ndarray | None = None
    cloudiness: np.ndarray | None = None
    precipitation: np.ndarray | None = None
    repaired_flags: np.ndarray | None = None
    slots: np.ndarray | None = None

    def __post_init__(self):
        if self.repaired_flags is None:
            object.__setattr__(self, "repaired_flags", np.zeros(len(self.timestamps), dtype=bool))

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def repair_fraction(self) -> float:
        return float(np.mean(self.repaired_flags)) if len(self) else 0.0

    @property
    def missing_count(self) -> int:
        return int(np.count_nonzero(np.isnan(self.radiation)))

    def channels(self) -> dict[str, np.ndarray]:
        """Exogenous channels that are present."""
        return {name: getattr(self, name) for name in EXOGENOUS if getattr(self, name) is not None}

    def take(self, index) -> "HourlySeries":
        def pick(arr):
            return None if arr is None else arr[index]

        return replace(
            self,
            timestamps=self.timestamps[index],
            radiation=self.radiation[index],
            pressure=pick(self.pressure),
            pressure_gradient=pick(self.pressure_gradient),
            cloudiness=pick(self.cloudiness),
            precipitation=pick(self.precipitation),
            repaired_flags=self.repaired_flags[index],
            slots=pick(self.slots),
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"timestamp": pd.to_datetime(self.timestamps).strftime("%Y-%m-%dT%H:%M:%S"),
                              "ghi_whm2": self.radiation})
        for name, col in (("pressure", "pressure_pa"), ("cloudiness", "cloud_octas"),
                          ("precipitation", "precip_mm")):
            values = getattr(self, name)
            if values is not None:
                frame[col] = values
        return frame


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.72
    validation_fraction: float = 0.08
    test_fraction: float = 0.20

    def __post_init__(self):
        parts = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f < 0 for f in parts):
            raise IngestError("split fractions must be non-negative")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise IngestError(f"split fractions sum to {sum(parts)!r}, expected 1")


def _row_error(message: str, rows) -> IngestError:
    rows = [int(r) for r in np.atleast_1d(rows)]
    shown = ", ".join(str(r) for r in rows[:10])
    more = "" if len(rows) <= 10 else f" (+{len(rows) - 10} more)"
    return IngestError(f"{message} at row {shown}{more}")


def load_csv(path, schema: Mapping[str, str] | None = None, station_id: str | None = None) -> HourlySeries:
    """Read an hourly CSV export.

    Row numbers in error messages are file line numbers (the header is line 1).
    Naive timestamps are taken as UTC. An empty radiation cell marks a missing sample.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    for key in ("timestamp", "radiation"):
        if schema[key] not in frame.columns:
            raise IngestError(f"missing mandatory column {schema[key]!r}")
    line_no = np.arange(len(frame)) + 2

    raw_ts = frame[schema["timestamp"]].str.strip()
    ts = pd.to_datetime(raw_ts, utc=True, errors="coerce", format="ISO8601")
    bad = ts.isna().to_numpy()
    if bad.any():
        raise _row_error("unparseable timestamp", line_no[bad])
    stamps = ts.dt.tz_localize(None).to_numpy().astype("datetime64[s]")
    dup = pd.Series(stamps).duplicated().to_numpy()
    if dup.any():
        raise _row_error("duplicate timestamp", line_no[dup])
    back = np.zeros(len(stamps), dtype=bool)
    back[1:] = stamps[1:] <= stamps[:-1]
    if back.any():
        raise _row_error("timestamps not increasing", line_no[back])

    def numeric(column: str, label: str) -> np.ndarray:
        text = frame[column].str.strip()
        values = pd.to_numeric(text.replace("", np.nan), errors="coerce").to_numpy(dtype=np.float64)
        unparsed = np.isnan(values) & (text != "").to_numpy()
        if unparsed.any():
            raise _row_error(f"unparseable {label} value", line_no[unparsed])
        return values

    radiation = numeric(schema["radiation"], "radiation")
    negative = radiation < 0
    if negative.any():
        raise _row_error("negative radiation", line_no[negative])

    optional = {}
    for key in ("pressure", "cloudiness", "precipitation"):
        column = schema.get(key)
        if column and column in frame.columns:
            optional[key] = numeric(column, key)
    if "cloudiness" in optional:
        octas = optional["cloudiness"]
        out = (octas < 0) | (octas > 8)
        if out.any():
            raise _row_error("octas out of range [0, 8]", line_no[out])
    if "precipitation" in optional:
        neg = optional["precipitation"] < 0
        if neg.any():
            raise _row_error("negative precipitation", line_no[neg])
    if "pressure" in optional:
        optional["pressure_gradient"] = pressure_gradient(optional["pressure"])

    sid = station_id or str(getattr(path, "stem", None) or path).rsplit("/", 1)[-1].removesuffix(".csv")
    return HourlySeries(station_id=sid, timestamps=stamps, radiation=radiation, **optional)


def pressure_gradient(pressure: np.ndarray) -> np.ndarray:
    """Difference between the mean pressure of an hour and of the hour before (first = 0)."""
    grad = np.zeros_like(pressure)
    grad[1:] = np.diff(pressure)
    return grad


def _fill_by_hour(values: np.ndarray, hours: np.ndarray, label: str) -> tuple[np.ndarray, np.ndarray]:
    missing = np.isnan(values)
    if not missing.any():
        return values, missing
    filled = values.copy()
    for hour in np.unique(hours[missing]):
        in_slot = hours == hour
        known = in_slot & ~missing
        if not known.any():
            raise IngestError(f"{label}: no data at all for hour {int(hour):02d}:00, cannot repair")
        filled[in_slot & missing] = values[known].mean()
    return filled, missing


def repair_missing(series: HourlySeries, max_missing_frac: float = 0.04) -> HourlySeries:
    """Replace missing samples by the mean of the same hour of day.

    Exogenous channels are repaired the same way but do not set ``repaired_flags``.
    """
    hours = series.timestamps.astype("datetime64[h]").astype(np.int64) % 24
    radiation, missing = _fill_by_hour(series.radiation, hours, "radiation")
    flags = series.repaired_flags | missing
    fraction = float(np.mean(flags)) if len(series) else 0.0
    if fraction > max_missing_frac:
        warnings.warn(
            f"{series.station_id}: {fraction:.2%} of radiation samples repaired "
            f"(ceiling {max_missing_frac:.2%})",
            RuntimeWarning,
            stacklevel=2,
        )
    updates = {}
    for name, values in series.channels().items():
        updates[name], _ = _fill_by_hour(values, hours, name)
    return replace(series, radiation=radiation, repaired_flags=flags, **updates)


def _noleap_day_of_year(dates: np.ndarray) -> np.ndarray:
    """1-based day of year on a 365-day calendar (Feb 29 maps onto Mar 1)."""
    year = dates.astype("datetime64[Y]")
    doy = (dates - year.astype("datetime64[D]")).astype(np.int64) + 1
    y = year.astype(np.int64) + 1970
    leap = (y % 4 == 0) & ((y % 100 != 0) | (y % 400 == 0))
    return np.where(leap & (doy > 59), doy - 1, doy)


def _is_feb29(dates: np.ndarray) -> np.ndarray:
    month_day = (dates - dates.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64)
    month = dates.astype("datetime64[M]").astype(np.int64) % 12
    return (month == 1) & (month_day == 28)


def daytime_selection(timestamps, longitude: float, drop_leap_day: bool = True):
    """Mask of in-window samples plus their solar dates and solar hours.

    A sample's solar hour is its true solar time rounded to the nearest hour, with
    the equation of time frozen per UTC date so each day yields a contiguous block.
    """
    tst = true_solar_time(timestamps, longitude, per_day=True)
    dates = tst.astype("datetime64[D]")
    seconds = (tst - dates).astype(np.int64)
    hour = (seconds + 1800) // 3600
    keep = (hour >= DAYTIME_FIRST_HOUR) & (hour <= DAYTIME_LAST_HOUR)
    if drop_leap_day:
        keep &= ~_is_feb29(dates)
    return keep, dates, hour


def daytime_filter(series: HourlySeries, meta: StationMeta, drop_leap_day: bool = True) -> HourlySeries:
    """Keep the nine samples per day between 08:00 and 16:00 true solar time.

    Feb 29 is dropped by default so every year has exactly ``NBH`` slots.
    """
    if len(series) == 0:
        return replace(series, slots=np.zeros(0, dtype=np.int64))
    keep, dates, hour = daytime_selection(series.timestamps, meta.longitude, drop_leap_day)
    kept_dates = dates[keep]
    uniq, counts = np.unique(kept_dates, return_counts=True)
    short = uniq[counts != HOURS_PER_DAY]
    if len(short):
        listed = ", ".join(str(d) for d in short[:10])
        raise IngestError(f"incomplete daytime window (need {HOURS_PER_DAY} samples) on day(s): {listed}")

    out = series.take(np.flatnonzero(keep))
    slots = (_noleap_day_of_year(kept_dates) - 1) * HOURS_PER_DAY + (hour[keep] - DAYTIME_FIRST_HOUR)
    return replace(out, slots=slots.astype(np.int64))


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    """Chronological block sizes: floor for train and test, validation takes the remainder."""
    n_train = int(np.floor(spec.train_fraction * n + 1e-9))
    n_test = int(np.floor(spec.test_fraction * n + 1e-9))
    return n_train, n - n_train - n_test, n_test


def split(series: HourlySeries, spec: SplitSpec) -> tuple[HourlySeries, HourlySeries, HourlySeries]:
    n = len(series)
    if n < 3:
        raise IngestError(f"series too short to split ({n} samples, need >= 3)")
    n_train, n_val, _ = split_sizes(n, spec)
    return (series.take(slice(0, n_train)),
            series.take(slice(n_train, n_train + n_val)),
            series.take(slice(n_train + n_val, n)))
