"""Solar position, extraterrestrial radiation and the simplified Solis clear-sky model.

Angles are radians throughout. Timestamps are ``numpy.datetime64`` values in UTC;
every function accepts scalars or arrays and broadcasts.

Declination, eccentricity correction and the equation of time use the Spencer
(1971) Fourier series.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

DEFAULT_SOLAR_CONSTANT = 1367.0
MAX_DECLINATION = 0.4093


class GeometryError(ValueError):
    """Raised for non-daytime samples or invalid station geometry."""


@dataclass(frozen=True)
class StationMeta:
    station_id: str
    latitude: float
    longitude: float
    altitude: float = 0.0
    solar_constant: float = DEFAULT_SOLAR_CONSTANT
    tau: float | None = None
    b: float | None = None

    def __post_init__(self):
        if not abs(self.latitude) < np.pi / 2:
            raise GeometryError(f"latitude {self.latitude} rad outside (-pi/2, pi/2)")
        if not self.solar_constant > 0:
            raise GeometryError("solar constant must be positive")
        if self.tau is not None and self.tau < 0:
            raise GeometryError("Solis tau must be >= 0")
        if self.b is not None and self.b <= 0:
            raise GeometryError("Solis b must be > 0")

    @property
    def has_solis(self) -> bool:
        return self.tau is not None and self.b is not None

    def with_solis(self, tau: float, b: float) -> "StationMeta":
        return replace(self, tau=float(tau), b=float(b))

    @classmethod
    def from_degrees(cls, station_id, lat_deg, lon_deg, altitude=0.0, **kwargs):
        return cls(station_id, np.radians(lat_deg), np.radians(lon_deg), altitude, **kwargs)


@dataclass(frozen=True)
class SolarInstant:
    declination: np.ndarray
    hour_angle: np.ndarray
    eccentricity: np.ndarray
    elevation: np.ndarray

    @property
    def sin_elevation(self) -> np.ndarray:
        return np.sin(self.elevation)


def _as_datetime(timestamps) -> np.ndarray:
    return np.asarray(timestamps, dtype="datetime64[s]")


def _day_angle(ts: np.ndarray) -> np.ndarray:
    """Spencer's day angle, evaluated at the fractional day of year."""
    year_start = ts.astype("datetime64[Y]").astype("datetime64[s]")
    days = (ts - year_start).astype(np.float64) / 86400.0
    return 2.0 * np.pi * days / 365.0


def declination(timestamps) -> np.ndarray:
    g = _day_angle(_as_datetime(timestamps))
    return (0.006918 - 0.399912 * np.cos(g) + 0.070257 * np.sin(g)
            - 0.006758 * np.cos(2 * g) + 0.000907 * np.sin(2 * g)
            - 0.002697 * np.cos(3 * g) + 0.00148 * np.sin(3 * g))


def eccentricity(timestamps) -> np.ndarray:
    g = _day_angle(_as_datetime(timestamps))
    return (1.000110 + 0.034221 * np.cos(g) + 0.001280 * np.sin(g)
            + 0.000719 * np.cos(2 * g) + 0.000077 * np.sin(2 * g))


def equation_of_time(timestamps) -> np.ndarray:
    """Equation of time in minutes (apparent minus mean solar time)."""
    g = _day_angle(_as_datetime(timestamps))
    return 229.18 * (0.000075 + 0.001868 * np.cos(g) - 0.032077 * np.sin(g)
                     - 0.014615 * np.cos(2 * g) - 0.040849 * np.sin(2 * g))


def solar_time_offset_hours(timestamps, longitude: float, per_day: bool = False) -> np.ndarray:
    """Hours to add to UTC to obtain true solar time.

    With ``per_day`` the equation of time is frozen at 12:00 UTC of each UTC date so
    that the offset is constant within a day (used to cut daytime windows).
    """
    ts = _as_datetime(timestamps)
    if per_day:
        ts = ts.astype("datetime64[D]").astype("datetime64[s]") + np.timedelta64(12, "h")
    return np.degrees(longitude) / 15.0 + equation_of_time(ts) / 60.0


def true_solar_time(timestamps, longitude: float, per_day: bool = False) -> np.ndarray:
    """True solar time as ``datetime64[s]`` (a shifted copy of the UTC stamps)."""
    ts = _as_datetime(timestamps)
    offset = solar_time_offset_hours(ts, longitude, per_day=per_day)
    return ts + np.round(offset * 3600.0).astype("timedelta64[s]")


def solar_instant(meta: StationMeta, timestamps) -> SolarInstant:
    ts = _as_datetime(timestamps)
    tst = true_solar_time(ts, meta.longitude)
    tst_hours = (tst - tst.astype("datetime64[D]")).astype(np.float64) / 3600.0
    omega = np.radians(15.0 * (tst_hours - 12.0))
    delta = declination(ts)
    e0 = eccentricity(ts)
    sin_h = (np.sin(delta) * np.sin(meta.latitude)
             + np.cos(delta) * np.cos(meta.latitude) * np.cos(omega))
    elevation = np.arcsin(np.clip(sin_h, -1.0, 1.0))
    return SolarInstant(delta, omega, e0, elevation)


def _require_daytime(sin_h: np.ndarray) -> None:
    if np.any(np.asarray(sin_h) <= 0):
        raise GeometryError("non-daytime sample: sun at or below the horizon")


def extraterrestrial(meta: StationMeta, instant: SolarInstant) -> np.ndarray:
    """Extraterrestrial radiation on a horizontal plane, ``H0``."""
    sin_term = (np.sin(instant.declination) * np.sin(meta.latitude)
                + np.cos(instant.declination) * np.cos(meta.latitude) * np.cos(instant.hour_angle))
    _require_daytime(sin_term)
    return meta.solar_constant * instant.eccentricity * sin_term


def solis_attenuation(sin_h, tau: float, b: float) -> np.ndarray:
    sin_h = np.asarray(sin_h, dtype=np.float64)
    return np.exp(-tau / sin_h ** b) * sin_h


def clearsky_ghi(meta: StationMeta, instant: SolarInstant,
                 tau: float | None = None, b: float | None = None) -> np.ndarray:
    """Solis clear-sky global horizontal radiation: ``H0 * exp(-tau / sin(h)**b) * sin(h)``."""
    tau = meta.tau if tau is None else tau
    b = meta.b if b is None else b
    if tau is None or b is None:
        raise GeometryError("Solis parameters (tau, b) are not set; run fit_solis first")
    h0 = extraterrestrial(meta, instant)
    return h0 * solis_attenuation(instant.sin_elevation, tau, b)


def clear_sky_envelope(radiation, slots) -> np.ndarray:
    """Index of the per-slot maximum sample (the observed upper envelope)."""
    radiation = np.asarray(radiation, dtype=np.float64)
    slots = np.asarray(slots)
    order = np.lexsort((-radiation, slots))
    first = np.ones(len(order), dtype=bool)
    first[1:] = slots[order][1:] != slots[order][:-1]
    return np.sort(order[first])


def fit_solis(series, meta: StationMeta, tau0: float = 0.1, b0: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of the Solis ``(tau, b)`` to the upper radiation envelope.

    The envelope is the per (day-of-year, hour) maximum over all years in ``series``,
    which must be daytime-filtered (it carries slot indices).
    """
    if series.slots is None:
        raise ValueError("fit_solis needs a daytime-filtered series")
    rad = np.asarray(series.radiation, dtype=np.float64)
    if not np.all(np.isfinite(rad)):
        raise ValueError("fit_solis needs a repaired series (missing radiation present)")
    idx = clear_sky_envelope(rad, series.slots)
    target = rad[idx]
    if not np.any(target > 0):
        raise ValueError("degenerate envelope: all radiation values are zero")
    instant = solar_instant(meta, series.timestamps[idx])
    h0 = extraterrestrial(meta, instant)
    sin_h = instant.sin_elevation
    scale = float(np.max(target))

    def residuals(theta):
        return (h0 * solis_attenuation(sin_h, theta[0], theta[1]) - target) / scale

    fit = least_squares(residuals, x0=[tau0, b0], bounds=([0.0, 1e-3], [5.0, 10.0]),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    tau, b = (float(v) for v in fit.x)
    return tau, b


def read_station_file(path) -> StationMeta:
    """Read a ``key = value`` station record (lat/lon in degrees)."""
    from .config import read_kv

    kv = read_kv(path)
    try:
        kwargs = dict(
            station_id=kv.get("id", Path(path).stem),
            lat_deg=float(kv["lat"]),
            lon_deg=float(kv["lon"]),
            altitude=float(kv.get("alt", 0.0)),
        )
    except KeyError as exc:
        raise ValueError(f"station file {path}: missing key {exc.args[0]!r}") from None
    extra = {}
    if "solar_constant" in kv:
        extra["solar_constant"] = float(kv["solar_constant"])
    if "tau" in kv:
        extra["tau"] = float(kv["tau"])
    if "b" in kv:
        extra["b"] = float(kv["b"])
    return StationMeta.from_degrees(**kwargs, **extra)


def write_station_file(meta: StationMeta, path) -> None:
    from .config import write_kv

    record = {
        "id": meta.station_id,
        "lat": repr(float(np.degrees(meta.latitude))),
        "lon": repr(float(np.degrees(meta.longitude))),
        "alt": repr(float(meta.altitude)),
        "solar_constant": repr(float(meta.solar_constant)),
    }
    if meta.tau is not None:
        record["tau"] = repr(meta.tau)
    if meta.b is not None:
        record["b"] = repr(meta.b)
    write_kv(record, path)
