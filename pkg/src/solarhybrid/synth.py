"""Synthetic hourly station data with known ground truth.

Radiation is the Solis clear-sky curve multiplied by a bounded occlusion index.
The index is a seasonal level plus a stationary AR(1) deviation evaluated over the
contiguous daytime samples, optionally mixed with a two-state (clear / cloudy)
Markov regime. Cloudiness reports the cloud cover of the *next* daytime hour with
noise, which is what gives exogenous inputs something to contribute.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .config import read_kv, write_kv
from .ingest import HourlySeries, daytime_selection
from .solar_geometry import StationMeta, clearsky_ghi, solar_instant, write_station_file

SEASON_ORDER = ("winter", "spring", "summer", "autumn")
_MONTH_SEASON = np.array([0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])
INDEX_FLOOR = 0.02
INDEX_CEILING = 1.1


class ScenarioError(ValueError):
    pass


def _four(value) -> tuple[float, float, float, float]:
    if isinstance(value, str):
        value = [float(v) for v in value.replace(",", " ").split()]
    value = tuple(float(v) for v in np.atleast_1d(value))
    if len(value) == 1:
        value = value * 4
    if len(value) != 4:
        raise ScenarioError("seasonal parameters take 1 or 4 values (winter spring summer autumn)")
    return value


@dataclass
class Scenario:
    station_id: str = "synthetic"
    lat_deg: float = 41.92
    lon_deg: float = 8.79
    altitude: float = 4.0
    solar_constant: float = 1367.0
    tau: float = 0.10
    b: float = 0.60
    start_year: int = 2009
    years: int = 3
    phi: float = 0.5435
    level: tuple = (0.75, 0.75, 0.75, 0.75)
    sigma: tuple = (0.10, 0.10, 0.10, 0.10)
    cloud_on: tuple = (0.0, 0.0, 0.0, 0.0)
    cloud_off: float = 0.25
    cloudy_level: float = 0.35
    octa_noise: float = 0.6
    missing_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("level", "sigma", "cloud_on"):
            setattr(self, name, _four(getattr(self, name)))
        if not abs(self.phi) < 1:
            raise ScenarioError(f"unstable AR parameter phi={self.phi} (need |phi| < 1)")
        if self.years < 1:
            raise ScenarioError("years must be >= 1")
        if not 0 <= self.missing_frac < 1:
            raise ScenarioError("missing_frac must lie in [0, 1)")

    @classmethod
    def from_file(cls, path) -> "Scenario":
        kv = read_kv(path)
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in kv.items():
            if key not in known:
                raise ScenarioError(f"{path}: unknown scenario key {key!r}")
            t = str(known[key])
            kwargs[key] = value if t in ("str", "tuple") else (int(value) if t == "int" else float(value))
        return cls(**kwargs)

    def meta(self) -> StationMeta:
        return StationMeta.from_degrees(self.station_id, self.lat_deg, self.lon_deg, self.altitude,
                                        solar_constant=self.solar_constant, tau=self.tau, b=self.b)

    def record(self) -> dict[str, str]:
        out = {}
        for key, value in asdict(self).items():
            out[key] = " ".join(repr(v) for v in value) if isinstance(value, tuple) else repr(value)
        return out


@dataclass
class SyntheticData:
    series: HourlySeries
    meta: StationMeta
    index: np.ndarray
    daytime: np.ndarray
    cloudy: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def hourly_timestamps(start_year: int, years: int) -> np.ndarray:
    start = np.datetime64(f"{start_year}-01-01T00:00:00", "s")
    stop = np.datetime64(f"{start_year + years}-01-01T00:00:00", "s")
    return np.arange(start, stop, np.timedelta64(1, "h"))


def generate(sc: Scenario) -> SyntheticData:
    rng = np.random.default_rng(sc.seed)
    meta = sc.meta()
    ts = hourly_timestamps(sc.start_year, sc.years)
    n = len(ts)
    daytime, _, _ = daytime_selection(ts, meta.longitude, drop_leap_day=False)
    day_pos = np.flatnonzero(daytime)
    nd = len(day_pos)
    season = _MONTH_SEASON[ts[day_pos].astype("datetime64[M]").astype(np.int64) % 12]

    level = np.asarray(sc.level)[season]
    sigma = np.asarray(sc.sigma)[season]
    on = np.asarray(sc.cloud_on)[season]
    xi = rng.standard_normal(nd)
    u = rng.random(nd)
    z = np.empty(nd)
    cloudy = np.zeros(nd, dtype=bool)
    innov = np.sqrt(1.0 - sc.phi ** 2)
    prev_z, prev_c = 0.0, False
    for t in range(nd):
        prev_z = sc.phi * prev_z + sigma[t] * innov * xi[t]
        z[t] = prev_z
        prev_c = (u[t] >= sc.cloud_off) if prev_c else (u[t] < on[t])
        cloudy[t] = prev_c
    base = np.where(cloudy, sc.cloudy_level, level)
    k_day = np.clip(base + z, INDEX_FLOOR, INDEX_CEILING)

    # every hour borrows the index of the nearest daytime sample
    nearest = np.clip(np.searchsorted(day_pos, np.arange(n)), 0, nd - 1)
    k_all = k_day[nearest]
    instant = solar_instant(meta, ts)
    up = instant.sin_elevation > 0
    radiation = np.zeros(n)
    radiation[up] = clearsky_ghi(meta, _subset(instant, up)) * k_all[up]

    # cloud cover of the next daytime hour, reported in octas
    lead = np.append(k_day[1:], k_day[-1])
    cover = np.clip(1.0 - lead / max(level.max(), 1e-9), 0.0, 1.0)
    octas_day = np.clip(np.rint(8.0 * cover + sc.octa_noise * rng.standard_normal(nd)), 0, 8) + 0.0  # no negative zeros
    cloudiness = octas_day[nearest]

    # pressure follows the recent (not future) cover through a trailing mean
    current = np.clip(1.0 - k_day / max(level.max(), 1e-9), 0.0, 1.0)
    smooth = np.convolve(current, np.ones(9) / 9.0)[:nd]
    p_noise = np.cumsum(rng.standard_normal(nd)) * 2.0
    p_noise -= np.convolve(p_noise, np.ones(501) / 501.0, mode="same")
    pressure = (101600.0 - 900.0 * smooth + p_noise)[nearest]
    rain = np.where(cloudy & (rng.random(nd) < 0.3), rng.exponential(1.0, nd), 0.0)
    precipitation = np.round(rain, 1)[nearest]

    if sc.missing_frac > 0:
        holes = rng.random(n) < sc.missing_frac
        radiation = radiation.copy()
        radiation[holes] = np.nan

    grad = np.zeros(n)
    grad[1:] = np.diff(pressure)
    series = HourlySeries(sc.station_id, ts, radiation, pressure=pressure, pressure_gradient=grad,
                          cloudiness=cloudiness, precipitation=precipitation)
    return SyntheticData(series, meta, k_day, daytime, cloudy)


def _subset(instant, mask):
    from .solar_geometry import SolarInstant

    return SolarInstant(instant.declination[mask], instant.hour_angle[mask],
                        instant.eccentricity[mask], instant.elevation[mask])


def write(data: SyntheticData, sc: Scenario, out_dir, geometry_only: bool = False) -> dict[str, Path]:
    """Write ``data.csv``, ``station.txt`` and ``truth.txt`` into ``out_dir``.

    With ``geometry_only`` the station file omits the Solis parameters so that the
    pipeline has to fit them from the data.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = data.series.to_frame()
    paths = {"data": out / "data.csv", "station": out / "station.txt", "truth": out / "truth.txt"}
    frame.to_csv(paths["data"], index=False, float_format="%.12g", na_rep="")
    meta = data.meta
    if geometry_only:
        meta = StationMeta(meta.station_id, meta.latitude, meta.longitude, meta.altitude, meta.solar_constant)
    write_station_file(meta, paths["station"])
    write_kv(sc.record(), paths["truth"])
    return paths
