import numpy as np
import pytest

from solarhybrid import synth
from solarhybrid.ingest import daytime_filter
from solarhybrid.solar_geometry import StationMeta


def daytime_synthetic(years=2, start_year=2009, **kw):
    """Daytime-filtered synthetic series plus its generator output.

    Start years are chosen without Feb 29 so the generator's daytime index lines up
    one-to-one with the filtered series.
    """
    sc = synth.Scenario(years=years, start_year=start_year, **kw)
    data = synth.generate(sc)
    series = daytime_filter(data.series, data.meta)
    return series, data


@pytest.fixture(scope="session")
def meta():
    return StationMeta.from_degrees("ajaccio", 41.92, 8.79, 4.0, tau=0.10, b=0.60)


@pytest.fixture(scope="session")
def clear_two_years():
    return daytime_synthetic(years=2, level=1.0, sigma=0.0, cloud_on=0.0)


@pytest.fixture(scope="session")
def cloudy_two_years():
    return daytime_synthetic(years=2, phi=0.5435, sigma=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ar_series(phi, n, rng, burn=500, mean=0.0, sigma=1.0):
    """Gaussian AR(p) sample after a burn-in."""
    phi = np.asarray(phi, dtype=float)
    p = len(phi)
    e = rng.standard_normal(n + burn) * sigma
    x = np.zeros(n + burn)
    for t in range(p, n + burn):
        x[t] = np.dot(phi, x[t - p:t][::-1]) + e[t]
    return x[burn:] + mean
