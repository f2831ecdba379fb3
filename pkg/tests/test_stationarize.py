import numpy as np
import pytest
from dataclasses import replace

from solarhybrid.ingest import NBH
from solarhybrid.solar_geometry import extraterrestrial, solar_instant
from solarhybrid.stationarize import (Method, StationarizeError, StationarizedSeries, centered_moving_average,
                                      destationarize, load_coefficients, periodic_coefficients,
                                      save_coefficients, stationarize, to_clearness_index,
                                      to_clearsky_index, to_csi_pc)
from solarhybrid.stats import acf


def _csi(values, slots=None):
    values = np.asarray(values, dtype=float)
    slots = np.arange(len(values)) % NBH if slots is None else slots
    return StationarizedSeries(Method.CSI, values, np.ones_like(values), slots)


def test_method_parse_aliases():
    assert Method.parse("csi+pc") is Method.CSI_PC
    assert Method.parse("none") is Method.NONE
    with pytest.raises(ValueError):
        Method.parse("log")


def test_clearness_index_ratios(clear_two_years):
    series, data = clear_two_years
    h0 = extraterrestrial(data.meta, solar_instant(data.meta, series.timestamps))
    np.testing.assert_allclose(to_clearness_index(replace(series, radiation=h0), data.meta).values, 1.0, rtol=1e-14)
    assert np.all(to_clearness_index(replace(series, radiation=np.zeros(len(series))), data.meta).values == 0)
    half = to_clearness_index(replace(series, radiation=0.5 * h0), data.meta)
    np.testing.assert_allclose(half.values, 0.5, rtol=1e-14)


def test_clearsky_index_flat_on_model_data(clear_two_years):
    series, data = clear_two_years
    s = to_clearsky_index(series, data.meta)
    np.testing.assert_allclose(s.values, 1.0, atol=1e-9)
    half = to_clearsky_index(replace(series, radiation=series.radiation / 2), data.meta)
    np.testing.assert_allclose(half.values, 0.5, atol=1e-9)


def test_clearsky_index_of_occluded_data_below_one(cloudy_two_years):
    series, data = cloudy_two_years
    s = to_clearsky_index(series, data.meta)
    cloudy = data.index < 1.0
    assert np.all((s.values[cloudy] > 0) & (s.values[cloudy] < 1))


def test_pc_of_flat_csi_is_one():
    pc = periodic_coefficients(_csi(np.ones(2 * NBH)))
    assert len(pc) == NBH
    np.testing.assert_allclose(pc, 1.0, rtol=1e-12)


def test_pc_tracks_seasonal_pattern():
    rng = np.random.default_rng(3)
    pattern = 0.8 + 0.4 * rng.random(NBH)
    values = np.tile(pattern, 4)
    pc = periodic_coefficients(_csi(values))
    ratio = pc / pattern
    # edge windows shrink, so proportionality holds up to a small spread
    assert np.std(ratio) / np.mean(ratio) < 0.02


def test_pc_needs_two_years():
    with pytest.raises(StationarizeError, match="2 years"):
        periodic_coefficients(_csi(np.ones(NBH)))


def test_to_csi_pc_identity_and_ratio():
    s = _csi(np.array([0.8, 0.5, 0.7]))
    np.testing.assert_array_equal(to_csi_pc(s, np.ones(NBH)).values, s.values)
    pc = np.ones(NBH)
    pc[0] = 0.8
    assert to_csi_pc(s, pc).values[0] == pytest.approx(1.0, rel=1e-15)


def test_to_csi_pc_rejects_nonpositive():
    with pytest.raises(StationarizeError):
        to_csi_pc(_csi([1.0]), np.zeros(NBH))


def test_csi_pc_reduces_daily_lag_correlation():
    rng = np.random.default_rng(7)
    n = 3 * NBH
    hour = np.arange(n) % 9
    daily = 0.75 + 0.2 * np.cos(2 * np.pi * (hour - 4) / 9)
    noise = np.zeros(n)
    e = rng.standard_normal(n) * 0.05
    for t in range(1, n):
        noise[t] = 0.5 * noise[t - 1] + e[t]
    csi = _csi(daily * (1 + noise))
    pc = periodic_coefficients(csi)
    flat = to_csi_pc(csi, pc)
    assert abs(acf(flat.values, 9)[8]) < abs(acf(csi.values, 9)[8])


def test_destationarize_cases():
    s = StationarizedSeries(Method.CSI, np.array([0.5, 0.0, -0.1]), np.array([800.0, 600.0, 500.0]),
                            np.arange(3))
    wh, clamped = destationarize(s, s.values)
    np.testing.assert_array_equal(wh, [400.0, 0.0, 0.0])
    assert clamped == 1
    with pytest.raises(StationarizeError, match="misalignment"):
        destationarize(s, np.zeros(2))
    wh, _ = destationarize(s, np.array([1.0]), index=np.array([2]))
    assert wh[0] == 500.0


@pytest.mark.parametrize("method", list(Method))
def test_round_trip(method, cloudy_two_years):
    series, data = cloudy_two_years
    s = stationarize(series, data.meta, method)
    back, clamped = destationarize(s, s.values)
    assert clamped == 0
    np.testing.assert_allclose(back, series.radiation, rtol=1e-12)


def test_moving_average_edges_shrink_symmetrically():
    x = np.arange(10.0)
    ma = centered_moving_average(x, 5)
    assert ma[0] == 0.0
    assert ma[1] == pytest.approx(1.0)
    np.testing.assert_allclose(ma[2:8], x[2:8])
    assert ma[9] == 9.0


def test_coefficients_file_round_trip(tmp_path):
    pc = 0.9 + 0.2 * np.random.default_rng(0).random(NBH)
    save_coefficients(pc, tmp_path / "pc.csv")
    np.testing.assert_array_equal(load_coefficients(tmp_path / "pc.csv"), pc)
    (tmp_path / "bad.csv").write_text("slot,pc\n0,1.0\n")
    with pytest.raises(StationarizeError):
        load_coefficients(tmp_path / "bad.csv")
