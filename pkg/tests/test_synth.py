import numpy as np
import pytest

from conftest import daytime_synthetic
from solarhybrid import synth
from solarhybrid.stationarize import to_clearsky_index
from solarhybrid.stats import acf


def test_no_noise_is_pure_clear_sky():
    series, data = daytime_synthetic(years=1, phi=0.0, level=1.0, sigma=0.0, cloud_on=0.0)
    np.testing.assert_allclose(to_clearsky_index(series, data.meta).values, 1.0, atol=1e-12)


def test_csi_lag_one_matches_phi():
    series, data = daytime_synthetic(years=4, start_year=2013, phi=0.5435, sigma=0.1)
    assert len(series) >= 10_000
    assert acf(to_clearsky_index(series, data.meta).values, 1)[0] == pytest.approx(0.5435, abs=0.03)


def test_index_bounded():
    _, data = daytime_synthetic(years=1, sigma=0.5, cloud_on=0.5)
    assert data.index.min() > 0 and data.index.max() <= 1.1


def test_same_seed_same_file(tmp_path):
    sc = synth.Scenario(years=1, seed=4)
    a = synth.write(synth.generate(sc), sc, tmp_path / "a")
    b = synth.write(synth.generate(sc), sc, tmp_path / "b")
    for key in ("data", "station", "truth"):
        assert a[key].read_bytes() == b[key].read_bytes()


def test_unstable_phi_rejected():
    with pytest.raises(synth.ScenarioError, match="unstable"):
        synth.Scenario(phi=1.0)


def test_scenario_file(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("years = 2\nlevel = 0.5 0.6 0.7 0.8\nphi = 0.3\n")
    sc = synth.Scenario.from_file(path)
    assert sc.years == 2 and sc.level == (0.5, 0.6, 0.7, 0.8) and sc.phi == 0.3
    path.write_text("colour = blue\n")
    with pytest.raises(synth.ScenarioError, match="colour"):
        synth.Scenario.from_file(path)


def test_geometry_only_station_file(tmp_path):
    sc = synth.Scenario(years=1)
    paths = synth.write(synth.generate(sc), sc, tmp_path, geometry_only=True)
    text = paths["station"].read_text()
    assert "tau" not in text and "lat" in text
