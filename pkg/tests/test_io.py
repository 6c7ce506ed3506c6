import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from nrlab import FrequencySweep, IqCapture
from nrlab.io import (
    read_capture,
    read_geometry,
    read_report,
    read_sidecar,
    read_sweep_csv,
    sidecar_path,
    write_capture,
    write_geometry,
    write_report,
    write_sweep_csv,
)
from nrlab.sounding import AntennaPattern


def sample_capture():
    rng = np.random.default_rng(1)
    samples = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    return IqCapture(samples, sample_rate=7.68e6, center_freq=3.5e9, scale=0.5)


class TestCaptureFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "cap.iq"
        capture = sample_capture()
        write_capture(path, capture, seed=7)
        back, sidecar = read_capture(path)
        # float32 on disk: relative error bounded by single precision
        assert_allclose(back.samples, capture.samples, rtol=1e-6, atol=1e-6)
        assert back.sample_rate == capture.sample_rate
        assert back.center_freq == capture.center_freq
        assert back.scale == capture.scale
        assert sidecar["seed"] == 7

    def test_interleaved_little_endian_floats(self, tmp_path):
        path = tmp_path / "cap.iq"
        capture = IqCapture(np.array([1 + 2j, 3 - 4j]), 1e6)
        write_capture(path, capture)
        raw = np.fromfile(path, dtype="<f4")
        assert_array_equal(raw, np.array([1, 2, 3, -4], dtype="<f4"))

    def test_odd_float_count_rejected(self, tmp_path):
        path = tmp_path / "cap.iq"
        write_capture(path, sample_capture())
        data = path.read_bytes()
        path.write_bytes(data[:-4])  # drop one float
        with pytest.raises(ValueError, match="odd"):
            read_capture(path)

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "cap.iq"
        path.write_bytes(b"")
        with pytest.raises(ValueError, match="sidecar"):
            read_capture(path)

    @pytest.mark.parametrize(
        "mutate,message",
        [
            (lambda d: d.pop("sample_rate_hz"), "sample_rate_hz"),
            (lambda d: d.update(scale="wide"), "scale"),
            (lambda d: d.update(created_by=3), "created_by"),
            (lambda d: d.update(seed="abc"), "seed"),
        ],
    )
    def test_field_level_sidecar_errors(self, tmp_path, mutate, message):
        path = tmp_path / "cap.iq"
        write_capture(path, sample_capture(), seed=1)
        sidecar = json.loads(sidecar_path(path).read_text())
        mutate(sidecar)
        sidecar_path(path).write_text(json.dumps(sidecar))
        with pytest.raises(ValueError, match=message):
            read_capture(path)

    def test_unknown_keys_preserved_on_rewrite(self, tmp_path):
        path = tmp_path / "cap.iq"
        write_capture(path, sample_capture(), extra={"operator": "bench-2", "run": 17})
        sidecar = read_sidecar(path)
        write_capture(path, sample_capture(), seed=99, extra=sidecar)
        back = read_sidecar(path)
        assert back["operator"] == "bench-2"
        assert back["run"] == 17
        assert back["seed"] == 99

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.iq", tmp_path / "b.iq"
        write_capture(a, sample_capture(), seed=3)
        write_capture(b, sample_capture(), seed=3)
        assert a.read_bytes() == b.read_bytes()
        assert sidecar_path(a).read_text() == sidecar_path(b).read_text()


class TestSweepCsv:
    def test_round_trip_with_pilot_and_time(self, tmp_path):
        path = tmp_path / "sweep.csv"
        freqs = 1e9 + 1e6 * np.arange(32)
        rng = np.random.default_rng(2)
        sweep = FrequencySweep(
            freqs=freqs,
            h=rng.standard_normal(32) + 1j * rng.standard_normal(32),
            pilot=np.exp(1j * rng.uniform(0, 1, 32)),
            timestamps=np.arange(32) * 0.25,
        )
        write_sweep_csv(path, sweep)
        header = path.read_text().splitlines()[0]
        assert header == "freq_hz,re,im,pilot_re,pilot_im,timestamp_s"
        back = read_sweep_csv(path)
        assert_allclose(back.freqs, sweep.freqs, rtol=0, atol=0)
        assert_allclose(back.h, sweep.h, rtol=0, atol=0)
        assert_allclose(back.pilot, sweep.pilot, rtol=0, atol=0)
        assert_allclose(back.timestamps, sweep.timestamps, rtol=0, atol=0)

    def test_minimal_columns(self, tmp_path):
        path = tmp_path / "sweep.csv"
        path.write_text("freq_hz,re,im\n1e9,1.0,0.0\n1.001e9,0.5,-0.5\n")
        sweep = read_sweep_csv(path)
        assert sweep.pilot is None and sweep.timestamps is None
        assert sweep.h[1] == 0.5 - 0.5j

    def test_bad_header(self, tmp_path):
        path = tmp_path / "sweep.csv"
        path.write_text("hz,i,q\n1,2,3\n")
        with pytest.raises(ValueError, match="columns"):
            read_sweep_csv(path)

    def test_bad_cell(self, tmp_path):
        path = tmp_path / "sweep.csv"
        path.write_text("freq_hz,re,im\n1e9,1.0,zero\n1.001e9,1,0\n")
        with pytest.raises(ValueError, match="line 2"):
            read_sweep_csv(path)


class TestGeometry:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "geo.json"
        elements = np.array([[0.0, 0, 0], [0.0015, 0, 0], [0.003, 0, 0]])
        pattern = AntennaPattern(
            angles_deg=np.array([-90.0, 0.0, 90.0]),
            gain=np.array([0.5, 1.0, 0.5 * 1j]),
        )
        write_geometry(path, elements, pattern)
        back_elements, back_pattern = read_geometry(path)
        assert_allclose(back_elements, elements, atol=0)
        assert_allclose(back_pattern.gain, pattern.gain, atol=1e-12)

    def test_positions_only(self, tmp_path):
        path = tmp_path / "geo.json"
        path.write_text('{"elements": [[0,0,0],[1,0,0]]}')
        elements, pattern = read_geometry(path)
        assert elements.shape == (2, 3)
        assert pattern is None

    def test_malformed(self, tmp_path):
        path = tmp_path / "geo.json"
        path.write_text('{"points": []}')
        with pytest.raises(ValueError, match="elements"):
            read_geometry(path)


class TestReports:
    def test_db_values_rounded_to_two_decimals(self, tmp_path):
        path = tmp_path / "report.json"
        write_report(
            path,
            {
                "isolation_db": 31.23456,
                "nested": {"margin_db": -0.005678, "power": 0.123456789},
                "items": [{"level_db": 1.0 / 3.0}],
                "per_class_db": {"sss": 5.2e-9, "pss": 1.23456},
            },
        )
        raw = json.loads(path.read_text())
        assert raw["isolation_db"] == 31.23
        assert raw["nested"]["margin_db"] == -0.01
        assert raw["nested"]["power"] == 0.123456789  # linear: full precision
        assert raw["items"][0]["level_db"] == 0.33
        # values nested under a *_db container are dB values too
        assert raw["per_class_db"] == {"sss": 0.0, "pss": 1.23}

    def test_read_rejects_non_object(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ValueError):
            read_report(path)
