"""File formats: raw IQ captures with JSON sidecars, sweep CSVs, geometry, reports.

IQ capture files are headerless little-endian float32, I then Q per sample.
The sidecar lives at the capture path plus ".json" and must carry
sample_rate_hz, center_freq_hz, scale and created_by; unknown keys survive a
rewrite. All number formatting is locale-independent.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .sounding import AntennaPattern, AoaDelayProfile, FrequencySweep, Pdp
from .types import IqCapture

SIDECAR_SUFFIX = ".json"
_SIDECAR_NUMBERS = ("sample_rate_hz", "center_freq_hz", "scale")


def sidecar_path(capture_path) -> Path:
    p = Path(capture_path)
    return p.with_name(p.name + SIDECAR_SUFFIX)


def write_capture(
    path,
    capture: IqCapture,
    created_by: str = "nrlab",
    seed: int | None = None,
    extra: dict | None = None,
) -> None:
    """Write raw float32 IQ plus its sidecar; extra keys are carried through."""
    samples = capture.samples / capture.scale
    interleaved = np.empty(2 * samples.size, dtype="<f4")
    interleaved[0::2] = samples.real
    interleaved[1::2] = samples.imag
    Path(path).write_bytes(interleaved.tobytes())

    sidecar = dict(extra or {})
    sidecar["sample_rate_hz"] = capture.sample_rate
    sidecar["center_freq_hz"] = capture.center_freq
    sidecar["scale"] = capture.scale
    sidecar["created_by"] = created_by
    if seed is not None:
        sidecar["seed"] = seed
    sidecar_path(path).write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _validate_sidecar(raw: dict) -> dict:
    for key in _SIDECAR_NUMBERS:
        if key not in raw:
            raise ValueError(f"sidecar missing required key {key!r}")
        if not isinstance(raw[key], (int, float)) or isinstance(raw[key], bool):
            raise ValueError(f"sidecar key {key!r} must be a number, got {raw[key]!r}")
        if not math.isfinite(raw[key]):
            raise ValueError(f"sidecar key {key!r} must be finite, got {raw[key]!r}")
    if "created_by" not in raw:
        raise ValueError("sidecar missing required key 'created_by'")
    if not isinstance(raw["created_by"], str):
        raise ValueError("sidecar key 'created_by' must be a string")
    if "seed" in raw and not isinstance(raw["seed"], int):
        raise ValueError("sidecar key 'seed' must be an integer")
    return raw


def read_sidecar(path) -> dict:
    """Load and validate the sidecar for a capture path."""
    sc_path = sidecar_path(path)
    if not sc_path.exists():
        raise ValueError(f"sidecar not found: {sc_path}")
    try:
        raw = json.loads(sc_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"sidecar {sc_path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"sidecar {sc_path} must hold a JSON object")
    return _validate_sidecar(raw)


def read_capture(path) -> tuple[IqCapture, dict]:
    """Read an IQ file and its sidecar.

    Returns:
        (capture with the sidecar scale applied, full sidecar dict).
    """
    sidecar = read_sidecar(path)
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2:
        raise ValueError(
            f"IQ file {path} holds an odd number of floats ({raw.size}); "
            "expected interleaved I/Q pairs"
        )
    samples = (raw[0::2].astype(np.float64)
               + 1j * raw[1::2].astype(np.float64)) * sidecar["scale"]
    capture = IqCapture(
        samples,
        sample_rate=float(sidecar["sample_rate_hz"]),
        center_freq=float(sidecar["center_freq_hz"]),
        scale=float(sidecar["scale"]),
    )
    return capture, sidecar


def write_sweep_csv(path, sweep: FrequencySweep) -> None:
    """Write a sweep as freq_hz,re,im[,pilot_re,pilot_im][,timestamp_s] rows."""
    columns = ["freq_hz", "re", "im"]
    if sweep.pilot is not None:
        columns += ["pilot_re", "pilot_im"]
    if sweep.timestamps is not None:
        columns += ["timestamp_s"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i in range(sweep.freqs.size):
            row = [
                repr(float(sweep.freqs[i])),
                repr(float(sweep.h[i].real)),
                repr(float(sweep.h[i].imag)),
            ]
            if sweep.pilot is not None:
                pilot = complex(sweep.pilot[i])
                row += [repr(pilot.real), repr(pilot.imag)]
            if sweep.timestamps is not None:
                row += [repr(float(sweep.timestamps[i]))]
            writer.writerow(row)


def read_sweep_csv(path) -> FrequencySweep:
    """Parse a sweep CSV; pilot and timestamp columns are optional."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"sweep CSV {path} is empty") from None
        header = [c.strip() for c in header]
        required = ["freq_hz", "re", "im"]
        if header[:3] != required:
            raise ValueError(
                f"sweep CSV {path} must start with columns {required}, got {header[:3]}"
            )
        index = {name: i for i, name in enumerate(header)}
        has_pilot = "pilot_re" in index and "pilot_im" in index
        has_time = "timestamp_s" in index
        freqs, h, pilot, times = [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                freqs.append(float(row[index["freq_hz"]]))
                h.append(float(row[index["re"]]) + 1j * float(row[index["im"]]))
                if has_pilot:
                    pilot.append(
                        float(row[index["pilot_re"]])
                        + 1j * float(row[index["pilot_im"]])
                    )
                if has_time:
                    times.append(float(row[index["timestamp_s"]]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"sweep CSV {path} line {line_no}: {exc}") from None
    return FrequencySweep(
        freqs=np.asarray(freqs),
        h=np.asarray(h),
        timestamps=np.asarray(times) if has_time else None,
        pilot=np.asarray(pilot) if has_pilot else None,
    )


def write_pdp_csv(path, pdp: Pdp) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delay_s", "power_db"])
        for d, p in zip(pdp.delays, pdp.power_db):
            writer.writerow([repr(float(d)), f"{float(p):.2f}"])


def write_aoa_csv(path, profile: AoaDelayProfile) -> None:
    """Angle-by-delay matrix: first column angle_deg, one column per delay bin."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg"] + [repr(float(d)) for d in profile.delays])
        for a in range(profile.angles_deg.size):
            row = [repr(float(profile.angles_deg[a]))]
            for p in profile.power_db[a]:
                row.append("" if np.isnan(p) else f"{float(p):.2f}")
            writer.writerow(row)


def read_geometry(path) -> tuple[np.ndarray, AntennaPattern | None]:
    """Load element positions and the optional pattern table.

    The file is a JSON object with "elements" ([x, y, z] triples in meters)
    and optionally "pattern" (rows of [angle_deg, gain_db, phase_deg]).
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"geometry file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "elements" not in raw:
        raise ValueError(f"geometry file {path} must hold an object with 'elements'")
    elements = np.asarray(raw["elements"], dtype=np.float64)
    if elements.ndim != 2 or elements.shape[1] != 3:
        raise ValueError("geometry 'elements' must be [x,y,z] triples")
    pattern = None
    if raw.get("pattern"):
        table = np.asarray(raw["pattern"], dtype=np.float64)
        if table.ndim != 2 or table.shape[1] != 3:
            raise ValueError(
                "geometry 'pattern' rows must be [angle_deg, gain_db, phase_deg]"
            )
        gain = 10.0 ** (table[:, 1] / 20.0) * np.exp(1j * np.deg2rad(table[:, 2]))
        pattern = AntennaPattern(angles_deg=table[:, 0], gain=gain)
    return elements, pattern


def write_geometry(path, elements: np.ndarray, pattern: AntennaPattern | None = None) -> None:
    payload: dict = {"elements": np.asarray(elements, dtype=float).tolist()}
    if pattern is not None:
        payload["pattern"] = [
            [float(a), 20.0 * math.log10(abs(g)), math.degrees(math.atan2(g.imag, g.real))]
            for a, g in zip(pattern.angles_deg, pattern.gain)
        ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_report(path, payload: dict) -> None:
    """Write a structured report; dB-suffixed values are rounded to 2 decimals."""
    Path(path).write_text(
        json.dumps(_round_db(payload), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_report(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"report {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"report {path} must hold a JSON object")
    return raw


def _round_db(value, is_db: bool = False):
    if isinstance(value, dict):
        return {k: _round_db(v, is_db or k.endswith("_db")) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_db(v, is_db) for v in value]
    if isinstance(value, float) and is_db:
        return round(value, 2) if math.isfinite(value) else value
    return value
