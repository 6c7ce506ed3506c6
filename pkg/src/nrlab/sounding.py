"""Frequency-sweep channel-sounding post-processing.

Covers the sweep-to-delay-domain transform with windowing, PDP extraction,
pilot-based phase-drift compensation, virtual-array delay-and-sum angle of
arrival mapping with optional antenna-pattern de-embedding, and a free-space
link-budget helper.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299792458.0
PATTERN_MASK_DB = -30.0  # below this gain an angle is flagged invalid, not divided

_WINDOWS: dict[str, Callable[[int], np.ndarray]] = {
    "rectangular": np.ones,
    "hann": np.hanning,
    "hamming": np.hamming,
}


@dataclass
class FrequencySweep:
    """One frequency sweep H(f) on a uniform grid, with optional pilot channel."""

    freqs: np.ndarray
    h: np.ndarray
    timestamps: np.ndarray | None = None
    pilot: np.ndarray | None = None

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=np.float64)
        self.h = np.asarray(self.h, dtype=np.complex128)
        if self.freqs.ndim != 1 or self.freqs.size < 2:
            raise ValueError("sweep needs at least 2 frequency points")
        if self.h.shape != self.freqs.shape:
            raise ValueError("freqs and h lengths differ")
        steps = np.diff(self.freqs)
        if np.any(steps <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
            raise ValueError("frequency grid is not uniform")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("sweep contains non-finite responses")
        for name in ("timestamps", "pilot"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v)
                if v.shape != self.freqs.shape:
                    raise ValueError(f"{name} length differs from freqs")
                setattr(self, name, v)

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass
class Cir:
    """Delay-domain impulse response with its bin metadata."""

    taps: np.ndarray
    delay_resolution: float
    max_delay: float
    flags: tuple[str, ...] = ()

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.taps.size) * self.delay_resolution


@dataclass
class Pdp:
    """Power delay profile normalized to a 0 dB peak."""

    delays: np.ndarray
    power_db: np.ndarray
    noise_floor_db: float


@dataclass
class AntennaPattern:
    """Complex element gain versus angle, interpolated linearly in angle."""

    angles_deg: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        self.angles_deg = np.asarray(self.angles_deg, dtype=np.float64)
        self.gain = np.asarray(self.gain, dtype=np.complex128)
        if self.angles_deg.ndim != 1 or self.angles_deg.size < 2:
            raise ValueError("pattern needs at least 2 angle points")
        if np.any(np.diff(self.angles_deg) <= 0):
            raise ValueError("pattern angles must be strictly increasing")
        if self.gain.shape != self.angles_deg.shape:
            raise ValueError("pattern gain length differs from angles")

    def covers(self, angles_deg: np.ndarray) -> bool:
        return bool(
            np.min(angles_deg) >= self.angles_deg[0]
            and np.max(angles_deg) <= self.angles_deg[-1]
        )

    def gain_at(self, angles_deg: np.ndarray) -> np.ndarray:
        if not self.covers(np.asarray(angles_deg)):
            raise ValueError("pattern table does not cover the requested angles")
        re = np.interp(angles_deg, self.angles_deg, self.gain.real)
        im = np.interp(angles_deg, self.angles_deg, self.gain.imag)
        return re + 1j * im


@dataclass
class VirtualArrayScan:
    """Per-element sweeps of a repositioned antenna plus optional pattern."""

    element_positions: np.ndarray
    sweeps: list[FrequencySweep]
    pattern: AntennaPattern | None = None
    compensate_pattern: bool = False

    def __post_init__(self):
        self.element_positions = np.asarray(self.element_positions, dtype=np.float64)
        if self.element_positions.ndim != 2 or self.element_positions.shape[1] != 3:
            raise ValueError("element_positions must have shape (n_elements, 3)")
        if len(self.sweeps) != self.element_positions.shape[0]:
            raise ValueError("one sweep per element position required")
        if len(self.sweeps) < 1:
            raise ValueError("scan needs at least one element")
        f0 = self.sweeps[0].freqs
        for s in self.sweeps[1:]:
            if s.freqs.shape != f0.shape or np.any(s.freqs != f0):
                raise ValueError("all sweeps must share the frequency grid")

    @property
    def freqs(self) -> np.ndarray:
        return self.sweeps[0].freqs


@dataclass
class AoaDelayProfile:
    """Angle-by-delay power map in dB, normalized to a 0 dB global peak."""

    angles_deg: np.ndarray
    delays: np.ndarray
    power_db: np.ndarray
    valid: np.ndarray


class LinkBudget(NamedTuple):
    range_m: float
    feasible: bool


def sweep_to_cir(
    sweep: FrequencySweep, window: str = "hann", pad_factor: int = 4
) -> Cir:
    """Inverse-transform a windowed sweep to the delay domain.

    The window is compensated by its coherent gain and the transform is
    scaled so an on-grid unit-amplitude path produces a unit-magnitude tap.
    Zero padding by pad_factor refines the delay sampling to
    1/(pad_factor*N*df) without adding resolution.
    """
    if window not in _WINDOWS:
        raise ValueError(f"window must be one of {sorted(_WINDOWS)}, got {window!r}")
    if pad_factor < 1:
        raise ValueError(f"pad_factor must be >= 1, got {pad_factor}")
    n = sweep.h.size
    w = _WINDOWS[window](n)
    windowed = sweep.h * w / w.mean()
    n_fft = pad_factor * n
    taps = np.fft.ifft(windowed, n_fft) * (n_fft / n)
    return Cir(
        taps=taps,
        delay_resolution=1.0 / (n_fft * sweep.df),
        max_delay=1.0 / sweep.df,
    )


def cir_to_pdp(cir: Cir) -> Pdp:
    """Normalize a CIR to a 0 dB-peak power delay profile.

    The noise floor is the median tap power over the upper half of the delay
    axis, debiased by 1/ln(2) so it estimates the mean power of Rayleigh
    noise rather than its median.
    """
    mag = np.abs(cir.taps)
    peak = mag.max()
    if peak == 0:
        raise ValueError("all-zero impulse response")
    with np.errstate(divide="ignore"):
        power_db = 20.0 * np.log10(mag / peak)
    median_db = float(np.median(power_db[mag.size // 2:]))
    noise_floor = median_db - 10.0 * np.log10(np.log(2.0))
    return Pdp(delays=cir.delays, power_db=power_db, noise_floor_db=noise_floor)


def compensate_phase(sweep: FrequencySweep) -> FrequencySweep:
    """Remove the common per-point phase drift measured by the pilot channel.

    h'(f_i) = h(f_i) * conj(pilot(f_i)) / |pilot(f_i)|, which cancels any
    phase common to both paths (fibre flex, temperature) while preserving
    the magnitude of h. The returned pilot is reduced to its magnitude.
    """
    if sweep.pilot is None:
        raise ValueError("sweep has no pilot channel")
    pilot = np.asarray(sweep.pilot, dtype=np.complex128)
    mag = np.abs(pilot)
    if np.any(mag == 0):
        raise ValueError("pilot contains zeros; phase reference undefined")
    return FrequencySweep(
        freqs=sweep.freqs,
        h=sweep.h * np.conj(pilot) / mag,
        timestamps=None if sweep.timestamps is None else sweep.timestamps.copy(),
        pilot=mag,
    )


def deembed_pattern(scan: VirtualArrayScan) -> VirtualArrayScan:
    """Mark a scan for antenna-pattern compensation during beamforming.

    The division itself is a per-angle-hypothesis operation, so it happens
    inside aoa_delay_profile: each beamformed response is divided by the
    complex pattern gain at its hypothesis angle, and angles whose gain
    magnitude falls below the mask threshold are flagged invalid instead of
    being amplified.
    """
    if scan.pattern is None:
        raise ValueError("scan carries no antenna pattern to de-embed")
    return dataclasses.replace(scan, compensate_pattern=True)


def _unit_vectors(angles_deg: np.ndarray) -> np.ndarray:
    """Arrival directions in the scan plane: 0 deg is broadside (+y), +x at 90."""
    rad = np.deg2rad(angles_deg)
    return np.stack([np.sin(rad), np.cos(rad), np.zeros_like(rad)], axis=1)


def aoa_delay_profile(
    scan: VirtualArrayScan,
    angle_grid_deg: np.ndarray,
    reference_freq: float | None = None,
    window: str = "hann",
    pad_factor: int = 4,
    mask_db: float = PATTERN_MASK_DB,
) -> AoaDelayProfile:
    """Delay-and-sum beamforming over an angle grid, then delay transform per angle.

    For each hypothesis angle the element responses are aligned with steering
    phases exp(+j*2*pi*f*(r_m . u(angle))/c) and summed; the combined sweep
    goes through sweep_to_cir and the rows are stacked and globally
    normalized to a 0 dB peak. With reference_freq set, the steering phase
    uses that single frequency for every point (narrowband approximation)
    instead of the per-point frequency.
    """
    angles = np.asarray(angle_grid_deg, dtype=np.float64)
    if angles.ndim != 1 or angles.size < 1:
        raise ValueError("angle grid must be a non-empty 1-D array")
    if scan.element_positions.shape[0] < 2:
        raise ValueError("beamforming needs at least 2 elements")
    if scan.compensate_pattern and scan.pattern is None:
        raise ValueError("pattern compensation requested but no pattern present")
    if scan.compensate_pattern and not scan.pattern.covers(angles):
        raise ValueError("pattern table does not cover the angle grid")

    freqs = scan.freqs
    steer_freqs = np.full_like(freqs, reference_freq) if reference_freq else freqs
    h = np.stack([s.h for s in scan.sweeps])  # (n_elem, n_freq)
    directions = _unit_vectors(angles)  # (n_angle, 3)
    delays_m = scan.element_positions @ directions.T / SPEED_OF_LIGHT  # (n_elem, n_angle)

    gains = None
    if scan.compensate_pattern:
        gains = scan.pattern.gain_at(angles)
    mask_lin = 10.0 ** (mask_db / 20.0)

    rows = []
    valid = np.ones(angles.size, dtype=bool)
    delays_axis = None
    for a in range(angles.size):
        steering = np.exp(2j * np.pi * steer_freqs[None, :] * delays_m[:, a, None])
        combined = (h * steering).sum(axis=0)
        if gains is not None:
            if np.abs(gains[a]) < mask_lin:
                valid[a] = False
                rows.append(None)
                continue
            combined = combined / gains[a]
        cir = sweep_to_cir(
            FrequencySweep(freqs, combined), window=window, pad_factor=pad_factor
        )
        delays_axis = cir.delays
        rows.append(np.abs(cir.taps))

    if not valid.any():
        raise ValueError("every angle fell below the pattern mask")
    n_delay = delays_axis.size
    power = np.full((angles.size, n_delay), np.nan)
    for a, row in enumerate(rows):
        if row is not None:
            power[a] = row
    peak = np.nanmax(power)
    with np.errstate(divide="ignore", invalid="ignore"):
        power_db = 20.0 * np.log10(power / peak)
    return AoaDelayProfile(
        angles_deg=angles, delays=delays_axis, power_db=power_db, valid=valid
    )


def link_budget_range(
    tx_power_dbm: float,
    gains_dbi: float,
    freq: float,
    noise_floor_dbm: float,
) -> LinkBudget:
    """Largest free-space distance at which the received power clears the floor.

    Friis path loss 20*log10(4*pi*d*f/c); an infeasible link (negative margin
    even at the unit-path-loss distance) returns range 0 with feasible=False.
    """
    if freq <= 0:
        raise ValueError(f"freq must be > 0, got {freq}")
    margin_db = tx_power_dbm + gains_dbi - noise_floor_dbm
    if margin_db < 0:
        return LinkBudget(0.0, False)
    d = SPEED_OF_LIGHT / (4.0 * np.pi * freq) * 10.0 ** (margin_db / 20.0)
    return LinkBudget(float(d), True)
