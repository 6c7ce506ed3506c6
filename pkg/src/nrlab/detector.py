"""Blind SSB detection: PSS search, SSS/cell-id resolution, DM-RS index, bursts.

The detection chain is replica correlation in the time domain for the PSS
(over an integer-bin CFO hypothesis bank, with a fractional refinement from
the phase slope between the two halves of the matched symbol), followed by
frequency-domain matched correlation for the SSS and DM-RS stages.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal as sp_signal

from .sequences import gen_pbch_dmrs, gen_pss, gen_sss
from .types import (
    N_SSB_SUBCARRIERS,
    N_SSB_SYMBOLS,
    CellId,
    IqCapture,
    OfdmParams,
    ResourceGrid,
    SYNC_FIRST_SUBCARRIER,
    SYNC_SEQ_LEN,
)
from .waveform import ofdm_demodulate, ofdm_modulate, ssb_layout

# Calibrated detection threshold: the Monte Carlo in tests/test_detector.py
# puts noise-only false alarms far below 1% per 1e5 samples at this value,
# while a matched burst at -6 dB SNR still scores ~0.45.
DEFAULT_PSS_THRESHOLD = 0.35
DEFAULT_MAX_CFO_BINS = 2
OCCUPANCY_MARGIN = 10.0  # an RE is occupied above noise_floor times this


@dataclass(frozen=True)
class PssCandidate:
    """One PSS detection hypothesis that cleared the threshold."""

    n2: int
    timing: int
    cfo: float
    metric: float


@dataclass(frozen=True)
class SsbBurst:
    """Per-burst detection record."""

    timing: int
    i_ssb_bar: int
    pss_metric: float
    sss_metric: float
    dmrs_metric: float


@dataclass
class DetectionResult:
    """Outcome of a full capture scan; bursts are sorted by timing."""

    cell_id: CellId | None
    bursts: list[SsbBurst] = field(default_factory=list)
    cfo: float = 0.0
    cell_id_conflict: bool = False


@lru_cache(maxsize=8)
def _pss_replicas(params: OfdmParams) -> np.ndarray:
    """Time-domain replicas of the three PSS symbols, shape (3, symbol_len)."""
    reps = np.empty((3, params.symbol_len), dtype=np.complex128)
    sync = slice(SYNC_FIRST_SUBCARRIER, SYNC_FIRST_SUBCARRIER + SYNC_SEQ_LEN)
    for n2 in range(3):
        row = np.zeros((1, N_SSB_SUBCARRIERS), dtype=np.complex128)
        row[0, sync] = gen_pss(n2)
        reps[n2] = ofdm_modulate(ResourceGrid(row), params).samples
    reps.setflags(write=False)
    return reps


@lru_cache(maxsize=3)
def _sss_bank(n2: int) -> np.ndarray:
    """All 336 SSS hypotheses for one sector index, shape (336, 127)."""
    bank = np.stack([gen_sss(n1, n2) for n1 in range(336)])
    bank.setflags(write=False)
    return bank


@lru_cache(maxsize=64)
def _dmrs_bank(cell: int) -> np.ndarray:
    """All 8 DM-RS hypotheses of a cell, shape (8, 144)."""
    cid = CellId.from_cell(cell)
    bank = np.stack([gen_pbch_dmrs(cid, i) for i in range(8)])
    bank.setflags(write=False)
    return bank


def _fractional_cfo(segment: np.ndarray, replica: np.ndarray, fft_size: int) -> float:
    """Residual CFO in subcarrier units from the half-symbol phase slope."""
    prod = segment * np.conj(replica)
    half = prod.size // 2
    p1 = prod[:half].sum()
    p2 = prod[half:2 * half].sum()
    if abs(p1) == 0.0 or abs(p2) == 0.0:
        return 0.0
    return float(np.angle(p2 * np.conj(p1)) * fft_size / (2.0 * np.pi * half))


def detect_pss(
    capture: IqCapture,
    params: OfdmParams,
    threshold: float = DEFAULT_PSS_THRESHOLD,
    max_cfo_bins: int = DEFAULT_MAX_CFO_BINS,
) -> list[PssCandidate]:
    """Scan a capture for PSS symbols.

    Sliding normalized cross-correlation of the capture against the three
    OFDM-modulated PSS replicas, each over integer CFO hypotheses
    -max_cfo_bins..+max_cfo_bins; local maxima with metric >= threshold
    become candidates. The reported CFO is the winning integer hypothesis
    plus the fractional refinement, in Hz.

    Returns:
        Candidates sorted by timing, then descending metric.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    x = capture.samples
    if x.size == 0:
        raise ValueError("empty capture")
    length = params.symbol_len
    if x.size < length:
        raise ValueError(
            f"capture of {x.size} samples shorter than one OFDM symbol ({length})"
        )
    replicas = _pss_replicas(params)

    csum = np.concatenate(([0.0], np.cumsum(np.abs(x) ** 2)))
    window_energy = csum[length:] - csum[:-length]
    n_lags = x.size - length + 1

    ramp = np.arange(length) / params.fft_size
    candidates: list[PssCandidate] = []
    for n2 in range(3):
        base = replicas[n2]
        denom = np.sqrt(window_energy * float(np.sum(np.abs(base) ** 2)))
        metric = np.zeros(n_lags)
        k_best = np.zeros(n_lags, dtype=np.int64)
        for k in range(-max_cfo_bins, max_cfo_bins + 1):
            rep_k = base * np.exp(2j * np.pi * k * ramp)
            corr = sp_signal.fftconvolve(x, np.conj(rep_k[::-1]), mode="valid")
            m = np.divide(np.abs(corr), denom, out=np.zeros(n_lags), where=denom > 0)
            better = m > metric
            metric[better] = m[better]
            k_best[better] = k
        # pad so maxima at the capture edges are still local peaks
        padded = np.concatenate(([-1.0], metric, [-1.0]))
        peaks, _ = sp_signal.find_peaks(padded, height=threshold, distance=length)
        for p in peaks:
            lag = int(p - 1)
            k = int(k_best[lag])
            rep_k = base * np.exp(2j * np.pi * k * ramp)
            frac = _fractional_cfo(x[lag:lag + length], rep_k, params.fft_size)
            candidates.append(
                PssCandidate(
                    n2=n2,
                    timing=lag,
                    cfo=(k + frac) * params.scs,
                    metric=float(metric[lag]),
                )
            )
    candidates.sort(key=lambda c: (c.timing, -c.metric, c.n2))
    return candidates


def demodulate_burst(
    capture: IqCapture, timing: int, cfo_hz: float, params: OfdmParams
) -> ResourceGrid:
    """CFO-correct and demodulate one SSB (4 symbols) starting at `timing`."""
    length = N_SSB_SYMBOLS * params.symbol_len
    x = capture.samples
    if timing < 0 or timing + length > x.size:
        raise ValueError(
            f"burst at sample {timing} does not fit in capture of {x.size} samples"
        )
    n = np.arange(length)
    derotated = x[timing:timing + length] * np.exp(
        -2j * np.pi * cfo_hz / params.sample_rate * n
    )
    seg = IqCapture(derotated, sample_rate=params.sample_rate)
    return ofdm_demodulate(seg, params, symbol_start=0, n_symbols=N_SSB_SYMBOLS)


def detect_sss(
    capture: IqCapture, cand: PssCandidate, params: OfdmParams
) -> tuple[int, float]:
    """Identify the SSS group for a PSS candidate.

    The SSS symbol (two symbols after the PSS) is equalized with the channel
    estimate taken from the PSS resource elements (per-RE least squares,
    flattened across the symbol, which averages the estimation noise down),
    then correlated against all 336 group hypotheses for the candidate's n2.

    Returns:
        (n1, normalized metric of the winning hypothesis).
    """
    grid = demodulate_burst(capture, cand.timing, cand.cfo, params)
    sync = slice(SYNC_FIRST_SUBCARRIER, SYNC_FIRST_SUBCARRIER + SYNC_SEQ_LEN)
    chan = np.mean(grid.data[0, sync] * gen_pss(cand.n2))  # LS per RE, then flat
    equalized = grid.data[2, sync] * np.conj(chan)
    scores = np.abs(_sss_bank(cand.n2) @ equalized)
    denom = np.linalg.norm(equalized) * np.sqrt(SYNC_SEQ_LEN)
    n1 = int(np.argmax(scores))
    metric = float(scores[n1] / denom) if denom > 0 else 0.0
    return n1, metric


def resolve_cell_id(n1: int, n2: int) -> CellId:
    """Combine the SSS group and PSS sector indices into a cell identity."""
    return CellId(n1=n1, n2=n2)


def identify_ssb_index(grid: ResourceGrid, cell_id: CellId) -> tuple[int, float]:
    """Pick the SSB index whose DM-RS best matches the demodulated grid.

    Returns:
        (i_ssb_bar, normalized metric of the winning hypothesis).
    """
    mask = ssb_layout(cell_id.cell)["dmrs"]
    observed = grid.data[mask]
    bank = _dmrs_bank(cell_id.cell)
    scores = np.abs(bank.conj() @ observed)
    denom = np.linalg.norm(observed) * np.sqrt(bank.shape[1])
    i_bar = int(np.argmax(scores))
    metric = float(scores[i_bar] / denom) if denom > 0 else 0.0
    return i_bar, metric


def _merge_candidates(
    cands: list[PssCandidate], window: int
) -> list[PssCandidate]:
    """Collapse candidates closer than `window` samples, keeping the best metric."""
    merged: list[PssCandidate] = []
    for cand in sorted(cands, key=lambda c: (c.timing, -c.metric)):
        if merged and cand.timing - merged[-1].timing < window:
            if cand.metric > merged[-1].metric:
                merged[-1] = cand
        else:
            merged.append(cand)
    return merged


def enumerate_ssb_bursts(
    capture: IqCapture,
    params: OfdmParams,
    threshold: float = DEFAULT_PSS_THRESHOLD,
) -> DetectionResult:
    """Run the full pipeline: PSS scan, SSS vote, per-burst DM-RS index.

    Candidates closer than one SSB duration are merged; the cell identity is
    the majority vote across bursts (ties resolved toward the smaller cell),
    and disagreement between bursts is flagged, not fatal.
    """
    cands = detect_pss(capture, params, threshold)
    merged = _merge_candidates(cands, window=N_SSB_SYMBOLS * params.symbol_len)
    merged = [
        c for c in merged
        if c.timing + N_SSB_SYMBOLS * params.symbol_len <= capture.samples.size
    ]
    if not merged:
        return DetectionResult(cell_id=None)

    votes: Counter[tuple[int, int]] = Counter()
    staged: list[tuple[PssCandidate, int, float]] = []
    for cand in merged:
        n1, sss_metric = detect_sss(capture, cand, params)
        votes[(n1, cand.n2)] += 1
        staged.append((cand, n1, sss_metric))
    (n1, n2), _ = min(votes.items(), key=lambda kv: (-kv[1], 3 * kv[0][0] + kv[0][1]))
    cell_id = resolve_cell_id(n1, n2)

    bursts = []
    for cand, _, sss_metric in staged:
        grid = demodulate_burst(capture, cand.timing, cand.cfo, params)
        i_bar, dmrs_metric = identify_ssb_index(grid, cell_id)
        bursts.append(
            SsbBurst(
                timing=cand.timing,
                i_ssb_bar=i_bar,
                pss_metric=cand.metric,
                sss_metric=sss_metric,
                dmrs_metric=dmrs_metric,
            )
        )
    bursts.sort(key=lambda b: b.timing)
    return DetectionResult(
        cell_id=cell_id,
        bursts=bursts,
        cfo=float(np.median([c.cfo for c, _, _ in staged])),
        cell_id_conflict=len(votes) > 1,
    )


def estimate_occupancy(
    grids: list[ResourceGrid],
    noise_floor: float,
    margin: float = OCCUPANCY_MARGIN,
) -> tuple[float, int]:
    """Fraction of occupied REs and count of occupied 12-subcarrier blocks.

    An RE counts as occupied when its power, averaged over the supplied
    grids, exceeds noise_floor*margin. A resource block is occupied when any
    of its REs is.
    """
    if not grids:
        raise ValueError("no grids supplied")
    shape = grids[0].data.shape
    if any(g.data.shape != shape for g in grids):
        raise ValueError("grids do not share dimensions")
    mean_power = np.mean([np.abs(g.data) ** 2 for g in grids], axis=0)
    occupied = mean_power > noise_floor * margin
    n_rb = shape[1] // 12
    rb_occupied = occupied[:, :n_rb * 12].reshape(shape[0], n_rb, 12).any(axis=(0, 2))
    return float(occupied.mean()), int(rb_occupied.sum())
