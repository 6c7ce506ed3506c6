"""Command-line entry point: generate, detect, exposure, sound, otasim.

Configuration comes from built-in defaults, overridden by a JSON config file
(--config), overridden by explicit flags. Every report echoes the fully
resolved configuration so a run can be replayed exactly.

Exit codes: 0 success, 1 input/format error, 2 clean run with no findings.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detector import (
    DEFAULT_PSS_THRESHOLD,
    DetectionResult,
    SsbBurst,
    demodulate_burst,
    enumerate_ssb_bursts,
)
from .exposure import SIGNAL_CLASSES, build_report, code_selective_power
from .io import (
    read_capture,
    read_geometry,
    read_report,
    read_sweep_csv,
    write_aoa_csv,
    write_capture,
    write_pdp_csv,
    write_report,
)
from .otasim import (
    RcChannelModel,
    awgn,
    cancel_rc_decay,
    compute_calibration,
    estimate_transfer_matrix,
    isolation_db,
    make_rsrp_sounder,
    random_well_conditioned,
    simulate_rc_channel,
)
from .sounding import (
    Cir,
    VirtualArrayScan,
    aoa_delay_profile,
    cir_to_pdp,
    compensate_phase,
    deembed_pattern,
    sweep_to_cir,
)
from .types import CellId, OfdmParams, SsbConfig
from .waveform import ssb_waveform, synthesize_bursts

LOG = logging.getLogger("nrlab")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_FINDINGS = 2

_OFDM_DEFAULTS = {"mu": 1, "fft_size": 256, "cp_len": 18}

GENERATE_DEFAULTS = {
    **_OFDM_DEFAULTS,
    "cell": 0,
    "n1": None,
    "n2": None,
    "i_ssb": 0,
    "l_max": 8,
    "bursts": 1,
    "burst_period": 5480,
    "re_power": 1.0,
    "snr_db": None,
    "lead_in": 1000,
    "tail": 1000,
    "seed": 0,
    "out": None,
}

DETECT_DEFAULTS = {
    **_OFDM_DEFAULTS,
    "input": None,
    "threshold": DEFAULT_PSS_THRESHOLD,
    "out": None,
}

EXPOSURE_DEFAULTS = {
    **_OFDM_DEFAULTS,
    "capture": None,
    "detection": None,
    "rb_count": 100,
    "duty": 1.0,
    "mode": "conducted",
    "coverage_k": 2.0,
    "out": None,
}

SOUND_DEFAULTS = {
    "input": None,
    "window": "hann",
    "pad": 4,
    "aoa": False,
    "deembed": False,
    "geometry": None,
    "angle_start": -90.0,
    "angle_stop": 90.0,
    "angle_step": 1.0,
    "aoa_out": None,
    "out": None,
}

OTASIM_DEFAULTS = {
    "mode": None,
    "ports": 4,
    "snr_db": None,
    "tau_rc": 2e-7,
    "n_taps": 32,
    "tap_spacing": 5e-8,
    "keyhole": False,
    "cancel_demo": False,
    "epsilon": None,
    "seed": 0,
    "out": None,
}


def _load_config_file(path, defaults: dict) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ValueError(f"config file {path} has unknown keys: {', '.join(unknown)}")
    return raw


def _effective_config(defaults: dict, args: argparse.Namespace) -> dict:
    """Resolve defaults <- config file <- explicit flags (flags win)."""
    effective = dict(defaults)
    if getattr(args, "config", None):
        effective.update(_load_config_file(args.config, defaults))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            effective[key] = value
    return effective


def _require(cfg: dict, key: str, flag: str) -> None:
    if cfg[key] is None:
        raise ValueError(f"{flag} is required")


def _check_writable(path) -> None:
    """Fail on an unwritable output location before any work starts."""
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise ValueError(f"output directory does not exist: {parent}")


def _ofdm_params(cfg: dict) -> OfdmParams:
    return OfdmParams(
        mu=int(cfg["mu"]), fft_size=int(cfg["fft_size"]), cp_len=int(cfg["cp_len"])
    )


def _complex_matrix_payload(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def _detection_payload(result: DetectionResult, cfg: dict) -> dict:
    cell = None
    if result.cell_id is not None:
        cell = {
            "n1": result.cell_id.n1,
            "n2": result.cell_id.n2,
            "cell": result.cell_id.cell,
        }
    return {
        "cell_id": cell,
        "cfo_hz": result.cfo,
        "cell_id_conflict": result.cell_id_conflict,
        "bursts": [
            {
                "timing_sample": b.timing,
                "i_ssb_bar": b.i_ssb_bar,
                "metrics": {
                    "pss": b.pss_metric,
                    "sss": b.sss_metric,
                    "dmrs": b.dmrs_metric,
                },
            }
            for b in result.bursts
        ],
        "config": cfg,
    }


def _detection_from_payload(payload: dict) -> DetectionResult:
    try:
        cell = payload["cell_id"]
        cell_id = None if cell is None else CellId(n1=cell["n1"], n2=cell["n2"])
        bursts = [
            SsbBurst(
                timing=int(b["timing_sample"]),
                i_ssb_bar=int(b["i_ssb_bar"]),
                pss_metric=float(b["metrics"]["pss"]),
                sss_metric=float(b["metrics"]["sss"]),
                dmrs_metric=float(b["metrics"]["dmrs"]),
            )
            for b in payload["bursts"]
        ]
        return DetectionResult(
            cell_id=cell_id,
            bursts=bursts,
            cfo=float(payload["cfo_hz"]),
            cell_id_conflict=bool(payload.get("cell_id_conflict", False)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"detection report is missing field: {exc}") from exc


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _effective_config(GENERATE_DEFAULTS, args)
    _require(cfg, "out", "--out")
    _check_writable(cfg["out"])
    if cfg["n1"] is not None or cfg["n2"] is not None:
        if cfg["n1"] is None or cfg["n2"] is None:
            raise ValueError("--n1 and --n2 must be given together")
        cell_id = CellId(n1=int(cfg["n1"]), n2=int(cfg["n2"]))
        cfg["cell"] = cell_id.cell
    else:
        cell_id = CellId.from_cell(int(cfg["cell"]))
    cfg["n1"], cfg["n2"] = cell_id.n1, cell_id.n2

    params = _ofdm_params(cfg)
    ssb_cfg = SsbConfig(
        cell_id=cell_id,
        i_ssb_bar=int(cfg["i_ssb"]),
        l_max=int(cfg["l_max"]),
        burst_count=int(cfg["bursts"]),
        burst_period=int(cfg["burst_period"]),
        re_power=float(cfg["re_power"]),
    )
    capture = synthesize_bursts(
        ssb_cfg, params, lead_in=int(cfg["lead_in"]), tail=int(cfg["tail"])
    )
    if cfg["snr_db"] is not None:
        ssb_power = float(np.mean(np.abs(ssb_waveform(ssb_cfg, params)) ** 2))
        noise_power = ssb_power * 10.0 ** (-float(cfg["snr_db"]) / 10.0)
        capture = awgn(capture, noise_power, rng=int(cfg["seed"]))
    write_capture(
        cfg["out"],
        capture,
        created_by=f"nrlab {__version__} generate",
        seed=int(cfg["seed"]),
        extra={"generator_config": cfg},
    )
    LOG.info("wrote %s (%d samples, cell %d, %d bursts)",
             cfg["out"], len(capture), cell_id.cell, ssb_cfg.burst_count)
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _effective_config(DETECT_DEFAULTS, args)
    _require(cfg, "input", "--in")
    capture, _ = read_capture(cfg["input"])
    params = _ofdm_params(cfg)
    if abs(capture.sample_rate - params.sample_rate) > 1e-6 * params.sample_rate:
        LOG.warning(
            "capture sample rate %.6g Hz differs from numerology rate %.6g Hz",
            capture.sample_rate, params.sample_rate,
        )
    result = enumerate_ssb_bursts(capture, params, threshold=float(cfg["threshold"]))
    out = cfg["out"] or str(cfg["input"]) + ".detection.json"
    cfg["out"] = out
    _check_writable(out)
    write_report(out, _detection_payload(result, cfg))
    if not result.bursts:
        LOG.info("no bursts found; report written to %s", out)
        return EXIT_NO_FINDINGS
    LOG.info(
        "found %d bursts, cell %s; report written to %s",
        len(result.bursts),
        "?" if result.cell_id is None else result.cell_id.cell,
        out,
    )
    return EXIT_OK


def cmd_exposure(args: argparse.Namespace) -> int:
    cfg = _effective_config(EXPOSURE_DEFAULTS, args)
    _require(cfg, "capture", "--capture")
    _require(cfg, "detection", "--detection")
    capture, _ = read_capture(cfg["capture"])
    detection = _detection_from_payload(read_report(cfg["detection"]))
    if not detection.bursts:
        LOG.info("detection report holds no bursts; nothing to measure")
        return EXIT_NO_FINDINGS
    params = _ofdm_params(cfg)

    per_class = {name: [] for name in SIGNAL_CLASSES}
    for index, burst in enumerate(detection.bursts):
        grid = demodulate_burst(capture, burst.timing, detection.cfo, params)
        for name, value in code_selective_power(grid, detection, index).items():
            per_class[name].append(value)
    mean_powers = {name: float(np.mean(v)) for name, v in per_class.items()}

    report = build_report(
        mean_powers,
        n_re_total=int(cfg["rb_count"]) * 12,
        duty=float(cfg["duty"]),
        mode=cfg["mode"],
        coverage_factor=float(cfg["coverage_k"]),
    )
    out = cfg["out"] or str(cfg["capture"]) + ".exposure.json"
    cfg["out"] = out
    _check_writable(out)
    payload = {
        "per_signal_re_power": report.per_signal_re_power,
        "per_signal_re_power_db": {
            k: 10.0 * np.log10(v) if v > 0 else -np.inf
            for k, v in report.per_signal_re_power.items()
        },
        "extrapolated_power": report.extrapolated_power,
        "extrapolated_power_db": report.extrapolated_power_db,
        "n_re_total": report.n_re_total,
        "duty": report.duty,
        "uncertainty": {
            "components": [
                {"name": n, "std_db": u, "distribution": d, "placeholder": True}
                for n, u, d in report.uncertainty.components
            ],
            "coverage_factor": report.uncertainty.coverage_factor,
            "expanded_db": report.uncertainty.expanded_db,
        },
        "target_check": {
            "mode": report.target_check.mode,
            "passed": report.target_check.passed,
            "target_db": report.target_check.target_db,
            "margin_db": report.target_check.margin_db,
        },
        "config": cfg,
    }
    write_report(out, payload)
    LOG.info("exposure report written to %s", out)
    return EXIT_OK


def cmd_sound(args: argparse.Namespace) -> int:
    cfg = _effective_config(SOUND_DEFAULTS, args)
    _require(cfg, "input", "--in")
    inputs = cfg["input"] if isinstance(cfg["input"], list) else [cfg["input"]]
    cfg["input"] = list(map(str, inputs))
    sweeps = []
    for path in inputs:
        sweep = read_sweep_csv(path)
        if sweep.pilot is not None:
            sweep = compensate_phase(sweep)
        sweeps.append(sweep)

    out = cfg["out"] or str(inputs[0]) + ".pdp.csv"
    cfg["out"] = out
    _check_writable(out)
    pdp = cir_to_pdp(sweep_to_cir(sweeps[0], window=cfg["window"], pad_factor=int(cfg["pad"])))
    write_pdp_csv(out, pdp)
    LOG.info("PDP written to %s (noise floor %.2f dB)", out, pdp.noise_floor_db)

    if cfg["aoa"]:
        _require(cfg, "geometry", "--geometry")
        elements, pattern = read_geometry(cfg["geometry"])
        if len(sweeps) != elements.shape[0]:
            raise ValueError(
                f"AoA mode needs one sweep per element: got {len(sweeps)} sweeps "
                f"for {elements.shape[0]} elements"
            )
        scan = VirtualArrayScan(elements, sweeps, pattern=pattern)
        if cfg["deembed"]:
            scan = deembed_pattern(scan)
        angles = np.arange(
            float(cfg["angle_start"]),
            float(cfg["angle_stop"]) + float(cfg["angle_step"]) / 2.0,
            float(cfg["angle_step"]),
        )
        profile = aoa_delay_profile(
            scan, angles, window=cfg["window"], pad_factor=int(cfg["pad"])
        )
        aoa_out = cfg["aoa_out"] or str(inputs[0]) + ".aoa.csv"
        cfg["aoa_out"] = aoa_out
        _check_writable(aoa_out)
        write_aoa_csv(aoa_out, profile)
        LOG.info("AoA-delay map written to %s", aoa_out)
    return EXIT_OK


def _single_tap_smeared(n_bins: int, decay_bins: float, tap_bin: int) -> tuple[Cir, Cir]:
    """Demo pair: a chamber decay kernel and a single tap smeared by it."""
    k = np.arange(n_bins)
    kernel = np.exp(-k / (2.0 * decay_bins)).astype(np.complex128)
    measured = np.roll(kernel, tap_bin)
    meta = {"delay_resolution": 1.0, "max_delay": float(n_bins)}
    return (
        Cir(taps=measured, **meta),
        Cir(taps=kernel, **meta),
    )


def _out_of_bin_db(taps: np.ndarray, tap_bin: int) -> float:
    power = np.abs(taps) ** 2
    peak = power[tap_bin]
    rest = power.sum() - peak
    if rest == 0:
        return -np.inf
    return float(10.0 * np.log10(rest / peak))


def cmd_otasim(args: argparse.Namespace) -> int:
    cfg = _effective_config(OTASIM_DEFAULTS, args)
    cfg["mode"] = args.mode
    _require(cfg, "out", "--out")
    _check_writable(cfg["out"])
    if args.mode == "wireless-cable":
        rng = np.random.default_rng(int(cfg["seed"]))
        truth = random_well_conditioned(int(cfg["ports"]), rng)
        sounder = make_rsrp_sounder(
            truth, noise_db=None if cfg["snr_db"] is None else float(cfg["snr_db"]),
            rng=rng,
        )
        estimate = estimate_transfer_matrix(sounder, truth.n_ports)
        calibration = compute_calibration(estimate)
        isolation = isolation_db(truth.a @ calibration)
        payload = {
            "true_matrix": _complex_matrix_payload(truth.a),
            "estimated_matrix": _complex_matrix_payload(estimate.a),
            "calibration_matrix": _complex_matrix_payload(calibration),
            "estimated_condition_number": estimate.condition_number,
            "isolation_db": isolation,
            "config": cfg,
        }
        write_report(cfg["out"], payload)
        LOG.info("wireless-cable isolation: %.2f dB", isolation)
        return EXIT_OK

    model = RcChannelModel(
        tau_rc=float(cfg["tau_rc"]),
        n_taps=int(cfg["n_taps"]),
        tap_spacing=float(cfg["tap_spacing"]),
        keyhole=bool(cfg["keyhole"]),
        seed=int(cfg["seed"]),
    )
    realization = simulate_rc_channel(model)
    payload = {
        "delays_s": [float(d) for d in realization.delays],
        "gains": [[float(g.real), float(g.imag)] for g in realization.gains],
        "config": cfg,
    }
    if cfg["cancel_demo"]:
        tap_bin = 40
        measured, reference = _single_tap_smeared(256, decay_bins=10.0, tap_bin=tap_bin)
        before = _out_of_bin_db(measured.taps, tap_bin)
        if cfg["epsilon"] is not None:
            best_eps = float(cfg["epsilon"])
            corrected = cancel_rc_decay(measured, reference, best_eps)
        else:
            # pick epsilon by sweeping decades for the cleanest single tap
            best_eps, corrected = None, None
            for eps in (10.0 ** -e for e in range(1, 9)):
                candidate = cancel_rc_decay(measured, reference, eps)
                if corrected is None or (
                    _out_of_bin_db(candidate.taps, tap_bin)
                    < _out_of_bin_db(corrected.taps, tap_bin)
                ):
                    best_eps, corrected = eps, candidate
        payload["cancellation"] = {
            "epsilon": best_eps,
            "tap_bin": tap_bin,
            "out_of_bin_before_db": before,
            "out_of_bin_after_db": _out_of_bin_db(corrected.taps, tap_bin),
            "flags": list(corrected.flags),
        }
    write_report(cfg["out"], payload)
    LOG.info("rc report written to %s", cfg["out"])
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--out", help="output path")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def _add_ofdm(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mu", type=int, help="numerology (SCS = 15*2^mu kHz)")
    parser.add_argument("--fft-size", type=int, dest="fft_size")
    parser.add_argument("--cp-len", type=int, dest="cp_len")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nrlab",
        description="Desk-scale NR signal synthesis, detection, exposure, "
                    "channel-sounding post-processing and OTA simulation",
    )
    parser.add_argument("--version", action="version", version=f"nrlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize an SSB burst capture")
    _add_common(p)
    _add_ofdm(p)
    p.add_argument("--cell", type=int, help="cell identity 0..1007")
    p.add_argument("--n1", type=int, help="SSS group index (with --n2)")
    p.add_argument("--n2", type=int, help="PSS sector index (with --n1)")
    p.add_argument("--i-ssb", type=int, dest="i_ssb", help="first SSB index")
    p.add_argument("--l-max", type=int, dest="l_max", choices=(4, 8))
    p.add_argument("--bursts", type=int, help="number of SSB bursts")
    p.add_argument("--burst-period", type=int, dest="burst_period",
                   help="burst spacing in samples")
    p.add_argument("--re-power", type=float, dest="re_power",
                   help="linear power per occupied resource element")
    p.add_argument("--snr-db", type=float, dest="snr_db",
                   help="add white noise at this SNR relative to the SSB power")
    p.add_argument("--lead-in", type=int, dest="lead_in")
    p.add_argument("--tail", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="blind-detect SSB bursts in a capture")
    _add_common(p)
    _add_ofdm(p)
    p.add_argument("--in", dest="input", help="IQ capture file")
    p.add_argument("--threshold", type=float, help="PSS detection threshold in (0,1)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("exposure", help="code-selective power and extrapolation")
    _add_common(p)
    _add_ofdm(p)
    p.add_argument("--capture", help="IQ capture file")
    p.add_argument("--detection", help="detection report from 'detect'")
    p.add_argument("--rb-count", type=int, dest="rb_count",
                   help="resource blocks for extrapolation")
    p.add_argument("--duty", type=float, help="duty factor in (0,1]")
    p.add_argument("--mode", choices=("conducted", "ota"),
                   help="uncertainty target to check")
    p.add_argument("--coverage-k", type=float, dest="coverage_k")
    p.set_defaults(func=cmd_exposure)

    p = sub.add_parser("sound", help="sweep CSV to PDP / AoA-delay CSV")
    _add_common(p)
    p.add_argument("--in", dest="input", nargs="+", help="sweep CSV(s), one per element")
    p.add_argument("--window", choices=("rectangular", "hann", "hamming"))
    p.add_argument("--pad", type=int, help="zero-padding factor")
    p.add_argument("--aoa", action="store_true", help="also write the angle-delay map")
    p.add_argument("--deembed", action="store_true",
                   help="de-embed the antenna pattern from the geometry file")
    p.add_argument("--geometry", help="geometry JSON (elements + optional pattern)")
    p.add_argument("--angle-start", type=float, dest="angle_start")
    p.add_argument("--angle-stop", type=float, dest="angle_stop")
    p.add_argument("--angle-step", type=float, dest="angle_step")
    p.add_argument("--aoa-out", dest="aoa_out", help="angle-delay CSV path")
    p.set_defaults(func=cmd_sound)

    p = sub.add_parser("otasim", help="wireless-cable calibration / RC fading")
    _add_common(p)
    p.add_argument("mode", choices=("wireless-cable", "rc"))
    p.add_argument("--ports", type=int, choices=(2, 4, 8))
    p.add_argument("--snr-db", type=float, dest="snr_db",
                   help="RSRP sounding SNR (wireless-cable)")
    p.add_argument("--tau-rc", type=float, dest="tau_rc", help="decay constant, s")
    p.add_argument("--n-taps", type=int, dest="n_taps")
    p.add_argument("--tap-spacing", type=float, dest="tap_spacing", help="seconds")
    p.add_argument("--keyhole", action="store_true")
    p.add_argument("--cancel-demo", action="store_true", dest="cancel_demo",
                   help="include a decay-cancellation demonstration")
    p.add_argument("--epsilon", type=float, help="deconvolution regularizer")
    p.set_defaults(func=cmd_otasim)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
