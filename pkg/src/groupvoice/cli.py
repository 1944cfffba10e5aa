"""Command-line front end: simulate, separate, enhance, analyze, pipeline.

Exit status is 0 on success (a degenerate input that yields a report full of
nulls still counts), 1 for usage errors, 2 for data errors (unreadable or
inconsistent inputs, failed numerical preconditions) and 3 for anything
unexpected.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .errors import DimensionMismatchError, GroupVoiceError
from .ica import fastica
from .report import (ConfigError, FeatureReport, RunConfig, analyze_signal, as_jsonable,
                     comparison_csv, enhance_signal, sha256_file)
from .scene import Scene, demo_sources, load_manifest, measured_snr_db, mix, resolve_mixing
from .signal import MonoSignal, atomic_write_bytes, load_wav, wav_bytes

log = logging.getLogger("groupvoice")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
WAV_PEAK = 0.5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- helpers

def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(path, text.encode("utf-8"))


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(as_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_wav(path: Path, signal: MonoSignal) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(path, wav_bytes([signal.samples], signal.sample_rate))


def _load_channels(paths) -> tuple[list[MonoSignal], list[tuple[str, str]]]:
    """All channels of all files, in order, plus ``(name, sha256)`` per file."""
    sigs, hashes = [], []
    for p in paths:
        chans = load_wav(p)
        sigs.extend(chans)
        hashes.append((Path(p).name, sha256_file(p)))
    return sigs, hashes


def _load_mono(path) -> MonoSignal:
    chans = load_wav(path)
    if len(chans) != 1:
        raise DimensionMismatchError(f"{path}: expected a mono WAV, found {len(chans)} channels")
    return chans[0]


def _check_common(sigs) -> None:
    if len({len(s) for s in sigs}) > 1:
        raise DimensionMismatchError("all channels must have the same length")
    if len({s.sample_rate for s in sigs}) > 1:
        raise DimensionMismatchError("all channels must share one sample rate")


def _scaled_for_wav(sig: MonoSignal) -> tuple[MonoSignal, float]:
    peak = float(np.max(np.abs(sig.samples))) if len(sig) else 0.0
    scale = WAV_PEAK / peak if peak > 0 else 1.0
    return sig.with_samples(sig.samples * scale), scale


def _run_info(out: Path, command: str, started: float) -> None:
    """Wall-clock details, kept apart from the deterministic outputs."""
    _write_json(out / "run_info.json", {
        "command": command,
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_s": round(time.perf_counter() - started, 3),
        "kernel_backend": kernels.BACKEND,
        "version": __version__,
    })


# ---------------------------------------------------------------- config

_TUNABLES = ("n_components", "contrast", "tol", "max_iter", "alpha", "beta", "pause_theta",
             "fmin", "fmax", "voicing_threshold", "pq_k", "calib_spl")


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_json(Path(args.config).read_text())
    changes = {k: getattr(args, k, None) for k in _TUNABLES}
    changes["seed"] = args.seed
    return cfg.replace(**changes)


# ---------------------------------------------------------------- commands

def cmd_simulate(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    if args.demo == bool(args.manifest):
        raise UsageError("simulate: give either a manifest or --demo")
    if args.demo:
        sources = demo_sources(args.n_sources, args.duration, args.rate)
        kind, snr, seed = "demo", args.snr_db, cfg.seed
        names = [f"s_{i + 1}.wav" for i in range(len(sources))]
        src_hashes = []
    else:
        man = load_manifest(args.manifest)
        sources = []
        for p in man["sources"]:
            sources.extend(load_wav(p))
        kind, snr = man["mixing"], man["snr_db"]
        seed = args.seed if args.seed is not None else man["seed"]
        names = [Path(p).name for p in man["sources"]]
        src_hashes = [(Path(p).name, sha256_file(p)) for p in man["sources"]]
        if args.snr_db is not None:
            snr = args.snr_db
    mixing = resolve_mixing(kind, len(sources))
    scene = Scene(tuple(sources), mixing, snr, seed)
    sensors = mix(scene)
    clipped = max(float(np.max(np.abs(x.samples))) for x in sensors) if len(sensors[0]) else 0.0
    if clipped > 1.0:
        log.warning("sensor peak %.3f exceeds full scale; WAV output will clip", clipped)
    sensor_files = [f"x_{i + 1}.wav" for i in range(len(sensors))]
    truth_files = [f"truth/s_{i + 1}.wav" for i in range(len(sources))]
    for f, x in zip(sensor_files, sensors):
        _write_wav(out / f, x)
    for f, s in zip(truth_files, sources):
        _write_wav(out / f, s)
    _write_text(out / "mixing.csv", mixing.to_csv())
    clean = mix(Scene(tuple(sources), mixing, None, seed)) if snr is not None else sensors
    _write_json(out / "scene.json", {
        "sources": names,
        "source_inputs": [{"name": n, "sha256": h} for n, h in src_hashes],
        "truth": truth_files,
        "sensors": sensor_files,
        "mixing_kind": kind if kind in ("identity", "demo") else Path(kind).name,
        "mixing": mixing.weights,
        "snr_db": snr,
        "measured_snr_db": [measured_snr_db(c.samples, x.samples) if snr is not None else None
                            for c, x in zip(clean, sensors)],
        "seed": seed,
        "sample_rate": scene.sample_rate,
        "n_samples": len(sources[0]),
    })
    log.info("wrote %d sensor signals to %s", len(sensors), out)
    return EXIT_OK


def _separate(inputs, refs, cfg: RunConfig, out: Path, subdir: str = ""):
    sigs, hashes = _load_channels(inputs)
    _check_common(sigs)
    k = cfg.n_components if cfg.n_components is not None else len(sigs)
    if k > len(sigs):
        raise UsageError(f"--components {k} exceeds the {len(sigs)} input channel(s)")
    ref_sigs = None
    if refs:
        ref_sigs, _ = _load_channels(refs)
        if len(ref_sigs) != k:
            raise DimensionMismatchError(f"{len(ref_sigs)} references for {k} components")
    res = fastica(sigs, k, contrast=cfg.contrast, tol=cfg.tol, max_iter=cfg.max_iter,
                  seed=cfg.seed, refs=ref_sigs, max_restarts=cfg.max_restarts)
    outputs = []
    for i, s in enumerate(res.sources):
        scaled, scale = _scaled_for_wav(s)
        name = f"{subdir}s_{i + 1}.wav"
        _write_wav(out / name, scaled)
        outputs.append({"file": name, "wav_scale": scale})
    doc = res.to_dict()
    doc.update({
        "inputs": [{"name": n, "sha256": h} for n, h in hashes],
        "outputs": outputs,
        "note": "WAV samples = unit-variance source * wav_scale",
        "parameters": cfg.to_dict(),
        "kernel_backend": kernels.BACKEND,
    })
    _write_json(out / "separation.json", doc)
    return res, hashes


def cmd_separate(args, cfg: RunConfig) -> int:
    res, _ = _separate(args.inputs, args.refs, cfg, Path(args.out))
    if res.score is not None:
        log.info("mean |r| %.4f, mean SI-SDR %.2f dB", res.score.mean_correlation,
                 res.score.mean_si_sdr_db)
    return EXIT_OK


def cmd_enhance(args, cfg: RunConfig) -> int:
    sig = _load_mono(args.input)
    target = Path(args.output) if args.output else Path(args.out) / f"{Path(args.input).stem}_enhanced.wav"
    _write_wav(target, enhance_signal(sig, cfg))
    return EXIT_OK


def cmd_analyze(args, cfg: RunConfig) -> int:
    if len(args.inputs) > 1 and not args.concat:
        raise UsageError("analyze: several inputs need --concat")
    sigs = [_load_mono(p) for p in args.inputs]
    if len({s.sample_rate for s in sigs}) > 1:
        raise DimensionMismatchError("concatenated inputs must share one sample rate")
    sig = sigs[0] if len(sigs) == 1 else MonoSignal(np.concatenate([s.samples for s in sigs]),
                                                     sigs[0].sample_rate)
    sid = "+".join(Path(p).stem for p in args.inputs)
    hashes = [(Path(p).name, sha256_file(p)) for p in args.inputs]
    res = analyze_signal(sig, cfg, sid, hashes)
    report = Path(args.report) if args.report else Path(args.out) / f"{sid}.json"
    _write_text(report, res.report.to_json())
    if args.csv:
        d = Path(args.csv)
        if res.contour is not None:
            _write_text(d / f"{sid}_f0.csv", res.contour.to_csv())
        if res.loudness is not None:
            _write_text(d / f"{sid}_loudness.csv", res.loudness.to_csv())
    return EXIT_OK


def cmd_pipeline(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    res, hashes = _separate(args.inputs, args.refs, cfg, out, subdir="separated/")
    reports = []
    for i, src in enumerate(res.sources):
        sid = f"s_{i + 1}"
        stage = "enhance"
        try:
            sig = src
            if not args.no_enhance:
                sig = enhance_signal(src, cfg)
                scaled, _ = _scaled_for_wav(sig)
                _write_wav(out / "enhanced" / f"{sid}.wav", scaled)
            stage = "analyze"
            rep = analyze_signal(sig, cfg, sid, hashes).report
        except (GroupVoiceError, ValueError, FloatingPointError) as exc:
            log.warning("%s: %s stage failed: %s", sid, stage, exc)
            rep = FeatureReport.failed(sid, stage, exc, cfg, hashes, src.duration, src.sample_rate)
        _write_text(out / "reports" / f"{sid}.json", rep.to_json())
        reports.append(rep)
    _write_text(out / "comparison.csv", comparison_csv(reports))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, metavar="run.json",
                        help="RunConfig JSON; command-line flags take precedence")
    common.add_argument("--out", default=argparse.SUPPRESS, metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="groupvoice", description="Separate and analyse group voice recordings.")
    p.add_argument("--version", action="version", version=f"groupvoice {__version__}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def ica_flags(sp):
        sp.add_argument("--components", dest="n_components", type=int)
        sp.add_argument("--refs", nargs="+", metavar="WAV", help="ground-truth sources for ordering and scoring")
        sp.add_argument("--contrast", choices=["logcosh", "gauss"])
        sp.add_argument("--tol", type=float)
        sp.add_argument("--max-iter", dest="max_iter", type=int)

    def enhance_flags(sp):
        sp.add_argument("--alpha", type=float, help="over-subtraction factor (default 2.0)")
        sp.add_argument("--beta", type=float, help="spectral floor (default 0.02)")
        sp.add_argument("--pause-theta", dest="pause_theta", type=float,
                        help="pause threshold relative to the median frame RMS (default 0.25)")

    def analyze_flags(sp):
        sp.add_argument("--fmin", type=float)
        sp.add_argument("--fmax", type=float)
        sp.add_argument("--voicing-threshold", dest="voicing_threshold", type=float)
        sp.add_argument("--pq-k", dest="pq_k", type=int, help="order of the long PPQ/APQ quotients")
        sp.add_argument("--calib-spl", dest="calib_spl", type=float,
                        help="dB SPL of a full-scale sine (default 94)")

    sp = sub.add_parser("simulate", parents=[common], help="mix sources into sensor signals")
    sp.add_argument("manifest", nargs="?", help="scene manifest JSON")
    sp.add_argument("--demo", action="store_true", help="use the built-in AM-sawtooth speakers")
    sp.add_argument("--n-sources", dest="n_sources", type=int, default=3)
    sp.add_argument("--duration", type=float, default=5.0)
    sp.add_argument("--rate", type=int, default=44100)
    sp.add_argument("--snr-db", dest="snr_db", type=float)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("separate", parents=[common], help="FastICA separation")
    sp.add_argument("inputs", nargs="+", metavar="WAV")
    ica_flags(sp)
    sp.set_defaults(func=cmd_separate)

    sp = sub.add_parser("enhance", parents=[common], help="spectral subtraction")
    sp.add_argument("input")
    sp.add_argument("output", nargs="?")
    enhance_flags(sp)
    sp.set_defaults(func=cmd_enhance)

    sp = sub.add_parser("analyze", parents=[common], help="feature report for one signal")
    sp.add_argument("inputs", nargs="+", metavar="WAV")
    sp.add_argument("--report", metavar="JSON")
    sp.add_argument("--csv", metavar="DIR", help="also write F0 and loudness contours as CSV")
    sp.add_argument("--concat", action="store_true", help="analyse the inputs joined end to end")
    analyze_flags(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("pipeline", parents=[common], help="separate, enhance and analyse")
    sp.add_argument("inputs", nargs="+", metavar="WAV")
    ica_flags(sp)
    enhance_flags(sp)
    analyze_flags(sp)
    sp.add_argument("--no-enhance", dest="no_enhance", action="store_true")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        cfg = resolve_config(args)
        code = args.func(args, cfg)
        if args.command in ("simulate", "separate", "pipeline"):
            _run_info(Path(args.out), args.command, started)
        return code
    except (UsageError, ConfigError) as exc:
        print(f"groupvoice {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GroupVoiceError, OSError, ValueError) as exc:
        print(f"groupvoice {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
