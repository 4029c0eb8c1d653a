"""``sectorbf`` command-line tool.

Exit codes: 0 success, 1 input or configuration error, 2 numerical or
runtime failure. Diagnostics go to stderr; results only to files.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bank_io import BankFormatError, export_bank_csv, file_sha256, load_bank, save_bank
from .config import ConfigError, SceneConfig, load_scene_config, load_tool_config
from .designer import DesignError, design_bank, resolve_threads
from .metrics import (CountConfusion, CountsFormatError, read_count_pairs, score_table,
                      write_score_table)
from .pipeline import (AudioFormatError, apply_bank, export_pattern, read_wav,
                       write_pattern_csv, write_sidecar, write_wav)
from .scene import (SceneSource, SceneSpec, TargetOutsideSectorsError, render_scene,
                    sector_sir_table, speech_shaped_noise)
from .stft import StftConfig

log = logging.getLogger("sectorbf")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors (1); 2 is reserved for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _stft_for(bank, hop: int | None) -> StftConfig:
    return StftConfig(bank.n_fft, hop or bank.n_fft // 2, "sqrt_hann", bank.sample_rate_hz)


def cmd_design(args) -> int:
    cfg = load_tool_config(args.config)
    threads = resolve_threads(args.threads)
    log.info("designing %d sectors for %d mics, %d bins, %g deg grid, %d thread(s)",
             len(cfg.sectors), cfg.geometry.num_mics, cfg.design.n_bins,
             cfg.design.angle_step_deg, threads)
    bank = design_bank(cfg.geometry, cfg.sectors, cfg.design, cfg.ctx, threads=threads)
    save_bank(bank, args.out)
    if args.csv:
        export_bank_csv(bank, args.csv)
    cond = bank.condition
    worst = int(np.argmax(cond))
    print(f"condition number over {cond.size} bins: min {cond.min():.3g}, "
          f"median {np.median(cond):.3g}, max {cond.max():.3g} "
          f"(bin {worst}, {bank.frequencies()[worst]:.1f} Hz)", file=sys.stderr)
    print(f"wrote bank I={bank.num_mics} S={bank.num_sectors} bins={cfg.design.n_bins} "
          f"-> {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_apply(args) -> int:
    bank = load_bank(args.bank)
    audio = read_wav(args.input, expected_rate=bank.sample_rate_hz)
    if audio.num_channels != bank.num_mics:
        raise UsageError(f"{args.input}: expected {bank.num_mics} channels for this bank, "
                         f"found {audio.num_channels}")
    cfg = _stft_for(bank, args.hop)
    out = apply_bank(audio, bank, cfg)
    write_wav(args.out, out)
    write_sidecar(args.out, bank, file_sha256(args.bank), cfg, {"input": str(args.input)})
    print(f"wrote {out.num_channels} sector channels, {out.num_samples} samples -> {args.out}",
          file=sys.stderr)
    return EXIT_OK


def _parse_elevations(text: str) -> list[float]:
    items = [t for t in text.replace(" ", "").split(",") if t]
    if not items:
        raise UsageError("--elevations needs at least one value")
    try:
        values = [float(t) for t in items]
    except ValueError:
        raise UsageError(f"--elevations must be comma-separated numbers, got {text!r}") from None
    bad = [v for v in values if not -90 <= v <= 90]
    if bad:
        raise UsageError(f"--elevations values {bad} outside [-90, 90]")
    return values


def _sector_index(bank, sector: int) -> int:
    if not 1 <= sector <= bank.num_sectors:
        raise UsageError(f"--sector {sector} out of range 1..{bank.num_sectors}")
    return sector - 1


def cmd_pattern(args) -> int:
    elevations = _parse_elevations(args.elevations)
    bank = load_bank(args.bank)
    pattern = export_pattern(bank, _sector_index(bank, args.sector), elevations,
                             args.azimuth_step)
    write_pattern_csv(pattern, args.out)
    print(f"wrote pattern {pattern.magnitudes_db.shape} -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _source_signal(src, index: int, scene: SceneConfig, n: int, fs: float) -> np.ndarray:
    seed = src.resolved_seed(scene.seed, index)
    if src.signal == "speech_shaped":
        return speech_shaped_noise(n, fs, seed)
    if src.signal == "white":
        return np.random.default_rng(seed).standard_normal(n)
    audio = read_wav(src.signal, expected_rate=fs)
    if audio.num_channels != 1:
        raise UsageError(f"{src.signal}: source WAV must be mono, has {audio.num_channels} channels")
    x = audio.samples[0, :n]
    return np.pad(x, (0, n - x.size))


def cmd_simulate(args) -> int:
    scene_cfg = load_scene_config(args.config)
    if args.seed is not None:
        scene_cfg.seed = args.seed
    bank = load_bank(args.bank)
    geometry = bank.geometry
    if scene_cfg.geometry is not None:
        if (scene_cfg.geometry.num_mics != geometry.num_mics
                or not np.allclose(scene_cfg.geometry.mics, geometry.mics, atol=1e-9)):
            raise UsageError(f"{args.config}: scene geometry does not match the bank geometry")
    fs = bank.sample_rate_hz
    n = int(round(scene_cfg.duration_s * fs))
    sources = [SceneSource(s.direction, _source_signal(s, i, scene_cfg, n, fs), s.gain)
               for i, s in enumerate(scene_cfg.sources)]
    spec = SceneSpec(sources, geometry, bank.ctx, scene_cfg.noise_level, scene_cfg.seed)
    cfg = _stft_for(bank, args.hop)
    rows = sector_sir_table(spec, bank, scene_cfg.target_source, cfg)

    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sector", "label", "contains_target", "output_sir_db",
                         "reference_sir_db", "sir_gain_db"])
        for r in rows:
            writer.writerow([r.sector_index + 1, r.label, int(r.contains_target),
                             repr(r.output_sir_db), repr(r.reference_sir_db), repr(r.sir_gain_db)])
    mixture = render_scene(spec, cfg)
    beams = apply_bank(mixture, bank, cfg)
    mix_path = out.with_name(out.stem + "_mixture.wav")
    beams_path = out.with_name(out.stem + "_beams.wav")
    write_wav(mix_path, mixture)
    write_wav(beams_path, beams)
    write_sidecar(beams_path, bank, file_sha256(args.bank), cfg,
                  {"input": mix_path.name, "scene_seed": scene_cfg.seed})
    target = next(r for r in rows if r.contains_target)
    print(f"target in {target.label}: SIR gain {target.sir_gain_db:.2f} dB; wrote {out}, "
          f"{mix_path.name}, {beams_path.name}", file=sys.stderr)
    return EXIT_OK


def cmd_eval_counts(args) -> int:
    conf = CountConfusion.from_pairs(read_count_pairs(args.pairs))
    rows = score_table(conf)
    write_score_table(rows, args.out)
    print(f"scored {int(conf.counts.sum())} items over true counts {list(conf.true_labels)} "
          f"-> {args.out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=0,
                        help="worker threads, 0 = auto (SECTORBF_THREADS or CPU count); "
                             "results do not depend on it")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="sectorbf",
                                     description="Data-independent angular-sector beamforming.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", parents=[common], help="design a beamformer bank from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="bank file to write")
    p.add_argument("--csv", help="also export weights as CSV")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("apply", parents=[common], help="beamform a multichannel WAV")
    p.add_argument("input", help="input WAV, one channel per microphone")
    p.add_argument("--bank", required=True)
    p.add_argument("--out", required=True, help="output WAV, one channel per sector")
    p.add_argument("--hop", type=int, help="STFT hop in samples (default n_fft/2)")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("pattern", parents=[common], help="export one beam's response map")
    p.add_argument("--bank", required=True)
    p.add_argument("--sector", type=int, required=True, help="1-based sector number")
    p.add_argument("--elevations", required=True, help="comma-separated degrees, e.g. 10,25,40,55")
    p.add_argument("--azimuth-step", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("simulate", parents=[common],
                       help="render a far-field scene and report per-sector SIR gain")
    p.add_argument("--config", required=True, help="scene config")
    p.add_argument("--bank", required=True)
    p.add_argument("--out", required=True, help="report CSV; WAVs are written alongside")
    p.add_argument("--seed", type=int, help="override the scene seed")
    p.add_argument("--hop", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval-counts", parents=[common],
                       help="speaker-count confusion scores from true,estimated pairs")
    p.add_argument("pairs", help="CSV with true_count,estimated_count rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_counts)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except TargetOutsideSectorsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, UsageError, AudioFormatError, BankFormatError, CountsFormatError,
            ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DesignError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - never abort with a traceback
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
