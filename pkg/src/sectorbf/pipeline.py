"""Apply a beamformer bank to multichannel audio and export beam patterns."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .designer import BeamformerBank, beam_responses
from .stft import SpectrogramTensor, StftConfig, stft_forward, stft_inverse

DB_EPS = 1e-12
PATTERN_HEADER = ["elevation_deg", "azimuth_deg", "freq_hz", "magnitude_db"]


class AudioFormatError(ValueError):
    pass


@dataclass
class MultichannelAudio:
    samples: np.ndarray  # (channels, time)
    sample_rate_hz: float = 16000.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"audio must be (channels, time) with >= 1 channel, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio contains NaN or Inf samples")
        self.samples = x

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]


def check_compatible(audio: MultichannelAudio, bank: BeamformerBank, cfg: StftConfig) -> None:
    if audio.num_channels != bank.num_mics:
        raise ValueError(f"channel count mismatch: bank expects {bank.num_mics} channels, "
                         f"audio has {audio.num_channels}")
    if audio.sample_rate_hz != bank.sample_rate_hz:
        raise ValueError(f"sample rate mismatch: bank designed for {bank.sample_rate_hz:g} Hz, "
                         f"audio is {audio.sample_rate_hz:g} Hz")
    if cfg.n_fft != bank.n_fft:
        raise ValueError(f"n_fft mismatch: bank uses {bank.n_fft}, STFT config uses {cfg.n_fft}")


def filter_spectrogram(spec: SpectrogramTensor, weights: np.ndarray) -> SpectrogramTensor:
    """Per-bin ``W^H x``: (I, bins, frames) -> (S, bins, frames)."""
    out = np.einsum("bis,ibt->sbt", weights.conj(), spec.data)
    return SpectrogramTensor(out, spec.config, spec.length)


def apply_bank(audio: MultichannelAudio, bank: BeamformerBank,
               cfg: StftConfig | None = None) -> MultichannelAudio:
    """One output channel per sector, same length and rate as the input."""
    if cfg is None:
        cfg = StftConfig(bank.n_fft, bank.n_fft // 2, sample_rate_hz=bank.sample_rate_hz)
    check_compatible(audio, bank, cfg)
    spec = stft_forward(audio.samples, cfg)
    out = stft_inverse(filter_spectrogram(spec, bank.weights))
    return MultichannelAudio(out, audio.sample_rate_hz)


@dataclass
class PatternMap:
    magnitudes_db: np.ndarray  # (elevations, azimuths, bins)
    elevations_deg: np.ndarray
    azimuth_step_deg: float
    freq_axis_hz: np.ndarray

    @property
    def azimuths_deg(self) -> np.ndarray:
        return np.arange(self.magnitudes_db.shape[1]) * self.azimuth_step_deg


def export_pattern(bank: BeamformerBank, sector_index: int, elevations_deg,
                   azimuth_step_deg: float = 1.0) -> PatternMap:
    """Beam magnitude in dB over an azimuth grid at the listed elevations, all bins."""
    el = np.atleast_1d(np.asarray(elevations_deg, dtype=float))
    if el.size == 0:
        raise ValueError("need at least one elevation")
    if np.any(np.abs(el) > 90.0):
        raise ValueError(f"elevations must lie in [-90, 90], got {el.tolist()}")
    if not azimuth_step_deg > 0:
        raise ValueError("azimuth step must be positive")
    n_az = int(np.ceil(360.0 / azimuth_step_deg - 1e-9))
    az = np.arange(n_az) * azimuth_step_deg
    el_g, az_g = np.meshgrid(el, az, indexing="ij")
    resp = beam_responses(bank, sector_index, az_g, el_g)  # (bins, el, az)
    mag_db = 20.0 * np.log10(np.abs(resp) + DB_EPS)
    return PatternMap(np.ascontiguousarray(mag_db.transpose(1, 2, 0)), el,
                      float(azimuth_step_deg), bank.frequencies())


def write_pattern_csv(pattern: PatternMap, path) -> None:
    """One row per grid point; azimuth varies fastest, then frequency, then elevation."""
    el_n, az_n, bin_n = pattern.magnitudes_db.shape
    az = pattern.azimuths_deg
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PATTERN_HEADER) + "\n")
        for e in range(el_n):
            el_txt = repr(float(pattern.elevations_deg[e]))
            for b in range(bin_n):
                f_txt = repr(float(pattern.freq_axis_hz[b]))
                col = pattern.magnitudes_db[e, :, b]
                fh.writelines(f"{el_txt},{float(a)!r},{f_txt},{float(m)!r}\n"
                              for a, m in zip(az, col))


def read_pattern_csv(path) -> PatternMap:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PATTERN_HEADER:
            raise ValueError(f"unexpected pattern header {header}")
        rows = np.array([[float(v) for v in row] for row in reader])
    elevations = np.unique(rows[:, 0], return_index=True)
    el = rows[np.sort(elevations[1]), 0]
    az = np.unique(rows[:, 1])
    freqs = np.unique(rows[:, 2])
    mag = rows[:, 3].reshape(el.size, freqs.size, az.size).transpose(0, 2, 1)
    step = float(az[1] - az[0]) if az.size > 1 else 360.0
    return PatternMap(np.ascontiguousarray(mag), el, step, freqs)


def read_wav(path, expected_rate: float | None = 16000.0) -> MultichannelAudio:
    """Read PCM16 or float32 WAV as float samples in [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise AudioFormatError(f"{path}: unsupported WAV sample type {data.dtype} "
                               "(only PCM 16-bit and float 32-bit)")
    if expected_rate is not None and rate != expected_rate:
        raise AudioFormatError(f"{path}: sample rate {rate} Hz, expected {expected_rate:g} Hz "
                               "(resampling is not supported)")
    samples = samples.T if samples.ndim == 2 else samples[np.newaxis, :]
    return MultichannelAudio(samples, float(rate))


def write_wav(path, audio: MultichannelAudio, pcm16: bool = False) -> None:
    rate = int(round(audio.sample_rate_hz))
    if pcm16:
        data = np.clip(np.round(audio.samples.T * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = audio.samples.T.astype(np.float32)
    wavfile.write(path, rate, np.ascontiguousarray(data))


def sidecar_path(wav_path) -> Path:
    p = Path(wav_path)
    return p.with_name(p.name + ".json")


def write_sidecar(wav_path, bank: BeamformerBank, bank_sha256: str,
                  cfg: StftConfig, extra: dict | None = None) -> Path:
    """JSON metadata next to a beamformed WAV: bank hash, channel labels, config echo."""
    meta = {
        "bank_sha256": bank_sha256,
        "channels": [s.label for s in bank.sectors],
        "sectors": [
            {"label": s.label, "azimuth_start_deg": s.azimuth_start_deg,
             "azimuth_end_deg": s.azimuth_end_deg, "elevation_min_deg": s.elevation_min_deg,
             "elevation_max_deg": s.elevation_max_deg}
            for s in bank.sectors
        ],
        "config": {
            "num_mics": bank.num_mics,
            "n_fft": cfg.n_fft,
            "hop": cfg.hop,
            "window": cfg.window,
            "sample_rate_hz": bank.sample_rate_hz,
            "diagonal_loading": bank.config.diagonal_loading,
            "angle_step_deg": bank.config.angle_step_deg,
            "weighting_mode": bank.config.weighting_mode,
            "speed_of_sound_mps": bank.ctx.speed_of_sound_mps,
        },
    }
    if extra:
        meta.update(extra)
    out = sidecar_path(wav_path)
    out.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out
