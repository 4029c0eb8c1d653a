"""Anechoic far-field scene synthesis and SIR-gain verification of a bank.

Sources are propagated with the same plane-wave steering model the designer
integrates, applied per STFT bin, so the simulation is consistent with the
design equations by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .designer import BeamformerBank
from .geometry import ArrayGeometry, Direction, WaveContext, find_sector, steering_vectors, unit_vector
from .metrics import DB_CAP, power_ratio_db
from .pipeline import MultichannelAudio, apply_bank
from .stft import SpectrogramTensor, StftConfig, stft_forward, stft_inverse

SIR_BAND_HZ = (300.0, 4000.0)


class TargetOutsideSectorsError(ValueError):
    pass


@dataclass(frozen=True)
class SceneSource:
    direction: Direction
    signal: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        sig = np.asarray(self.signal, dtype=float)
        if sig.ndim != 1 or sig.size == 0:
            raise ValueError("source signal must be a non-empty mono array")
        if not np.all(np.isfinite(sig)):
            raise ValueError("source signal contains NaN or Inf")
        if not self.gain >= 0:
            raise ValueError(f"source gain must be >= 0, got {self.gain}")
        object.__setattr__(self, "signal", sig)


@dataclass(frozen=True)
class SceneSpec:
    sources: Sequence[SceneSource]
    geometry: ArrayGeometry
    ctx: WaveContext = field(default_factory=WaveContext)
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.sources) < 1:
            raise ValueError("a scene needs at least one source")
        if not self.noise_level >= 0:
            raise ValueError(f"noise level must be >= 0, got {self.noise_level}")
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def length(self) -> int:
        return max(s.signal.size for s in self.sources)


def speech_shaped_noise(num_samples: int, fs: float = 16000.0, seed: int = 0) -> np.ndarray:
    """Unit-RMS Gaussian noise with a long-term speech-like spectral tilt.

    Flat around 100-500 Hz, rolling off at 6 dB/octave above 500 Hz and
    high-passed below 100 Hz.
    """
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(num_samples)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(num_samples, 1.0 / fs)
    shape = (f / np.sqrt(f ** 2 + 100.0 ** 2)) / np.sqrt(1.0 + (f / 500.0) ** 2)
    out = np.fft.irfft(spec * shape, n=num_samples)
    return out / np.sqrt(np.mean(out ** 2))


def _propagate(spec: SceneSpec, cfg: StftConfig) -> np.ndarray:
    n_mics = spec.geometry.num_mics
    length = spec.length
    freqs = cfg.bin_frequencies()
    total = None
    for src in spec.sources:
        sig = np.pad(src.signal, (0, length - src.signal.size))
        S = stft_forward(sig, cfg).data[0]  # (bins, frames)
        d = steering_vectors(spec.geometry, unit_vector(src.direction), freqs, spec.ctx)  # (bins, I)
        X = src.gain * d.T[:, :, None] * S[None, :, :]
        total = X if total is None else total + X
    assert total is not None and total.shape[0] == n_mics
    return stft_inverse(SpectrogramTensor(total, cfg, length))


def render_scene(spec: SceneSpec, cfg: StftConfig) -> MultichannelAudio:
    """Multichannel recording of the scene: propagated sources plus white noise."""
    if cfg.sample_rate_hz != spec.ctx.sample_rate_hz:
        raise ValueError(f"sample rate mismatch: scene {spec.ctx.sample_rate_hz:g} Hz, "
                         f"STFT config {cfg.sample_rate_hz:g} Hz")
    x = _propagate(spec, cfg)
    if spec.noise_level > 0:
        rng = np.random.default_rng(spec.seed)
        x = x + spec.noise_level * rng.standard_normal(x.shape)
    return MultichannelAudio(x, spec.ctx.sample_rate_hz)


@dataclass(frozen=True)
class SectorSir:
    sector_index: int
    label: str
    output_sir_db: float
    reference_sir_db: float
    sir_gain_db: float
    contains_target: bool


def sector_sir_table(scene: SceneSpec, bank: BeamformerBank, target_source_index: int,
                     cfg: StftConfig, band_hz=SIR_BAND_HZ) -> list[SectorSir]:
    """Per-sector SIR at the beam outputs relative to reference channel 0.

    The scene is rendered once with only the target and once with only the
    interferers (noise off) so the two components stay separable.
    """
    if len(scene.sources) < 2:
        raise ValueError("SIR evaluation needs a target and at least one interferer")
    if not 0 <= target_source_index < len(scene.sources):
        raise IndexError(f"target source index {target_source_index} out of range")
    if bank.num_mics != scene.geometry.num_mics:
        raise ValueError(f"bank has {bank.num_mics} channels, scene array has "
                         f"{scene.geometry.num_mics} microphones")
    target = scene.sources[target_source_index]
    home = find_sector(bank.sectors, target.direction)
    if home is None:
        raise TargetOutsideSectorsError(
            f"target direction (az {target.direction.azimuth_deg:g}, "
            f"el {target.direction.elevation_deg:g}) is not inside any sector")
    others = [s for n, s in enumerate(scene.sources) if n != target_source_index]
    length = scene.length
    quiet = replace(scene, noise_level=0.0)
    # keep every render at the full scene length
    pad = SceneSource(target.direction, np.zeros(length), 0.0)
    t_mix = render_scene(replace(quiet, sources=(target, pad)), cfg)
    i_mix = render_scene(replace(quiet, sources=tuple(others) + (pad,)), cfg)
    fs = scene.ctx.sample_rate_hz
    interferers_silent = all(s.gain == 0 or not np.any(s.signal) for s in others)
    ref = power_ratio_db(t_mix.samples[0], i_mix.samples[0], band_hz, fs, cfg)
    t_out = apply_bank(t_mix, bank, cfg)
    i_out = apply_bank(i_mix, bank, cfg)
    rows = []
    for s, sector in enumerate(bank.sectors):
        out = power_ratio_db(t_out.samples[s], i_out.samples[s], band_hz, fs, cfg)
        gain = DB_CAP if interferers_silent else out - ref
        rows.append(SectorSir(s, sector.label, out, ref, gain, s == home))
    return rows


def sector_sir_gain(scene: SceneSpec, bank: BeamformerBank, target_source_index: int,
                    cfg: StftConfig, band_hz=SIR_BAND_HZ) -> float:
    """SIR gain (dB) of the beam whose sector contains the target source."""
    rows = sector_sir_table(scene, bank, target_source_index, cfg, band_hz)
    return next(r.sir_gain_db for r in rows if r.contains_target)
