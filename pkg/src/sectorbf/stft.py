"""Multichannel STFT / inverse STFT with a sqrt-Hann analysis/synthesis pair."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 512
    hop: int = 256
    window: str = "sqrt_hann"
    sample_rate_hz: float = 16000.0

    def __post_init__(self):
        if self.window != "sqrt_hann":
            raise ValueError(f"unsupported window {self.window!r}; only 'sqrt_hann' is available")
        if int(self.n_fft) != self.n_fft or self.n_fft < 2 or self.n_fft % 2:
            raise ValueError(f"n_fft must be an even positive integer, got {self.n_fft}")
        if int(self.hop) != self.hop or self.hop < 1:
            raise ValueError(f"hop must be a positive integer, got {self.hop}")
        if self.n_fft % self.hop or self.hop > self.n_fft // 2:
            raise ValueError(f"hop {self.hop} must divide n_fft {self.n_fft} and be <= n_fft/2")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "n_fft", int(self.n_fft))
        object.__setattr__(self, "hop", int(self.hop))

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def edge_pad(self) -> int:
        return self.n_fft - self.hop

    def analysis_window(self) -> np.ndarray:
        return np.sqrt(scipy.signal.get_window("hann", self.n_fft, fftbins=True))

    def overlap_gain(self) -> float:
        # sum of shifted periodic Hann windows is constant n_fft / (2 hop)
        return self.n_fft / (2.0 * self.hop)

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate_hz / self.n_fft

    def num_frames(self, length: int) -> int:
        """Frame count for a signal of ``length`` samples (after padding)."""
        length = max(int(length), self.n_fft)
        padded = length + 2 * self.edge_pad + (-length) % self.hop
        return (padded - self.n_fft) // self.hop + 1


@dataclass
class SpectrogramTensor:
    """One-sided STFT, ``data`` of shape (channels, bins, frames).

    ``length`` is the time-domain length the inverse transform restores.
    """

    data: np.ndarray
    config: StftConfig
    length: int

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[2]


def _as_channels(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2:
        raise ValueError(f"signal must be 1-D or (channels, time), got shape {x.shape}")
    return x


def stft_forward(signal, cfg: StftConfig) -> SpectrogramTensor:
    """Windowed one-sided DFT of every channel.

    The signal is zero-padded to at least ``n_fft`` samples and to a multiple
    of ``hop``, then reflect-padded by ``n_fft - hop`` on both sides so every
    original sample is covered by the full set of overlapping frames.
    """
    x = _as_channels(signal)
    if x.shape[1] == 0 or x.shape[0] == 0:
        raise ValueError("cannot transform an empty signal")
    length = x.shape[1]
    total = max(length, cfg.n_fft)
    total += (-total) % cfg.hop
    x = np.pad(x, ((0, 0), (0, total - length)))
    pad = cfg.edge_pad
    x = np.pad(x, ((0, 0), (pad, pad)), mode="reflect")
    n_frames = (x.shape[1] - cfg.n_fft) // cfg.hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft, axis=1)[:, ::cfg.hop]
    frames = frames[:, :n_frames] * cfg.analysis_window()
    spec = np.fft.rfft(frames, axis=-1)  # (channels, frames, bins)
    return SpectrogramTensor(np.ascontiguousarray(spec.transpose(0, 2, 1)), cfg, length)


def stft_inverse(spec: SpectrogramTensor) -> np.ndarray:
    """Overlap-add inverse of :func:`stft_forward`; returns (channels, length)."""
    cfg = spec.config
    data = np.asarray(spec.data)
    if data.ndim != 3 or data.shape[1] != cfg.n_bins:
        raise ValueError(f"spectrogram shape {data.shape} does not match "
                         f"(channels, {cfg.n_bins}, frames)")
    expected = cfg.num_frames(spec.length)
    if data.shape[2] != expected:
        raise ValueError(f"spectrogram has {data.shape[2]} frames, expected {expected} "
                         f"for length {spec.length}")
    n_ch, _, n_frames = data.shape
    frames = np.fft.irfft(data.transpose(0, 2, 1), n=cfg.n_fft, axis=-1)
    frames *= cfg.analysis_window() / cfg.overlap_gain()
    out = np.zeros((n_ch, (n_frames - 1) * cfg.hop + cfg.n_fft))
    # n_fft / hop interleaved groups of non-overlapping frames
    for offset in range(cfg.n_fft // cfg.hop):
        group = frames[:, offset::cfg.n_fft // cfg.hop]
        start = offset * cfg.hop
        seg = group.reshape(n_ch, -1)
        out[:, start:start + seg.shape[1]] += seg
    pad = cfg.edge_pad
    return out[:, pad:pad + spec.length]
