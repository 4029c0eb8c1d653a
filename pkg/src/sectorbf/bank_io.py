"""Binary and CSV serialization of :class:`BeamformerBank`.

Binary layout, all little-endian::

    magic           7 bytes   b"SBBANK1"
    n_fft           uint32
    sample_rate     float64   Hz
    I               uint32    microphones
    S               uint32    sectors
    loading         float64
    weighting_mode  uint8     0 = elevation_cosine, 1 = verbatim_azimuth_cosine
    angle_step      float64   degrees
    speed_of_sound  float64   m/s
    mics            I x 3 float64, meters
    geometry name   uint16 length + UTF-8
    sectors         S x (4 float64: az_start, az_end, el_min, el_max
                         + uint16 length + UTF-8 label)
    weights         n_bins x I x S complex, each as (real, imag) float64

The weights block is bin-major, then channel, then sector.
"""
from __future__ import annotations

import csv
import hashlib
import io
import struct
from pathlib import Path

import numpy as np

from .designer import WEIGHTING_MODES, BeamformerBank, DesignConfig
from .geometry import AngularSector, ArrayGeometry, WaveContext

MAGIC = b"SBBANK1"
_HEAD = struct.Struct("<7sIdIIdBdd")


class BankFormatError(ValueError):
    pass


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("label too long")
    return struct.pack("<H", len(raw)) + raw


def bank_to_bytes(bank: BeamformerBank) -> bytes:
    cfg = bank.config
    buf = io.BytesIO()
    buf.write(_HEAD.pack(MAGIC, cfg.n_fft, cfg.sample_rate_hz, bank.num_mics, bank.num_sectors,
                         cfg.diagonal_loading, WEIGHTING_MODES.index(cfg.weighting_mode),
                         cfg.angle_step_deg, bank.ctx.speed_of_sound_mps))
    buf.write(bank.geometry.mics.astype("<f8").tobytes())
    buf.write(_pack_str(bank.geometry.name))
    for s in bank.sectors:
        buf.write(struct.pack("<4d", s.azimuth_start_deg, s.azimuth_end_deg,
                              s.elevation_min_deg, s.elevation_max_deg))
        buf.write(_pack_str(s.label))
    buf.write(np.ascontiguousarray(bank.weights).astype("<c16").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BankFormatError("bank file is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size))

    def string(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def bank_from_bytes(data: bytes) -> BeamformerBank:
    r = _Reader(data)
    magic, n_fft, fs, n_mics, n_sec, loading, mode, step, c = r.unpack(_HEAD.format)
    if magic != MAGIC:
        raise BankFormatError(f"not a beamformer bank file (magic {magic!r})")
    if mode >= len(WEIGHTING_MODES):
        raise BankFormatError(f"unknown weighting mode code {mode}")
    mics = np.frombuffer(r.take(24 * n_mics), dtype="<f8").reshape(n_mics, 3)
    geom = ArrayGeometry(mics.copy(), r.string())
    sectors = []
    for _ in range(n_sec):
        bounds = r.unpack("<4d")
        sectors.append(AngularSector(*bounds, label=r.string()))
    cfg = DesignConfig(n_fft, fs, loading, step, WEIGHTING_MODES[mode])
    count = cfg.n_bins * n_mics * n_sec
    weights = np.frombuffer(r.take(16 * count), dtype="<c16").reshape(cfg.n_bins, n_mics, n_sec)
    if r.pos != len(data):
        raise BankFormatError(f"{len(data) - r.pos} trailing bytes after weights")
    return BeamformerBank(weights.astype(complex), geom, sectors, cfg, WaveContext(fs, c))


def save_bank(bank: BeamformerBank, path) -> None:
    Path(path).write_bytes(bank_to_bytes(bank))


def load_bank(path) -> BeamformerBank:
    return bank_from_bytes(Path(path).read_bytes())


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def export_bank_csv(bank: BeamformerBank, path) -> None:
    """Rows ``bin,freq_hz,sector,channel,real,imag`` in bin/sector/channel order."""
    freqs = bank.frequencies()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "freq_hz", "sector", "channel", "real", "imag"])
        for b in range(bank.config.n_bins):
            for s in range(bank.num_sectors):
                for i in range(bank.num_mics):
                    w = bank.weights[b, i, s]
                    writer.writerow([b, repr(float(freqs[b])), s, i,
                                     repr(float(w.real)), repr(float(w.imag))])


def read_bank_csv(path, n_bins: int, n_mics: int, n_sectors: int) -> np.ndarray:
    weights = np.zeros((n_bins, n_mics, n_sectors), dtype=complex)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            weights[int(row["bin"]), int(row["channel"]), int(row["sector"])] = complex(
                float(row["real"]), float(row["imag"]))
    return weights
