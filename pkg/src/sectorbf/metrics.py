"""Speaker-count confusion scores and band-limited power ratios."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .stft import StftConfig, stft_forward

DB_CAP = 120.0


class CountsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CountConfusion:
    """``counts[r, c]`` = number of items with true count ``true_labels[r]``
    that were estimated as ``est_labels[c]``."""

    counts: np.ndarray
    true_labels: tuple[int, ...]
    est_labels: tuple[int, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (len(self.true_labels), len(self.est_labels)):
            raise ValueError(f"counts shape {counts.shape} does not match labels "
                             f"({len(self.true_labels)}, {len(self.est_labels)})")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.round(counts)):
                raise ValueError("counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "true_labels", tuple(int(k) for k in self.true_labels))
        object.__setattr__(self, "est_labels", tuple(int(i) for i in self.est_labels))

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "CountConfusion":
        pairs = [(int(k), int(i)) for k, i in pairs]
        if not pairs:
            raise ValueError("no (true, estimated) count pairs")
        true_labels = sorted({k for k, _ in pairs})
        est_labels = sorted({k for k, _ in pairs} | {i for _, i in pairs})
        counts = np.zeros((len(true_labels), len(est_labels)), dtype=np.int64)
        row = {k: n for n, k in enumerate(true_labels)}
        col = {i: n for n, i in enumerate(est_labels)}
        for k, i in pairs:
            counts[row[k], col[i]] += 1
        return cls(counts, tuple(true_labels), tuple(est_labels))


def confusion_score(conf: CountConfusion, i: int, k: int) -> float:
    """Fraction of items with true count ``k`` estimated as ``i``."""
    if k not in conf.true_labels:
        raise ValueError(f"no items with true speaker count {k}")
    r = conf.true_labels.index(k)
    total = int(conf.row_totals[r])
    if total == 0:
        raise ValueError(f"no items with true speaker count {k}")
    if i not in conf.est_labels:
        return 0.0
    return int(conf.counts[r, conf.est_labels.index(i)]) / total


def score_table(conf: CountConfusion) -> list[tuple[int, int, float]]:
    """``(true_k, est_i, score)`` for every populated true count and every estimate label."""
    rows = []
    for r, k in enumerate(conf.true_labels):
        if conf.row_totals[r] == 0:
            continue
        rows.extend((k, i, confusion_score(conf, i, k)) for i in conf.est_labels)
    return rows


def read_count_pairs(path) -> list[tuple[int, int]]:
    """Parse ``true_count,estimated_count`` lines; an optional header line is skipped."""
    pairs = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if lineno == 1 and row[0].strip().lower() in ("true_count", "true_k", "true"):
                continue
            if len(row) != 2:
                raise CountsFormatError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                k, i = int(row[0]), int(row[1])
            except ValueError:
                raise CountsFormatError(f"{path}:{lineno}: counts must be integers, "
                                        f"got {row!r}") from None
            if k < 0 or i < 0:
                raise CountsFormatError(f"{path}:{lineno}: counts must be non-negative")
            pairs.append((k, i))
    if not pairs:
        raise CountsFormatError(f"{path}: no count pairs found")
    return pairs


def write_score_table(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true_k", "est_i", "score"])
        for k, i, score in rows:
            writer.writerow([k, i, repr(score)])


def band_power(signal, band_hz: tuple[float, float], fs: float,
               cfg: StftConfig | None = None) -> float:
    """Power summed over STFT bins whose centre frequency lies in ``band_hz``."""
    if cfg is None:
        cfg = StftConfig(sample_rate_hz=fs)
    low, high = band_hz
    if not 0 <= low <= high <= fs / 2:
        raise ValueError(f"band {band_hz} must satisfy 0 <= low <= high <= {fs / 2}")
    spec = stft_forward(np.asarray(signal, dtype=float), cfg).data[0]
    freqs = cfg.bin_frequencies()
    mask = (freqs >= low) & (freqs <= high)
    return float(np.sum(np.abs(spec[mask]) ** 2))


def power_ratio_db(target, other, band_hz: tuple[float, float], fs: float,
                   cfg: StftConfig | None = None) -> float:
    """``10 log10(P_target / P_other)`` within the band, capped at +/-120 dB."""
    target = np.asarray(target, dtype=float)
    other = np.asarray(other, dtype=float)
    if target.shape != other.shape or target.ndim != 1:
        raise ValueError(f"need equal-length mono signals, got {target.shape} and {other.shape}")
    p_t = band_power(target, band_hz, fs, cfg)
    p_o = band_power(other, band_hz, fs, cfg)
    if p_o == 0.0:
        return DB_CAP
    if p_t == 0.0:
        return -DB_CAP
    # difference of logs keeps ratio(x, y) == -ratio(y, x) bit for bit
    return float(np.clip(10.0 * (np.log10(p_t) - np.log10(p_o)), -DB_CAP, DB_CAP))
