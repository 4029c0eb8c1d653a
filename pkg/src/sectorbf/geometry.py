"""Array geometry, look directions, angular sectors and far-field steering vectors.

Angles are degrees at every public boundary and radians internally.
Azimuth is measured counter-clockwise from the x axis in the array plane,
elevation upward from that plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_SPEED_OF_SOUND = 343.0
DEFAULT_SAMPLE_RATE = 16000.0
DEFAULT_RADIUS = 0.1


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in meters, one row per channel."""

    mics: np.ndarray
    name: str = "array"

    def __post_init__(self):
        mics = np.array(self.mics, dtype=float)
        if mics.ndim == 1 and mics.size == 3:
            mics = mics[np.newaxis, :]
        if mics.ndim != 2 or mics.shape[1] != 3:
            raise ValueError(f"mics must have shape (I, 3), got {mics.shape}")
        if mics.shape[0] < 1:
            raise ValueError("geometry needs at least one microphone")
        if not np.all(np.isfinite(mics)):
            raise ValueError("microphone coordinates must be finite")
        mics.setflags(write=False)
        object.__setattr__(self, "mics", mics)

    @property
    def num_mics(self) -> int:
        return self.mics.shape[0]

    def translated(self, offset) -> "ArrayGeometry":
        return ArrayGeometry(self.mics + np.asarray(offset, dtype=float), self.name)


@dataclass(frozen=True)
class Direction:
    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        az, el = float(self.azimuth_deg), float(self.elevation_deg)
        if not (math.isfinite(az) and math.isfinite(el)):
            raise ValueError("direction angles must be finite")
        if not -90.0 <= el <= 90.0:
            raise ValueError(f"elevation {el} outside [-90, 90] degrees")
        object.__setattr__(self, "azimuth_deg", az % 360.0)
        object.__setattr__(self, "elevation_deg", el)


@dataclass(frozen=True)
class AngularSector:
    """Azimuth interval [start, end) (may wrap through 0) times elevation [min, max].

    ``azimuth_end_deg - azimuth_start_deg == 360`` (e.g. 0 -> 360) denotes the
    full circle; equal endpoints are rejected as empty.
    """

    azimuth_start_deg: float
    azimuth_end_deg: float
    elevation_min_deg: float
    elevation_max_deg: float
    label: str = ""
    _width: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = (self.azimuth_start_deg, self.azimuth_end_deg,
                self.elevation_min_deg, self.elevation_max_deg)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError("sector bounds must be finite")
        lo, hi = float(self.elevation_min_deg), float(self.elevation_max_deg)
        if not (-90.0 <= lo <= 90.0 and -90.0 <= hi <= 90.0):
            raise ValueError(f"sector elevation bounds [{lo}, {hi}] outside [-90, 90]")
        if not lo < hi:
            raise ValueError(f"sector elevation_min ({lo}) must be below elevation_max ({hi})")
        start, end = float(self.azimuth_start_deg), float(self.azimuth_end_deg)
        if start == end:
            raise ValueError("sector azimuth interval is empty (start == end)")
        width = (end - start) % 360.0
        if width == 0.0:
            width = 360.0
        object.__setattr__(self, "_width", width)

    @property
    def azimuth_width_deg(self) -> float:
        return self._width

    def contains_angles(self, azimuth_deg, elevation_deg):
        """Vectorized membership test over arrays of angles in degrees."""
        az = np.asarray(azimuth_deg, dtype=float)
        el = np.asarray(elevation_deg, dtype=float)
        in_el = (el >= self.elevation_min_deg) & (el <= self.elevation_max_deg)
        if self._width >= 360.0:
            return in_el & np.ones_like(az, dtype=bool)
        offset = np.mod(az - self.azimuth_start_deg, 360.0)
        return in_el & (offset < self._width)

    def contains(self, direction: Direction) -> bool:
        return bool(self.contains_angles(direction.azimuth_deg, direction.elevation_deg))

    def center(self) -> Direction:
        az = self.azimuth_start_deg + self._width / 2.0
        el = (self.elevation_min_deg + self.elevation_max_deg) / 2.0
        return Direction(az, el)


@dataclass(frozen=True)
class WaveContext:
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    speed_of_sound_mps: float = DEFAULT_SPEED_OF_SOUND

    def __post_init__(self):
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not (self.speed_of_sound_mps > 0 and math.isfinite(self.speed_of_sound_mps)):
            raise ValueError(f"speed of sound must be positive, got {self.speed_of_sound_mps}")

    def wavelength(self, freq_hz: float) -> float:
        return self.speed_of_sound_mps / freq_hz


def unit_vectors(azimuth_deg, elevation_deg) -> np.ndarray:
    """Unit vectors for arrays of angles; output shape ``angles.shape + (3,)``."""
    theta = np.deg2rad(np.asarray(azimuth_deg, dtype=float))
    phi = np.deg2rad(np.asarray(elevation_deg, dtype=float))
    cos_phi = np.cos(phi)
    return np.stack([np.cos(theta) * cos_phi, np.sin(theta) * cos_phi, np.sin(phi)], axis=-1)


def unit_vector(direction: Direction) -> np.ndarray:
    """Unit vector pointing from the array center toward ``direction``."""
    return unit_vectors(direction.azimuth_deg, direction.elevation_deg)


def steering_vectors(geom: ArrayGeometry, k: np.ndarray, freq_hz, ctx: WaveContext) -> np.ndarray:
    """Steering vectors for a batch of unit vectors ``k`` (..., 3).

    Returns shape ``k.shape[:-1] + (I,)``; with an array of frequencies the
    frequency axis is prepended.
    """
    path = np.asarray(k, dtype=float) @ geom.mics.T  # k^T m_i, meters
    freq = np.asarray(freq_hz, dtype=float)
    scale = -2.0 * np.pi * freq / ctx.speed_of_sound_mps
    if freq.ndim:
        scale = scale.reshape(freq.shape + (1,) * path.ndim)
    return np.exp(1j * scale * path)


def steering_vector(geom: ArrayGeometry, direction: Direction, freq_hz: float,
                    ctx: WaveContext) -> np.ndarray:
    """Far-field steering vector ``exp(-2j*pi*k^T m_i / lambda)`` for one direction.

    At 0 Hz (infinite wavelength) every entry is exactly 1.
    """
    return steering_vectors(geom, unit_vector(direction), freq_hz, ctx)


def circular_array(num_mics: int, radius_m: float = DEFAULT_RADIUS,
                   first_mic_azimuth_deg: float = 0.0, name: str | None = None) -> ArrayGeometry:
    """Uniform circular array in the z = 0 plane, mic j at ``first + j*360/num_mics``."""
    if int(num_mics) != num_mics or num_mics < 1:
        raise ValueError(f"num_mics must be a positive integer, got {num_mics}")
    if not radius_m > 0:
        raise ValueError(f"radius must be positive, got {radius_m}")
    num_mics = int(num_mics)
    az = np.deg2rad(first_mic_azimuth_deg + np.arange(num_mics) * 360.0 / num_mics)
    mics = np.stack([radius_m * np.cos(az), radius_m * np.sin(az), np.zeros(num_mics)], axis=1)
    # cos(90 deg) etc. come out as ~6e-18; snap so axis-aligned layouts are exact
    mics[np.abs(mics) < 1e-15 * radius_m] = 0.0
    return ArrayGeometry(mics, name or f"circular{num_mics}_r{radius_m:g}")


def paper_sectors() -> list[AngularSector]:
    """Four 90-degree azimuth sectors starting at 315, elevation 10..60 degrees."""
    starts = (315.0, 45.0, 135.0, 225.0)
    return [AngularSector(s, (s + 90.0) % 360.0, 10.0, 60.0, label=f"sector{n}")
            for n, s in enumerate(starts, start=1)]


def full_sphere_sector(label: str = "full") -> AngularSector:
    return AngularSector(0.0, 360.0, -90.0, 90.0, label=label)


def find_sector(sectors: Sequence[AngularSector], direction: Direction) -> int | None:
    for idx, sector in enumerate(sectors):
        if sector.contains(direction):
            return idx
    return None
