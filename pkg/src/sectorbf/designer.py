"""Closed-form least-squares design of fixed sector beamformers.

For every frequency bin the beamformer of sector s minimizes the
quadrature-weighted squared error between its spatial response and the
sector indicator over the whole sphere::

    w_s(f) = (sum_n q_n d_n d_n^H + loading)^{-1} sum_{n in sector s} q_n d_n

where d_n is the steering vector at quadrature node n and q_n its weight.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .geometry import (AngularSector, ArrayGeometry, Direction, WaveContext,
                       steering_vector, steering_vectors, unit_vectors)

logger = logging.getLogger(__name__)

ELEVATION_COSINE = "elevation_cosine"
VERBATIM_AZIMUTH_COSINE = "verbatim_azimuth_cosine"
WEIGHTING_MODES = (ELEVATION_COSINE, VERBATIM_AZIMUTH_COSINE)

MAX_CONDITION = 1e14
REFINE_STEPS = 2
THREADS_ENV = "SECTORBF_THREADS"


class DesignError(RuntimeError):
    """The regularized design system could not be solved reliably."""


def _divides(total: float, step: float) -> bool:
    ratio = total / step
    return abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1


@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint-rule nodes over the full sphere.

    ``weights`` are cell weights in rad^2 times the angular density of the
    chosen mode. In ``verbatim_azimuth_cosine`` mode they follow cos(azimuth)
    and are therefore negative on half of the circle.
    """

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    weights: np.ndarray
    azimuth_step_deg: float
    elevation_step_deg: float
    mode: str = ELEVATION_COSINE

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def total_abs_weight(self) -> float:
        return float(np.abs(self.weights).sum())

    def directions(self) -> list[Direction]:
        return [Direction(a, e) for a, e in zip(self.azimuth_deg, self.elevation_deg)]

    @property
    def nodes(self) -> list[tuple[Direction, float]]:
        return list(zip(self.directions(), self.weights.tolist()))

    def unit_vectors(self) -> np.ndarray:
        return unit_vectors(self.azimuth_deg, self.elevation_deg)

    def sector_mask(self, sector: AngularSector) -> np.ndarray:
        return sector.contains_angles(self.azimuth_deg, self.elevation_deg)


def build_grid(step_deg: float = 1.0, mode: str = ELEVATION_COSINE) -> QuadratureGrid:
    """Cell-centred grid over azimuth [0, 360) and elevation [-90, 90]."""
    if mode not in WEIGHTING_MODES:
        raise ValueError(f"unknown weighting mode {mode!r}, expected one of {WEIGHTING_MODES}")
    if not (step_deg > 0 and _divides(360.0, step_deg) and _divides(180.0, step_deg)):
        raise ValueError(f"angle step {step_deg} must divide both 360 and 180 degrees exactly")
    n_az = int(round(360.0 / step_deg))
    n_el = int(round(180.0 / step_deg))
    az = (np.arange(n_az) + 0.5) * step_deg
    el = -90.0 + (np.arange(n_el) + 0.5) * step_deg
    az_grid, el_grid = np.meshgrid(az, el, indexing="ij")
    cell = math.radians(step_deg) ** 2
    if mode == ELEVATION_COSINE:
        density = np.cos(np.deg2rad(el_grid))
    else:
        density = np.cos(np.deg2rad(az_grid))
    return QuadratureGrid(az_grid.ravel(), el_grid.ravel(), (density * cell).ravel(),
                          float(step_deg), float(step_deg), mode)


@dataclass(frozen=True)
class SectorTarget:
    """Indicator target: 1 inside the sector, 0 elsewhere."""

    sector: AngularSector

    def __call__(self, direction: Direction) -> float:
        return 1.0 if self.sector.contains(direction) else 0.0


@dataclass(frozen=True)
class DesignConfig:
    n_fft: int = 512
    sample_rate_hz: float = 16000.0
    diagonal_loading: float = 1e-6
    angle_step_deg: float = 1.0
    weighting_mode: str = ELEVATION_COSINE

    def __post_init__(self):
        n = self.n_fft
        if int(n) != n or n < 64 or (int(n) & (int(n) - 1)):
            raise ValueError(f"n_fft must be a power of two >= 64, got {n}")
        object.__setattr__(self, "n_fft", int(n))
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not (self.diagonal_loading >= 0 and math.isfinite(self.diagonal_loading)):
            raise ValueError(f"diagonal loading must be >= 0, got {self.diagonal_loading}")
        if not (self.angle_step_deg > 0 and _divides(360.0, self.angle_step_deg)
                and _divides(180.0, self.angle_step_deg)):
            raise ValueError(f"angle step {self.angle_step_deg} must divide 360 and 180 exactly")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ValueError(f"unknown weighting mode {self.weighting_mode!r}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate_hz / self.n_fft


@dataclass
class BeamformerBank:
    """Per-bin weights of shape (n_bins, I, S) plus what produced them."""

    weights: np.ndarray
    geometry: ArrayGeometry
    sectors: list[AngularSector]
    config: DesignConfig
    ctx: WaveContext = field(default_factory=WaveContext)
    condition: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        expected = (self.config.n_bins, self.geometry.num_mics, len(self.sectors))
        if w.shape != expected:
            raise ValueError(f"weights shape {w.shape} does not match (bins, I, S) = {expected}")
        if not np.all(np.isfinite(w)):
            raise ValueError("beamformer weights contain NaN or Inf")
        self.weights = w

    @property
    def num_mics(self) -> int:
        return self.weights.shape[1]

    @property
    def num_sectors(self) -> int:
        return self.weights.shape[2]

    @property
    def n_fft(self) -> int:
        return self.config.n_fft

    @property
    def sample_rate_hz(self) -> float:
        return self.config.sample_rate_hz

    def frequencies(self) -> np.ndarray:
        return self.config.bin_frequencies()


def _grid_phase(geom: ArrayGeometry, grid: QuadratureGrid, freq_hz: float,
                ctx: WaveContext, path: np.ndarray | None = None) -> np.ndarray:
    """Phase ``2 pi f k.m / c`` per (node, mic); the steering entry is ``exp(-1j * phase)``."""
    if path is None:
        path = grid.unit_vectors() @ geom.mics.T
    return (2.0 * np.pi * freq_hz / ctx.speed_of_sound_mps) * path


def _steering_remainder(phase: np.ndarray) -> np.ndarray:
    """``exp(-1j * phase) - 1``, accurate for small phases."""
    half = np.sin(0.5 * phase)
    return -2.0 * half * half - 1j * np.sin(phase)


def _gram(e: np.ndarray, q: np.ndarray, total: float) -> np.ndarray:
    # With d = 1 + e the rank-one part total * 11^T is exact and only the small
    # remainders are accumulated. At low frequencies d is nearly constant over
    # the sphere, G is ill-conditioned, and summing d d^H directly loses digits
    # in exactly the directions the solve amplifies.
    u = e.T @ q
    G = total + u[:, None] + u.conj()[None, :] + e.T @ (q[:, None] * e.conj())
    return 0.5 * (G + G.conj().T)


def _moment(e: np.ndarray, q_sector: np.ndarray, totals) -> np.ndarray:
    return totals + e.T @ q_sector


def gram_matrix(geom: ArrayGeometry, grid: QuadratureGrid, freq_hz: float,
                ctx: WaveContext) -> np.ndarray:
    """Quadrature sum of ``q_n d_n d_n^H`` over the whole grid, shape (I, I)."""
    e = _steering_remainder(_grid_phase(geom, grid, freq_hz, ctx))
    return _gram(e, grid.weights, math.fsum(grid.weights))


def target_moment(geom: ArrayGeometry, grid: QuadratureGrid, target: SectorTarget,
                  freq_hz: float, ctx: WaveContext) -> np.ndarray:
    """Quadrature sum of ``q_n d_n`` over the nodes inside the target sector."""
    mask = grid.sector_mask(target.sector)
    if not mask.any():
        return np.zeros(geom.num_mics, dtype=complex)
    path = grid.unit_vectors()[mask] @ geom.mics.T
    e = _steering_remainder(_grid_phase(geom, grid, freq_hz, ctx, path))
    q = grid.weights[mask]
    return _moment(e, q, math.fsum(q))


def condition_number(A: np.ndarray) -> float:
    eig = np.abs(la.eigvalsh(A))
    lo = eig.min()
    return math.inf if lo == 0.0 else float(eig.max() / lo)


def solve_sector_weights(G: np.ndarray, g: np.ndarray, loading: float,
                         scale: float | None = None) -> np.ndarray:
    """Solve ``(G + loading * scale * Id) w = g`` for Hermitian ``G``.

    ``scale`` defaults to ``trace(G) / I``. ``g`` may hold several right-hand
    sides as columns. Positive-definite systems go through Cholesky; an
    indefinite Gram (verbatim azimuth-cosine weighting) falls back to LU.
    The solution gets ``REFINE_STEPS`` rounds of iterative refinement.

    Raises
    ------
    DesignError
        If the condition estimate of the loaded matrix exceeds 1e14.
    """
    G = np.asarray(G, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if loading < 0:
        raise ValueError(f"loading must be >= 0, got {loading}")
    n = G.shape[0]
    if scale is None:
        scale = float(np.trace(G).real) / n
    A = G + (loading * scale) * np.eye(n)
    A = 0.5 * (A + A.conj().T)
    cond = condition_number(A)
    if not cond <= MAX_CONDITION:
        raise DesignError(f"loaded Gram matrix is numerically singular (condition {cond:.3g})")
    try:
        factor = la.cho_factor(A, lower=True, check_finite=False)

        def solve(rhs):
            return la.cho_solve(factor, rhs, check_finite=False)
    except la.LinAlgError:
        lu = la.lu_factor(A, check_finite=False)

        def solve(rhs):
            return la.lu_solve(lu, rhs, check_finite=False)
    w = solve(g)
    # mixed-precision refinement; residuals in long double where the platform
    # has it (a no-op widening elsewhere)
    A_ext, g_ext = A.astype(np.clongdouble), g.astype(np.clongdouble)
    for _ in range(REFINE_STEPS):
        r = g_ext - A_ext @ w.astype(np.clongdouble)
        w = w + solve(r.astype(complex))
    return w


def resolve_threads(threads: int | None) -> int:
    """0 or None means auto: the env override if set, else the CPU count."""
    if threads is None or threads == 0:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else 0
        if threads <= 0:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"thread count must be >= 0, got {threads}")
    return threads


def design_bank(geom: ArrayGeometry, sectors: Sequence[AngularSector], cfg: DesignConfig,
                ctx: WaveContext | None = None, threads: int | None = 1) -> BeamformerBank:
    """Design one beamformer per sector for every STFT bin 0..n_fft/2.

    Bins are independent; with ``threads > 1`` they are farmed out to a pool
    and written to disjoint slices, so the result does not depend on the
    thread count.
    """
    sectors = list(sectors)
    if not sectors:
        raise ValueError("need at least one sector")
    if ctx is None:
        ctx = WaveContext(cfg.sample_rate_hz)
    elif ctx.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(f"sample rate mismatch: design {cfg.sample_rate_hz} Hz, "
                         f"context {ctx.sample_rate_hz} Hz")
    grid = build_grid(cfg.angle_step_deg, cfg.weighting_mode)
    path = grid.unit_vectors() @ geom.mics.T
    masks = np.stack([grid.sector_mask(s) for s in sectors], axis=1)
    # sector-masked quadrature weights, one column per sector
    qs = masks * grid.weights[:, None]
    scale = grid.total_abs_weight
    total = math.fsum(grid.weights)
    totals = np.array([math.fsum(col) for col in qs.T])
    freqs = cfg.bin_frequencies()
    weights = np.empty((cfg.n_bins, geom.num_mics, len(sectors)), dtype=complex)
    cond = np.empty(cfg.n_bins)

    def run_bin(b: int) -> None:
        e = _steering_remainder(_grid_phase(geom, grid, freqs[b], ctx, path))
        G = _gram(e, grid.weights, total)
        g = _moment(e, qs, totals)
        try:
            w = solve_sector_weights(G, g, cfg.diagonal_loading, scale)
        except DesignError as exc:
            raise DesignError(f"bin {b} ({freqs[b]:.1f} Hz), sectors 0..{len(sectors) - 1}: "
                              f"{exc}") from exc
        bad = ~np.all(np.isfinite(w), axis=0)
        if bad.any():
            raise DesignError(f"bin {b} ({freqs[b]:.1f} Hz), sector {int(np.argmax(bad))}: "
                              "non-finite weights")
        weights[b] = w
        cond[b] = condition_number(G + cfg.diagonal_loading * scale * np.eye(geom.num_mics))

    n_threads = resolve_threads(threads)
    if n_threads == 1:
        for b in range(cfg.n_bins):
            run_bin(b)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(run_bin, range(cfg.n_bins)))
    logger.debug("designed %d bins x %d sectors, worst condition %.3g",
                 cfg.n_bins, len(sectors), cond.max())
    return BeamformerBank(weights, geom, sectors, cfg, ctx, cond)


def beam_response(bank: BeamformerBank, sector_index: int, direction: Direction,
                  bin_index: int) -> complex:
    """Response ``w_s(f)^H d(direction, f)`` of one beam at one bin."""
    if not 0 <= sector_index < bank.num_sectors:
        raise IndexError(f"sector index {sector_index} out of range [0, {bank.num_sectors})")
    if not 0 <= bin_index < bank.config.n_bins:
        raise IndexError(f"bin index {bin_index} out of range [0, {bank.config.n_bins})")
    freq = bin_index * bank.sample_rate_hz / bank.n_fft
    d = steering_vector(bank.geometry, direction, freq, bank.ctx)
    return complex(np.vdot(bank.weights[bin_index, :, sector_index], d))


def beam_responses(bank: BeamformerBank, sector_index: int, azimuth_deg,
                   elevation_deg) -> np.ndarray:
    """Responses for arrays of angles at all bins, shape (n_bins,) + angles.shape."""
    if not 0 <= sector_index < bank.num_sectors:
        raise IndexError(f"sector index {sector_index} out of range [0, {bank.num_sectors})")
    k = unit_vectors(azimuth_deg, elevation_deg)
    d = steering_vectors(bank.geometry, k, bank.frequencies(), bank.ctx)
    w = bank.weights[:, :, sector_index].conj()
    return np.einsum("bi,b...i->b...", w, d)


def sector_dominance_db(bank: BeamformerBank, sector_index: int, elevations_deg,
                        azimuth_step_deg: float = 1.0) -> np.ndarray:
    """Per-bin ratio (dB) of mean |response| inside vs outside the sector's azimuths.

    Means are taken over the azimuth grid at the listed elevations.
    """
    az = np.arange(0.0, 360.0, azimuth_step_deg)
    el = np.asarray(elevations_deg, dtype=float)
    az_g, el_g = np.meshgrid(az, el, indexing="ij")
    mag = np.abs(beam_responses(bank, sector_index, az_g, el_g))
    sector = bank.sectors[sector_index]
    inside = np.mod(az - sector.azimuth_start_deg, 360.0) < sector.azimuth_width_deg
    mean_in = mag[:, inside, :].mean(axis=(1, 2))
    mean_out = mag[:, ~inside, :].mean(axis=(1, 2))
    return 20.0 * np.log10((mean_in + 1e-12) / (mean_out + 1e-12))
