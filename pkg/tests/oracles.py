"""Reference computations that share no code path with the designer.

Steering vectors are rebuilt from the plane-wave formula and the weights come
from a dense least-squares solve of the discretized objective, never from a
Gram matrix.
"""
import math

import numpy as np


def grid_nodes(step_deg, mode="elevation_cosine"):
    """Cell-centred (azimuth, elevation, weight) triples over the sphere."""
    nodes = []
    cell = math.radians(step_deg) ** 2
    n_az, n_el = round(360 / step_deg), round(180 / step_deg)
    for a in range(n_az):
        az = (a + 0.5) * step_deg
        for e in range(n_el):
            el = -90 + (e + 0.5) * step_deg
            dens = math.cos(math.radians(el if mode == "elevation_cosine" else az))
            nodes.append((az, el, dens * cell))
    return nodes


def plane_wave(mics, az_deg, el_deg, freq, c=343.0):
    th, ph = math.radians(az_deg), math.radians(el_deg)
    k = (math.cos(th) * math.cos(ph), math.sin(th) * math.cos(ph), math.sin(ph))
    lam = c / freq if freq else math.inf
    return np.array([np.exp(-2j * math.pi * (k[0] * m[0] + k[1] * m[1] + k[2] * m[2]) / lam)
                     for m in mics])


def in_sector(az, el, az_lo, az_hi, el_lo, el_hi):
    width = (az_hi - az_lo) % 360 or 360
    return el_lo <= el <= el_hi and (az - az_lo) % 360 < width


def lstsq_weights(mics, freq, sector_bounds, step_deg, loading_abs=0.0, c=343.0):
    """Minimize sum_n q_n |w^H d_n - b_n|^2 + loading_abs |w|^2 by stacked rows.

    With v = conj(w), w^H d = d^T v, so each node contributes the row
    sqrt(q) d^T with target sqrt(q) b.
    """
    rows, rhs = [], []
    for az, el, q in grid_nodes(step_deg):
        d = plane_wave(mics, az, el, freq, c)
        rows.append(math.sqrt(q) * d)
        rhs.append(math.sqrt(q) * float(in_sector(az, el, *sector_bounds)))
    A = np.array(rows)
    b = np.array(rhs, dtype=complex)
    if loading_abs > 0:
        A = np.vstack([A, math.sqrt(loading_abs) * np.eye(len(mics))])
        b = np.concatenate([b, np.zeros(len(mics))])
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    return v.conj()


def objective_fn(mics, freq, sector_bounds, step_deg, c=343.0):
    """Return f(w) = sum_n q_n |w^H d_n - b_n|^2 with the node data precomputed."""
    nodes = grid_nodes(step_deg)
    D = np.array([plane_wave(mics, az, el, freq, c) for az, el, _ in nodes])
    q = np.array([n[2] for n in nodes])
    b = np.array([float(in_sector(az, el, *sector_bounds)) for az, el, _ in nodes])

    def f(w):
        return float(np.sum(q * np.abs(D @ np.conj(w) - b) ** 2))
    return f


def extended_precision_weights(mics, freq, sector_bounds, step_deg, loading, c=343.0):
    """Loaded normal-equation solution with sums and residuals in long double.

    ``loading`` is absolute (already multiplied by the total grid weight).
    """
    nodes = grid_nodes(step_deg)
    mics = np.asarray(mics, dtype=np.longdouble)
    az = np.radians(np.array([n[0] for n in nodes], dtype=np.longdouble))
    el = np.radians(np.array([n[1] for n in nodes], dtype=np.longdouble))
    q = np.array([n[2] for n in nodes], dtype=np.longdouble)
    k = np.stack([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)], axis=1)
    phase = (2 * np.pi * np.longdouble(freq) / np.longdouble(c)) * (k @ mics.T)
    D = (np.cos(phase) - 1j * np.sin(phase)).astype(np.clongdouble)
    inside = np.array([in_sector(a, e, *sector_bounds) for a, e, _ in nodes])
    A = np.einsum("ni,nj,n->ij", D, D.conj(), q) + np.longdouble(loading) * np.eye(len(mics))
    g = np.einsum("ni,n->i", D[inside], q[inside])
    A64 = A.astype(complex)
    w = np.linalg.solve(A64, g.astype(complex))
    for _ in range(4):
        w = w + np.linalg.solve(A64, (g - A @ w.astype(np.clongdouble)).astype(complex))
    return w
