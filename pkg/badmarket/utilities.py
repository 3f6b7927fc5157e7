import itertools
import logging
import os

import numpy as np

_log = logging.getLogger(__name__)


def _as_vector(values, name="vector", length=None):
    """Convert to a 1-d float array, checking the length when given."""
    from badmarket.errors import DimensionError

    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def _l1_normalize(price):
    """Scale a price onto the l1 unit sphere. Returns (normalized, norm)."""
    p = np.asarray(price, dtype=float)
    norm = np.abs(p).sum()
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("price must be finite and nonzero")
    return p / norm, norm


def _fischer_burmeister(a, b):
    """phi(a, b) = a + b - sqrt(a^2 + b^2); zero iff a >= 0, b >= 0, a*b = 0."""
    return a + b - np.hypot(a, b)


def _box_fischer_burmeister(x, lower, upper, f):
    """Complementarity for lower <= x <= upper against F.

    Zero iff x = lower with F >= 0, x = upper with F <= 0, or F = 0 in between.
    Infinite upper bounds reduce to the plain pair (x - lower, F).
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    out = _fischer_burmeister(x - lower, f)
    finite = np.isfinite(upper)
    if finite.any():
        inner = _fischer_burmeister(upper[finite] - x[finite], -f[finite])
        out[finite] = _fischer_burmeister(x[finite] - lower, -inner)
    return out


def _worker_count():
    """Worker cap from BADMARKET_THREADS, default min(8, cpu count)."""
    raw = os.environ.get('BADMARKET_THREADS')
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            _log.warning(f"ignoring BADMARKET_THREADS={raw!r}, not an integer")
    return max(1, min(8, os.cpu_count() or 1))


def _sign_patterns(ell, bad_count):
    """All sign patterns in {+1,-1}^ell, nearest to (bads -, goods +) first."""
    preferred = np.array([-1] * bad_count + [1] * (ell - bad_count))
    patterns = [np.array(s) for s in itertools.product((1, -1), repeat=ell)]
    patterns.sort(key=lambda s: int(np.sum(s != preferred)))
    return patterns


def sphere_grid(ell, resolution, signs=None):
    """
    Grid on the l1 unit sphere with spacing 1/resolution.

    Parameters
    ----------
    ell (int): number of commodities.
    resolution (int): number of grid steps per unit of l1 mass.
    signs (sequence, optional): restrict to one orthant; entries +1 or -1.

    Returns
    -------
    numpy.ndarray: (m, ell) array of prices with sum |p_k| = 1, without duplicates.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    parts = []
    for combo in itertools.combinations(range(resolution + ell - 1), ell - 1):
        bounds = (-1,) + combo + (resolution + ell - 1,)
        parts.append([bounds[i + 1] - bounds[i] - 1 for i in range(ell)])
    magnitudes = np.array(parts, dtype=float) / resolution
    if signs is not None:
        return magnitudes * np.asarray(signs, dtype=float)
    points = []
    for pattern in itertools.product((1.0, -1.0), repeat=ell):
        points.append(magnitudes * np.array(pattern))
    grid = np.unique(np.vstack(points) + 0.0, axis=0)
    return grid
