"""Saliency map construction and normalization.

Maps are plain ``(height, width)`` float64 arrays with nonnegative values.
"""

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from .errors import DegenerateMap, EmptyMap, UnknownObserver

DEFAULT_SIGMA = 120.0
DEFAULT_CP_FRACTION = 0.28


def _axis_gaussian(coords, centers, sigma):
    """exp(-(c - f)^2 / 2 sigma^2) for every (fixation, coordinate) pair."""
    d = coords[None, :] - centers[:, None]
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def gaussian_sum(xs, ys, width, height, sigma=DEFAULT_SIGMA):
    """Unnormalized sum of isotropic Gaussians centred on ``(xs, ys)``.

    The 2-D kernel factorizes, so the sum over fixations is a single
    ``(height, n) @ (n, width)`` product and stays exact (no truncation).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size == 0:
        return np.zeros((height, width))
    gx = _axis_gaussian(np.arange(width, dtype=np.float64), xs, sigma)
    gy = _axis_gaussian(np.arange(height, dtype=np.float64), ys, sigma)
    return gy.T @ gx


def _max_normalized(m):
    top = m.max()
    return m / top if top > 0 else m


def fixations_to_map(fix, frame, width, height, sigma=DEFAULT_SIGMA):
    """Ground-truth saliency for one frame, max-normalized to ``[0, 1]``.

    Each fixation of ``frame`` contributes ``exp(-|q - f|^2 / (2 sigma^2))``
    at pixel ``q``. A frame without fixations yields the all-zero map.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    sel = fix.in_frame(frame)
    return _max_normalized(gaussian_sum(sel.x, sel.y, width, height, sigma))


def single_observer_map(fix, observer, frame, width, height, sigma=DEFAULT_SIGMA):
    if not np.any(fix.observer == observer):
        raise UnknownObserver(f"observer {observer} has no records")
    return fixations_to_map(fix.of_observer(observer), frame, width, height, sigma)


def center_prior(width, height, sigma_x_frac=DEFAULT_CP_FRACTION, sigma_y_frac=DEFAULT_CP_FRACTION):
    """Anisotropic centred Gaussian, exactly mirror-symmetric on both axes."""
    if sigma_x_frac <= 0 or sigma_y_frac <= 0:
        raise ValueError("sigma fractions must be positive")
    # half-integer offsets are exact in binary, so the two halves mirror bit-for-bit
    dx = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    dy = np.arange(height, dtype=np.float64) - (height - 1) / 2.0
    sx = sigma_x_frac * width
    sy = sigma_y_frac * height
    gx = np.exp(-(dx * dx) / (2.0 * sx * sx))
    gy = np.exp(-(dy * dy) / (2.0 * sy * sy))
    return _max_normalized(np.outer(gy, gx))


@dataclass(frozen=True)
class PercentileSplit:
    threshold: float
    p: float


def percentile_rank(p, count):
    """Zero-based sorted index of the p-th percentile (ceil-rank rule)."""
    if not 0 < p < 100:
        raise ValueError("p must lie strictly between 0 and 100")
    # exact rational arithmetic; 0.7 * 10 must stay 7, not 7.000000000000001
    return max(math.ceil(Fraction(p) * count / 100) - 1, 0)


def percentile(smap, p):
    """p-th percentile as an attained map value.

    ``threshold = sorted(values)[ceil(p/100 * n) - 1]``, so the sets
    ``{S < threshold}`` and ``{S >= threshold}`` split the pixels without
    interpolation.
    """
    values = np.asarray(smap, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyMap("cannot take a percentile of an empty map")
    k = percentile_rank(p, values.size)
    return PercentileSplit(float(np.partition(values, k)[k]), p)


def normalize(smap, mode="max"):
    """Rescale a map: ``"max"`` (peak 1), ``"sum"`` (mass 1) or ``"zscore"``.

    ``"zscore"`` uses the population standard deviation and may return
    negative values.
    """
    m = np.asarray(smap, dtype=np.float64)
    if m.size == 0:
        raise EmptyMap("empty map")
    if mode == "max":
        top = m.max()
        if not top > 0:
            raise DegenerateMap("map has no positive maximum")
        return m / top
    if mode == "sum":
        total = m.sum()
        if not total > 0:
            raise DegenerateMap("map has no positive mass")
        return m / total
    if mode == "zscore":
        if np.ptp(m) == 0:
            raise DegenerateMap("constant map has no spread")
        return (m - m.mean()) / m.std()
    raise ValueError(f"unknown normalization mode {mode!r}")
