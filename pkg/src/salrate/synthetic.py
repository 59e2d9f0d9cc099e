"""Deterministic synthetic content for tests, demos and acceptance runs."""

import numpy as np
from scipy import ndimage

from .frames_io import FixationSet, VideoSequence


def textured_sequence(width=320, height=240, frames=16, seed=0):
    """Gradients plus band-limited noise, statistically uniform over the frame."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    out = []
    for t in range(frames):
        base = 60.0 + 80.0 * xx / width + 40.0 * yy / height + 10.0 * np.sin(2 * np.pi * (t / 16.0))
        coarse = ndimage.gaussian_filter(rng.standard_normal((height, width)), 1.5) * 60.0
        fine = rng.standard_normal((height, width)) * 6.0
        out.append(np.clip(np.rint(base + coarse + fine), 0, 255).astype(np.uint8))
    return VideoSequence(width, height, out)


def lobe_centers(width, height, t):
    return [
        (0.30 * width + 1.5 * t, 0.40 * height + 0.5 * t),
        (0.72 * width - 1.0 * t, 0.62 * height - 0.5 * t),
    ]


def two_lobe_saliency(width=320, height=240, frames=16, spread=0.07):
    """Two slowly drifting Gaussian attention lobes, max-normalized per frame."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    sigma = spread * width
    maps = []
    for t in range(frames):
        m = np.zeros((height, width))
        for weight, (cx, cy) in zip((1.0, 0.8), lobe_centers(width, height, t)):
            m += weight * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma * sigma))
        maps.append(m / m.max())
    return maps


def lobe_fixations(width=320, height=240, frames=16, observers=20, spread=0.05, seed=0):
    """Fixations scattered around the two lobes, one per observer and frame."""
    rng = np.random.default_rng(seed)
    rec = []
    for t in range(frames):
        centers = lobe_centers(width, height, t)
        for o in range(observers):
            cx, cy = centers[0] if rng.random() < 0.55 else centers[1]
            x = float(np.clip(cx + rng.normal(0, spread * width), 0, width - 1))
            y = float(np.clip(cy + rng.normal(0, spread * width), 0, height - 1))
            rec.append((t, o, x, y))
    return FixationSet.from_records(rec)
