"""Brightness correction and center-prior blending of saliency maps.

The corrected map is ``(1 - w) * S**gamma + w * CP``. Both parameters are
fitted by exhaustive grid search against ground truth under the MSE.
"""

from dataclasses import dataclass
import math
import os

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet
from . import frames_io

GAMMA_MIN, GAMMA_MAX = 1 / 8, 8.0
N_GAMMA = 33
BLEND_STEPS = 21
DEFAULT_STRIDE = 25


@dataclass
class PostprocessParams:
    gamma: float
    blend_w: float
    cp: np.ndarray

    def __post_init__(self):
        if not GAMMA_MIN <= self.gamma <= GAMMA_MAX:
            raise ValueError(f"gamma must lie in [{GAMMA_MIN}, {GAMMA_MAX}]")
        if not 0 <= self.blend_w <= 1:
            raise ValueError("blend_w must lie in [0, 1]")
        self.cp = np.asarray(self.cp, dtype=np.float64)


def gamma_grid(n=N_GAMMA):
    """``n`` log-spaced exponents from 1/8 to 8; the middle point is exactly 1."""
    return np.exp2(np.linspace(-3.0, 3.0, n))


def blend_grid(n=BLEND_STEPS):
    return np.linspace(0.0, 1.0, n)


def apply_postprocess(smap, params):
    smap = np.asarray(smap, dtype=np.float64)
    if smap.shape != params.cp.shape:
        raise DimensionMismatch(f"map {smap.shape} vs center prior {params.cp.shape}")
    return (1.0 - params.blend_w) * smap ** params.gamma + params.blend_w * params.cp


def _tie_distance(gamma, w):
    return math.hypot(math.log2(gamma), w)


def fit_postprocess(predicted, ground_truth, cp, stride=1, gammas=None, blends=None):
    """Grid-search ``(gamma, blend_w)`` minimizing mean squared error.

    Every ``stride``-th pair of the training lists is used. Per-map errors
    are combined with :func:`math.fsum`, which makes the result independent
    of list order. Exact ties go to the candidate nearest ``(1, 0)`` in
    ``(log2 gamma, w)``.
    """
    predicted = [np.asarray(m, dtype=np.float64) for m in predicted][::stride]
    ground_truth = [np.asarray(m, dtype=np.float64) for m in ground_truth][::stride]
    if not predicted or len(predicted) != len(ground_truth):
        raise EmptyTrainingSet("need equally long, nonempty training lists")
    cp = np.asarray(cp, dtype=np.float64)
    for p, g in zip(predicted, ground_truth):
        if p.shape != g.shape or p.shape != cp.shape:
            raise DimensionMismatch(f"training pair {p.shape}/{g.shape} vs center prior {cp.shape}")
    gammas = gamma_grid() if gammas is None else np.asarray(gammas, dtype=np.float64)
    blends = blend_grid() if blends is None else np.asarray(blends, dtype=np.float64)

    best = None
    for gamma in gammas:
        powered = [p ** gamma for p in predicted]
        for w in blends:
            parts = []
            for pw, g in zip(powered, ground_truth):
                err = (1.0 - w) * pw + w * cp - g
                parts.append(float(np.mean(err * err)))
            mse = math.fsum(parts) / len(parts)
            key = (mse, _tie_distance(gamma, w))
            if best is None or key < best[0]:
                best = (key, float(gamma), float(w))
    _, gamma, w = best
    return PostprocessParams(gamma, w, cp)


def training_mse(predicted, ground_truth, params):
    parts = []
    for p, g in zip(predicted, ground_truth):
        err = apply_postprocess(p, params) - np.asarray(g, dtype=np.float64)
        parts.append(float(np.mean(err * err)))
    return math.fsum(parts) / len(parts)


def write_params(params, path, cp_path):
    """Save as ``gamma=..``, ``blend_w=..``, ``cp=<pgm path>`` lines."""
    text = f"gamma={params.gamma!r}\nblend_w={params.blend_w!r}\ncp={os.fspath(cp_path)}\n"
    frames_io._write_bytes(path, text.encode("utf-8"))


def read_params(path):
    text = frames_io._read_bytes(path).decode("utf-8", "replace")
    fields = {}
    for line in text.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    missing = {"gamma", "blend_w", "cp"} - fields.keys()
    if missing:
        raise frames_io.MalformedHeader(f"parameter file lacks {sorted(missing)}")
    cp_path = fields["cp"]
    if not os.path.isabs(cp_path):
        cp_path = os.path.join(os.path.dirname(os.fspath(path)), cp_path)
    try:
        gamma, blend_w = float(fields["gamma"]), float(fields["blend_w"])
    except ValueError:
        raise frames_io.MalformedHeader("gamma and blend_w must be numbers") from None
    return PostprocessParams(gamma, blend_w, frames_io.read_pgm(cp_path))
