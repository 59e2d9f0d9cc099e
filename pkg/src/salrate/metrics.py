"""Saliency-model scores and saliency-weighted SSIM.

The battery covers AUC-Judd, CC, KL, NSS and SIM. ``ewssim`` weights a
per-pixel SSIM map by ground-truth saliency.
"""

from dataclasses import dataclass, astuple, fields

import numpy as np
from scipy import ndimage

from .errors import DegenerateMap, DimensionMismatch, NoFixations
from .saliency import normalize

KL_EPS = 1e-12
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a, b


def fixation_pixels(fix, frame, shape):
    """Row/column indices of a frame's fixations, rounded half-up.

    Coordinates that round onto the far edge are pulled back inside.
    """
    sel = fix.in_frame(frame)
    if len(sel) == 0:
        raise NoFixations(f"frame {frame} has no fixations")
    h, w = shape
    cols = np.clip(np.floor(sel.x + 0.5).astype(np.int64), 0, w - 1)
    rows = np.clip(np.floor(sel.y + 0.5).astype(np.int64), 0, h - 1)
    return rows, cols


def cc(pred, gt):
    """Pearson linear correlation between two maps."""
    pred, gt = _pair(pred, gt)
    a = normalize(pred, "zscore")
    b = normalize(gt, "zscore")
    return float(np.mean(a * b))


def kl_div(pred, gt, eps=KL_EPS):
    """KL divergence of ``pred`` from ``gt`` in nats.

    ``eps`` is added to every ``pred`` pixel before sum-normalization; ``gt``
    is normalized as is and only its support contributes.
    """
    pred, gt = _pair(pred, gt)
    g = normalize(gt, "sum")
    p = normalize(pred + eps, "sum")
    mask = g > 0
    return float(np.sum(g[mask] * np.log(g[mask] / p[mask])))


def nss(pred, fix, frame):
    """Mean z-scored saliency at the frame's fixation pixels."""
    pred = np.asarray(pred, dtype=np.float64)
    z = normalize(pred, "zscore")
    rows, cols = fixation_pixels(fix, frame, pred.shape)
    return float(np.mean(z[rows, cols]))


def sim(pred, gt):
    """Histogram intersection of the two sum-normalized maps."""
    pred, gt = _pair(pred, gt)
    return float(np.sum(np.minimum(normalize(pred, "sum"), normalize(gt, "sum"))))


def auc_judd(pred, fix, frame):
    """ROC area with thresholds at the saliency values under fixations.

    For each threshold ``t``: TPR is the share of fixations with value >= t
    and FPR the share of all pixels with value >= t. The curve is closed
    with (0, 0) and (1, 1) and integrated with the trapezoid rule.
    """
    pred = np.asarray(pred, dtype=np.float64)
    rows, cols = fixation_pixels(fix, frame, pred.shape)
    positives = np.sort(pred[rows, cols])
    values = np.sort(pred.ravel())
    thresholds = np.unique(positives)[::-1]
    tpr = (positives.size - np.searchsorted(positives, thresholds, "left")) / positives.size
    fpr = (values.size - np.searchsorted(values, thresholds, "left")) / values.size
    tpr = np.concatenate(([0.0], tpr, [1.0]))
    fpr = np.concatenate(([0.0], fpr, [1.0]))
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


@dataclass
class MetricReport:
    auc_j: float
    cc: float
    kl: float
    nss: float
    sim: float

    HEADER = "model,auc_j,cc,kl,nss,sim"
    HIGHER_BETTER = {"auc_j": True, "cc": True, "kl": False, "nss": True, "sim": True}

    def csv_row(self, model):
        return ",".join([model] + [f"{v:.6f}" for v in astuple(self)])


def evaluate(pred, gt, fix, frame):
    """All five scores for one frame."""
    return MetricReport(
        auc_j=auc_judd(pred, fix, frame),
        cc=cc(pred, gt),
        kl=kl_div(pred, gt),
        nss=nss(pred, fix, frame),
        sim=sim(pred, gt),
    )


def mean_report(reports):
    """Average reports field by field, ignoring NaN entries."""
    names = [f.name for f in fields(MetricReport)]
    table = np.array([astuple(r) for r in reports], dtype=np.float64)
    with np.errstate(invalid="ignore"):
        means = np.nanmean(table, axis=0) if len(reports) else np.full(len(names), np.nan)
    return MetricReport(*(float(v) for v in means))


# ---------------------------------------------------------------------------
# SSIM


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalized 1-D taps of the separable SSIM window."""
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _local_mean(img, taps):
    # mode="reflect" repeats the edge sample: (c b a | a b c)
    out = ndimage.correlate1d(img, taps, axis=0, mode="reflect")
    return ndimage.correlate1d(out, taps, axis=1, mode="reflect")


def ssim_map(a, b):
    """Per-pixel SSIM of two 8-bit planes (11x11 Gaussian window, sigma 1.5)."""
    a, b = _pair(a, b)
    taps = gaussian_window()
    mu_a = _local_mean(a, taps)
    mu_b = _local_mean(b, taps)
    var_a = _local_mean(a * a, taps) - mu_a * mu_a
    var_b = _local_mean(b * b, taps) - mu_b * mu_b
    cov = _local_mean(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def weighted_ssim(a, b, weights):
    """Saliency-weighted mean SSIM for one frame."""
    w = np.asarray(weights, dtype=np.float64)
    s = ssim_map(a, b)
    if w.shape != s.shape:
        raise DimensionMismatch(f"weights {w.shape} vs frame {s.shape}")
    total = w.sum()
    if not total > 0:
        raise DegenerateMap("weight map has no positive mass")
    return float(np.sum(w * s) / total)


def ewssim_frames(original, compressed, weights):
    """Per-frame EWSSIM values."""
    if (original.width, original.height) != (compressed.width, compressed.height):
        raise DimensionMismatch("videos differ in size")
    if not (original.frame_count == compressed.frame_count == len(weights)):
        raise DimensionMismatch(
            f"frame counts {original.frame_count}/{compressed.frame_count}/{len(weights)} differ"
        )
    return [weighted_ssim(a, b, w) for a, b, w in zip(original.frames, compressed.frames, weights)]


def ewssim(original, compressed, weights):
    """Sequence EWSSIM: unweighted mean of the per-frame weighted means."""
    per_frame = ewssim_frames(original, compressed, weights)
    return float(np.mean(per_frame))
