"""Fixations to ground-truth saliency, plus the center-prior baseline.

Writes PGM sequences under ./out/gt and ./out/cp.pgm.
"""
import os

import numpy as np

from salrate import frames_io, metrics, saliency, synthetic

out = os.path.join(os.path.dirname(__file__), "out")
w, h, frames = 320, 240, 8

# twenty simulated observers looking at two drifting regions
fix = synthetic.lobe_fixations(w, h, frames, observers=20, seed=1)
print("fixations:", len(fix), "over", fix.frame_count, "frames")

# 120 px kernels suit full-HD footage; scale to this frame width
sigma = 120.0 * w / 1920
gt = [saliency.fixations_to_map(fix, t, w, h, sigma) for t in range(frames)]
frames_io.write_map_dir(gt, os.path.join(out, "gt"))

# a single observer is a noisy predictor of the crowd
one = saliency.single_observer_map(fix, 0, 0, w, h, sigma)
print("single observer vs crowd, CC = %.3f" % metrics.cc(one, gt[0]))

cp = saliency.center_prior(w, h)
frames_io.write_pgm(cp, os.path.join(out, "cp.pgm"))
print("center prior vs crowd, CC = %.3f" % metrics.cc(cp, gt[0]))

# the percentile split used by the allocator
split = saliency.percentile(gt[0], 80)
print("80th percentile of frame 0: %.4f, %.1f%% of pixels at or above" %
      (split.threshold, 100 * np.mean(gt[0] >= split.threshold)))
