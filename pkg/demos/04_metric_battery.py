"""Scoring saliency models against ground truth with the five-metric battery."""
import numpy as np

from salrate import metrics, postprocess, saliency, synthetic

w, h, frames = 160, 120, 6
fix = synthetic.lobe_fixations(w, h, frames, observers=30, seed=2)
gt = [saliency.fixations_to_map(fix, t, w, h, 10.0) for t in range(frames)]

models = {
    "lobes": synthetic.two_lobe_saliency(w, h, frames),
    "center": [saliency.center_prior(w, h)] * frames,
    "noise": [np.random.default_rng(t).random((h, w)) for t in range(frames)],
}

# tune the lobe model's brightness and center blend on even frames
cp = saliency.center_prior(w, h)
params = postprocess.fit_postprocess(models["lobes"][::2], gt[::2], cp)
print("fitted gamma=%.3f blend_w=%.2f" % (params.gamma, params.blend_w))
models["lobes+pp"] = [postprocess.apply_postprocess(m, params) for m in models["lobes"]]

print(metrics.MetricReport.HEADER)
for name, maps in models.items():
    reports = [metrics.evaluate(m, g, fix, t) for t, (m, g) in enumerate(zip(maps, gt))]
    print(metrics.mean_report(reports).csv_row(name))
