"""Rate-distortion curves of uniform and saliency-aware coding, scored by EWSSIM."""
from salrate import experiment, saliency, synthetic

w, h, frames = 320, 240, 8
video = synthetic.textured_sequence(w, h, frames, seed=0)
smaps = synthetic.two_lobe_saliency(w, h, frames)
fix = synthetic.lobe_fixations(w, h, frames, seed=0)
weights = [saliency.fixations_to_map(fix, t, w, h, 20.0) for t in range(frames)]

qps = [24, 28, 32, 36, 40]
uniform = experiment.rd_curve(video, weights, None, qps)
aware = experiment.rd_curve(video, weights, smaps, qps)

print("%4s %12s %8s %12s %8s" % ("qp", "uniform", "ewssim", "aware", "ewssim"))
for qp, (ub, uq), (ab, aq) in zip(qps, uniform, aware):
    print("%4d %12d %8.4f %12d %8.4f" % (qp, ub, uq, ab, aq))

saving = experiment.bitrate_saving(uniform, aware)
print("\nbits saved at equal EWSSIM: %.1f%%" % (100 * saving))
