"""Per-macroblock quantizers from a saliency map, and the bits they cost.

The least-salient blocks keep 70% of the bit budget of a uniform map; the
rest is redistributed toward the salient ones.
"""
import numpy as np

from salrate import codec, qp_solver, synthetic
from salrate.frames_io import VideoSequence

w, h = 320, 240
video = synthetic.textured_sequence(w, h, 4, seed=0)
smaps = synthetic.two_lobe_saliency(w, h, 4)

regions = qp_solver.region_maps(smaps[0], p=80)
print("s_p = %.4f, %d of %d blocks below it" %
      (regions.s_p, regions.nonsalient.sum(), regions.nonsalient.size))

q = qp_solver.uniform_qpmap(w, h, 30)
for name, model in [("analytic", qp_solver.ANALYTIC),
                    ("measured", qp_solver.calibrate_bit_cost(codec.mean_mb_bits, video.frames[0]))]:
    res = qp_solver.solve_alpha_beta(q, regions, b=70, model=model)
    print("\n%s model: alpha=%.3f beta=%.3f status=%s" % (name, res.alpha, res.beta, res.status))
    print("QP range %d..%d, model share of the low region %.4f" %
          (res.q_prime.min(), res.q_prime.max(), res.predicted_share))
    enc = codec.encode_sequence(VideoSequence(w, h, video.frames[:1]), [res.q_prime], [regions])
    print("real bit share of the low region: %.4f" % enc.region_bits["nonsalient_share"])

# the QP map itself, one entry per macroblock
res = qp_solver.solve_alpha_beta(q, regions)
print()
for row in res.q_prime:
    print(" ".join("%2d" % v for v in row))
mean_shift = np.mean(res.q_prime[regions.salient]) - 30
print("salient blocks move by %+.1f QP on average, the rest by %+.1f" %
      (mean_shift, np.mean(res.q_prime[regions.nonsalient]) - 30))
