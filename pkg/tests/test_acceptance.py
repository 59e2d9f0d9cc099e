"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` to see the report lines.
"""

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from salrate import (codec, errors, experiment, frames_io, metrics, postprocess, qp_solver,
                     ranking, saliency, synthetic)
from salrate.frames_io import ComparisonRecord, FixationSet, Outcome, VideoSequence
from salrate.postprocess import PostprocessParams
from salrate.qp_solver import RegionMaps

import oracles

W, H, FRAMES = 320, 240, 16
# the eye-tracking kernel of 120 px belongs to 1920-wide footage; keep its relative size
FIXTURE_SIGMA = 120.0 * W / 1920


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def fixture_video():
    return synthetic.textured_sequence(W, H, FRAMES, seed=0)


@pytest.fixture(scope="module")
def fixture_saliency():
    return synthetic.two_lobe_saliency(W, H, FRAMES)


@pytest.fixture(scope="module")
def fixture_gt():
    fix = synthetic.lobe_fixations(W, H, FRAMES, seed=0)
    return [saliency.fixations_to_map(fix, t, W, H, FIXTURE_SIGMA) for t in range(FRAMES)]


@pytest.fixture(scope="module")
def lut_model(fixture_video):
    return qp_solver.calibrate_bit_cost(codec.mean_mb_bits, fixture_video.frames[0])


def test_1_bit_budget(report, fixture_video, fixture_saliency):
    start = time.perf_counter()
    model = qp_solver.calibrate_bit_cost(codec.mean_mb_bits, fixture_video.frames[0])
    sols = qp_solver.solve_frames(fixture_saliency, 30, p=80, b=70, model=model)
    enc = codec.encode_sequence(fixture_video, [s.result.q_prime for s in sols],
                                [s.regions for s in sols])
    elapsed = time.perf_counter() - start
    share = enc.region_bits["nonsalient_share"]
    unclamped = [s.result for s in sols if s.result.clamped_blocks == 0]
    pred_err = max(abs(r.predicted_share - 0.70) for r in unclamped)
    ok = abs(share - 0.70) <= 0.04 and bool(unclamped) and pred_err <= 1e-6 and elapsed < 30
    report(1, ok, f"real-bit share {share:.4f} (70% +/- 4 pp), model share error {pred_err:.2e} "
                  f"over {len(unclamped)}/{len(sols)} unclamped frames, {elapsed:.2f} s")


def test_2_solver_oracle(report):
    rng = np.random.default_rng(2024)
    worst_coef = worst_res = 0.0
    tested = skipped = 0
    while tested < 200:
        n = int(rng.integers(2, 9))
        q = rng.integers(22, 34, n).astype(float)
        w = rng.uniform(0.1, 1.0, n)
        side = rng.random(n) < 0.5
        side[rng.integers(n)] = True
        side[rng.integers(n)] = False
        if side.all() or not side.any():
            continue
        sn, sp = np.where(side, w, 0.0), np.where(side, 0.0, w)
        b = float(rng.uniform(50, 85))
        regions = RegionMaps(sp=sp[None], sn=sn[None], s_p=0.5, block_saliency=np.zeros((1, n)))
        res = qp_solver.solve_alpha_beta(q.astype(int)[None], regions, b)
        if res.clamped_blocks or res.status != "OK":
            skipped += 1
            continue
        a, bb = oracles.grid_solve_2d(q, sp, sn, side, b)
        worst_coef = max(worst_coef, abs(res.alpha - a), abs(res.beta - bb))
        worst_res = max(worst_res, *(abs(v) for v in res.residuals))
        tested += 1
    ok = worst_coef <= 2e-3 and worst_res <= 1e-9
    report(2, ok, f"{tested} instances ({skipped} clamped skipped): max |coef - grid| {worst_coef:.2e} "
                  f"(<= 2e-3), max relative residual {worst_res:.2e} (<= 1e-9)")


def _fixset(pts, frame=0):
    return FixationSet.from_records([(frame, k, x, y) for k, (x, y) in enumerate(pts)])


def _raises(code, fn, *args):
    try:
        fn(*args)
    except errors.SalrateError as exc:
        return exc.code == code
    return False


def test_3_metric_oracles(report):
    rng = np.random.default_rng(3)
    names = ["auc_j", "cc", "kl", "nss", "sim"]
    worst = dict.fromkeys(names, 0.0)
    for _ in range(500):
        pred = rng.random((8, 8)) ** rng.uniform(0.3, 3)
        gt = rng.random((8, 8))
        gt[gt < rng.uniform(0, 0.6)] = 0.0
        pts = [tuple(v) for v in rng.uniform(0, 7.49, (int(rng.integers(1, 16)), 2))]
        fix = _fixset(pts)
        pairs = {
            "auc_j": (metrics.auc_judd(pred, fix, 0), oracles.auc_judd(pred, pts)),
            "cc": (metrics.cc(pred, gt), oracles.cc(pred, gt)),
            "kl": (metrics.kl_div(pred, gt), oracles.kl(pred, gt)),
            "nss": (metrics.nss(pred, fix, 0), oracles.nss(pred, pts)),
            "sim": (metrics.sim(pred, gt), oracles.sim(pred, gt)),
        }
        for k, (got, ref) in pairs.items():
            worst[k] = max(worst[k], abs(got - ref))
    m = rng.random((8, 8))
    flat = np.full((8, 8), 0.5)
    fix = _fixset([(2, 2)])
    none = FixationSet.empty()
    degenerate = [
        _raises("DEGENERATE_MAP", metrics.cc, flat, m),
        _raises("DEGENERATE_MAP", metrics.cc, m, flat),
        _raises("DEGENERATE_MAP", metrics.kl_div, m, np.zeros((8, 8))),
        _raises("DEGENERATE_MAP", metrics.nss, flat, fix, 0),
        _raises("NO_FIXATIONS", metrics.nss, m, none, 0),
        _raises("DEGENERATE_MAP", metrics.sim, np.zeros((8, 8)), m),
        _raises("NO_FIXATIONS", metrics.auc_judd, m, none, 0),
        _raises("DIMENSION_MISMATCH", metrics.cc, m, m[:4]),
        _raises("DIMENSION_MISMATCH", metrics.kl_div, m, m[:4]),
        _raises("DIMENSION_MISMATCH", metrics.sim, m, m[:4]),
    ]
    ok = max(worst.values()) <= 1e-9 and all(degenerate)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(3, ok, f"500 instances, max deviation {detail} (<= 1e-9); "
                  f"{sum(degenerate)}/{len(degenerate)} degenerate inputs raise the expected error")


def test_4_ewssim_locality(report, fixture_video, fixture_saliency):
    rng = np.random.default_rng(4)
    frames = [f.astype(np.float64) for f in fixture_video.frames]
    # zero-weight part: weights vanish outside the lobes, distortion stays clear of the SSIM window
    from scipy import ndimage
    weights0 = [np.where(s >= 0.2, s, 0.0) for s in fixture_saliency]
    distorted = []
    for f, w in zip(frames, weights0):
        reach = ndimage.binary_dilation(w > 0, np.ones((11, 11), bool))
        g = f.copy()
        g[~reach] = 255.0 - g[~reach]
        distorted.append(g)
    exact = [metrics.weighted_ssim(f, g, w) for f, g, w in zip(frames, distorted, weights0)]
    zero_ok = all(v == 1.0 for v in exact)

    # decile part: same +/-12 noise pattern on the top and bottom weight deciles
    def drop(decile_top):
        vals = []
        for f, w in zip(frames, fixture_saliency):
            order = np.argsort(w, axis=None, kind="stable")
            k = w.size // 10
            idx = order[-k:] if decile_top else order[:k]
            noise = 12.0 * rng.choice([-1.0, 1.0], size=k)
            g = f.copy().ravel()
            g[idx] += noise
            vals.append(metrics.weighted_ssim(f, g.reshape(f.shape), w))
        return 1.0 - float(np.mean(vals))

    top, bottom = drop(True), drop(False)
    ratio = top / bottom if bottom > 0 else math.inf
    ok = zero_ok and ratio >= 5
    report(4, ok, f"zero-weight distortion EWSSIM min {min(exact)!r} (== 1.0 exactly); "
                  f"EWSSIM drop top decile {top:.4e} vs bottom {bottom:.4e}, ratio {ratio:.1f} (>= 5)")


def test_5_saliency_gain(report, fixture_video, fixture_saliency, fixture_gt, lut_model):
    targets = [codec.encode_at(fixture_video, None, qp).encoding.total_bits for qp in (28, 32, 36)]
    rows = experiment.run_rd(fixture_video, fixture_gt, {"lobes": fixture_saliency}, targets,
                             model=lut_model)
    by = {(r.source, r.target_bits): r for r in rows}
    wins = [by["lobes", t].ewssim > by["uniform", t].ewssim for t in targets]
    qps = [24, 28, 32, 36, 40]
    uni = experiment.rd_curve(fixture_video, fixture_gt, None, qps)
    sal = experiment.rd_curve(fixture_video, fixture_gt, fixture_saliency, qps, model=lut_model)
    saving = experiment.bitrate_saving(uni, sal)
    pairs = "; ".join(f"{t} bits: {by['lobes', t].ewssim:.4f} vs {by['uniform', t].ewssim:.4f}"
                      for t in targets)
    report(5, all(wins), f"saliency-aware vs uniform EWSSIM at {pairs}; "
                         f"implied bitrate saving {100 * saving:.1f}% (reported, not asserted)")


def test_5_info_unscaled_kernel(capsys, fixture_video, fixture_saliency):
    """Informational: the same comparison with the unscaled 120 px kernel."""
    fix = synthetic.lobe_fixations(W, H, FRAMES, seed=0)
    gt = [saliency.fixations_to_map(fix, t, W, H, 120.0) for t in range(FRAMES)]
    qps = [28, 32, 36]
    uni = experiment.rd_curve(fixture_video, gt, None, qps)
    sal = experiment.rd_curve(fixture_video, gt, fixture_saliency, qps)
    saving = experiment.bitrate_saving(uni, sal)
    with capsys.disabled():
        print(f"\n[INFO] criterion 5 with sigma=120 px on {W}x{H}: weights are nearly flat, "
              f"implied saving {100 * saving:.1f}%")
    assert np.isfinite(saving) or math.isnan(saving)


def _steps_off(fit, g, w):
    return abs(math.log2(fit.gamma) - math.log2(g)) / (6.0 / 32), abs(fit.blend_w - w) / 0.05


def test_6_postprocess_recovery(report, capsys, fixture_saliency):
    preds = fixture_saliency[::8]
    cp = saliency.center_prior(W, H)
    gammas, blends = postprocess.gamma_grid(), postprocess.blend_grid()

    def fit(g, w):
        gt = [postprocess.apply_postprocess(m, PostprocessParams(g, w, cp)) for m in preds]
        return postprocess.fit_postprocess(preds, gt, cp)

    on_grid = [(gammas[30], blends[6]), (gammas[4], blends[13]), (gammas[20], blends[0]),
               (gammas[16], blends[20])]
    exact = [(lambda f: (f.gamma, f.blend_w) == (g, w))(fit(g, w)) for g, w in on_grid]

    # one coordinate off the grid, the other on it
    rng = np.random.default_rng(6)
    off_grid = [(2.0, 0.30)]
    for _ in range(6):
        off_grid.append((float(2 ** rng.uniform(-2.8, 2.8)), float(blends[rng.integers(1, 20)])))
        off_grid.append((float(gammas[rng.integers(1, 32)]), float(rng.uniform(0.02, 0.98))))
    worst = max(max(_steps_off(fit(g, w), g, w)) for g, w in off_grid)

    joint = [(float(2 ** rng.uniform(-2.8, 2.8)), float(rng.uniform(0.02, 0.98))) for _ in range(12)]
    joint_worst = max(_steps_off(fit(g, w), g, w)[0] for g, w in joint)
    with capsys.disabled():
        print(f"\n[INFO] criterion 6: {len(joint)} cases with both coordinates off the grid, worst "
              f"gamma error {joint_worst:.2f} steps (not asserted: snapping w can shift the gamma optimum)")
    ok = all(exact) and worst <= 1 + 1e-9
    report(6, ok, f"on-grid exact {sum(exact)}/{len(exact)}; {len(off_grid)} single-axis off-grid "
                  f"cases incl. (2.0, 0.30), worst error {worst:.3f} grid steps (<= 1)")


def _kendall_perfect(truth, est):
    return all(np.sign(truth[i] - truth[j]) == np.sign(est[i] - est[j])
               for i, j in itertools.combinations(range(len(truth)), 2))


def test_7_thurstone_recovery(report):
    truth = {f"m{i}": 0.5 * i for i in range(6)}
    names = list(truth)
    perfect = 0
    for seed in range(20):
        recs = ranking.simulate_case_v(truth, 300, np.random.default_rng(seed))
        est = ranking.thurstone_case_v(ranking.build_matrix(recs, names))
        perfect += _kendall_perfect([truth[n] for n in names], est)
    pair = [ComparisonRecord("v", "A", "B", Outcome.A_WINS if k < 75 else Outcome.B_WINS, f"p{k}")
            for k in range(100)]
    s = ranking.thurstone_case_v(ranking.build_matrix(pair))
    gap = s[0] - s[1]
    ok = perfect >= 19 and abs(gap - 0.6745) <= 1e-4
    report(7, ok, f"Kendall tau = 1 in {perfect}/20 seeds (>= 19); 0.75 fixture gap {gap:.6f} "
                  f"(0.6745 +/- 1e-4)")


DETERMINISM_SCRIPT = """
import hashlib
from salrate import codec, qp_solver, synthetic
v = synthetic.textured_sequence(96, 64, 4, seed=11)
s = synthetic.two_lobe_saliency(96, 64, 4)
maps = qp_solver.build_qp_maps(s, 31)
enc = codec.encode_sequence(v, maps)
print(hashlib.sha256(codec.format_container(enc.frames, 96, 64)).hexdigest())
"""


def _random_frame(rng):
    h, w = int(rng.integers(8, 72)), int(rng.integers(8, 96))
    kind = rng.integers(3)
    if kind == 0:
        return rng.integers(0, 256, (h, w), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    if kind == 1:
        return np.clip(rng.uniform(0, 128) + rng.uniform(-3, 3) * xx + rng.uniform(-3, 3) * yy,
                       0, 255).astype(np.uint8)
    return np.full((h, w), int(rng.integers(256)), np.uint8)


def test_8_codec_integrity(report):
    rng = np.random.default_rng(8)
    exact = monotone = 0
    for _ in range(50):
        frame = _random_frame(rng)
        h, w = frame.shape
        qp = rng.integers(0, 52, frames_io.mb_dims(w, h))
        enc = codec.encode_frame(frame, qp)
        exact += bool(np.array_equal(codec.decode_frame(enc.payload, w, h), enc.reconstruction))
        bits = [codec.encode_frame(frame, qp_solver.uniform_qpmap(w, h, q)).total_bits
                for q in range(0, 49, 6)]
        monotone += all(a >= b for a, b in zip(bits, bits[1:]))
    digests = [subprocess.run([sys.executable, "-c", DETERMINISM_SCRIPT], capture_output=True,
                              text=True, check=True).stdout.strip() for _ in range(2)]
    same = digests[0] == digests[1] and len(digests[0]) == 64
    ok = exact == 50 and monotone == 50 and same
    report(8, ok, f"bit-exact round trips {exact}/50, rate non-increasing over QP 0..48 {monotone}/50, "
                  f"two-process bitstreams identical: {same}")


def test_9_formats(report, tmp_path):
    rng = np.random.default_rng(9)
    checks = {}

    seq = VideoSequence(12, 8, [rng.integers(0, 256, (8, 12), dtype=np.uint8) for _ in range(3)])
    data = frames_io.format_y4m(seq)
    back = frames_io.parse_y4m(data)
    checks["y4m"] = (all(np.array_equal(a, b) for a, b in zip(seq.frames, back.frames))
                     and frames_io.format_y4m(back) == data)

    ok = True
    for depth in (8, 16):
        maxval = (1 << depth) - 1
        m = rng.integers(0, maxval + 1, (7, 5)) / maxval
        data = frames_io.format_pgm(m, depth)
        ok &= np.array_equal(frames_io.parse_pgm(data), m)
        ok &= frames_io.format_pgm(frames_io.parse_pgm(data), depth) == data
        cont = rng.random((7, 5))
        ok &= np.abs(frames_io.parse_pgm(frames_io.format_pgm(cont, depth)) - cont).max() <= 0.5 / maxval + 1e-15
    checks["pgm"] = bool(ok)

    maps = [rng.integers(0, 52, (3, 4)) for _ in range(3)]
    data = frames_io.format_qpmap(maps)
    back = frames_io.parse_qpmap(data)
    checks["qpmap"] = (all(np.array_equal(a, b) for a, b in zip(maps, back))
                       and frames_io.format_qpmap(back) == data)

    recs = [ComparisonRecord(f"v{k}", "a", "b", o, f"p{k % 3}")
            for k, o in enumerate(rng.choice(list(Outcome), 12))]
    data = frames_io.format_comparisons(recs)
    back = frames_io.parse_comparisons(data)
    checks["comparisons"] = back == recs and frames_io.format_comparisons(back) == data

    readers = [frames_io.parse_y4m, frames_io.parse_pgm, frames_io.parse_fixations_csv,
               frames_io.parse_qpmap, frames_io.parse_comparisons, frames_io.parse_verification,
               codec.parse_container]
    seeds = [b"YUV4MPEG2 W4 H2 Cmono\nFRAME\n", b"P5\n2 2\n255\n", b"frame,observer,x,y\n",
             b"QPMAP v1 2 1 1\n", b"a\tb\tc\t", b"SALC1 16 16 1\n", b""]
    crashes = []
    for reader in readers:
        for k in range(10_000):
            body = rng.integers(0, 256, int(rng.integers(0, 48)), dtype=np.uint8).tobytes()
            data = seeds[k % len(seeds)] + body if k % 2 else body
            try:
                reader(data)
            except errors.SalrateError:
                pass
            except Exception as exc:  # noqa: BLE001 - any untyped failure is a finding
                crashes.append(f"{reader.__name__}: {type(exc).__name__}")
    checks["fuzz"] = not crashes
    ok = all(checks.values())
    detail = ", ".join(f"{k} {'ok' if v else 'BROKEN'}" for k, v in checks.items())
    report(9, ok, f"{detail}; {len(readers)} readers x 10000 random inputs, "
                  f"{len(crashes)} untyped failures")
