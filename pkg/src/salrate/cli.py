"""Command-line entry point: ``salrate <subcommand> ...``.

Every failure exits with status 1 and prints ``error: <CODE>: <message>``.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import codec, experiment, frames_io, metrics, postprocess, qp_solver, ranking, saliency
from .errors import DegenerateMap, DimensionMismatch, IoFailure, NoFixations, SalrateError


def _out(text, path=None):
    if path:
        frames_io._write_bytes(path, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def cmd_gt(args):
    fix = frames_io.read_fixations_csv(args.fixations, args.width, args.height)
    frames = args.frames if args.frames is not None else fix.frame_count
    maps = []
    for t in range(frames):
        if args.observer is None:
            m = saliency.fixations_to_map(fix, t, args.width, args.height, args.sigma)
        else:
            m = saliency.single_observer_map(fix, args.observer, t, args.width, args.height, args.sigma)
        maps.append(m)
    frames_io.write_map_dir(maps, args.out, args.bit_depth)
    print(f"wrote {len(maps)} maps to {args.out}")


def cmd_center_prior(args):
    cp = saliency.center_prior(args.width, args.height, args.sigma_x, args.sigma_y)
    frames_io.write_pgm(cp, args.out, args.bit_depth)


def _load_saliency(video, directory):
    maps = frames_io.read_map_dir(directory)
    if len(maps) != video.frame_count:
        raise DimensionMismatch(f"{len(maps)} saliency frames for {video.frame_count} video frames")
    for i, m in enumerate(maps):
        if m.shape != (video.height, video.width):
            raise DimensionMismatch(f"saliency frame {i} is {m.shape[1]}x{m.shape[0]}")
    return maps


def _model(name, video):
    if name == "lut":
        return qp_solver.calibrate_bit_cost(codec.mean_mb_bits, video.frames[0])
    return qp_solver.ANALYTIC


def cmd_qpmap(args):
    video = frames_io.read_y4m(args.video)
    maps = _load_saliency(video, args.saliency_dir)
    model = _model(args.model, video)
    sols = qp_solver.solve_frames(maps, args.base_qp, args.p, args.b, model)
    frames_io.write_qpmap([s.result.q_prime for s in sols], args.out)
    diag = args.diagnostics or args.out + ".csv"
    _out(qp_solver.diagnostics_csv(sols), diag)
    print(f"wrote {len(sols)} QP maps to {args.out}; diagnostics in {diag}")


def cmd_encode(args):
    video = frames_io.read_y4m(args.video)
    maps = frames_io.read_qpmap(args.qpmap)
    if len(maps) != video.frame_count:
        raise DimensionMismatch(f"{len(maps)} QP maps for {video.frame_count} frames")
    regions = None
    if args.regions:
        regions = [qp_solver.region_maps(s, args.p) for s in _load_saliency(video, args.regions)]
    enc = codec.encode_sequence(video, maps, regions)
    codec.write_container(enc.frames, video.width, video.height, args.out)
    print(f"total_bits={enc.total_bits}")
    if enc.region_bits:
        r = enc.region_bits
        print(f"nonsalient_bits={r['nonsalient']}")
        print(f"salient_bits={r['salient']}")
        print(f"nonsalient_share={r['nonsalient_share']:.6f}")


def cmd_decode(args):
    width, height, payloads = codec.read_container(args.bitstream)
    frames_io.write_y4m(codec.decode_sequence(width, height, payloads), args.out)
    print(f"decoded {len(payloads)} frames to {args.out}")


def cmd_metrics(args):
    gt_names = sorted(n for n in os.listdir(args.gt_dir) if n.endswith(".pgm"))
    if not gt_names:
        raise IoFailure(f"no ground-truth maps in {args.gt_dir}")
    fix = frames_io.read_fixations_csv(args.fixations)
    reports = []
    for t, name in enumerate(gt_names):
        pred_path = os.path.join(args.pred_dir, name)
        if not os.path.exists(pred_path):
            raise IoFailure(f"missing prediction for frame {t}: {pred_path}")
        pred = frames_io.read_pgm(pred_path)
        gt = frames_io.read_pgm(os.path.join(args.gt_dir, name))
        frame = int(os.path.splitext(name)[0]) if name[:-4].isdigit() else t
        sel = fix.within(gt.shape[1], gt.shape[0])
        try:
            reports.append(metrics.evaluate(pred, gt, sel, frame))
        except NoFixations:
            r = metrics.MetricReport(np.nan, metrics.cc(pred, gt), metrics.kl_div(pred, gt),
                                     np.nan, metrics.sim(pred, gt))
            reports.append(r)
    row = metrics.mean_report(reports).csv_row(args.model_name)
    _out(metrics.MetricReport.HEADER + "\n" + row + "\n", args.out)


def cmd_ewssim(args):
    orig = frames_io.read_y4m(args.original)
    comp = frames_io.read_y4m(args.compressed)
    weights = frames_io.read_map_dir(args.weights_dir, orig.frame_count)
    for i, w in enumerate(weights):
        if not w.sum() > 0:
            raise DegenerateMap(f"weight map of frame {i} sums to zero")
    per_frame = metrics.ewssim_frames(orig, comp, weights)
    lines = ["frame,ewssim"] + [f"{i},{v:.6f}" for i, v in enumerate(per_frame)]
    if args.per_frame:
        _out("\n".join(lines) + "\n", args.per_frame)
    print(f"ewssim={float(np.mean(per_frame)):.6f}")


def cmd_rank(args):
    records = frames_io.read_comparisons(args.comparisons)
    if args.verify_file:
        records = ranking.filter_participants(records, frames_io.read_verification(args.verify_file))
    result = ranking.bootstrap_ci(records, args.level, args.boot, args.seed)
    _out(result.to_csv(), args.out)


def cmd_rd(args):
    cfg = experiment.load_config(args.config)
    rows = experiment.run_config(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    text = experiment.RD_HEADER + "\n" + "".join(r.csv() + "\n" for r in rows)
    path = os.path.join(cfg.out, "rd.csv")
    _out(text, path)
    sys.stdout.write(text)


def cmd_pp_fit(args):
    pred = frames_io.read_map_dir(args.pred_dir)
    gt = frames_io.read_map_dir(args.gt_dir, len(pred))
    cp = frames_io.read_pgm(args.cp)
    params = postprocess.fit_postprocess(pred, gt, cp, stride=args.stride)
    postprocess.write_params(params, args.out, os.path.abspath(args.cp))
    print(f"gamma={params.gamma!r} blend_w={params.blend_w!r}")


def cmd_pp_apply(args):
    params = postprocess.read_params(args.params)
    maps = frames_io.read_map_dir(args.in_dir)
    frames_io.write_map_dir([postprocess.apply_postprocess(m, params) for m in maps],
                            args.out_dir, args.bit_depth)


def build_parser():
    parser = argparse.ArgumentParser(prog="salrate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gt", help="ground-truth saliency maps from fixations")
    p.add_argument("--fixations", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--sigma", type=float, default=saliency.DEFAULT_SIGMA)
    p.add_argument("--frames", type=int)
    p.add_argument("--observer", type=int)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("center-prior", help="write a center-prior map")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--sigma-x", type=float, default=saliency.DEFAULT_CP_FRACTION)
    p.add_argument("--sigma-y", type=float, default=saliency.DEFAULT_CP_FRACTION)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_center_prior)

    p = sub.add_parser("qpmap", help="saliency-aware QP maps")
    p.add_argument("--video", required=True)
    p.add_argument("--saliency-dir", required=True)
    p.add_argument("--base-qp", type=int, default=30)
    p.add_argument("--p", type=float, default=qp_solver.DEFAULT_P)
    p.add_argument("--b", type=float, default=qp_solver.DEFAULT_B)
    p.add_argument("--model", choices=("analytic", "lut"), default="analytic")
    p.add_argument("--diagnostics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_qpmap)

    p = sub.add_parser("encode", help="encode a video with QP maps")
    p.add_argument("--video", required=True)
    p.add_argument("--qpmap", required=True)
    p.add_argument("--regions", help="saliency directory for the per-region bit split")
    p.add_argument("--p", type=float, default=qp_solver.DEFAULT_P)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a SALC1 container to Y4M")
    p.add_argument("--bitstream", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("metrics", help="AUC-J, CC, KL, NSS and SIM of a model")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--fixations", required=True)
    p.add_argument("--model-name", default="model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("ewssim", help="saliency-weighted SSIM of two videos")
    p.add_argument("--original", required=True)
    p.add_argument("--compressed", required=True)
    p.add_argument("--weights-dir", required=True)
    p.add_argument("--per-frame")
    p.set_defaults(func=cmd_ewssim)

    p = sub.add_parser("rank", help="Thurstone Case V ranking with bootstrap intervals")
    p.add_argument("--comparisons", required=True)
    p.add_argument("--verify-file")
    p.add_argument("--level", type=float, default=ranking.DEFAULT_LEVEL)
    p.add_argument("--boot", type=int, default=ranking.DEFAULT_BOOT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("rd", help="rate-distortion table from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_rd)

    p = sub.add_parser("pp-fit", help="fit postprocessing parameters")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--cp", required=True)
    p.add_argument("--stride", type=int, default=postprocess.DEFAULT_STRIDE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pp_fit)

    p = sub.add_parser("pp-apply", help="apply fitted postprocessing")
    p.add_argument("--params", required=True)
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)
    p.set_defaults(func=cmd_pp_apply)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SalrateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: INVALID_ARGUMENT: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
