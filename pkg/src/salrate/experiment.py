"""Rate-distortion experiments: rate search, decode and EWSSIM per source."""

from dataclasses import dataclass, field
import logging
import os

import numpy as np

from . import codec, frames_io, metrics, qp_solver, saliency
from .errors import IoFailure, MalformedHeader, TargetUnreachable

log = logging.getLogger(__name__)

UNIFORM = "uniform"
RD_HEADER = "source,target_bits,actual_bits,ewssim"


@dataclass
class RdRow:
    source: str
    target_bits: int
    actual_bits: int = None
    ewssim: float = None
    base_qp: int = None

    @property
    def reachable(self):
        return self.actual_bits is not None

    def csv(self):
        if not self.reachable:
            return f"{self.source},{self.target_bits},UNREACHABLE,"
        return f"{self.source},{self.target_bits},{self.actual_bits},{self.ewssim:.6f}"


def measure(video, weights, result):
    """Decode a rate-search result and score it against ``video``."""
    payloads = [f.payload for f in result.encoding.frames]
    decoded = codec.decode_sequence(video.width, video.height, payloads)
    return metrics.ewssim(video, decoded, weights)


def run_rd(video, weights, sources, targets, p=80.0, b=70.0, model=None):
    """One row per (source, target); the uniform-QP baseline comes first.

    ``sources`` maps names to per-frame saliency sequences. Unreachable
    targets yield flagged rows instead of aborting the run.
    """
    rows = []
    plan = [(UNIFORM, None)] + list(sources.items())
    for name, smaps in plan:
        for target in targets:
            try:
                res = codec.rate_search_base_qp(video, smaps, target, p, b, model)
            except TargetUnreachable as exc:
                log.warning("%s at %d bits: %s", name, target, exc)
                rows.append(RdRow(name, int(target)))
                continue
            rows.append(RdRow(name, int(target), res.encoding.total_bits,
                              measure(video, weights, res), res.base_qp))
    return rows


def rd_curve(video, weights, smaps, qps, p=80.0, b=70.0, model=None):
    """``(bits, ewssim)`` points over a list of base quantizers."""
    pts = []
    for qp in qps:
        res = codec.encode_at(video, smaps, qp, p, b, model)
        pts.append((res.encoding.total_bits, measure(video, weights, res)))
    return pts


def bitrate_saving(reference, test):
    """Mean relative saving of ``test`` over ``reference`` at equal quality.

    For every test point, the reference bitrate giving the same EWSSIM is
    found by linear interpolation along the reference curve; points outside
    the reference quality range are skipped. Returns NaN when none remain.
    """
    ref = sorted(reference, key=lambda pt: pt[1])
    ref_bits = np.array([pt[0] for pt in ref], dtype=np.float64)
    ref_q = np.array([pt[1] for pt in ref], dtype=np.float64)
    savings = []
    for bits, q in test:
        if ref_q[0] <= q <= ref_q[-1]:
            savings.append(1.0 - bits / float(np.interp(q, ref_q, ref_bits)))
    return float(np.mean(savings)) if savings else float("nan")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    video: str
    fixations: str = None
    gt_dir: str = None
    saliency_dirs: dict = field(default_factory=dict)
    p: float = qp_solver.DEFAULT_P
    b: float = qp_solver.DEFAULT_B
    sigma: float = saliency.DEFAULT_SIGMA
    targets: list = field(default_factory=list)
    out: str = "rd_out"
    seed: int = 0
    model: str = "analytic"

    def validate(self):
        paths = [("video", self.video)]
        if self.fixations:
            paths.append(("fixations", self.fixations))
        if self.gt_dir:
            paths.append(("gt_dir", self.gt_dir))
        paths += [(f"saliency.{k}", v) for k, v in self.saliency_dirs.items()]
        for key, path in paths:
            if not os.path.exists(path):
                raise IoFailure(f"{key}: no such path {path}")
        if not (self.fixations or self.gt_dir):
            raise MalformedHeader("config needs fixations= or gt_dir= for EWSSIM weights")
        if not self.targets:
            raise MalformedHeader("config needs targets=")
        if self.model not in ("analytic", "lut"):
            raise MalformedHeader(f"model must be analytic or lut, got {self.model!r}")
        return self


def parse_config(text, base_dir="."):
    """Parse ``key=value`` lines; relative paths resolve against ``base_dir``."""
    values = {}
    dirs = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedHeader(f"config line {n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("saliency."):
            dirs[key[len("saliency."):]] = value
        else:
            values[key] = value

    def path(v):
        return v if v is None or os.path.isabs(v) else os.path.join(base_dir, v)

    try:
        cfg = ExperimentConfig(
            video=path(values["video"]),
            fixations=path(values.get("fixations")),
            gt_dir=path(values.get("gt_dir")),
            saliency_dirs={k: path(v) for k, v in dirs.items()},
            p=float(values.get("p", qp_solver.DEFAULT_P)),
            b=float(values.get("b", qp_solver.DEFAULT_B)),
            sigma=float(values.get("sigma", saliency.DEFAULT_SIGMA)),
            targets=[int(t) for t in values.get("targets", "").split(",") if t.strip()],
            out=path(values.get("out", "rd_out")),
            seed=int(values.get("seed", 0)),
            model=values.get("model", "analytic"),
        )
    except KeyError as exc:
        raise MalformedHeader(f"config is missing {exc.args[0]}=") from None
    except ValueError as exc:
        raise MalformedHeader(f"bad config value: {exc}") from None
    return cfg.validate()


def load_config(path):
    text = frames_io._read_bytes(path).decode("utf-8", "replace")
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def ground_truth_weights(cfg, video):
    if cfg.gt_dir:
        return frames_io.read_map_dir(cfg.gt_dir, video.frame_count)
    fix = frames_io.read_fixations_csv(cfg.fixations, video.width, video.height)
    return [saliency.fixations_to_map(fix, t, video.width, video.height, cfg.sigma)
            for t in range(video.frame_count)]


def run_config(cfg):
    """Execute a validated config; returns the RD rows."""
    video = frames_io.read_y4m(cfg.video)
    weights = ground_truth_weights(cfg, video)
    sources = {name: frames_io.read_map_dir(d, video.frame_count)
               for name, d in cfg.saliency_dirs.items()}
    model = None
    if cfg.model == "lut":
        model = qp_solver.calibrate_bit_cost(codec.mean_mb_bits, video.frames[0])
    return run_rd(video, weights, sources, cfg.targets, cfg.p, cfg.b, model)
