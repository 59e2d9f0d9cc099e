"""Saliency-driven macroblock quantizer allocation.

Given a quantizer map ``Q`` and a saliency map ``S`` with p-th percentile
``s_p``, the modified map is::

    Q' = Q + alpha * SP - beta * SN
    SP = max(S - s_p, 0),  SN = max(s_p - S, 0)       (per macroblock)

with ``alpha`` and ``beta`` chosen so that, under a bit-cost model ``B``, the
blocks below the percentile (``SN > 0``) receive ``b`` percent of the
original bit budget and all other blocks the remaining ``100 - b``
percent. The two supports are disjoint, so each coefficient has its own
one-dimensional monotone equation, solved here by bisection.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .errors import EmptyMap, OutOfRange, ProbeFailure, DimensionMismatch
from .frames_io import MB_SIZE, QP_MAX, QP_MIN, check_qpmap
from .saliency import percentile

log = logging.getLogger(__name__)

DEFAULT_P = 80.0
DEFAULT_B = 70.0
DEFAULT_TOL = 1e-9
CALIBRATION_QPS = (0, 6, 12, 18, 24, 30, 36, 42, 48, 51)
LUT_MIN_DECAY = 1e-3


def analytic_bit_cost(q):
    """Relative bits of a block at integer quantizer ``q``: ``2 ** (-q / 6)``."""
    if isinstance(q, bool) or int(q) != q or not QP_MIN <= q <= QP_MAX:
        raise OutOfRange(f"quantizer {q!r} outside [{QP_MIN}, {QP_MAX}]")
    q = int(q)
    # split into whole octaves so B(q + 6) == B(q) / 2 holds bit-exactly
    return 2.0 ** (-(q // 6)) * 2.0 ** (-(q % 6) / 6.0)


class BitCostModel:
    """Strictly decreasing map from quantizer to relative block bits.

    ``kind="analytic"`` uses ``2 ** (-q / 6)``. ``kind="lut"`` holds 52
    measured values and is extended to real quantizers by log-linear
    interpolation (and extrapolation with the end slopes).
    """

    def __init__(self, kind="analytic", lut=None):
        if kind not in ("analytic", "lut"):
            raise ValueError(f"unknown bit-cost model {kind!r}")
        self.kind = kind
        if kind == "lut":
            lut = np.asarray(lut, dtype=np.float64)
            if lut.shape != (QP_MAX + 1,):
                raise ValueError("a LUT model needs 52 entries")
            if not np.all(np.isfinite(lut)) or np.any(lut <= 0):
                raise ValueError("LUT entries must be positive")
            if np.any(np.diff(lut) >= 0):
                raise ValueError("LUT must be strictly decreasing")
            self.lut = lut
            self._log_lut = np.log(lut)
        else:
            self.lut = None

    def __repr__(self):
        return f"BitCostModel({self.kind!r})"

    def __call__(self, q):
        """Bits at (possibly fractional, possibly out-of-range) quantizers."""
        q = np.asarray(q, dtype=np.float64)
        if self.kind == "analytic":
            return np.exp2(-q / 6.0)
        ll = self._log_lut
        i = np.clip(np.floor(q), 0, QP_MAX - 1).astype(np.int64)
        frac = q - i
        return np.exp(ll[i] + frac * (ll[i + 1] - ll[i]))

    def at(self, q):
        return float(self(q))


ANALYTIC = BitCostModel("analytic")


def _pav_nonincreasing(values):
    """Pool-adjacent-violators fit of a non-increasing sequence."""
    blocks = []  # [mean, weight]
    for v in values:
        blocks.append([float(v), 1])
        while len(blocks) > 1 and blocks[-2][0] < blocks[-1][0]:
            m2, w2 = blocks.pop()
            m1, w1 = blocks.pop()
            blocks.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2])
    out = []
    for m, w in blocks:
        out.extend([m] * w)
    return np.array(out)


def lut_from_samples(qps, bits, min_decay=LUT_MIN_DECAY):
    """Build a strictly decreasing 52-entry LUT from sampled bit counts.

    Samples are made non-increasing by isotonic regression in the log
    domain, interpolated log-linearly, then every step is forced down by at
    least ``min_decay`` (relative).
    """
    qps = np.asarray(qps, dtype=np.float64)
    bits = np.asarray(bits, dtype=np.float64)
    logs = _pav_nonincreasing(np.log(bits))
    lut = np.exp(np.interp(np.arange(QP_MAX + 1), qps, logs))
    for q in range(1, QP_MAX + 1):
        lut[q] = min(lut[q], lut[q - 1] * (1.0 - min_decay))
    return lut


def calibrate_bit_cost(probe, frame, qps=CALIBRATION_QPS):
    """Measure a LUT model by encoding ``frame`` at uniform quantizers.

    ``probe(frame, qp)`` must return the mean coded bits per macroblock.
    """
    samples = []
    for q in qps:
        try:
            bits = float(probe(frame, q))
        except Exception as exc:
            raise ProbeFailure(f"probe failed at QP {q}: {exc}") from exc
        if not math.isfinite(bits) or bits <= 0:
            raise ProbeFailure(f"probe returned {bits} bits at QP {q}")
        samples.append(bits)
    return BitCostModel("lut", lut_from_samples(qps, samples))


# ---------------------------------------------------------------------------
# regions


def _block_edges(n, mb):
    return np.arange(0, n, mb)


def block_saliency(smap, mb=MB_SIZE):
    """Mean saliency of each macroblock; edge blocks average their real pixels."""
    m = np.asarray(smap, dtype=np.float64)
    if m.size == 0:
        raise EmptyMap("empty map")
    h, w = m.shape
    rows, cols = _block_edges(h, mb), _block_edges(w, mb)
    sums = np.add.reduceat(np.add.reduceat(m, rows, axis=0), cols, axis=1)
    counts = np.outer(np.diff(np.append(rows, h)), np.diff(np.append(cols, w)))
    lo = np.minimum.reduceat(np.minimum.reduceat(m, rows, axis=0), cols, axis=1)
    hi = np.maximum.reduceat(np.maximum.reduceat(m, rows, axis=0), cols, axis=1)
    # rounding must not move a flat block off its value (it would flip regions)
    return np.clip(sums / counts, lo, hi)


@dataclass
class RegionMaps:
    sp: np.ndarray
    sn: np.ndarray
    s_p: float
    block_saliency: np.ndarray

    @property
    def nonsalient(self):
        """Blocks under the percentile, the ``SN > 0`` constraint set."""
        return self.sn > 0

    @property
    def salient(self):
        """Complement of :attr:`nonsalient`; includes blocks exactly at ``s_p``."""
        return ~self.nonsalient

    @property
    def shape(self):
        return self.block_saliency.shape


def region_maps(smap, p=DEFAULT_P, mb=MB_SIZE):
    """Split macroblocks around the pixel-level p-th percentile."""
    s_p = percentile(smap, p).threshold
    bs = block_saliency(smap, mb)
    return RegionMaps(
        sp=np.maximum(bs - s_p, 0.0),
        sn=np.maximum(s_p - bs, 0.0),
        s_p=s_p,
        block_saliency=bs,
    )


# ---------------------------------------------------------------------------
# solver

OK = "OK"
EMPTY_REGION = "EMPTY_REGION"
NO_BRACKET = "NO_BRACKET"


@dataclass
class SolveResult:
    alpha: float
    beta: float
    q_prime: np.ndarray
    q_prime_real: np.ndarray
    predicted_share: float
    achieved_nonsalient_share: float
    clamped_blocks: int
    status: str = OK
    residuals: tuple = field(default=(0.0, 0.0))

    @property
    def degenerate(self):
        return self.status == EMPTY_REGION


def _bisect_coefficient(weights, base, const, target, model, tol_abs, sign):
    """Solve ``const + sum B(base + sign * c * weights) = target`` for ``c``.

    ``weights`` are strictly positive; the left side is strictly decreasing
    in ``c`` for ``sign=+1`` and increasing for ``sign=-1``. Returns
    ``(c, residual, found)``; ``c`` is None when nothing can move.
    """
    def residual(c):
        return const + float(np.sum(model(base + sign * c * weights))) - target

    r0 = residual(0.0)
    if weights.size == 0:
        return None, r0, abs(r0) <= tol_abs
    if abs(r0) <= tol_abs:
        return 0.0, r0, True
    # move c in the direction that reduces |residual|
    rising = sign < 0
    direction = 1.0 if (r0 < 0) == rising else -1.0
    here, there = 0.0, direction
    r_there = residual(there)
    while (r_there < 0) == (r0 < 0):
        if abs(there) > 1e6:
            # budget unreachable: report the best end of the search
            return (0.0, r0, False) if abs(r0) <= abs(r_there) else (there, r_there, False)
        here, there = there, there * 2.0
        r_there = residual(there)
    lo, hi = sorted((here, there))
    r_lo = residual(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        r_mid = residual(mid)
        if abs(r_mid) <= tol_abs or mid in (lo, hi):
            return mid, r_mid, True
        if (r_mid < 0) == (r_lo < 0):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    return mid, r_mid, True


def solve_alpha_beta(q, regions, b=DEFAULT_B, model=ANALYTIC, tol=DEFAULT_TOL):
    """Find ``alpha``, ``beta`` meeting the two regional bit budgets.

    The continuous solution is rounded half-to-even and clamped to
    ``[0, 51]``. Blocks that clamping moves are frozen at the bound and the
    remaining blocks re-solved, at most 52 times. ``predicted_share`` is the
    model share of the non-salient set for the continuous solution;
    ``achieved_nonsalient_share`` measures the rounded map.
    """
    if not 0 < b < 100:
        raise ValueError("b must lie strictly between 0 and 100")
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = check_qpmap(q).astype(np.float64)
    if q.shape != regions.shape:
        raise DimensionMismatch(f"QP map {q.shape} vs regions {regions.shape}")
    nonsal = regions.nonsalient
    sal = regions.salient
    total = float(np.sum(model(q)))
    share0 = float(np.sum(model(q[nonsal]))) / total

    if not nonsal.any() or not sal.any():
        return SolveResult(0.0, 0.0, q.astype(np.int64), q.copy(), share0, share0, 0, EMPTY_REGION)

    targets = {"n": b / 100.0 * total, "p": (1.0 - b / 100.0) * total}
    tol_abs = tol * total
    frozen = np.zeros(q.shape, dtype=bool)
    frozen_val = np.zeros(q.shape)
    alpha = beta = 0.0
    status = OK
    res_n = res_p = 0.0

    for _ in range(QP_MAX + 1):
        # non-salient side: q' = q - beta * sn, bits rise with beta
        free_n = nonsal & ~frozen
        const_n = float(np.sum(model(frozen_val[nonsal & frozen])))
        beta_new, res_n, ok_n = _bisect_coefficient(
            regions.sn[free_n], q[free_n], const_n, targets["n"], model, tol_abs, sign=-1)
        # salient side: q' = q + alpha * sp; blocks with sp == 0 are constant
        moving = sal & ~frozen & (regions.sp > 0)
        fixed = sal & ~frozen & (regions.sp == 0)
        const_p = float(np.sum(model(frozen_val[sal & frozen]))) + float(np.sum(model(q[fixed])))
        alpha_new, res_p, ok_p = _bisect_coefficient(
            regions.sp[moving], q[moving], const_p, targets["p"], model, tol_abs, sign=+1)

        status = OK if ok_n and ok_p else NO_BRACKET
        beta = beta if beta_new is None else beta_new
        alpha = alpha if alpha_new is None else alpha_new

        real = q + alpha * regions.sp - beta * regions.sn
        real = np.where(frozen, frozen_val, real)
        rounded = np.rint(real)
        clamped = np.clip(rounded, QP_MIN, QP_MAX)
        newly = (clamped != rounded) & ~frozen
        if not newly.any():
            break
        frozen |= newly
        frozen_val[newly] = clamped[newly]
    else:
        log.warning("clamp freezing did not settle after %d rounds", QP_MAX + 1)

    q_prime = clamped.astype(np.int64)
    predicted = float(np.sum(model(real[nonsal]))) / float(np.sum(model(real)))
    achieved = float(np.sum(model(clamped[nonsal]))) / float(np.sum(model(clamped)))
    return SolveResult(
        alpha=float(alpha),
        beta=float(beta),
        q_prime=q_prime,
        q_prime_real=real,
        predicted_share=predicted,
        achieved_nonsalient_share=achieved,
        clamped_blocks=int(frozen.sum()),
        status=status,
        residuals=(res_n / total, res_p / total),
    )


@dataclass
class FrameSolution:
    regions: RegionMaps
    result: SolveResult


def uniform_qpmap(width, height, qp, mb=MB_SIZE):
    if not QP_MIN <= qp <= QP_MAX:
        raise OutOfRange(f"base QP {qp} outside [{QP_MIN}, {QP_MAX}]")
    return np.full((-(-height // mb), -(-width // mb)), int(qp), dtype=np.int64)


def solve_frames(saliency_seq, base_qp, p=DEFAULT_P, b=DEFAULT_B, model=ANALYTIC,
                 tol=DEFAULT_TOL):
    """Solve every frame independently.

    ``base_qp`` is either an integer (uniform starting map) or a list of
    per-frame QP maps. Degenerate frames keep their starting map.
    """
    from ._parallel import map_frames

    saliency_seq = [np.asarray(s, dtype=np.float64) for s in saliency_seq]
    if not saliency_seq:
        return []
    shape = saliency_seq[0].shape
    if any(s.shape != shape for s in saliency_seq):
        raise DimensionMismatch("saliency maps differ in size")
    h, w = shape
    if np.isscalar(base_qp):
        starts = [uniform_qpmap(w, h, base_qp)] * len(saliency_seq)
    else:
        starts = list(base_qp)
        if len(starts) != len(saliency_seq):
            raise DimensionMismatch("one starting QP map per saliency frame is required")

    def one(args):
        s, q0 = args
        regions = region_maps(s, p)
        return FrameSolution(regions, solve_alpha_beta(q0, regions, b, model, tol))

    return map_frames(one, list(zip(saliency_seq, starts)))


def build_qp_maps(saliency_seq, base_qp, p=DEFAULT_P, b=DEFAULT_B, model=ANALYTIC,
                  shape=None):
    """Per-frame modified QP maps for a saliency sequence.

    ``shape=(height, width)`` checks the maps against the video size.
    """
    if shape is not None:
        for i, s in enumerate(saliency_seq):
            if np.shape(s) != tuple(shape):
                raise DimensionMismatch(f"saliency frame {i} is {np.shape(s)}, video is {tuple(shape)}")
    return [fs.result.q_prime for fs in solve_frames(saliency_seq, base_qp, p, b, model)]


DIAGNOSTICS_HEADER = "frame,alpha,beta,s_p,share,clamped"


def diagnostics_csv(solutions):
    lines = [DIAGNOSTICS_HEADER]
    for i, fs in enumerate(solutions):
        r = fs.result
        lines.append(f"{i},{r.alpha!r},{r.beta!r},{fs.regions.s_p!r},"
                     f"{r.achieved_nonsalient_share!r},{r.clamped_blocks}")
    return "\n".join(lines) + "\n"
