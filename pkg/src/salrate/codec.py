"""Intra-only block-DCT codec with per-macroblock quantizers.

Each 16x16 macroblock predicts its DC from the mean of the reconstructed
macroblock to its left (128 at the start of a row), codes the
residual as four 8x8 orthonormal DCT-II blocks quantized with
``step = 0.625 * 2 ** (qp / 6)``, and entropy-codes the zig-zag scanned
levels with exponential-Golomb codes.

Frame payload, bit by bit::

    32 bits   N, the number of coded bits that follow (big-endian)
     8 bits   quantizer of the first macroblock
    per macroblock, raster order:
        se(qp - previous qp)          previous qp starts at the header value
        per 8x8 block (TL, TR, BL, BR):
            ue(run + 1), se(level)    for every nonzero level in scan order
            ue(0)                     end of block
    0-7 zero bits padding to a byte boundary

``bits_per_mb`` counts exactly the coded bits of each macroblock, so their
sum is ``8 * len(payload) - 40 - padding``.

Container (``SALC1``): the ASCII line ``SALC1 <width> <height> <frames>\\n``
followed, for every frame, by a 32-bit big-endian byte length and the frame
payload.
"""

from dataclasses import dataclass, field
import os

import numpy as np

from .errors import CorruptBitstream, DimensionMismatch, TargetUnreachable
from .frames_io import MB_SIZE, QP_MAX, QP_MIN, VideoSequence, check_qpmap, mb_dims
from . import frames_io

BLOCK = 8
HEADER_BITS = 40
CONTAINER_MAGIC = b"SALC1"


def quantizer_step(qp):
    """H.264-style step size; doubles exactly every 6 QP."""
    qp = np.asarray(qp, dtype=np.int64)
    return 0.625 * np.exp2(qp // 6) * np.exp2((qp % 6) / 6.0)


def _dct_matrix(n=BLOCK):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    c[0] /= np.sqrt(2.0)
    return c


DCT = _dct_matrix()


def _zigzag(n=BLOCK):
    cells = [(i, j) for i in range(n) for j in range(n)]
    cells.sort(key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else -rc[0]))
    return np.array([i * n + j for i, j in cells])


ZIGZAG = _zigzag()


# einsum without the optimizer runs fixed C loops: same summation order everywhere
def _fdct(x):
    return np.einsum("...ik,lk->...il", np.einsum("ij,...jk->...ik", DCT, x), DCT)


def _idct(c):
    return np.einsum("...ik,kl->...il", np.einsum("ji,...jk->...ik", DCT, c), DCT)


def _split_blocks(mbs):
    """(R, 16, 16) macroblocks -> (R, 4, 8, 8) in TL, TR, BL, BR order."""
    r = mbs.shape[0]
    return mbs.reshape(r, 2, BLOCK, 2, BLOCK).transpose(0, 1, 3, 2, 4).reshape(r, 4, BLOCK, BLOCK)


def _join_blocks(blocks):
    r = blocks.shape[0]
    return blocks.reshape(r, 2, 2, BLOCK, BLOCK).transpose(0, 1, 3, 2, 4).reshape(r, MB_SIZE, MB_SIZE)


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _reconstruct(levels, steps, pred):
    """Decode one macroblock column: levels (R, 4, 8, 8) -> uint8 (R, 16, 16)."""
    coef = levels * steps[:, None, None, None]
    resid = _join_blocks(_idct(coef))
    rec = np.floor(resid + pred[:, None, None] + 0.5)
    return np.clip(rec, 0, 255).astype(np.uint8)


def _next_pred(levels, steps, pred):
    """Reconstruction mean of a macroblock column before pixel rounding.

    With orthonormal 8x8 blocks a block mean is DC / 8, so the macroblock
    mean is ``pred + step * sum(DC levels) / 32``. Predicting from the
    rounded pixels instead lets a one-level rounding error on flat content
    re-code in every following block.
    """
    dc = levels[:, :, 0, 0].sum(axis=1)
    return np.clip(pred + steps * dc / 32.0, 0.0, 255.0)


# ---------------------------------------------------------------------------
# exp-Golomb helpers


def _bit_length(v):
    return np.frexp(v.astype(np.float64))[1].astype(np.int64)


def _ue(v):
    """Codes and lengths of unsigned exp-Golomb codewords."""
    code = np.asarray(v, dtype=np.int64) + 1
    return code, 2 * _bit_length(code) - 1


def _se_map(v):
    v = np.asarray(v, dtype=np.int64)
    return np.where(v > 0, 2 * v - 1, -2 * v)


def _se_unmap(k):
    return (k + 1) // 2 if k % 2 else -(k // 2)


def _pack(codes, lengths):
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.uint8), 0
    sym = np.repeat(np.arange(codes.size), lengths)
    starts = np.cumsum(lengths) - lengths
    k = np.arange(total) - starts[sym]
    shift = lengths[sym] - 1 - k
    bits = ((codes[sym] >> shift) & 1).astype(np.uint8)
    return np.packbits(bits), total


# ---------------------------------------------------------------------------
# frames


@dataclass
class EncodedFrame:
    payload: bytes
    bits_per_mb: np.ndarray
    qp_map: np.ndarray
    width: int
    height: int
    reconstruction: np.ndarray = field(repr=False, default=None)
    header_bits: int = HEADER_BITS

    @property
    def total_bits(self):
        return 8 * len(self.payload)

    @property
    def coded_bits(self):
        return int(self.bits_per_mb.sum())

    @property
    def padding_bits(self):
        return self.total_bits - self.header_bits - self.coded_bits


def _pad_frame(frame):
    h, w = frame.shape
    mb_h, mb_w = mb_dims(w, h)
    return np.pad(frame, ((0, mb_h * MB_SIZE - h), (0, mb_w * MB_SIZE - w)), mode="edge")


def encode_frame(frame, qp_map):
    """Encode one luma plane with the given per-macroblock quantizers."""
    frame = np.asarray(frame)
    if frame.ndim != 2 or frame.size == 0:
        raise DimensionMismatch("frame must be a non-empty 2-D plane")
    h, w = frame.shape
    qp = check_qpmap(qp_map)
    if qp.shape != mb_dims(w, h):
        raise DimensionMismatch(f"QP map {qp.shape} does not cover a {w}x{h} frame")
    mb_h, mb_w = qp.shape
    padded = _pad_frame(frame.astype(np.float64))
    steps = quantizer_step(qp)

    levels = np.zeros((mb_h, mb_w, 4, BLOCK * BLOCK), dtype=np.int64)
    recon = np.zeros(padded.shape, dtype=np.uint8)
    pred = np.full(mb_h, 128.0)
    for c in range(mb_w):
        cols = slice(c * MB_SIZE, (c + 1) * MB_SIZE)
        mbs = padded[:, cols].reshape(mb_h, MB_SIZE, MB_SIZE)
        coef = _fdct(_split_blocks(mbs - pred[:, None, None]))
        lv = _round_half_away(coef / steps[:, c, None, None, None])
        rec = _reconstruct(lv, steps[:, c], pred)
        recon[:, cols] = rec.reshape(mb_h * MB_SIZE, MB_SIZE)
        levels[:, c] = lv.reshape(mb_h, 4, BLOCK * BLOCK)[:, :, ZIGZAG].astype(np.int64)
        pred = _next_pred(lv, steps[:, c], pred)

    payload, bits_per_mb = _entropy_code(levels.reshape(-1, 4, BLOCK * BLOCK), qp.ravel())
    return EncodedFrame(
        payload=payload,
        bits_per_mb=bits_per_mb.reshape(mb_h, mb_w),
        qp_map=qp,
        width=w,
        height=h,
        reconstruction=recon[:h, :w].copy(),
    )


def _entropy_code(levels, qps):
    n_mb = qps.size
    flat = levels.reshape(n_mb * 4, BLOCK * BLOCK)
    blk, pos = np.nonzero(flat)
    vals = flat[blk, pos]
    first = np.ones(blk.size, dtype=bool)
    first[1:] = blk[1:] != blk[:-1]
    prev = np.empty_like(pos)
    prev[1:] = pos[:-1]
    prev[first] = -1
    runs = pos - prev - 1
    nnz = np.bincount(blk, minlength=n_mb * 4)
    rank = np.arange(blk.size) - (np.cumsum(nnz) - nnz)[blk]

    dqp = np.diff(np.concatenate((qps[:1], qps)))
    run_code, run_len = _ue(runs + 1)
    lvl_code, lvl_len = _ue(_se_map(vals))
    dqp_code, dqp_len = _ue(_se_map(dqp))
    eob_code, eob_len = _ue(np.zeros(n_mb * 4, dtype=np.int64))

    all_blocks = np.arange(n_mb * 4)
    mb_key = np.concatenate((np.arange(n_mb), blk // 4, blk // 4, all_blocks // 4))
    blk_key = np.concatenate((np.full(n_mb, -1), blk % 4, blk % 4, all_blocks % 4))
    pos_key = np.concatenate((np.zeros(n_mb, np.int64), 2 * rank, 2 * rank + 1,
                              np.full(n_mb * 4, 4 * BLOCK * BLOCK)))
    codes = np.concatenate((dqp_code, run_code, lvl_code, eob_code))
    lengths = np.concatenate((dqp_len, run_len, lvl_len, eob_len))
    order = np.lexsort((pos_key, blk_key, mb_key))
    packed, total = _pack(codes[order], lengths[order])
    bits_per_mb = np.bincount(mb_key, weights=lengths, minlength=n_mb).astype(np.int64)
    header = total.to_bytes(4, "big") + int(qps[0]).to_bytes(1, "big")
    return header + packed.tobytes(), bits_per_mb


def _read_codewords(bits, offset):
    """Split an exp-Golomb stream into codeword values.

    Returns the values and their starting bit positions.
    """
    n = bits.size
    ones = np.flatnonzero(bits)
    nxt = np.full(n, n, dtype=np.int64)
    if ones.size:
        idx = np.searchsorted(ones, np.arange(n))
        ok = idx < ones.size
        nxt[ok] = ones[idx[ok]]
    nxt_list = nxt.tolist()
    starts, zeros = [], []
    pos = 0
    while pos < n:
        one = nxt_list[pos]
        if one >= n:
            raise CorruptBitstream(offset + pos, "codeword prefix runs past the end")
        z = one - pos
        if z > 40:
            raise CorruptBitstream(offset + pos, "codeword too long")
        starts.append(pos)
        zeros.append(z)
        pos = one + z + 1
    if pos != n:
        raise CorruptBitstream(offset + starts[-1], "last codeword is truncated")
    starts = np.array(starts, dtype=np.int64)
    zeros = np.array(zeros, dtype=np.int64)
    codes = np.zeros(starts.size, dtype=np.int64)
    for k in range(int(zeros.max()) + 1 if zeros.size else 0):
        active = k <= zeros
        codes[active] = (codes[active] << 1) | bits[starts[active] + zeros[active] + k]
    return (codes - 1).tolist(), (starts + offset).tolist()


def _payload_of(enc):
    return enc.payload if isinstance(enc, EncodedFrame) else bytes(enc)


def decode_frame(enc, width, height):
    """Reconstruct a luma plane from an :class:`EncodedFrame` or raw payload."""
    payload = _payload_of(enc)
    if len(payload) < HEADER_BITS // 8:
        raise CorruptBitstream(0, "payload shorter than its header")
    n_bits = int.from_bytes(payload[:4], "big")
    if HEADER_BITS + n_bits > 8 * len(payload):
        raise CorruptBitstream(8 * len(payload), "payload is truncated")
    prev_qp = payload[4]
    if prev_qp > QP_MAX:
        raise CorruptBitstream(32, f"header quantizer {prev_qp} out of range")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8, offset=HEADER_BITS // 8))
    bits = bits[:n_bits].astype(np.int64)
    tokens, where = _read_codewords(bits, HEADER_BITS)

    mb_h, mb_w = mb_dims(width, height)
    n_mb = mb_h * mb_w
    levels = np.zeros((n_mb, 4, BLOCK * BLOCK), dtype=np.float64)
    qps = np.zeros(n_mb, dtype=np.int64)
    n_tok = len(tokens)
    i = 0
    for m in range(n_mb):
        if i >= n_tok:
            raise CorruptBitstream(HEADER_BITS + n_bits, f"stream ends before macroblock {m}")
        qp = prev_qp + _se_unmap(tokens[i])
        if not QP_MIN <= qp <= QP_MAX:
            raise CorruptBitstream(where[i], f"quantizer {qp} out of range")
        qps[m] = prev_qp = qp
        i += 1
        for b in range(4):
            pos = -1
            while True:
                if i >= n_tok:
                    raise CorruptBitstream(HEADER_BITS + n_bits, "stream ends inside a block")
                t = tokens[i]
                i += 1
                if t == 0:
                    break
                pos += t
                if pos >= BLOCK * BLOCK or i >= n_tok:
                    raise CorruptBitstream(where[i - 1], "run leaves the block")
                level = _se_unmap(tokens[i])
                if level == 0:
                    raise CorruptBitstream(where[i], "zero level")
                levels[m, b, pos] = level
                i += 1
    if i != n_tok:
        raise CorruptBitstream(where[i], "trailing symbols after the last macroblock")

    steps = quantizer_step(qps.reshape(mb_h, mb_w))
    natural = np.empty_like(levels)
    natural[:, :, ZIGZAG] = levels
    natural = natural.reshape(mb_h, mb_w, 4, BLOCK, BLOCK)
    out = np.zeros((mb_h * MB_SIZE, mb_w * MB_SIZE), dtype=np.uint8)
    pred = np.full(mb_h, 128.0)
    for c in range(mb_w):
        rec = _reconstruct(natural[:, c], steps[:, c], pred)
        out[:, c * MB_SIZE:(c + 1) * MB_SIZE] = rec.reshape(mb_h * MB_SIZE, MB_SIZE)
        pred = _next_pred(natural[:, c], steps[:, c], pred)
    return out[:height, :width].copy()


def mean_mb_bits(frame, qp):
    """Probe for bit-cost calibration: mean coded bits per macroblock."""
    h, w = np.shape(frame)
    enc = encode_frame(frame, np.full(mb_dims(w, h), qp, dtype=np.int64))
    return enc.coded_bits / enc.bits_per_mb.size


# ---------------------------------------------------------------------------
# sequences


@dataclass
class SequenceEncoding:
    frames: list
    region_bits: dict = None

    @property
    def frame_bits(self):
        return [f.total_bits for f in self.frames]

    @property
    def total_bits(self):
        return sum(self.frame_bits)

    def reconstruction(self):
        first = self.frames[0]
        return VideoSequence(first.width, first.height, [f.reconstruction for f in self.frames])


def region_split(frames, regions):
    """Coded bits inside and outside the ``SN > 0`` macroblocks."""
    if len(regions) != len(frames):
        raise DimensionMismatch("one RegionMaps per frame is required")
    nonsal = sal = 0
    for f, r in zip(frames, regions):
        mask = r.nonsalient
        if mask.shape != f.bits_per_mb.shape:
            raise DimensionMismatch("region map does not match macroblock grid")
        nonsal += int(f.bits_per_mb[mask].sum())
        sal += int(f.bits_per_mb[~mask].sum())
    total = nonsal + sal
    return {"nonsalient": nonsal, "salient": sal, "nonsalient_share": nonsal / total if total else 0.0}


def encode_sequence(video, qp_maps, regions=None):
    """Encode all frames independently; optionally tally bits per region."""
    from ._parallel import map_frames

    if len(qp_maps) != video.frame_count:
        raise DimensionMismatch(f"{len(qp_maps)} QP maps for {video.frame_count} frames")
    frames = map_frames(lambda fq: encode_frame(*fq), list(zip(video.frames, qp_maps)))
    split = region_split(frames, regions) if regions is not None else None
    return SequenceEncoding(frames, split)


def decode_sequence(width, height, payloads):
    return VideoSequence(width, height, [decode_frame(p, width, height) for p in payloads])


def format_container(frames, width, height):
    parts = [f"{CONTAINER_MAGIC.decode()} {width} {height} {len(frames)}\n".encode("ascii")]
    for f in frames:
        payload = _payload_of(f)
        parts.append(len(payload).to_bytes(4, "big"))
        parts.append(payload)
    return b"".join(parts)


def write_container(frames, width, height, path):
    frames_io._write_bytes(path, format_container(frames, width, height))


def parse_container(data):
    """Return ``(width, height, payloads)`` from SALC1 bytes."""
    nl = data.find(b"\n", 0, 64)
    if nl < 0:
        raise CorruptBitstream(0, "missing SALC1 header line")
    head = data[:nl].split(b" ")
    if len(head) != 4 or head[0] != CONTAINER_MAGIC or not all(t.isdigit() for t in head[1:]):
        raise CorruptBitstream(0, "bad SALC1 header")
    width, height, count = (int(t) for t in head[1:])
    if width == 0 or height == 0:
        raise CorruptBitstream(0, "zero frame size")
    pos = nl + 1
    payloads = []
    for _ in range(count):
        if pos + 4 > len(data):
            raise CorruptBitstream(8 * pos, "missing frame length")
        size = int.from_bytes(data[pos:pos + 4], "big")
        pos += 4
        if pos + size > len(data):
            raise CorruptBitstream(8 * pos, "frame payload is truncated")
        payloads.append(data[pos:pos + size])
        pos += size
    if pos != len(data):
        raise CorruptBitstream(8 * pos, "trailing bytes after the last frame")
    return width, height, payloads


def read_container(path):
    return parse_container(frames_io._read_bytes(os.fspath(path)))


# ---------------------------------------------------------------------------
# rate search


@dataclass
class RateSearchResult:
    base_qp: int
    qp_maps: list
    encoding: SequenceEncoding
    solutions: list = None


def _plan(video, saliency_seq, base_qp, p, b, model):
    from .qp_solver import solve_frames, uniform_qpmap

    if saliency_seq is None:
        return [uniform_qpmap(video.width, video.height, base_qp)] * video.frame_count, None
    sols = solve_frames(saliency_seq, base_qp, p, b, model)
    return [s.result.q_prime for s in sols], sols


def encode_at(video, saliency_seq, base_qp, p=80.0, b=70.0, model=None):
    """Plan and encode one base quantizer; ``saliency_seq=None`` is uniform QP."""
    from .qp_solver import ANALYTIC

    maps, sols = _plan(video, saliency_seq, base_qp, p, b, model or ANALYTIC)
    regions = [s.regions for s in sols] if sols else None
    return RateSearchResult(base_qp, maps, encode_sequence(video, maps, regions), sols)


def rate_search_base_qp(video, saliency_seq, target_bits, p=80.0, b=70.0, model=None):
    """Smallest base QP whose encoded size fits ``target_bits``.

    Integer bisection over ``[0, 51]``; relies on size decreasing with the
    base quantizer.
    """
    if saliency_seq is not None and len(saliency_seq) != video.frame_count:
        raise DimensionMismatch("one saliency map per frame is required")
    cache = {}

    def run(qp):
        if qp not in cache:
            cache[qp] = encode_at(video, saliency_seq, qp, p, b, model)
        return cache[qp]

    if run(QP_MIN).encoding.total_bits <= target_bits:
        return run(QP_MIN)
    if run(QP_MAX).encoding.total_bits > target_bits:
        raise TargetUnreachable(
            f"target {target_bits} bits is below the QP {QP_MAX} size "
            f"{run(QP_MAX).encoding.total_bits}")
    lo, hi = QP_MIN, QP_MAX  # bits(lo) > target >= bits(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if run(mid).encoding.total_bits <= target_bits:
            hi = mid
        else:
            lo = mid
    return run(hi)
