"""Readers and writers for the on-disk formats the toolkit exchanges.

Formats
-------
* YUV4MPEG2 video: mono and 4:2:0 on read (chroma dropped), mono on write.
* Binary PGM (P5) saliency maps, maxval 255 or 65535.
* Fixation CSV with header ``frame,observer,x,y``. This schema is a local
  stand-in; eye-tracking datasets ship their own layouts and need a
  conversion step.
* ``QPMAP v1`` text files holding per-macroblock quantizers.
* Tab-separated pairwise comparison logs.

Every ``read_*`` has a ``parse_*`` twin working on bytes. Parsers only raise
:class:`~salrate.errors.SalrateError` subclasses, whatever the input.
"""

import enum
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadRow,
    DimensionMismatch,
    EmptyFile,
    IoFailure,
    MalformedHeader,
    MissingHeader,
    TruncatedFrame,
    TruncatedPayload,
    UnsupportedColorspace,
    VersionMismatch,
)

MB_SIZE = 16
QP_MIN, QP_MAX = 0, 51

_Y4M_MAGIC = b"YUV4MPEG2"
_Y4M_420 = {b"420", b"420jpeg", b"420paldv", b"420mpeg2"}
_DIGITS = re.compile(rb"[0-9]+\Z")


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {os.fspath(path)}: {exc.strerror}") from exc


def _write_bytes(path, data):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {os.fspath(path)}: {exc.strerror}") from exc


def _positive_int(token, err, what):
    if not _DIGITS.match(token):
        raise err(f"bad {what} {token[:20]!r}")
    value = int(token)
    if value <= 0:
        raise err(f"{what} must be positive")
    return value


# ---------------------------------------------------------------------------
# video


@dataclass
class VideoSequence:
    """Luma-only video: a list of ``(height, width)`` uint8 planes."""

    width: int
    height: int
    frames: list = field(default_factory=list)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")
        frames = []
        for i, f in enumerate(self.frames):
            f = np.asarray(f)
            if f.shape != (self.height, self.width):
                raise DimensionMismatch(
                    f"frame {i} has shape {f.shape}, expected {(self.height, self.width)}"
                )
            frames.append(np.ascontiguousarray(f, dtype=np.uint8))
        self.frames = frames

    @property
    def frame_count(self):
        return len(self.frames)

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def parse_y4m(data):
    nl = data.find(b"\n")
    if nl < 0:
        raise MalformedHeader("stream header is not newline-terminated")
    tokens = data[:nl].split(b" ")
    if tokens[0] != _Y4M_MAGIC:
        raise MalformedHeader("missing YUV4MPEG2 signature")
    params = {}
    for tok in tokens[1:]:
        if not tok:
            continue
        params[tok[:1]] = tok[1:]
    if b"W" not in params or b"H" not in params:
        raise MalformedHeader("W and H are required")
    width = _positive_int(params[b"W"], MalformedHeader, "width")
    height = _positive_int(params[b"H"], MalformedHeader, "height")

    colorspace = params.get(b"C", b"420jpeg")
    luma = width * height
    if colorspace == b"mono":
        chroma = 0
    elif colorspace in _Y4M_420:
        chroma = 2 * ((width + 1) // 2) * ((height + 1) // 2)
    else:
        raise UnsupportedColorspace(colorspace.decode("ascii", "replace"))

    frames = []
    pos = nl + 1
    while pos < len(data):
        if data[pos:pos + 5] != b"FRAME":
            raise MalformedHeader(f"expected FRAME marker at byte {pos}")
        end = data.find(b"\n", pos)
        if end < 0:
            raise TruncatedFrame(f"frame {len(frames)} header is not terminated")
        start = end + 1
        stop = start + luma + chroma
        if stop > len(data):
            raise TruncatedFrame(
                f"frame {len(frames)} has {len(data) - start} bytes, needs {luma + chroma}"
            )
        plane = np.frombuffer(data, dtype=np.uint8, count=luma, offset=start)
        frames.append(plane.reshape(height, width).copy())
        pos = stop
    return VideoSequence(width, height, frames)


def read_y4m(path):
    """Read a YUV4MPEG2 file, keeping only the luma planes."""
    return parse_y4m(_read_bytes(path))


def format_y4m(seq):
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F25:1 Ip A1:1 Cmono\n".encode("ascii")
    parts = [header]
    for f in seq.frames:
        parts.append(b"FRAME\n")
        parts.append(np.ascontiguousarray(f, dtype=np.uint8).tobytes())
    return b"".join(parts)


def write_y4m(seq, path):
    """Write ``seq`` as a mono YUV4MPEG2 file."""
    _write_bytes(path, format_y4m(seq))


# ---------------------------------------------------------------------------
# saliency maps as PGM


def _pgm_tokens(data, count):
    """Return ``count`` header tokens and the offset just past the last one."""
    tokens = []
    pos = 2
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1] in b" \t\r\n\x0b\x0c":
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise MalformedHeader("unterminated comment")
            pos = end + 1
            continue
        start = pos
        while pos < n and data[pos:pos + 1] not in b" \t\r\n\x0b\x0c#":
            pos += 1
        if start == pos:
            raise MalformedHeader("header ends early")
        tokens.append(data[start:pos])
    return tokens, pos


def parse_pgm(data):
    if data[:2] != b"P5":
        raise MalformedHeader("not a binary PGM (P5)")
    (w, h, m), pos = _pgm_tokens(data, 3)
    width = _positive_int(w, MalformedHeader, "width")
    height = _positive_int(h, MalformedHeader, "height")
    if m not in (b"255", b"65535"):
        raise MalformedHeader(f"maxval must be 255 or 65535, got {m[:20]!r}")
    maxval = int(m)
    if pos >= len(data) or data[pos:pos + 1] not in b" \t\r\n\x0b\x0c":
        raise MalformedHeader("maxval must be followed by one whitespace byte")
    pos += 1
    depth = 1 if maxval == 255 else 2
    size = width * height * depth
    if len(data) - pos < size:
        raise TruncatedPayload(f"need {size} bytes, have {len(data) - pos}")
    dtype = np.uint8 if depth == 1 else np.dtype(">u2")
    raw = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / maxval


def read_pgm(path):
    """Read a P5 PGM as a float map scaled to ``[0, 1]``."""
    return parse_pgm(_read_bytes(path))


def format_pgm(smap, bit_depth=16):
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    smap = np.asarray(smap, dtype=np.float64)
    if smap.ndim != 2 or smap.size == 0:
        raise ValueError("saliency map must be a non-empty 2-D array")
    if not np.all(np.isfinite(smap)) or smap.min() < 0:
        raise ValueError("saliency map must be finite and nonnegative")
    top = smap.max()
    if top > 1:
        smap = smap / top
    maxval = 255 if bit_depth == 8 else 65535
    q = np.floor(smap * maxval + 0.5)
    dtype = np.uint8 if bit_depth == 8 else np.dtype(">u2")
    h, w = smap.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + q.astype(dtype).tobytes()


def write_pgm(smap, path, bit_depth=16):
    """Write a saliency map; values above 1 trigger max-normalization first."""
    _write_bytes(path, format_pgm(smap, bit_depth))


def frame_filename(index):
    return f"{index:06d}.pgm"


def read_map_dir(directory, count=None):
    """Read ``000000.pgm, 000001.pgm, ...`` from ``directory``.

    With ``count`` given, exactly that many frames must exist; a missing
    frame raises :class:`IoFailure` naming its index.
    """
    directory = os.fspath(directory)
    if count is None:
        try:
            names = sorted(n for n in os.listdir(directory) if re.fullmatch(r"\d{6}\.pgm", n))
        except OSError as exc:
            raise IoFailure(f"cannot list {directory}: {exc.strerror}") from exc
        count = len(names)
    maps = []
    for i in range(count):
        path = os.path.join(directory, frame_filename(i))
        if not os.path.exists(path):
            raise IoFailure(f"missing frame {i}: {path}")
        maps.append(read_pgm(path))
    return maps


def write_map_dir(maps, directory, bit_depth=16):
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {directory}: {exc.strerror}") from exc
    for i, m in enumerate(maps):
        write_pgm(m, os.path.join(directory, frame_filename(i)), bit_depth)


# ---------------------------------------------------------------------------
# fixations


@dataclass
class FixationSet:
    """Gaze points as parallel arrays, one entry per record."""

    frame: np.ndarray
    observer: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.frame = np.asarray(self.frame, dtype=np.int64).reshape(-1)
        self.observer = np.asarray(self.observer, dtype=np.int64).reshape(-1)
        self.x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        n = len(self.frame)
        if not (len(self.observer) == len(self.x) == len(self.y) == n):
            raise ValueError("fixation arrays must have equal length")

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            return cls.empty()
        f, o, x, y = zip(*records)
        return cls(f, o, x, y)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))

    def __len__(self):
        return len(self.frame)

    def records(self):
        return list(zip(self.frame.tolist(), self.observer.tolist(), self.x.tolist(), self.y.tolist()))

    def select(self, mask):
        return FixationSet(self.frame[mask], self.observer[mask], self.x[mask], self.y[mask])

    def in_frame(self, frame):
        return self.select(self.frame == frame)

    def of_observer(self, observer):
        return self.select(self.observer == observer)

    def within(self, width, height):
        """Drop records outside ``[0, width) x [0, height)``."""
        ok = (self.x >= 0) & (self.x < width) & (self.y >= 0) & (self.y < height)
        return self.select(ok)

    @property
    def frame_count(self):
        return int(self.frame.max()) + 1 if len(self) else 0


_FIX_HEADER = "frame,observer,x,y"


def _parse_index(token):
    value = float(token)
    if not math.isfinite(value) or value < 0 or value != int(value):
        raise ValueError(token)
    return int(value)


def parse_fixations_csv(data, width=None, height=None):
    lines = data.splitlines()
    try:
        header = lines[0].decode("utf-8").strip() if lines else ""
    except UnicodeDecodeError:
        header = ""
    if header.lstrip("\ufeff") != _FIX_HEADER:
        raise MissingHeader(f"first line must be {_FIX_HEADER!r}")
    records = []
    for row, raw in enumerate(lines[1:], start=1):
        if not raw.strip():
            continue
        try:
            fields = raw.decode("utf-8").split(",")
            if len(fields) != 4:
                raise ValueError("expected 4 fields")
            frame = _parse_index(fields[0])
            obs = _parse_index(fields[1])
            x = float(fields[2])
            y = float(fields[3])
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("non-finite coordinate")
        except (ValueError, UnicodeDecodeError, OverflowError) as exc:
            raise BadRow(row, str(exc)) from None
        records.append((frame, obs, x, y))
    fix = FixationSet.from_records(records)
    if width is not None and height is not None:
        fix = fix.within(width, height)
    return fix


def read_fixations_csv(path, width=None, height=None):
    """Read fixation records in file order.

    When ``width`` and ``height`` are given, records falling outside the
    frame are dropped.
    """
    return parse_fixations_csv(_read_bytes(path), width, height)


def write_fixations_csv(fix, path):
    lines = [_FIX_HEADER]
    for f, o, x, y in fix.records():
        lines.append(f"{f},{o},{x!r},{y!r}")
    _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# QP maps


def mb_dims(width, height, mb=MB_SIZE):
    return -(-height // mb), -(-width // mb)


def check_qpmap(qp):
    qp = np.asarray(qp)
    if qp.ndim != 2 or qp.size == 0:
        raise DimensionMismatch("QP map must be a non-empty 2-D array")
    if not np.issubdtype(qp.dtype, np.integer):
        if not np.all(np.equal(np.mod(qp, 1), 0)):
            raise ValueError("QP map entries must be integers")
    if qp.min() < QP_MIN or qp.max() > QP_MAX:
        raise ValueError(f"QP entries must lie in [{QP_MIN}, {QP_MAX}]")
    return qp.astype(np.int64)


def format_qpmap(maps):
    maps = [check_qpmap(m) for m in maps]
    if not maps:
        raise DimensionMismatch("at least one QP map is required")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise DimensionMismatch("QP maps must share dimensions")
    mb_h, mb_w = shape
    out = [f"QPMAP v1 {mb_w} {mb_h} {len(maps)}\n"]
    for m in maps:
        for row in m:
            out.append(" ".join(str(int(v)) for v in row) + "\n")
    return "".join(out).encode("ascii")


def parse_qpmap(data):
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise MalformedHeader("QP map file is not ASCII") from None
    lines = text.split("\n")
    head = lines[0].split(" ")
    if not head or head[0] != "QPMAP":
        raise MalformedHeader("missing QPMAP signature")
    if len(head) < 2 or head[1] != "v1":
        raise VersionMismatch(f"unsupported version {head[1] if len(head) > 1 else ''!r}")
    if len(head) != 5 or not all(re.fullmatch(r"[0-9]+", t) for t in head[2:]):
        raise MalformedHeader("header must be 'QPMAP v1 <mb_width> <mb_height> <frames>'")
    mb_w, mb_h, count = (int(t) for t in head[2:])
    if mb_w == 0 or mb_h == 0 or count == 0:
        raise MalformedHeader("dimensions and frame count must be positive")
    body = lines[1:]
    if body and body[-1] == "":
        body = body[:-1]
    if len(body) != mb_h * count:
        raise DimensionMismatch(f"expected {mb_h * count} rows, found {len(body)}")
    maps = []
    for k in range(count):
        rows = []
        for r in range(mb_h):
            line_no = 2 + k * mb_h + r
            tokens = body[k * mb_h + r].split(" ")
            if len(tokens) != mb_w:
                raise DimensionMismatch(f"line {line_no}: expected {mb_w} values")
            if not all(re.fullmatch(r"[0-9]{1,2}", t) for t in tokens):
                raise BadRow(line_no, "entries must be integers in [0, 51]")
            vals = [int(t) for t in tokens]
            if max(vals) > QP_MAX:
                raise BadRow(line_no, "entries must be integers in [0, 51]")
            rows.append(vals)
        maps.append(np.array(rows, dtype=np.int64))
    return maps


def write_qpmap(maps, path):
    """Write a list of equally sized QP maps as ``QPMAP v1`` text."""
    _write_bytes(path, format_qpmap(maps))


def read_qpmap(path):
    return parse_qpmap(_read_bytes(path))


# ---------------------------------------------------------------------------
# pairwise comparisons


class Outcome(enum.Enum):
    A_WINS = "A"
    B_WINS = "B"
    TIE = "TIE"

    def flipped(self):
        if self is Outcome.A_WINS:
            return Outcome.B_WINS
        if self is Outcome.B_WINS:
            return Outcome.A_WINS
        return self


@dataclass(frozen=True)
class ComparisonRecord:
    item_id: str
    method_a: str
    method_b: str
    outcome: Outcome
    participant_id: str

    def __post_init__(self):
        if self.method_a == self.method_b:
            raise ValueError("a comparison needs two distinct methods")


def _split_fields(raw, row, n):
    try:
        text = raw.decode("utf-8").rstrip("\r")
    except UnicodeDecodeError:
        raise BadRow(row, "not UTF-8") from None
    fields = text.split("\t")
    if len(fields) != n:
        raise BadRow(row, f"expected {n} tab-separated fields, got {len(fields)}")
    if not all(fields):
        raise BadRow(row, "empty field")
    return fields


def _parse_outcome(token, row):
    try:
        return Outcome(token)
    except ValueError:
        raise BadRow(row, f"outcome must be A, B or TIE, got {token[:20]!r}") from None


def parse_comparisons(data):
    records = []
    for row, raw in enumerate(data.split(b"\n"), start=1):
        if not raw.strip():
            continue
        item, a, b, outcome, participant = _split_fields(raw, row, 5)
        if a == b:
            raise BadRow(row, "method_a equals method_b")
        records.append(ComparisonRecord(item, a, b, _parse_outcome(outcome, row), participant))
    if not records:
        raise EmptyFile("no comparison records")
    return records


def read_comparisons(path):
    """Read a tab-separated comparison log."""
    return parse_comparisons(_read_bytes(path))


def format_comparisons(records):
    return "".join(
        f"{r.item_id}\t{r.method_a}\t{r.method_b}\t{r.outcome.value}\t{r.participant_id}\n"
        for r in records
    ).encode("utf-8")


def write_comparisons(records, path):
    _write_bytes(path, format_comparisons(records))


def parse_verification(data):
    """Parse verification questions: ``item method_a method_b outcome`` per line."""
    checks = set()
    for row, raw in enumerate(data.split(b"\n"), start=1):
        if not raw.strip():
            continue
        item, a, b, outcome = _split_fields(raw, row, 4)
        if a == b:
            raise BadRow(row, "method_a equals method_b")
        checks.add((item, a, b, _parse_outcome(outcome, row)))
    return checks


def read_verification(path):
    return parse_verification(_read_bytes(path))
