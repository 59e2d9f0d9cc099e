"""Typed errors raised across the toolkit.

Every error carries a stable ``code`` string; the command line prints it so
scripts can branch on failures without parsing messages.
"""


class SalrateError(Exception):
    code = "ERROR"

    def __str__(self):
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


# frames_io
class MalformedHeader(SalrateError):
    code = "MALFORMED_HEADER"


class TruncatedFrame(SalrateError):
    code = "TRUNCATED_FRAME"


class UnsupportedColorspace(SalrateError):
    code = "UNSUPPORTED_COLORSPACE"


class IoFailure(SalrateError):
    code = "IO_FAILURE"


class TruncatedPayload(SalrateError):
    code = "TRUNCATED_PAYLOAD"


class MissingHeader(SalrateError):
    code = "MISSING_HEADER"


class BadRow(SalrateError):
    code = "BAD_ROW"

    def __init__(self, row, reason=""):
        self.row = row
        super().__init__(f"row {row}" + (f": {reason}" if reason else ""))


class VersionMismatch(SalrateError):
    code = "VERSION_MISMATCH"


class DimensionMismatch(SalrateError):
    code = "DIMENSION_MISMATCH"


class EmptyFile(SalrateError):
    code = "EMPTY_FILE"


# saliency / metrics / postprocess
class UnknownObserver(SalrateError):
    code = "UNKNOWN_OBSERVER"


class EmptyMap(SalrateError):
    code = "EMPTY_MAP"


class DegenerateMap(SalrateError):
    code = "DEGENERATE_MAP"


class NoFixations(SalrateError):
    code = "NO_FIXATIONS"


class EmptyTrainingSet(SalrateError):
    code = "EMPTY_TRAINING_SET"


# qp_solver
class OutOfRange(SalrateError):
    code = "OUT_OF_RANGE"


class ProbeFailure(SalrateError):
    code = "PROBE_FAILURE"


# codec
class CorruptBitstream(SalrateError):
    code = "CORRUPT_BITSTREAM"

    def __init__(self, offset, reason=""):
        self.offset = offset
        super().__init__(f"at bit {offset}" + (f": {reason}" if reason else ""))


class TargetUnreachable(SalrateError):
    code = "TARGET_UNREACHABLE"


# ranking
class EmptyInput(SalrateError):
    code = "EMPTY_INPUT"


class DisconnectedGraph(SalrateError):
    code = "DISCONNECTED_GRAPH"


class MissingPair(SalrateError):
    code = "MISSING_PAIR"
