"""Thurstone Case V scaling of pairwise quality judgments."""

from collections import defaultdict
from dataclasses import dataclass
import itertools
import logging

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DisconnectedGraph, EmptyInput, MissingPair
from .frames_io import ComparisonRecord, Outcome

log = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.85
DEFAULT_BOOT = 1000


def _matches(record, check):
    """Outcome the check demands of ``record``, or None if unrelated."""
    item, a, b, required = check
    if record.item_id != item:
        return None
    if (record.method_a, record.method_b) == (a, b):
        return required
    if (record.method_a, record.method_b) == (b, a):
        return required.flipped()
    return None


def filter_participants(records, verification):
    """Keep non-check records of participants who passed every check.

    Participants who answered no check at all are dropped too. An empty
    ``verification`` set keeps everything.
    """
    records = list(records)
    verification = set(verification)
    if not verification:
        return records
    passed = {}
    regular = []
    for r in records:
        demanded = [req for req in (_matches(r, c) for c in verification) if req is not None]
        if demanded:
            ok = passed.get(r.participant_id, True)
            passed[r.participant_id] = ok and all(r.outcome == d for d in demanded)
        else:
            regular.append(r)
    unchecked = {r.participant_id for r in regular} - passed.keys()
    if unchecked:
        log.info("dropping %d participants without verification answers", len(unchecked))
    failed = [p for p, ok in passed.items() if not ok]
    if failed:
        log.info("dropping %d participants who failed verification", len(failed))
    return [r for r in regular if passed.get(r.participant_id, False)]


@dataclass
class PreferenceMatrix:
    methods: list
    wins: np.ndarray
    totals: np.ndarray

    def index(self, method):
        return self.methods.index(method)


def build_matrix(records, methods=None):
    """Count wins per ordered pair; a tie gives half a win to each side.

    Methods are ordered by first appearance unless ``methods`` is given.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no comparison records")
    if methods is None:
        methods = []
        for r in records:
            for m in (r.method_a, r.method_b):
                if m not in methods:
                    methods.append(m)
    idx = {m: i for i, m in enumerate(methods)}
    n = len(methods)
    wins = np.zeros((n, n))
    for r in records:
        a, b = idx[r.method_a], idx[r.method_b]
        if r.outcome is Outcome.A_WINS:
            wins[a, b] += 1.0
        elif r.outcome is Outcome.B_WINS:
            wins[b, a] += 1.0
        else:
            wins[a, b] += 0.5
            wins[b, a] += 0.5
    return PreferenceMatrix(list(methods), wins, wins + wins.T)


def _connected(observed):
    n = observed.shape[0]
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(observed[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == n


def inverse_normal_cdf(p):
    """Standard normal quantile function."""
    return ndtri(p)


def thurstone_case_v(m, require_complete=False):
    """Interval-scale values, mean-centred, in ``m.methods`` order.

    Win proportions are clamped to ``[1/(2n), 1 - 1/(2n)]`` and mapped
    through the normal quantile function. The scale is the least-squares fit
    of ``s_i - s_j = z_ij`` over observed pairs; for a complete design this
    is the row mean of ``z`` with ``z_ii = 0``, the classical Case V
    estimate.
    """
    totals = m.totals
    n = len(m.methods)
    observed = totals > 0
    np.fill_diagonal(observed, False)
    if require_complete:
        missing = [(m.methods[i], m.methods[j])
                   for i, j in itertools.combinations(range(n), 2) if not observed[i, j]]
        if missing:
            raise MissingPair(f"pairs never compared: {missing[:5]}")
    if n < 2 or not _connected(observed):
        raise DisconnectedGraph("comparison graph is not connected")

    with np.errstate(invalid="ignore", divide="ignore"):
        prop = np.where(observed, m.wins / totals, 0.5)
        lo = np.where(observed, 1.0 / (2.0 * totals), 0.0)
    prop = np.clip(prop, lo, 1.0 - lo)
    z = np.where(observed, inverse_normal_cdf(prop), 0.0)

    if observed.sum() == n * (n - 1):
        scale = z.sum(axis=1) / n
    else:
        # graph Laplacian normal equations, centred by adding the all-ones row
        lap = np.diag(observed.sum(axis=1)).astype(np.float64) - observed
        scale = np.linalg.lstsq(lap + 1.0 / n, z.sum(axis=1), rcond=None)[0]
    return scale - scale.mean()


@dataclass
class RankResult:
    methods: list
    scale: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    level: float
    n_bootstrap: int

    CSV_HEADER = "method,scale,ci_low,ci_high"

    def to_csv(self):
        lines = [self.CSV_HEADER]
        for m, s, lo, hi in zip(self.methods, self.scale, self.ci_low, self.ci_high):
            lines.append(f"{m},{s:.6f},{lo:.6f},{hi:.6f}")
        return "\n".join(lines) + "\n"


def _resample(groups, rng):
    picks = rng.integers(0, len(groups), size=len(groups))
    return [r for k in picks for r in groups[k]]


def bootstrap_ci(records, level=DEFAULT_LEVEL, n_boot=DEFAULT_BOOT, seed=0):
    """Case V scales with participant-level percentile bootstrap intervals.

    Each replicate draws participants with replacement using its own
    generator spawned from ``seed``. Replicates whose comparison graph
    falls apart are redrawn, up to ``10 * n_boot`` draws overall.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    records = list(records)
    full = build_matrix(records)
    scale = thurstone_case_v(full)

    by_participant = defaultdict(list)
    for r in records:
        by_participant[r.participant_id].append(r)
    groups = list(by_participant.values())

    children = np.random.SeedSequence(seed).spawn(n_boot)
    samples = np.empty((n_boot, len(full.methods)))
    budget = 10 * n_boot
    draws = 0
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        while True:
            draws += 1
            if draws > budget:
                raise DisconnectedGraph(f"no connected resample within {budget} draws")
            try:
                samples[k] = thurstone_case_v(build_matrix(_resample(groups, rng), full.methods))
                break
            except DisconnectedGraph:
                continue

    tail = (1.0 - level) / 2.0
    low, high = np.quantile(samples, [tail, 1.0 - tail], axis=0)
    # percentile intervals may miss a skewed point estimate; keep it inside
    low = np.minimum(low, scale)
    high = np.maximum(high, scale)
    return RankResult(full.methods, scale, low, high, level, n_boot)


def simulate_case_v(scales, per_pair, rng, per_participant=10, tie_band=0.0, item="sim"):
    """Draw comparisons from the Case V model with the given true scales.

    Each judgment compares ``s_a - s_b + N(0, 1)`` against ``tie_band``:
    above it A wins, below ``-tie_band`` B wins, otherwise a tie. Judgments
    are dealt to participants in shuffled blocks of ``per_participant``.
    """
    names = list(scales)
    trials = []
    for a, b in itertools.combinations(names, 2):
        diff = scales[a] - scales[b] + rng.standard_normal(per_pair)
        for d in diff:
            if d > tie_band:
                outcome = Outcome.A_WINS
            elif d < -tie_band:
                outcome = Outcome.B_WINS
            else:
                outcome = Outcome.TIE
            trials.append((a, b, outcome))
    order = rng.permutation(len(trials))
    return [
        ComparisonRecord(item, trials[t][0], trials[t][1], trials[t][2], f"p{k // per_participant:04d}")
        for k, t in enumerate(order)
    ]


def win_probability(delta):
    """P(A beats B) under the unit-variance Case V model."""
    return ndtr(delta)
