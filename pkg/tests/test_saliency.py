import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from salrate import errors, saliency
from salrate.frames_io import FixationSet


def naive_map(points, w, h, sigma):
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    m = np.zeros((h, w))
    for x, y in points:
        m += np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * sigma ** 2))
    return m


def test_zero_fixations_give_zero_map():
    m = saliency.fixations_to_map(FixationSet.empty(), 0, 20, 10)
    assert m.shape == (10, 20) and not m.any()


def test_single_fixation_closed_form():
    fix = FixationSet.from_records([(0, 0, 130.0, 40.0)])
    m = saliency.fixations_to_map(fix, 0, 300, 80, sigma=120)
    assert m[40, 130] == 1.0
    assert m[40, 250] == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_coincident_fixations_match_single():
    one = FixationSet.from_records([(0, 0, 5.0, 6.0)])
    two = FixationSet.from_records([(0, 0, 5.0, 6.0), (0, 1, 5.0, 6.0)])
    np.testing.assert_allclose(saliency.fixations_to_map(two, 0, 30, 20, 8),
                               saliency.fixations_to_map(one, 0, 30, 20, 8), rtol=1e-14)


def test_matches_naive_sum(rng):
    pts = rng.random((7, 2)) * [40, 30]
    fix = FixationSet.from_records([(0, k, x, y) for k, (x, y) in enumerate(pts)])
    ref = naive_map(pts, 40, 30, 9.0)
    np.testing.assert_allclose(saliency.fixations_to_map(fix, 0, 40, 30, 9.0), ref / ref.max(),
                               rtol=1e-12, atol=1e-15)


def test_frame_filter():
    fix = FixationSet.from_records([(0, 0, 1.0, 1.0), (1, 0, 8.0, 8.0)])
    m = saliency.fixations_to_map(fix, 1, 10, 10, 2)
    assert m[8, 8] == 1.0


class TestSingleObserver:
    def test_only_observer_is_identity(self):
        fix = FixationSet.from_records([(0, 7, 3.0, 4.0), (0, 7, 9.0, 2.0)])
        np.testing.assert_array_equal(saliency.single_observer_map(fix, 7, 0, 12, 8, 5),
                                      saliency.fixations_to_map(fix, 0, 12, 8, 5))

    def test_absent_in_frame(self):
        fix = FixationSet.from_records([(0, 1, 3.0, 4.0), (1, 2, 3.0, 4.0)])
        assert not saliency.single_observer_map(fix, 2, 0, 12, 8).any()

    def test_unknown(self):
        fix = FixationSet.from_records([(0, 1, 3.0, 4.0)])
        with pytest.raises(errors.UnknownObserver):
            saliency.single_observer_map(fix, 5, 0, 12, 8)


class TestCenterPrior:
    def test_odd_closed_form(self):
        cp = saliency.center_prior(101, 101)
        assert cp[50, 50] == 1.0
        sx = 0.28 * 101
        # exact one-sigma offset evaluated with the same formula
        assert math.exp(-0.5 * (28.0 / sx) ** 2) == pytest.approx(cp[50, 78], rel=1e-12)
        assert cp[50, 78] == pytest.approx(math.exp(-0.5), abs=0.01)

    def test_even_symmetric(self):
        cp = saliency.center_prior(40, 30)
        np.testing.assert_array_equal(cp, cp[::-1, :])
        np.testing.assert_array_equal(cp, cp[:, ::-1])
        assert cp.max() == cp[14, 19] == cp[15, 20]

    def test_one_pixel(self):
        np.testing.assert_array_equal(saliency.center_prior(1, 1), [[1.0]])


class TestPercentile:
    def test_constant(self):
        assert saliency.percentile(np.full((3, 3), 0.4), 37).threshold == 0.4

    def test_ten_values(self):
        assert saliency.percentile(np.arange(1, 11, dtype=float), 80).threshold == 8

    def test_empty(self):
        with pytest.raises(errors.EmptyMap):
            saliency.percentile(np.zeros((0, 3)), 50)

    def test_sort_oracle(self, rng):
        for n in range(1, 1001, 7):
            v = rng.random(n)
            p = float(rng.uniform(0.5, 99.5))
            k = max(math.ceil(p / 100 * n) - 1, 0)
            assert saliency.percentile(v, p).threshold == np.sort(v)[k]


class TestNormalize:
    def test_sum(self):
        np.testing.assert_array_equal(saliency.normalize(np.array([2.0, 2.0]), "sum"), [0.5, 0.5])

    def test_max(self):
        np.testing.assert_array_equal(saliency.normalize(np.array([0.0, 3.0]), "max"), [0.0, 1.0])

    def test_zscore(self, rng):
        z = saliency.normalize(rng.random((5, 5)), "zscore")
        assert abs(z.mean()) < 1e-12 and abs(z.std() - 1) < 1e-12

    def test_constant_zscore(self):
        with pytest.raises(errors.DegenerateMap):
            saliency.normalize(np.full(4, 0.3), "zscore")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 30), st.floats(0, 20)), min_size=1, max_size=6),
       st.randoms(use_true_random=False))
def test_permutation_invariant(points, rnd):
    recs = [(0, k, x, y) for k, (x, y) in enumerate(points)]
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    a = saliency.fixations_to_map(FixationSet.from_records(recs), 0, 31, 21, 4)
    b = saliency.fixations_to_map(FixationSet.from_records(shuffled), 0, 31, 21, 4)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


@settings(max_examples=30, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5))
def test_translation_equivariant(dx, dy):
    pts = [(15.3, 12.1), (20.0, 18.5)]
    a = saliency.gaussian_sum([p[0] for p in pts], [p[1] for p in pts], 40, 32, 3.0)
    b = saliency.gaussian_sum([p[0] + dx for p in pts], [p[1] + dy for p in pts], 40, 32, 3.0)
    np.testing.assert_allclose(np.roll(a, (dy, dx), axis=(0, 1))[6:26, 6:34], b[6:26, 6:34], rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60))
def test_center_prior_mirror(w, h):
    cp = saliency.center_prior(w, h)
    np.testing.assert_array_equal(cp, cp[::-1, ::-1])
