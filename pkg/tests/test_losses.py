import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from tifctr.errors import ConfigurationError, DataError
from tifctr.losses import (
    LossSpec, bce, canonical_variant, reduce_batch, tif_weight, tif_weights, weighted_bce,
)


def spec(variant, n, alpha=1.0):
    return LossSpec(variant, alpha=alpha, n_days=n)


class TestBCE:
    def test_half(self):
        assert bce(1, 0.5) == pytest.approx(math.log(2), abs=1e-15)

    def test_perfect(self):
        assert bce(1, 1.0) == pytest.approx(0.0, abs=1e-6)
        assert bce(0, 0.0) == pytest.approx(0.0, abs=1e-6)

    def test_hand_value(self):
        assert bce(0, 0.9) == pytest.approx(2.302585092994046, rel=1e-12)

    def test_clamped_finite(self):
        assert np.isfinite(bce(1, 0.0)) and bce(1, 0.0) == pytest.approx(-math.log(1e-7))

    def test_bad_label(self):
        with pytest.raises(DataError):
            bce(2, 0.3)

    def test_vectorised(self):
        np.testing.assert_allclose(bce([1, 0], [0.5, 0.5]), [math.log(2)] * 2)


class TestWeights:
    def test_linear(self):
        assert tif_weight(spec("tif_linear", 10), 10) == 1.0
        assert tif_weight(spec("tif_linear", 10), 1) == pytest.approx(0.1, abs=1e-12)
        assert tif_weight(spec("tif_linear", 10, alpha=2.0), 5) == 1.0

    def test_anti(self):
        assert tif_weight(spec("tif_anti", 10), 1) == 1.0
        assert tif_weight(spec("tif_anti", 10), 10) == pytest.approx(0.1, abs=1e-12)

    def test_exponential(self):
        assert tif_weight(spec("tif_exp", 2), 1) == pytest.approx(1 / (math.e + 1), rel=1e-12)
        assert tif_weight(spec("tif_exp", 7), 7) == 1.0

    def test_logarithmic(self):
        assert tif_weight(spec("tif_log", 9), 9) == 1.0
        # N = e is not an integer day count; check the closed form at a real N instead
        n = 20
        assert tif_weight(spec("tif_log", n), 1) == pytest.approx(1 / (math.log(n) + 1), rel=1e-12)

    def test_plain(self):
        np.testing.assert_array_equal(tif_weights(spec("plain", 5), np.arange(1, 6)), 1.0)

    @pytest.mark.parametrize("n", [1, 2, 5, 13, 20])
    def test_exponential_matches_high_precision(self, n):
        mpmath.mp.dps = 50
        for t in range(1, n + 1):
            exact = (mpmath.e ** t - 1) / (mpmath.e ** n - 1)
            assert tif_weight(spec("tif_exp", n), t) == pytest.approx(float(exact), rel=1e-12)

    def test_exponential_no_overflow(self):
        w = tif_weights(spec("tif_exp", 10000), np.array([1, 5000, 10000]))
        assert np.all(np.isfinite(w)) and w[-1] == 1.0 and w[0] >= 0.0

    def test_single_day_all_one(self):
        for v in ("plain", "tif_linear", "tif_anti", "tif_exp", "tif_log"):
            assert tif_weight(spec(v, 1), 1) == 1.0

    def test_out_of_range(self):
        with pytest.raises(DataError):
            tif_weight(spec("tif_linear", 4), 5)
        with pytest.raises(DataError):
            tif_weight(spec("tif_linear", 4), 0)

    def test_aliases_and_unknown(self):
        assert canonical_variant("exponential") == "tif_exp"
        assert LossSpec("logarithmic").variant == "tif_log"
        with pytest.raises(ConfigurationError):
            LossSpec("quadratic")
        with pytest.raises(ConfigurationError):
            LossSpec("tif_linear", alpha=0)

    def test_scale_knob(self):
        s = LossSpec("tif_linear", n_days=4, scale=3.0)
        assert tif_weight(s, 2) == pytest.approx(1.5)


# e^(t - N) underflows float64 once N - t exceeds ~745, so the exponential
# schedule is only checked for strict positivity below that.
EXP_REPRESENTABLE_N = 700


@given(n=st.integers(2, 1000))
def test_monotone_and_in_range(n):
    t = np.arange(1, n + 1)
    for v in ("tif_linear", "tif_log"):
        w = tif_weights(spec(v, n), t)
        assert np.all(np.diff(w) > 0)
        assert np.all(w > 0) and np.all(w <= 1) and w[-1] == 1.0
    w = tif_weights(spec("tif_exp", n), t)
    assert np.all(np.diff(w) >= 0) and np.all(w >= 0) and np.all(w <= 1) and w[-1] == 1.0
    if n <= EXP_REPRESENTABLE_N:
        assert np.all(np.diff(w) > 0) and np.all(w > 0)
    anti = tif_weights(spec("tif_anti", n), t)
    assert np.all(np.diff(anti) < 0) and anti[0] == 1.0 and np.all(anti > 0)


class TestWeightedBCE:
    def test_plain_is_raw(self):
        for t in (1, 3, 7):
            v = weighted_bce(spec("plain", 7), 1, 0.3, t)
            assert v.weighted == v.raw_bce and v.weight == 1.0

    def test_linear_last_day(self):
        v = weighted_bce(spec("tif_linear", 9), 0, 0.2, 9)
        assert v.weighted == v.raw_bce

    @given(n=st.integers(1, 200), data=st.data())
    def test_anti_is_mirrored_linear(self, n, data):
        t = data.draw(st.integers(1, n))
        assert tif_weight(spec("tif_anti", n), t) == pytest.approx(
            tif_weight(spec("tif_linear", n), n - t + 1), rel=1e-15)

    def test_product(self):
        v = weighted_bce(spec("tif_log", 10), 1, 0.7, 4)
        assert v.weighted == v.raw_bce * v.weight


def test_reduce_batch_modes():
    losses = np.array([1.0, 2.0, 3.0])
    w = np.array([0.5, 1.0, 0.5])
    assert reduce_batch(losses, w) == pytest.approx(4.0 / 3)
    assert reduce_batch(losses, w, "weight_sum") == pytest.approx(2.0)
    assert reduce_batch(losses, np.ones(3)) == np.mean(losses)
