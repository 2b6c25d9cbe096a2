import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pillarsot.core import PointCloud
from pillarsot.errors import (
    ChannelOutOfRangeError,
    EmptyInputError,
    NonFiniteInputError,
    SpecMismatchError,
    WidthMismatchError,
)
from pillarsot.pillar import GridSpec, augment_points, pillarize
from pillarsot.pyramid import (
    PyramidSpec,
    decode_value,
    distribution_distance,
    encode_array,
    encode_features,
    encode_value,
)

DYADIC = PyramidSpec(levels=3, base_scale=1.0, ratio=0.5, normalize=False)


class TestEncodeValue:
    def test_zero(self):
        code = encode_value(0.0, DYADIC)
        np.testing.assert_array_equal(code.digits, [0, 0, 0])
        assert code.residual == 0.0

    def test_dyadic_example(self):
        # scales [1, 0.5, 0.25]
        code = encode_value(2.625, DYADIC)
        np.testing.assert_array_equal(code.digits, [2, 1, 0])
        assert code.residual == pytest.approx(0.125, abs=0)

    def test_antisymmetry_example(self):
        code = encode_value(-2.625, DYADIC)
        np.testing.assert_array_equal(code.digits, [-2, -1, 0])
        assert code.residual == pytest.approx(-0.125, abs=0)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInputError):
            encode_value(float("nan"), DYADIC)

    def test_residual_below_finest_scale(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(-100, 100, size=1000)
        code = encode_value(vals, DYADIC)
        assert np.all(np.abs(code.residual) < DYADIC.finest_scale)

    @settings(max_examples=200, deadline=None)
    @given(v=st.floats(-100, 100, allow_nan=False))
    def test_antisymmetry_exact(self, v):
        spec = PyramidSpec(levels=3, base_scale=0.8, ratio=0.125)
        pos = encode_value(v, spec)
        neg = encode_value(-v, spec)
        np.testing.assert_array_equal(neg.digits, -pos.digits)
        assert neg.residual == -pos.residual


class TestDecodeValue:
    def test_lossless_dyadic(self):
        assert decode_value(encode_value(2.625, DYADIC), DYADIC) == 2.625

    def test_zero_code(self):
        assert decode_value(encode_value(0.0, DYADIC), DYADIC) == 0.0

    def test_spec_mismatch(self):
        other = PyramidSpec(levels=2, base_scale=1.0, ratio=0.5, normalize=False)
        with pytest.raises(SpecMismatchError):
            decode_value(encode_value(1.0, DYADIC), other)

    def test_decimal_scales_sweep(self):
        spec = PyramidSpec(levels=3, base_scale=1.0, ratio=0.1)
        rng = np.random.default_rng(0)
        vals = rng.uniform(-100, 100, size=100_000)
        decoded = decode_value(encode_value(vals, spec), spec)
        assert np.max(np.abs(decoded - vals)) < 1e-9

    @pytest.mark.parametrize("levels", [1, 2, 3, 4])
    @pytest.mark.parametrize("ratio", [0.5, 0.125, 0.1])
    def test_lossless_all_specs(self, levels, ratio):
        spec = PyramidSpec(levels=levels, base_scale=0.8, ratio=ratio)
        rng = np.random.default_rng(levels * 10 + int(1 / ratio))
        vals = rng.uniform(-100, 100, size=10_000)
        decoded = decode_value(encode_value(vals, spec), spec)
        assert np.max(np.abs(decoded - vals)) < 1e-9


class TestTranslationAbsorption:
    def test_exact_shift_changes_only_first_digit(self):
        # same-sign inputs: a shift by an exact multiple of the base scale
        # only increments digit 1
        spec = PyramidSpec(levels=3, base_scale=0.5, ratio=0.5, normalize=False)
        values = np.array([0.1, 0.3, 0.4999, 0.7, 1.3, 2.2])
        shift = 3 * spec.base_scale
        base = encode_value(values, spec)
        shifted = encode_value(values + shift, spec)
        np.testing.assert_array_equal(shifted.digits[:, 0], base.digits[:, 0] + 3)
        np.testing.assert_array_equal(shifted.digits[:, 1:], base.digits[:, 1:])
        np.testing.assert_allclose(shifted.residual, base.residual, atol=1e-12)


class TestEncodeFeatures:
    def grid_pillars(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-3.2, 3.2, size=(n, 4))
        pts[:, 2] = rng.uniform(-3, 1, size=n)
        pts[:, 3] = rng.uniform(0, 1, size=n)
        return augment_points(pillarize(PointCloud(pts), GridSpec()))

    def test_default_width(self):
        spec = PyramidSpec()  # L = 3
        ps = self.grid_pillars()
        out = encode_features(ps, spec)
        assert out.shape[-1] == 9 * 4 + 1 == 37

    def test_padded_rows_zero(self):
        ps = self.grid_pillars(n=5)
        out = encode_features(ps, PyramidSpec())
        assert np.all(out[~ps.mask] == 0)

    def test_bounded_outputs_property(self):
        ps = self.grid_pillars(n=10_000, seed=3)
        out = encode_features(ps, PyramidSpec())
        rows = out[ps.mask]
        assert np.all(np.abs(rows) <= 1.0)

    def test_channel_out_of_range(self):
        ps = self.grid_pillars(n=5)
        with pytest.raises(ChannelOutOfRangeError):
            encode_features(ps, PyramidSpec(), channel_selection=[0, 10])

    def test_reflectance_passthrough(self):
        ps = self.grid_pillars(n=50, seed=9)
        out = encode_features(ps, PyramidSpec())
        # reflectance sits after the 3 encoded coordinate blocks
        np.testing.assert_array_equal(out[..., 12][ps.mask],
                                      ps.features[..., 3][ps.mask])

    def test_normalized_digit_bound(self):
        spec = PyramidSpec(levels=3, base_scale=0.8, ratio=0.125)
        rows = encode_array(np.array([3.19, -3.19, 0.9999]), spec)
        assert np.all(np.abs(rows) <= 1.0)


class TestDistributionDistance:
    def test_identical_sets(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(100, 5))
        per_channel, mean = distribution_distance(a, a.copy())
        np.testing.assert_allclose(per_channel, 0, atol=1e-12)
        assert mean == 0

    def test_point_masses(self):
        a = np.zeros((50, 2))
        b = np.ones((80, 2))
        per_channel, mean = distribution_distance(a, b)
        np.testing.assert_allclose(per_channel, [1.0, 1.0], atol=1e-12)
        assert mean == pytest.approx(1.0)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            distribution_distance(np.zeros((0, 2)), np.ones((5, 2)))

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatchError):
            distribution_distance(np.zeros((5, 2)), np.ones((5, 3)))

    def test_translation_shifts_by_delta(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(1000, 1))
        per_channel, _ = distribution_distance(a, a + 2.5)
        assert per_channel[0] == pytest.approx(2.5, abs=1e-9)
