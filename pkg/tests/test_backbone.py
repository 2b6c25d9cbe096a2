import math

import numpy as np
import pytest

from pillarsot.backbone import (
    BackboneConfig,
    HEAD_CHANNELS,
    WeightStore,
    backbone_forward,
    decode_box,
    expected_shapes,
    head_decode,
    head_forward,
    init_weights,
    load_weights,
    save_weights,
    similarity_neck_forward,
)
from pillarsot.core import Box7
from pillarsot.errors import (
    CorruptWeightFileError,
    NonFiniteActivationError,
    ShapeMismatchError,
    ShapeMismatchOnLoadError,
)
from pillarsot.pillar import GridSpec

SMALL = BackboneConfig(depths=(1, 1, 1, 1), channels=(8, 16, 20, 32),
                       heads=(1, 2, 5, 8), mlp_ratios=(2, 2, 2, 2),
                       in_channels=5)


def small_image(seed=0, side=32):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(SMALL.in_channels, side, side))


class TestConfig:
    def test_total_stride(self):
        assert BackboneConfig().total_stride == 32

    def test_bad_depths(self):
        with pytest.raises(ValueError):
            BackboneConfig(depths=(1, 1, -1, 1))

    def test_heads_must_divide_channels(self):
        with pytest.raises(ValueError):
            BackboneConfig(channels=(64, 129, 320, 512))

    def test_json_round_trip_stable(self):
        cfg = BackboneConfig()
        assert cfg.to_json() == BackboneConfig().to_json()


class TestWeights:
    def test_expected_shapes_cover_config(self):
        shapes = expected_shapes(SMALL)
        assert shapes["head.w"] == (SMALL.channels[0], HEAD_CHANNELS)
        assert shapes["stage0.embed.w"] == (SMALL.in_channels * 16, SMALL.channels[0])
        assert shapes["stage3.block0.attn.wq"] == (32, 32)

    def test_init_deterministic(self):
        a = init_weights(SMALL, seed=3)
        b = init_weights(SMALL, seed=3)
        assert a == b

    def test_init_seed_sensitivity(self):
        assert init_weights(SMALL, seed=3) != init_weights(SMALL, seed=4)

    def test_save_load_round_trip(self, tmp_path):
        w = init_weights(SMALL, seed=5)
        path = tmp_path / "w.bin"
        save_weights(w, path)
        back = load_weights(path, SMALL)
        assert back == w

    def test_corrupt_file(self, tmp_path):
        w = init_weights(SMALL, seed=5)
        path = tmp_path / "w.bin"
        save_weights(w, path)
        raw = bytearray(path.read_bytes())
        raw[50] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptWeightFileError):
            load_weights(path, SMALL)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a weight file")
        with pytest.raises(CorruptWeightFileError):
            load_weights(path, SMALL)

    def test_config_mismatch_on_load(self, tmp_path):
        w = init_weights(SMALL, seed=5)
        path = tmp_path / "w.bin"
        save_weights(w, path)
        other = BackboneConfig(depths=(2, 1, 1, 1), channels=SMALL.channels,
                               heads=SMALL.heads, mlp_ratios=SMALL.mlp_ratios,
                               in_channels=SMALL.in_channels)
        with pytest.raises(ShapeMismatchOnLoadError):
            load_weights(path, other)


class TestBackboneForward:
    def test_shape_law(self):
        w = init_weights(SMALL, seed=0)
        maps = backbone_forward(small_image(side=64), SMALL, w)
        sides = [16, 8, 4, 2]
        for k, m in enumerate(maps):
            assert m.shape == (SMALL.channels[k], sides[k], sides[k])

    def test_zero_depths_still_embeds(self):
        cfg = BackboneConfig(depths=(0, 0, 0, 0), channels=SMALL.channels,
                             heads=SMALL.heads, mlp_ratios=SMALL.mlp_ratios,
                             in_channels=SMALL.in_channels)
        maps = backbone_forward(small_image(side=32), cfg, init_weights(cfg))
        assert maps[3].shape == (SMALL.channels[3], 1, 1)

    def test_deterministic(self):
        w = init_weights(SMALL, seed=1)
        img = small_image(seed=9)
        a = backbone_forward(img, SMALL, w)
        b = backbone_forward(img, SMALL, w)
        for ma, mb in zip(a, b):
            np.testing.assert_array_equal(ma, mb)

    def test_indivisible_input_rejected(self):
        w = init_weights(SMALL, seed=0)
        with pytest.raises(ShapeMismatchError):
            backbone_forward(np.zeros((SMALL.in_channels, 33, 32)), SMALL, w)

    def test_wrong_channel_count_rejected(self):
        w = init_weights(SMALL, seed=0)
        with pytest.raises(ShapeMismatchError):
            backbone_forward(np.zeros((SMALL.in_channels + 1, 32, 32)), SMALL, w)

    def test_non_finite_abort_names_stage(self):
        w = init_weights(SMALL, seed=0)
        img = small_image()
        img[0, 0, 0] = np.nan
        with pytest.raises(NonFiniteActivationError) as exc:
            backbone_forward(img, SMALL, w)
        assert exc.value.stage == 0

    def test_attention_rows_sum_to_one(self):
        w = init_weights(SMALL, seed=2)
        probe = {}
        backbone_forward(small_image(seed=4), SMALL, w, probe=probe)
        assert probe  # at least one block recorded
        for rec in probe.values():
            sums = rec["attn"].sum(axis=-1)
            np.testing.assert_allclose(sums, 1.0, atol=1e-6)

    def test_finite_over_seeds(self):
        img = small_image(seed=11)
        for seed in range(5):
            maps = backbone_forward(img, SMALL, init_weights(SMALL, seed=seed))
            assert all(np.all(np.isfinite(m)) for m in maps)


class TestNeckAndHead:
    def run_neck(self, seed=0):
        w = init_weights(SMALL, seed=seed)
        t = backbone_forward(small_image(seed=20, side=32), SMALL, w)
        s = backbone_forward(small_image(seed=21, side=64), SMALL, w)
        return similarity_neck_forward(t, s, SMALL, w), w

    def test_fused_shape(self):
        fused, _ = self.run_neck()
        assert fused.shape == (SMALL.channels[0], 16, 16)

    def test_template_permutation_invariance(self):
        # attention over template tokens is a set operation: permuting the
        # template token order must not change the fused map
        w = init_weights(SMALL, seed=3)
        t = backbone_forward(small_image(seed=20, side=32), SMALL, w)
        s = backbone_forward(small_image(seed=21, side=64), SMALL, w)
        base = similarity_neck_forward(t, s, SMALL, w)
        rng = np.random.default_rng(0)
        shuffled = []
        for m in t:
            c, h, wd = m.shape
            tokens = m.transpose(1, 2, 0).reshape(-1, c)
            perm = rng.permutation(tokens.shape[0])
            shuffled.append(tokens[perm].reshape(h, wd, c).transpose(2, 0, 1))
        again = similarity_neck_forward(shuffled, s, SMALL, w)
        np.testing.assert_allclose(again, base, atol=1e-6)

    def test_head_output_channels(self):
        fused, w = self.run_neck()
        out = head_forward(fused, w)
        assert out.shape == (HEAD_CHANNELS, 16, 16)

    def test_head_decode_runs(self):
        fused, w = self.run_neck()
        prior = Box7(1.0, 2.0, 0.0, 1.5, 1.6, 3.9, 0.3)
        box, conf = head_decode(fused, prior, GridSpec(), w)
        assert 0.0 <= conf <= 1.0
        assert math.isfinite(box.cx)


class TestDecodeBox:
    GRID = GridSpec()  # 128x128 pillars -> 32x32 at stride 4

    def identity_map(self, peak_row=16, peak_col=16):
        m = np.zeros((HEAD_CHANNELS, 32, 32))
        m[0] -= 10.0
        m[0, peak_row, peak_col] = 10.0
        m[8] = 1.0  # cos = 1, sin = 0
        return m

    def test_identity_decode_returns_prior(self):
        prior = Box7(2.0, -1.0, 0.5, 1.5, 1.6, 3.9, 0.7)
        box, conf = decode_box(self.identity_map(), prior, self.GRID)
        np.testing.assert_allclose(
            [box.cx, box.cy, box.cz, box.h, box.w, box.l, box.theta],
            [prior.cx, prior.cy, prior.cz, prior.h, prior.w, prior.l, prior.theta],
            atol=1e-12)
        assert conf > 0.99

    def test_one_cell_shift_is_grid_step(self):
        prior = Box7(0, 0, 0, 1.5, 1.6, 3.9, 0.0)
        box, _ = decode_box(self.identity_map(peak_row=17), prior, self.GRID)
        assert box.cx == pytest.approx(0.2, abs=1e-12)
        assert box.cy == pytest.approx(0.0, abs=1e-12)

    def test_offset_channels_add(self):
        prior = Box7(0, 0, 0, 1.5, 1.6, 3.9, 0.0)
        m = self.identity_map()
        m[1, 16, 16] = 0.07
        m[3, 16, 16] = -0.3
        box, _ = decode_box(m, prior, self.GRID)
        assert box.cx == pytest.approx(0.07, abs=1e-12)
        assert box.cz == pytest.approx(-0.3, abs=1e-12)

    def test_argmax_tie_breaks_to_lowest_index(self):
        m = self.identity_map()
        m[0, 16, 16] = 10.0
        m[0, 5, 5] = 10.0  # same peak earlier in scan order wins
        prior = Box7(0, 0, 0, 1.5, 1.6, 3.9, 0.0)
        box, _ = decode_box(m, prior, self.GRID)
        assert box.cx == pytest.approx(self.GRID.x_range[0] + 5 * 0.2, abs=1e-12)

    def test_size_floor(self):
        m = self.identity_map()
        m[4:7, 16, 16] = -100.0
        box, _ = decode_box(m, Box7(0, 0, 0, 1.5, 1.6, 3.9, 0.0), self.GRID)
        assert box.h == box.w == box.l == 1e-3

    def test_prior_rotation_applied(self):
        # a local +x offset with a quarter-turned prior lands on global +y
        prior = Box7(0, 0, 0, 1.5, 1.6, 3.9, math.pi / 2)
        box, _ = decode_box(self.identity_map(peak_row=17), prior, self.GRID)
        assert box.cx == pytest.approx(0.0, abs=1e-12)
        assert box.cy == pytest.approx(0.2, abs=1e-12)

    def test_wrong_channels_rejected(self):
        with pytest.raises(ShapeMismatchError):
            decode_box(np.zeros((3, 32, 32)), Box7(0, 0, 0, 1, 1, 1, 0), self.GRID)
