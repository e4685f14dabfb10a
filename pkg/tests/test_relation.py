"""Relation blocks, branch behavior, and the multi-scale pyramid."""

import math

import numpy as np
import pytest

from freqtad import autodiff as ad
from freqtad import relation as rel
from freqtad.autodiff import ParamStore, Tensor
from freqtad.gradcheck import check_gradient
from freqtad.rng import Rng


@pytest.fixture
def rng():
    return Rng(431)


def make_state(channels, latent, rng):
    store = ParamStore()
    branch = rel.StateSpaceBranch(store, "ss", channels, latent, rng)
    return branch, store


class TestStateSpaceBranch:
    def test_zero_input_zero_output(self, rng):
        branch, _ = make_state(3, 4, rng)
        out = branch.apply_item(Tensor(np.zeros((10, 3))))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_memoryless_limit_is_pointwise(self, rng):
        # decay forced to zero: position t must ignore every other position
        branch, store = make_state(3, 4, rng.child(0))
        store["ss.decay_raw"].data[...] = -1000.0
        x = rng.draw_normal((12, 3))
        y = rng.draw_normal((12, 3))
        y[5] = x[5]
        out_x = branch.apply_item(Tensor(x)).data
        out_y = branch.apply_item(Tensor(y)).data
        np.testing.assert_allclose(out_x[5], out_y[5], atol=1e-12)
        assert np.abs(out_x[4] - out_y[4]).max() > 1e-6

    def test_direction_features_swap_under_reversal(self, rng):
        branch, _ = make_state(4, 5, rng.child(1))
        x = rng.draw_normal((14, 4))
        fwd, bwd = branch._direction_features(Tensor(x))
        fwd_r, bwd_r = branch._direction_features(Tensor(x[::-1].copy()))
        np.testing.assert_allclose(fwd_r.data, bwd.data[::-1], atol=1e-12)
        np.testing.assert_allclose(bwd_r.data, fwd.data[::-1], atol=1e-12)

    def test_output_direction_sensitive(self, rng):
        # after projection the branch is not symmetric, only the feature
        # pair swaps; a generic input must map to a different output
        branch, _ = make_state(3, 4, rng.child(2))
        x = rng.draw_normal((9, 3))
        out = branch.apply_item(Tensor(x)).data
        out_r = branch.apply_item(Tensor(x[::-1].copy())).data
        assert np.abs(out - out_r[::-1]).max() > 1e-6

    def test_scan_stays_bounded(self, rng):
        branch, _ = make_state(2, 6, rng.child(3))
        x = rng.draw_normal((1024, 2))
        out = branch.apply_item(Tensor(x)).data
        assert np.all(np.isfinite(out))
        assert np.abs(out).max() < 1e3

    def test_length_one_sequence(self, rng):
        branch, _ = make_state(3, 4, rng.child(4))
        out = branch.apply_item(Tensor(rng.draw_normal((1, 3))))
        assert out.data.shape == (1, 3)

    def test_gradient(self, rng):
        branch, store = make_state(2, 3, rng.child(5))
        err = check_gradient(
            lambda x: branch.apply_item(x), rng.draw_normal((7, 2)),
            params=list(store))
        assert err <= 1e-4


class TestDilatedConvBranch:
    def build(self, channels, rng):
        store = ParamStore()
        branch = rel.DilatedConvBranch(store, "dc", channels, rng)
        return branch, store

    def test_zero_taps_zero_output(self, rng):
        branch, store = self.build(3, rng)
        for name in store.names():
            store[name].data[...] = 0.0
        out = branch.apply_item(Tensor(rng.draw_normal((8, 3))))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_center_delta_is_identity(self, rng):
        branch, store = self.build(2, rng)
        for name in store.names():
            store[name].data[...] = 0.0
        store["dc.taps_r1"].data[1, :] = 1.0
        x = rng.draw_normal((10, 2))
        np.testing.assert_allclose(branch.apply_item(Tensor(x)).data, x, atol=1e-12)

    def test_dilation_two_shift(self, rng):
        branch, store = self.build(1, rng)
        for name in store.names():
            store[name].data[...] = 0.0
        store["dc.taps_r2"].data[0, 0] = 1.0
        out = branch.apply_item(Tensor(np.array([[1.0], [0], [0], [0], [0]])))
        np.testing.assert_allclose(out.data[:, 0], [0, 0, 1, 0, 0], atol=1e-12)

    def test_linear_in_input(self, rng):
        branch, _ = self.build(3, rng.child(1))
        x = rng.draw_normal((11, 3))
        y = rng.draw_normal((11, 3))
        lhs = branch.apply_item(Tensor(2.0 * x - 3.0 * y)).data
        rhs = 2.0 * branch.apply_item(Tensor(x)).data \
            - 3.0 * branch.apply_item(Tensor(y)).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_gradient(self, rng):
        branch, store = self.build(2, rng.child(2))
        err = check_gradient(
            lambda x: branch.apply_item(x), rng.draw_normal((9, 2)),
            params=list(store))
        assert err <= 1e-4


class TestChannelContextBranch:
    def build(self, channels, rng):
        store = ParamStore()
        branch = rel.ChannelContextBranch(store, "cc", channels, rng)
        return branch, store

    def test_constant_along_time(self, rng):
        branch, _ = self.build(4, rng)
        out = branch.apply_item(Tensor(rng.draw_normal((13, 4)))).data
        np.testing.assert_allclose(out, np.broadcast_to(out[0], out.shape), atol=1e-12)

    def test_identity_projection_hand_value(self, rng):
        branch, store = self.build(1, rng)
        store["cc.proj"].data[...] = 1.0
        store["cc.bias"].data[...] = 0.0
        out = branch.apply_item(Tensor(np.array([[1.0], [3.0]]))).data
        # mean 2.0, then 2 * Phi(2) = 1.9544997361036416
        np.testing.assert_allclose(out, 1.9544997361036416, atol=1e-12)

    def test_gradient(self, rng):
        branch, store = self.build(3, rng.child(1))
        err = check_gradient(
            lambda x: branch.apply_item(x), rng.draw_normal((6, 3)),
            params=list(store))
        assert err <= 1e-4


class TestRelationBlock:
    def build(self, channels, latent, rng):
        store = ParamStore()
        block = rel.RelationBlock(store, "blk", channels, latent, rng)
        return block, store

    def test_shape_preserved(self, rng):
        block, _ = self.build(5, 4, rng)
        out = block.apply_item(Tensor(rng.draw_normal((21, 5))))
        assert out.data.shape == (21, 5)

    def test_zero_fusion_is_identity(self, rng):
        block, store = self.build(3, 4, rng.child(1))
        store["blk.fuse"].data[...] = 0.0
        x = rng.draw_normal((10, 3))
        np.testing.assert_allclose(block.apply_item(Tensor(x)).data, x, atol=1e-12)

    def test_near_identity_at_init(self, rng):
        # fusion weights start small so a fresh block barely perturbs input
        block, _ = self.build(4, 4, rng.child(2))
        x = rng.draw_normal((16, 4))
        out = block.apply_item(Tensor(x)).data
        assert np.abs(out - x).max() < 0.5 * np.abs(x).max()

    def test_gradient(self, rng):
        block, store = self.build(2, 3, rng.child(3))
        err = check_gradient(
            lambda x: block.apply_item(x), rng.draw_normal((8, 2)),
            params=list(store))
        assert err <= 1e-4


class TestConvBlock:
    def test_zero_weight_is_identity(self, rng):
        store = ParamStore()
        block = rel.ConvBlock(store, "cb", 3, rng)
        store["cb.weight"].data[...] = 0.0
        x = rng.draw_normal((7, 3))
        np.testing.assert_allclose(block.apply_item(Tensor(x)).data, x, atol=1e-12)

    def test_gradient(self, rng):
        store = ParamStore()
        block = rel.ConvBlock(store, "cb", 2, rng.child(1))
        err = check_gradient(
            lambda x: block.apply_item(x), rng.draw_normal((6, 2)),
            params=list(store))
        assert err <= 1e-4


class TestLevelRanges:
    def test_no_downsampling(self):
        assert rel.level_ranges(0) == [(0.0, math.inf)]

    def test_doubling_scheme(self):
        assert rel.level_ranges(3) == [
            (0.0, 4.0), (4.0, 8.0), (8.0, 16.0), (16.0, math.inf)]

    def test_partition_covers_positive_line(self):
        for m in range(1, 7):
            ranges = rel.level_ranges(m)
            assert len(ranges) == m + 1
            assert ranges[0][0] == 0.0
            assert ranges[-1][1] == math.inf
            for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
                assert hi == lo


class TestPyramid:
    def test_level_lengths_ceiling_halving(self):
        assert rel.level_lengths(37, 3) == [37, 19, 10, 5]
        assert rel.level_lengths(32, 5) == [32, 16, 8, 4, 2, 1]
        assert rel.level_lengths(1, 0) == [1]

    def test_too_short_raises(self, rng):
        x = Tensor(rng.draw_normal((7, 2)))
        with pytest.raises(ValueError, match="sequence too short for pyramid"):
            rel.build_pyramid_item(x, 7, [[], [], [], []], 3)

    def test_boundary_length_allowed(self, rng):
        x = Tensor(rng.draw_normal((8, 2)))
        levels = rel.build_pyramid_item(x, 8, [[], [], [], []], 3)
        assert [lv.data.shape[0] for lv in levels] == [8, 4, 2, 1]

    def test_empty_blocks_pure_pooling(self, rng):
        x = rng.draw_normal((11, 3))
        levels = rel.build_pyramid_item(Tensor(x), 11, [[], [], []], 2)
        np.testing.assert_array_equal(levels[0].data, x)
        manual = ad.maxpool2_time(Tensor(x)).data
        np.testing.assert_array_equal(levels[1].data, manual)
        manual2 = ad.maxpool2_time(Tensor(manual)).data
        np.testing.assert_array_equal(levels[2].data, manual2)

    def test_blocks_applied_per_level(self, rng):
        store = ParamStore()
        blocks = [[rel.ConvBlock(store, f"lv{i}", 2, rng.child(i))] for i in range(2)]
        x = rng.draw_normal((6, 2))
        levels = rel.build_pyramid_item(Tensor(x), 6, blocks, 1)
        expect0 = blocks[0][0].apply_item(Tensor(x)).data
        np.testing.assert_allclose(levels[0].data, expect0, atol=1e-12)
        pooled = ad.maxpool2_time(Tensor(expect0)).data
        expect1 = blocks[1][0].apply_item(Tensor(pooled)).data
        np.testing.assert_allclose(levels[1].data, expect1, atol=1e-12)
