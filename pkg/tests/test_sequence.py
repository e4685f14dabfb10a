"""Data containers and the deterministic random stream."""

import numpy as np
import pytest

from freqtad.rng import Rng
from freqtad.sequence import (ActionInstance, DetectionCandidate,
                              FeatureSequence, Spectrum, VideoRecord)


class TestFeatureSequence:
    def test_full_mask_by_default(self):
        seq = FeatureSequence(np.ones((2, 5, 3)), None)
        assert seq.batch == 2 and seq.length == 5 and seq.channels == 3
        np.testing.assert_array_equal(seq.lengths, [5, 5])

    def test_single_promotes_vector(self):
        seq = FeatureSequence.single(np.arange(4.0))
        assert seq.values.shape == (1, 4, 1)

    def test_from_items_pads_and_masks(self):
        seq = FeatureSequence.from_items([np.ones((3, 2)), np.ones((5, 2))])
        np.testing.assert_array_equal(seq.lengths, [3, 5])
        np.testing.assert_array_equal(seq.values[0, 3:], 0.0)
        np.testing.assert_array_equal(seq.item(0), np.ones((3, 2)))

    def test_padding_values_zeroed_on_construction(self):
        values = np.ones((1, 4, 2))
        mask = np.array([[True, True, False, False]])
        seq = FeatureSequence(values, mask)
        np.testing.assert_array_equal(seq.values[0, 2:], 0.0)
        np.testing.assert_array_equal(seq.values[0, :2], 1.0)

    def test_non_prefix_mask_rejected(self):
        with pytest.raises(ValueError, match="contiguous prefix"):
            FeatureSequence(np.ones((1, 4, 2)),
                            np.array([[True, False, True, True]]))

    def test_empty_item_rejected(self):
        with pytest.raises(ValueError, match="at least one valid step"):
            FeatureSequence(np.ones((1, 3, 2)), np.zeros((1, 3), dtype=bool))

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValueError):
            FeatureSequence(np.ones((4, 2)), None)
        with pytest.raises(ValueError):
            FeatureSequence(np.ones((1, 3, 2)), np.ones((1, 4), dtype=bool))

    def test_map_items_repads(self):
        seq = FeatureSequence.from_items([np.ones((4, 2)), np.ones((2, 2))])
        out = seq.map_items(lambda a: a[::2] * 3.0)
        np.testing.assert_array_equal(out.lengths, [2, 1])
        np.testing.assert_array_equal(out.item(0), np.full((2, 2), 3.0))


class TestActionInstance:
    def test_derived_fields(self):
        act = ActionInstance(2.0, 8.0, 1)
        assert act.center == 5.0 and act.span == 6.0

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            ActionInstance(3.0, 3.0, 0)
        with pytest.raises(ValueError):
            ActionInstance(5.0, 3.0, 0)

    def test_frozen(self):
        act = ActionInstance(0.0, 1.0, 0)
        with pytest.raises(AttributeError):
            act.start = 2.0


class TestSpectrumAndRecords:
    def test_spectrum_casts(self):
        spec = Spectrum(np.ones((1, 4, 2)), [4])
        assert spec.coeffs.dtype == np.complex128
        assert spec.lengths.dtype == np.int64

    def test_candidate_segment(self):
        c = DetectionCandidate("v", 1, 0.5, 2.0, 6.0)
        assert c.segment == (2.0, 6.0)

    def test_video_record_second_conversion(self):
        rec = VideoRecord("v", np.ones((8, 2)),
                          actions=[ActionInstance(2.0, 6.0, 1)], fps=4.0)
        acts = rec.actions_seconds()
        assert acts[0].start == 0.5 and acts[0].end == 1.5 and acts[0].label == 1


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(5).draw_normal((100,))
        b = Rng(5).draw_normal((100,))
        np.testing.assert_array_equal(a, b)

    def test_children_are_independent_streams(self):
        root = Rng(5)
        a = root.child(0).draw_normal((50,))
        b = root.child(1).draw_normal((50,))
        assert np.abs(a - b).max() > 1e-6
        again = Rng(5).child(0).draw_normal((50,))
        np.testing.assert_array_equal(a, again)

    def test_child_order_does_not_matter(self):
        root = Rng(9)
        late = root.child(3).draw_normal((10,))
        fresh = Rng(9)
        fresh.child(0).draw_normal((10,))
        np.testing.assert_array_equal(fresh.child(3).draw_normal((10,)), late)

    def test_zero_std_is_constant(self):
        out = Rng(1).draw_normal((4,), mean=2.5, std=0.0)
        np.testing.assert_array_equal(out, 2.5)

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError):
            Rng(1).draw_normal((4,), std=-1.0)

    def test_draw_int_inclusive(self):
        values = {Rng(2).child(i).draw_int(3, 5) for i in range(100)}
        assert values == {3, 4, 5}

    def test_uniform_bounds(self):
        out = Rng(3).draw_uniform(2.0, 4.0, (1000,))
        assert out.min() >= 2.0 and out.max() < 4.0

    def test_permutation_is_permutation(self):
        perm = Rng(4).permutation(20)
        np.testing.assert_array_equal(np.sort(perm), np.arange(20))
