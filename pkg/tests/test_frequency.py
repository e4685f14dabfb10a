"""Spectral transforms and the feature enhancer."""

import numpy as np
import pytest

from freqtad import frequency as fq
from freqtad.autodiff import ParamStore, Tensor, matmul
from freqtad.gradcheck import check_gradient
from freqtad.rng import Rng
from freqtad.sequence import FeatureSequence, Spectrum


@pytest.fixture
def rng():
    return Rng(99)


def seq1(values):
    return FeatureSequence.single(np.asarray(values, dtype=np.float64))


class TestDft:
    def test_unit_impulse(self):
        spec = fq.dft(seq1([1.0, 0, 0, 0]))
        np.testing.assert_allclose(spec.coeffs[0, :, 0], np.ones(4), atol=1e-12)

    def test_constant_signal(self):
        spec = fq.dft(seq1([1.0, 1, 1, 1]))
        np.testing.assert_allclose(spec.coeffs[0, :, 0], [4, 0, 0, 0], atol=1e-12)

    def test_alternating_signal(self):
        spec = fq.dft(seq1([0.0, 1, 0, -1]))
        np.testing.assert_allclose(spec.coeffs[0, :, 0], [0, -2j, 0, 2j], atol=1e-12)

    def test_hermitian_symmetry(self, rng):
        x = rng.draw_normal((1, 17, 3))
        spec = fq.dft(FeatureSequence(x, None))
        c = spec.coeffs[0]
        for k in range(17):
            np.testing.assert_allclose(c[k], np.conj(c[(17 - k) % 17]), atol=1e-9)

    def test_round_trip_and_parseval(self, rng):
        for trial in range(100):
            r = rng.child(trial)
            length = r.draw_int(3, 512)
            x = r.draw_normal((length, 2))
            seq = FeatureSequence.single(x)
            spec = fq.dft(seq)
            back = fq.idft(spec)
            np.testing.assert_allclose(back.values[0], x, atol=1e-9)
            energy = (x ** 2).sum()
            spectral = (np.abs(spec.coeffs[0, :length]) ** 2).sum() / length
            assert abs(energy - spectral) <= 1e-8 * max(energy, 1.0)

    def test_masked_items_use_true_length(self, rng):
        x = rng.draw_normal((5, 3))
        padded = FeatureSequence.from_items([x, rng.draw_normal((9, 3))])
        alone = fq.dft(FeatureSequence.single(x))
        both = fq.dft(padded)
        np.testing.assert_allclose(both.coeffs[0, :5], alone.coeffs[0, :5], atol=1e-12)
        np.testing.assert_array_equal(both.coeffs[0, 5:], 0.0)


class TestIdft:
    def test_inverse_of_constant(self):
        spec = Spectrum(np.array([4.0, 0, 0, 0], dtype=complex)[None, :, None], [4])
        out = fq.idft(spec)
        np.testing.assert_allclose(out.values[0, :, 0], [1, 1, 1, 1], atol=1e-12)

    def test_inverse_of_alternating(self):
        spec = Spectrum(np.array([0, -2j, 0, 2j])[None, :, None], [4])
        out = fq.idft(spec)
        np.testing.assert_allclose(out.values[0, :, 0], [0, 1, 0, -1], atol=1e-12)

    def test_non_hermitian_rejected(self):
        spec = Spectrum(np.array([0, 2j, 0, 2j])[None, :, None], [4])
        with pytest.raises(ValueError, match="non-real reconstruction"):
            fq.idft(spec)


class TestLowPass:
    def test_dc_only_gives_mean(self):
        out = fq.low_pass(seq1([1.0, 2, 3, 4]), 1)
        np.testing.assert_allclose(out.values[0, :, 0], [2.5] * 4, atol=1e-9)

    def test_full_cover_identity(self):
        out = fq.low_pass(seq1([1.0, 2, 3, 4]), 3)
        np.testing.assert_allclose(out.values[0, :, 0], [1, 2, 3, 4], atol=1e-12)

    def test_alternating_has_no_dc(self):
        out = fq.low_pass(seq1([0.0, 1, 0, -1]), 1)
        np.testing.assert_allclose(out.values[0, :, 0], np.zeros(4), atol=1e-12)

    def test_idempotent(self, rng):
        for trial in range(100):
            r = rng.child(1000 + trial)
            length = r.draw_int(3, 512)
            x = r.draw_normal((length, 2))
            once = fq.low_pass(FeatureSequence.single(x), 5)
            twice = fq.low_pass(once, 5)
            np.testing.assert_allclose(once.values, twice.values, atol=1e-9)

    def test_decomposition_exact(self, rng):
        x = FeatureSequence.single(rng.draw_normal((37, 4)))
        low = fq.low_pass(x, 6)
        high = fq.high_pass(x, 6)
        np.testing.assert_allclose(low.values + high.values, x.values, atol=1e-12)

    def test_variance_monotone_in_cutoff(self, rng):
        x = FeatureSequence.single(rng.draw_normal((64, 3)))
        variances = []
        for c in range(1, 34):
            low = fq.low_pass(x, c).values[0]
            variances.append(low.var(axis=0).sum())
        diffs = np.diff(variances)
        assert np.all(diffs >= -1e-12)


class TestBandRemix:
    def build(self, cutoff, gain):
        store = ParamStore()
        remix = fq.BandRemix(store, "remix", cutoff, gain_init=gain)
        return remix, store

    def test_gain_one_is_identity(self, rng):
        remix, _ = self.build(4, 1.0)
        x = FeatureSequence.single(rng.draw_normal((20, 3)))
        np.testing.assert_allclose(remix.forward(x).values, x.values, atol=1e-12)

    def test_gain_zero_is_low_pass(self, rng):
        remix, _ = self.build(2, 0.0)
        x = FeatureSequence.single(rng.draw_normal((16, 2)))
        np.testing.assert_allclose(
            remix.forward(x).values, fq.low_pass(x, 2).values, atol=1e-12)

    def test_half_gain_example(self):
        remix, _ = self.build(1, 0.5)
        out = remix.forward(seq1([1.0, 2, 3, 4]))
        np.testing.assert_allclose(
            out.values[0, :, 0], [2.125, 2.375, 2.625, 2.875], atol=1e-12)

    def test_gradient(self, rng):
        remix, store = self.build(3, 0.8)
        err = check_gradient(
            lambda x: remix.apply_item(x), rng.draw_normal((10, 3)),
            params=list(store))
        assert err <= 1e-4


class TestLocalContrast:
    def build(self, channels, window=3, kernel=3):
        store = ParamStore()
        block = fq.LocalContrast(store, "lc", channels, window=window, kernel=kernel)
        return block, store

    def test_constant_input_unchanged(self):
        block, _ = self.build(2, window=4)
        x = FeatureSequence.single(np.full((9, 2), 3.5))
        np.testing.assert_allclose(block.forward(x).values, x.values, atol=1e-12)

    def test_window_one_is_identity(self, rng):
        block, store = self.build(3, window=1)
        store["lc.taps"].data[...] = rng.draw_normal((3, 3))
        x = FeatureSequence.single(rng.draw_normal((12, 3)))
        np.testing.assert_allclose(block.forward(x).values, x.values, atol=1e-12)

    def test_two_step_example(self):
        block, _ = self.build(1, window=2, kernel=1)
        out = block.forward(seq1([1.0, 3.0]))
        gelu_m1 = -0.15865525393145707
        np.testing.assert_allclose(out.values[0, :, 0], [1 + gelu_m1, 3.0], atol=1e-9)

    def test_gradient(self, rng):
        block, store = self.build(2)
        store["lc.taps"].data[...] = rng.draw_normal((3, 2))
        err = check_gradient(
            lambda x: block.apply_item(x), rng.draw_normal((9, 2)),
            params=list(store))
        assert err <= 1e-4


class TestFeatureEnhancer:
    def build(self, channels, **kw):
        store = ParamStore()
        enh = fq.FeatureEnhancer(store, "enh", channels, **kw)
        return enh, store

    def test_shape_preserved(self, rng):
        enh, _ = self.build(8)
        x = FeatureSequence(rng.draw_normal((2, 32, 8)), None)
        out = enh.forward(x)
        assert out.values.shape == (2, 32, 8)

    def test_constant_input_handled(self):
        enh, _ = self.build(4, cutoff=3)
        x = FeatureSequence.single(np.full((16, 4), 2.0))
        out = enh.forward(x)
        assert np.all(np.isfinite(out.values))
        np.testing.assert_allclose(out.values, 0.0, atol=1e-12)

    def test_gradient(self, rng):
        enh, store = self.build(4, cutoff=3)
        store["enh.contrast.taps"].data[...] = rng.draw_normal((3, 4)) * 0.5
        # sum of a normalized row is identically zero, so weight the output
        # to get a loss that actually depends on the input
        weight = Tensor(rng.draw_normal((4, 1)))
        err = check_gradient(
            lambda x: matmul(enh.apply_item(x), weight), rng.draw_normal((16, 4)),
            params=list(store))
        assert err <= 1e-4

    def test_masked_batch_matches_single(self, rng):
        enh, _ = self.build(3)
        a = rng.draw_normal((20, 3))
        b = rng.draw_normal((13, 3))
        batch = enh.forward(FeatureSequence.from_items([a, b]))
        alone = enh.forward(FeatureSequence.single(b))
        np.testing.assert_allclose(batch.values[1, :13], alone.values[0], atol=1e-12)
        np.testing.assert_array_equal(batch.values[1, 13:], 0.0)
