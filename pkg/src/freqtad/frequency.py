"""Frequency-domain feature enhancement.

Splits each sequence into a low-frequency trend and a high-frequency
residual via the DFT along time, recombines them with a learnable gain,
and sharpens local deviations with a small depthwise filter. Transforms
always run over each item's true length so padding never leaks into the
spectrum.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .sequence import FeatureSequence, Spectrum


def dft(seq: FeatureSequence) -> Spectrum:
    """Per-item DFT along time; bin k of item b lives in coeffs[b, k, d]."""
    coeffs = np.zeros(seq.values.shape, dtype=np.complex128)
    lengths = seq.lengths
    for b in range(seq.batch):
        coeffs[b, : lengths[b]] = np.fft.fft(seq.item(b), axis=0)
    return Spectrum(coeffs, lengths)


def idft(spec: Spectrum) -> FeatureSequence:
    """Inverse transform; inputs must keep Hermitian symmetry."""
    items = []
    for b in range(len(spec.lengths)):
        block = spec.coeffs[b, : spec.lengths[b]]
        rec = np.fft.ifft(block, axis=0)
        scale = max(1.0, float(np.abs(block).max(initial=0.0)))
        if np.abs(rec.imag).max(initial=0.0) > 1e-8 * scale:
            raise ValueError("non-real reconstruction")
        items.append(rec.real)
    return FeatureSequence.from_items(items)


def low_pass(seq: FeatureSequence, cutoff: int) -> FeatureSequence:
    """Keep the `cutoff` lowest bins (and their conjugate mirrors) per item."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    return seq.map_items(lambda x: ad.low_pass_rows(x, cutoff))


def high_pass(seq: FeatureSequence, cutoff: int) -> FeatureSequence:
    """The residual x - low_pass(x): everything above the cutoff."""
    low = low_pass(seq, cutoff)
    return FeatureSequence(seq.values - low.values, seq.mask.copy())


class BandRemix:
    """Low-frequency trend plus gain-scaled high-frequency residual.

    The mix is low + gain^2 * (x - low); the squared parameterization keeps
    the effective gain non-negative. gain=1 is the identity map.
    """

    def __init__(self, store: ParamStore, prefix: str, cutoff: int, gain_init: float = 1.0):
        if cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        self.cutoff = int(cutoff)
        self.hf_gain = store.add(f"{prefix}.hf_gain", np.array(float(gain_init)))

    def apply_item(self, x: Tensor) -> Tensor:
        low = ad.low_pass_time(x, self.cutoff)
        high = ad.sub(x, low)
        return ad.add(low, ad.mul(high, ad.square(self.hf_gain)))

    def forward(self, seq: FeatureSequence) -> FeatureSequence:
        return seq.map_items(lambda x: self.apply_item(Tensor(x)).data)


class LocalContrast:
    """Deviation from a forward-looking window mean, filtered depthwise and
    added back onto the input.

    The deviation at step t compares x_t against the mean of the next
    `window` steps (replicate padding past the right edge); a learnable
    centered depthwise kernel mixes neighboring deviations before the GeLU.
    Constant inputs and window=1 leave the input unchanged.
    """

    def __init__(self, store: ParamStore, prefix: str, channels: int,
                 window: int = 3, kernel: int = 3):
        if window < 1:
            raise ValueError("window must be >= 1")
        if kernel % 2 != 1:
            raise ValueError("kernel must be odd")
        self.window = int(window)
        # delta init: the filter starts as identity over the deviation signal
        taps = np.zeros((kernel, channels))
        taps[kernel // 2] = 1.0
        self.taps = store.add(f"{prefix}.taps", taps)

    def apply_item(self, x: Tensor) -> Tensor:
        dev = ad.sub(x, ad.window_mean(x, self.window))
        mixed = ad.depthwise_conv_time(dev, self.taps, dilation=1, pad_mode="replicate")
        return ad.add(ad.gelu(mixed), x)

    def forward(self, seq: FeatureSequence) -> FeatureSequence:
        return seq.map_items(lambda x: self.apply_item(Tensor(x)).data)


class FeatureEnhancer:
    """Global band remix fused with local contrast, then layer-normalized.

    Both sub-blocks carry an additive copy of the input, so one copy is
    subtracted before normalization to count the residual once.
    """

    def __init__(self, store: ParamStore, prefix: str, channels: int, cutoff: int = 7,
                 window: int = 3, kernel: int = 3, gain_init: float = 1.0):
        self.remix = BandRemix(store, f"{prefix}.remix", cutoff, gain_init)
        self.contrast = LocalContrast(store, f"{prefix}.contrast", channels, window, kernel)

    def apply_item(self, x: Tensor) -> Tensor:
        fused = ad.sub(ad.add(self.remix.apply_item(x), self.contrast.apply_item(x)), x)
        return ad.layer_norm(fused, eps=1e-5)

    def forward(self, seq: FeatureSequence) -> FeatureSequence:
        return seq.map_items(lambda x: self.apply_item(Tensor(x)).data)
