#!/usr/bin/env python3
"""Walk through the frequency-domain feature split.

A toy feature stream is built from a slow drift plus a short burst of
fast oscillation. The demo shows where each part lands in the spectrum,
how the low/high split separates them, and what the learnable band gain
does to the mix. Run it directly; output is deterministic.
"""

import numpy as np

from freqtad.autodiff import ParamStore
from freqtad.frequency import (BandRemix, FeatureEnhancer, LocalContrast,
                               dft, high_pass, low_pass)
from freqtad.rng import Rng
from freqtad.sequence import FeatureSequence


def adjacent_similarity(values):
    """Mean cosine similarity of consecutive timesteps."""
    x = values[0]
    norms = np.linalg.norm(x, axis=1)
    sims = [x[t] @ x[t + 1] / (norms[t] * norms[t + 1])
            for t in range(x.shape[0] - 1)
            if norms[t] > 0 and norms[t + 1] > 0]
    return float(np.mean(sims))


def main():
    rng = Rng(1)
    length, dim = 128, 4
    t = np.arange(length)

    # slow background drift on every channel
    drift = np.sin(2 * np.pi * 2 * t / length)[:, None] * np.ones(dim)
    # fast burst confined to steps 48..80, strongest on channel 0
    burst = np.zeros((length, dim))
    burst[48:80, 0] = 0.8 * np.sin(2 * np.pi * 24 * t[48:80] / length)
    noise = 0.05 * rng.draw_normal((length, dim))
    seq = FeatureSequence.single(drift + burst + noise)

    print("signal: 128 steps, 4 channels, drift at bin 2, burst near bin 24")
    print()

    spec = dft(seq)
    power = (np.abs(spec.coeffs[0]) ** 2).sum(axis=1)
    half = power[: length // 2 + 1]
    top = np.argsort(half)[::-1][:4]
    print("strongest spectral bins (bin: share of total power)")
    for k in sorted(top):
        print(f"  bin {k:3d}: {half[k] / power.sum():.3f}")
    print()

    cutoff = 7
    low = low_pass(seq, cutoff)
    high = high_pass(seq, cutoff)
    total = np.var(seq.values)
    print(f"split at cutoff {cutoff}")
    print(f"  low band variance share  {np.var(low.values) / total:.3f}")
    print(f"  high band variance share {np.var(high.values) / total:.3f}")
    inside = np.abs(high.values[0, 48:80, 0]).mean()
    outside = np.abs(high.values[0, :48, 0]).mean()
    print(f"  burst energy in high band: inside window {inside:.3f}, "
          f"outside {outside:.3f}")
    print()

    print("band gain sweep (gain scales the high band, squared)")
    for gain in (0.0, 0.5, 1.0, 1.5):
        remix = BandRemix(ParamStore(), "g", cutoff=cutoff, gain_init=gain)
        out = remix.forward(seq)
        dev = np.abs(out.values - seq.values).max()
        kept = np.abs(high_pass(out, cutoff).values[0, 48:80, 0]).mean()
        print(f"  gain {gain:3.1f}: max deviation from input {dev:.3f}, "
              f"surviving burst {kept:.3f}")
    print()

    # the full enhancer sharpens local deviations on top of the remix
    store = ParamStore()
    enhancer = FeatureEnhancer(store, "enh", dim, cutoff=cutoff)
    contrast = LocalContrast(ParamStore(), "c", dim)
    print("adjacent-step cosine similarity (lower = less smeared)")
    print(f"  raw input        {adjacent_similarity(seq.values):+.4f}")
    print(f"  low band only    {adjacent_similarity(low.values):+.4f}")
    print(f"  local contrast   {adjacent_similarity(contrast.forward(seq).values):+.4f}")
    print(f"  full enhancer    {adjacent_similarity(enhancer.forward(seq).values):+.4f}")
    print()
    print("the drift is almost perfectly smooth; the burst carries the")
    print("boundary information, and it lives in the high band the gain")
    print("can amplify or mute.")


if __name__ == "__main__":
    main()
