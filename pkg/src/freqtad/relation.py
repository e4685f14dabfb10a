"""Long/short-range temporal relation modeling and the multi-scale pyramid.

Each relation block runs three parallel views of the sequence: a
bidirectional linear state-space scan for long-range structure, summed
dilated depthwise convolutions for short-range structure, and a pooled
channel-context vector. A small FFN with a residual connection fuses
the three views.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .rng import Rng
from .sequence import FeatureSequence

DILATIONS = (1, 2, 4)


def _mat(store: ParamStore, name: str, rng: Rng, rows: int, cols: int, scale=None):
    scale = (1.0 / math.sqrt(rows)) if scale is None else scale
    return store.add(name, rng.draw_normal((rows, cols), std=scale))


class StateSpaceBranch:
    """Bidirectional diagonal linear recurrence with gated output.

    Per direction: u = in_proj(x); h_t = decay * h_{t-1} + gain * u_t;
    z = h @ proj_state + u @ proj_input; f = SiLU(z @ gate_state +
    u @ gate_input). One parameter set serves both directions; the
    backward direction scans the reversed sequence. The two direction
    features are concatenated and projected back to the model width.
    """

    def __init__(self, store: ParamStore, prefix: str, channels: int,
                 latent: int, rng: Rng):
        self.latent = latent
        self.in_proj = _mat(store, f"{prefix}.in_proj", rng, channels, latent)
        self.in_bias = store.add(f"{prefix}.in_bias", np.zeros(latent))
        # spread of initial decays gives the scan a range of memory lengths
        self.decay_raw = store.add(f"{prefix}.decay_raw", np.linspace(0.5, 3.0, latent))
        self.gain = store.add(f"{prefix}.gain", np.ones(latent))
        self.proj_state = _mat(store, f"{prefix}.proj_state", rng, latent, latent)
        self.proj_input = _mat(store, f"{prefix}.proj_input", rng, latent, latent)
        self.gate_state = _mat(store, f"{prefix}.gate_state", rng, latent, latent)
        self.gate_input = _mat(store, f"{prefix}.gate_input", rng, latent, latent)
        self.out_proj = _mat(store, f"{prefix}.out_proj", rng, 2 * latent, channels)
        self.out_bias = store.add(f"{prefix}.out_bias", np.zeros(channels))

    def _direction_features(self, x: Tensor):
        u = ad.add(ad.matmul(x, self.in_proj), self.in_bias)
        decay = ad.sigmoid(self.decay_raw)
        driven = ad.mul(u, self.gain)
        h_fwd = ad.linear_scan(driven, decay)
        h_bwd = ad.reverse_time(ad.linear_scan(ad.reverse_time(driven), decay))
        feats = []
        for h in (h_fwd, h_bwd):
            z = ad.add(ad.matmul(h, self.proj_state), ad.matmul(u, self.proj_input))
            feats.append(ad.silu(ad.add(ad.matmul(z, self.gate_state),
                                        ad.matmul(u, self.gate_input))))
        return feats

    def apply_item(self, x: Tensor) -> Tensor:
        f_fwd, f_bwd = self._direction_features(x)
        both = ad.concat_channels([f_fwd, f_bwd])
        return ad.add(ad.matmul(both, self.out_proj), self.out_bias)


class DilatedConvBranch:
    """Sum of depthwise kernel-3 convolutions at dilations 1, 2, 4.

    No bias terms, so the branch is linear in its input.
    """

    def __init__(self, store: ParamStore, prefix: str, channels: int, rng: Rng):
        scale = 1.0 / math.sqrt(3 * len(DILATIONS))
        self.taps = [
            store.add(f"{prefix}.taps_r{r}", rng.draw_normal((3, channels), std=scale))
            for r in DILATIONS
        ]

    def apply_item(self, x: Tensor) -> Tensor:
        total = None
        for r, taps in zip(DILATIONS, self.taps):
            y = ad.depthwise_conv_time(x, taps, dilation=r, pad_mode="zero")
            total = y if total is None else ad.add(total, y)
        return total


class ChannelContextBranch:
    """Global average over valid time, GeLU, pointwise projection, broadcast.

    The output is constant along time: a per-channel context signature.
    """

    def __init__(self, store: ParamStore, prefix: str, channels: int, rng: Rng):
        self.proj = _mat(store, f"{prefix}.proj", rng, channels, channels)
        self.bias = store.add(f"{prefix}.bias", np.zeros(channels))

    def apply_item(self, x: Tensor) -> Tensor:
        pooled = ad.gelu(ad.mean_time(x))
        row = ad.reshape(pooled, (1, pooled.data.shape[0]))
        context = ad.add(ad.reshape(ad.matmul(row, self.proj), (-1,)), self.bias)
        return ad.broadcast_time(context, x.data.shape[0])


class RelationBlock:
    """Fuse the three branch views through an FFN, residually."""

    def __init__(self, store: ParamStore, prefix: str, channels: int,
                 latent: int, rng: Rng):
        self.state = StateSpaceBranch(store, f"{prefix}.state", channels, latent, rng)
        self.dilated = DilatedConvBranch(store, f"{prefix}.dilated", channels, rng)
        self.channel = ChannelContextBranch(store, f"{prefix}.channel", channels, rng)
        # small fusion init keeps the block near-identity at step 0
        self.fuse = _mat(store, f"{prefix}.fuse", rng, 3 * channels, channels,
                         scale=0.1 / math.sqrt(3 * channels))
        self.ffn_in = _mat(store, f"{prefix}.ffn_in", rng, channels, 2 * channels)
        self.ffn_out = _mat(store, f"{prefix}.ffn_out", rng, 2 * channels, channels)

    def apply_item(self, x: Tensor) -> Tensor:
        branches = ad.concat_channels([
            self.state.apply_item(x),
            self.dilated.apply_item(x),
            self.channel.apply_item(x),
        ])
        fused = ad.matmul(branches, self.fuse)
        out = ad.matmul(ad.gelu(ad.matmul(fused, self.ffn_in)), self.ffn_out)
        return ad.add(out, x)


class ConvBlock:
    """Plain kernel-3 convolution block: the relation-block ablation stand-in."""

    def __init__(self, store: ParamStore, prefix: str, channels: int, rng: Rng):
        scale = 1.0 / math.sqrt(3 * channels)
        self.weight = store.add(f"{prefix}.weight", rng.draw_normal((3, channels, channels), std=scale))
        self.bias = store.add(f"{prefix}.bias", np.zeros(channels))

    def apply_item(self, x: Tensor) -> Tensor:
        return ad.add(ad.gelu(ad.conv1d(x, self.weight, self.bias)), x)


def level_ranges(num_down: int):
    """Regression ranges (lo, hi] per level, partitioning (0, inf).

    Doubling scheme: (0,4], (4,8], (8,16], ... with the last level open.
    num_down=0 collapses to a single all-covering range.
    """
    if num_down == 0:
        return [(0.0, math.inf)]
    ranges = [(0.0, 4.0)]
    for level in range(1, num_down + 1):
        lo = float(2 ** (level + 1))
        hi = math.inf if level == num_down else float(2 ** (level + 2))
        ranges.append((lo, hi))
    return ranges


def build_pyramid_item(x: Tensor, true_length: int, blocks_per_level: list, num_down: int):
    """Run the block stack at full resolution, then `num_down` rounds of
    halve-and-refine. Returns one feature Tensor per level.

    blocks_per_level holds num_down+1 lists of blocks (distinct parameters
    per level). true_length is the item's valid length before padding was
    stripped; the caller passes unpadded tensors, so it equals x rows.
    """
    if true_length < 2 ** num_down:
        raise ValueError("sequence too short for pyramid")
    levels = []
    cur = x
    for level, blocks in enumerate(blocks_per_level):
        if level > 0:
            cur = ad.maxpool2_time(cur)
        for block in blocks:
            cur = block.apply_item(cur)
        levels.append(cur)
    return levels


def level_lengths(true_length: int, num_down: int) -> list:
    """Valid length per level: repeated ceiling halving."""
    out = [int(true_length)]
    for _ in range(num_down):
        out.append((out[-1] + 1) // 2)
    return out
