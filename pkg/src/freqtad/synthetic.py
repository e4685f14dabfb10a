"""Deterministic synthetic benchmark for temporal action detection.

Each video is a smooth low-frequency background drift per channel, plus one
band-limited oscillating motif per embedded action, plus Gaussian noise.
Every class owns a fixed carrier frequency above the drift band and a fixed
channel signature shared across videos and splits, so detecting an action
amounts to spotting its band and direction in the feature stream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .rng import Rng
from .sequence import ActionInstance, VideoRecord

# child-stream offset for per-class signatures; video streams use indices
# below this, so the two families never collide
_CLASS_STREAM_BASE = 1_000_000

_MIN_GAP = 2  # grid steps kept free between neighboring actions


@dataclass(frozen=True)
class SyntheticSpec:
    """Generation recipe; all frequencies are in cycles per grid step."""

    num_videos: int = 200
    min_length: int = 128
    max_length: int = 256
    channels: int = 16
    num_classes: int = 3
    drift_amplitude: float = 1.0
    drift_cutoff: float = 0.02
    drift_components: int = 3
    motif_band: tuple = (0.0625, 0.25)
    motif_amplitude: float = 1.0
    min_action: int = 8
    max_action: int = 40
    min_instances: int = 1
    max_instances: int = 3
    noise_std: float = 0.1
    fps: float = 4.0
    seed: int = 7
    first_index: int = 0  # videos are numbered from here (train/test split)

    def __post_init__(self):
        if self.num_videos < 0:
            raise ValueError("num_videos must be >= 0")
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError("need 1 <= min_length <= max_length")
        if self.channels < 1 or self.num_classes < 1:
            raise ValueError("need channels >= 1 and num_classes >= 1")
        if not 1 <= self.min_action <= self.max_action:
            raise ValueError("need 1 <= min_action <= max_action")
        if not 1 <= self.min_instances <= self.max_instances:
            raise ValueError("need 1 <= min_instances <= max_instances")
        if min(self.drift_amplitude, self.motif_amplitude, self.noise_std) < 0:
            raise ValueError("amplitudes must be >= 0")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        lo, hi = self.motif_band
        if not 0 < lo < hi <= 0.5:
            raise ValueError("motif band must satisfy 0 < lo < hi <= 0.5")
        if lo <= self.drift_cutoff:
            raise ValueError("motif band must sit above the drift cutoff")

    def class_frequency(self, label: int) -> float:
        """Carrier for one class: evenly spaced strictly inside the band."""
        lo, hi = self.motif_band
        return lo + (label + 1) * (hi - lo) / (self.num_classes + 1)


def class_signature(spec: SyntheticSpec, label: int) -> np.ndarray:
    """Fixed per-class channel direction, shared across videos and splits."""
    stream = Rng(spec.seed).child(_CLASS_STREAM_BASE + label)
    vec = stream.draw_normal((spec.channels,))
    return vec / max(np.abs(vec).max(), 1e-12)


def _place_actions(r: Rng, spec: SyntheticSpec, length: int) -> list:
    """Non-overlapping segments via gap splitting; gaps >= _MIN_GAP."""
    count = r.draw_int(spec.min_instances, spec.max_instances)
    spans = [r.draw_int(spec.min_action, spec.max_action) for _ in range(count)]
    free = length - sum(spans) - _MIN_GAP * (count - 1)
    if free < 0:
        raise ValueError("spec infeasible")
    cuts = sorted(r.draw_int(0, free) for _ in range(count))
    bounds = [cuts[0]] + [b - a for a, b in zip(cuts, cuts[1:])]
    actions = []
    cursor = 0
    for gap, span in zip(bounds, spans):
        start = cursor + gap
        label = r.draw_int(0, spec.num_classes - 1)
        actions.append(ActionInstance(float(start), float(start + span), label))
        cursor = start + span + _MIN_GAP
    return actions


def _background(r: Rng, spec: SyntheticSpec, length: int) -> np.ndarray:
    t = np.arange(length, dtype=np.float64)
    drift = np.zeros((length, spec.channels))
    if spec.drift_amplitude == 0.0 or spec.drift_components == 0:
        return drift
    for _ in range(spec.drift_components):
        freq = r.draw_uniform(0.0, spec.drift_cutoff, (spec.channels,))
        phase = r.draw_uniform(0.0, 2.0 * np.pi, (spec.channels,))
        amp = r.draw_normal((spec.channels,), std=spec.drift_amplitude)
        drift += amp * np.sin(2.0 * np.pi * freq * t[:, None] + phase)
    return drift


def generate_synthetic(spec: SyntheticSpec) -> list:
    """Build the full video list for one split, fully determined by seed.

    Raises ValueError("spec infeasible") when the worst-case draw (most and
    longest actions) cannot fit into the shortest possible video.
    """
    worst = spec.max_instances * spec.max_action + _MIN_GAP * (spec.max_instances - 1)
    if worst > spec.min_length:
        raise ValueError("spec infeasible")
    signatures = [class_signature(spec, c) for c in range(spec.num_classes)]
    root = Rng(spec.seed)
    videos = []
    for i in range(spec.num_videos):
        index = spec.first_index + i
        r = root.child(index)
        length = r.draw_int(spec.min_length, spec.max_length)
        features = _background(r, spec, length)
        actions = _place_actions(r, spec, length)
        t = np.arange(length, dtype=np.float64)
        for act in actions:
            freq = spec.class_frequency(act.label)
            phase = r.draw_uniform(0.0, 2.0 * np.pi)
            window = slice(int(act.start), int(act.end))
            wave = np.sin(2.0 * np.pi * freq * (t[window] - act.start) + phase)
            features[window] += spec.motif_amplitude * wave[:, None] * signatures[act.label]
        if spec.noise_std > 0:
            features += r.draw_normal((length, spec.channels), std=spec.noise_std)
        videos.append(VideoRecord(
            video_id=f"video_{index:04d}",
            features=features,
            actions=actions,
            fps=spec.fps,
            duration=length / spec.fps,
        ))
    return videos


def make_benchmark(seed: int = 7, train_videos: int = 200, test_videos: int = 50,
                   **overrides):
    """Standard two-split benchmark; test video numbering continues after
    the train split so the streams never overlap."""
    base = SyntheticSpec(seed=seed, num_videos=train_videos, first_index=0,
                         **overrides)
    test_spec = replace(base, num_videos=test_videos, first_index=train_videos)
    return generate_synthetic(base), generate_synthetic(test_spec)
