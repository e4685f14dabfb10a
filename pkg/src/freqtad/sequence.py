"""Core data containers: batched feature sequences, spectra, and action instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FeatureSequence:
    """A batch of variable-length temporal feature sequences.

    values has shape (B, L, D), float64, time-major within each batch item.
    mask has shape (B, L), True where the time step is valid. Masked-out
    positions always carry the value 0 so they contribute nothing to
    reductions.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError("values must have shape (B, L, D)")
        b, length, dim = self.values.shape
        if length < 1 or dim < 1:
            raise ValueError("need L >= 1 and D >= 1")
        if self.mask is None:
            self.mask = np.ones((b, length), dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (b, length):
            raise ValueError("mask must have shape (B, L)")
        lengths = self.mask.sum(axis=1)
        if np.any(lengths < 1):
            raise ValueError("every batch item needs at least one valid step")
        # valid steps must form a prefix (pad-to-max-length convention)
        expect = np.arange(length)[None, :] < lengths[:, None]
        if not np.array_equal(self.mask, expect):
            raise ValueError("mask must be a contiguous prefix per batch item")
        self.values = self.values * self.mask[:, :, None]

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def lengths(self) -> np.ndarray:
        """Valid length per batch item."""
        return self.mask.sum(axis=1)

    def item(self, b: int) -> np.ndarray:
        """The valid (unpadded) slice of batch item b, shape (len_b, D)."""
        return self.values[b, : int(self.lengths[b])]

    @classmethod
    def single(cls, arr) -> "FeatureSequence":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        return cls(arr[None], np.ones((1, arr.shape[0]), dtype=bool))

    @classmethod
    def from_items(cls, items) -> "FeatureSequence":
        """Pad a list of (L_i, D) arrays to a common length."""
        items = [np.asarray(a, dtype=np.float64) for a in items]
        dim = items[0].shape[1]
        max_len = max(a.shape[0] for a in items)
        values = np.zeros((len(items), max_len, dim))
        mask = np.zeros((len(items), max_len), dtype=bool)
        for b, a in enumerate(items):
            values[b, : a.shape[0]] = a
            mask[b, : a.shape[0]] = True
        return cls(values, mask)

    def map_items(self, fn) -> "FeatureSequence":
        """Apply fn((L_i, D) array) -> (L'_i, D') per item and re-pad."""
        return FeatureSequence.from_items([fn(self.item(b)) for b in range(self.batch)])


@dataclass
class Spectrum:
    """Per-frequency complex coefficients of a FeatureSequence along time.

    coeffs[b, k, d] holds bin k of item b; only the first lengths[b] bins are
    meaningful (the transform length is the item's true length, not the
    padded one).
    """

    coeffs: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)


@dataclass(frozen=True)
class ActionInstance:
    """One (start, end, label) action segment; units depend on context."""

    start: float
    end: float
    label: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"need start < end, got ({self.start}, {self.end})")

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.end)

    @property
    def span(self) -> float:
        return self.end - self.start


@dataclass
class DetectionCandidate:
    """A scored candidate segment for one video and class."""

    video_id: str
    label: int
    score: float
    start: float
    end: float

    @property
    def segment(self):
        return (self.start, self.end)


@dataclass
class PyramidLevel:
    """One resolution of the temporal pyramid."""

    features: FeatureSequence
    stride: int
    regression_range: tuple = (0.0, math.inf)


@dataclass
class VideoRecord:
    """One dataset entry: features on the time grid plus annotations.

    actions are in feature-grid units; fps converts to seconds
    (seconds = grid / fps). duration is in seconds.
    """

    video_id: str
    features: np.ndarray
    actions: list = field(default_factory=list)
    fps: float = 1.0
    duration: float = 0.0

    def actions_seconds(self) -> list:
        return [ActionInstance(g.start / self.fps, g.end / self.fps, g.label)
                for g in self.actions]
