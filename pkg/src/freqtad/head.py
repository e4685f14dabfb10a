"""Anchor-free detection head and candidate decoding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .autodiff import ParamStore
from .rng import Rng
from .sequence import DetectionCandidate


@dataclass
class HeadOutput:
    """Per-level head outputs for one batch, padded to each level's max length.

    class_logits[l] has shape (B, L_l, C); offsets[l] has shape (B, L_l, 2)
    holding non-negative (start, end) distances in level-grid units.
    level_lengths[l][b] is item b's valid length at level l; input_lengths[b]
    is its valid length on the input grid.
    """

    class_logits: list
    offsets: list
    strides: list
    level_lengths: list
    input_lengths: np.ndarray
    video_ids: list = field(default_factory=list)


class DetectionHead:
    """Two shared conv towers (kernel 3) feeding a C-way classification
    projection and a 2-way softplus distance projection.

    The same weights score every pyramid level; scale specialization comes
    from the per-level regression ranges, not from separate heads.
    """

    def __init__(self, store: ParamStore, prefix: str, channels: int,
                 num_classes: int, width: int, depth: int, rng: Rng):
        self.num_classes = num_classes
        self.cls_tower = self._tower(store, f"{prefix}.cls", channels, width, depth, rng)
        self.reg_tower = self._tower(store, f"{prefix}.reg", channels, width, depth, rng)
        self.cls_proj = store.add(f"{prefix}.cls_proj", rng.draw_normal((width, num_classes), std=0.01))
        # negative bias starts every position as an unlikely detection,
        # keeping the focal loss away from its saturated regime
        self.cls_bias = store.add(f"{prefix}.cls_bias", np.full(num_classes, -2.0))
        self.reg_proj = store.add(f"{prefix}.reg_proj", rng.draw_normal((width, 2), std=0.01))
        self.reg_bias = store.add(f"{prefix}.reg_bias", np.zeros(2))

    @staticmethod
    def _tower(store, prefix, channels, width, depth, rng):
        layers = []
        d_in = channels
        for i in range(depth):
            scale = 1.0 / math.sqrt(3 * d_in)
            w = store.add(f"{prefix}.conv{i}.weight", rng.draw_normal((3, d_in, width), std=scale))
            b = store.add(f"{prefix}.conv{i}.bias", np.zeros(width))
            layers.append((w, b))
            d_in = width
        return layers

    def apply_item(self, level_feats: list):
        """Map per-level feature Tensors to (logits, offsets) Tensor pairs."""
        outputs = []
        for feat in level_feats:
            c = feat
            for w, b in self.cls_tower:
                c = ad.gelu(ad.conv1d(c, w, b))
            logits = ad.add(ad.matmul(c, self.cls_proj), self.cls_bias)
            r = feat
            for w, b in self.reg_tower:
                r = ad.gelu(ad.conv1d(r, w, b))
            offsets = ad.softplus(ad.add(ad.matmul(r, self.reg_proj), self.reg_bias))
            outputs.append((logits, offsets))
        return outputs


def decode_candidates(out: HeadOutput, score_floor: float = 0.001,
                      pre_nms_topk: int = 200) -> list:
    """Turn head outputs into scored segment candidates, per video.

    Position i at stride s maps to ((i - d_s) * s, (i + d_e) * s) on the
    input grid; segments are clamped to [0, true_length], empty ones and
    scores below the floor dropped, and the best pre_nms_topk per video
    kept. Returns one candidate list per batch item.
    """
    batch = out.input_lengths.shape[0]
    per_video = []
    for b in range(batch):
        video_id = out.video_ids[b] if out.video_ids else str(b)
        true_len = float(out.input_lengths[b])
        starts, ends, scores, labels = [], [], [], []
        for logits, offsets, stride, lengths in zip(
                out.class_logits, out.offsets, out.strides, out.level_lengths):
            valid = lengths[b]
            if valid == 0:
                continue
            pos = np.arange(valid, dtype=np.float64)
            seg_s = (pos - offsets[b, :valid, 0]) * stride
            seg_e = (pos + offsets[b, :valid, 1]) * stride
            seg_s = np.maximum(seg_s, 0.0)
            seg_e = np.minimum(seg_e, true_len)
            prob = expit(logits[b, :valid])  # (valid, C)
            keep_pos, keep_cls = np.nonzero((prob >= score_floor) & (seg_s < seg_e)[:, None])
            starts.append(seg_s[keep_pos])
            ends.append(seg_e[keep_pos])
            scores.append(prob[keep_pos, keep_cls])
            labels.append(keep_cls)
        if not starts:
            per_video.append([])
            continue
        starts = np.concatenate(starts)
        ends = np.concatenate(ends)
        scores = np.concatenate(scores)
        labels = np.concatenate(labels)
        # stable sort keeps enumeration order among equal scores
        order = np.argsort(-scores, kind="stable")[:pre_nms_topk]
        per_video.append([
            DetectionCandidate(video_id, int(labels[i]), float(scores[i]),
                               float(starts[i]), float(ends[i]))
            for i in order
        ])
    return per_video
