"""Target assignment and the training objective.

Classification is a sigmoid focal loss over every position, class, and
level; regression is a 1-D distance-IoU loss over positive positions only.
Both are normalized by the positive count, clamped to at least one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .sequence import ActionInstance

_CLAMP = 1e-7
_COL_S = np.array([[1.0], [0.0]])
_COL_E = np.array([[0.0], [1.0]])


@dataclass
class LossConfig:
    alpha: float = 0.25
    gamma: float = 2.0
    lambda_reg: float = 1.0
    center_radius: float = 1.5  # in level strides

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.gamma < 0 or self.lambda_reg < 0:
            raise ValueError("gamma and lambda_reg must be >= 0")


@dataclass
class TargetMap:
    """Assignment result for one item: per level, a label per position
    (-1 for negative) and (d_start, d_end) distances in level-grid units."""

    labels: list
    distances: list
    positive_count: int = field(init=False)

    def __post_init__(self):
        self.positive_count = int(sum((lab >= 0).sum() for lab in self.labels))


def assign_targets(gt: "list[ActionInstance]", level_lengths: list, strides: list, ranges: list,
                   center_radius: float = 1.5) -> TargetMap:
    """Assign ground-truth segments (input-grid units) to pyramid positions.

    A position owns a segment when its coordinate falls strictly inside it,
    lies within center_radius strides of the segment center, and the larger
    boundary distance (input-grid units) falls in the level's range. Among
    several eligible segments the shortest wins.
    """
    labels, distances = [], []
    for length, stride, (lo, hi) in zip(level_lengths, strides, ranges):
        lab = np.full(length, -1, dtype=np.int64)
        dist = np.zeros((length, 2))
        best_span = np.full(length, np.inf)
        coords = np.arange(length, dtype=np.float64) * stride
        for g in gt:
            inside = (coords > g.start) & (coords < g.end)
            central = np.abs(coords - g.center) <= center_radius * stride
            d_s = coords - g.start
            d_e = g.end - coords
            reach = np.maximum(d_s, d_e)
            in_range = (reach > lo) & (reach <= hi)
            take = inside & central & in_range & (g.span < best_span)
            lab[take] = g.label
            dist[take, 0] = d_s[take] / stride
            dist[take, 1] = d_e[take] / stride
            best_span[take] = g.span
        labels.append(lab)
        distances.append(dist)
    return TargetMap(labels, distances)


def focal_loss(p, is_positive, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """Focal terms summed over all entries, divided by the positive count
    (at least 1). Probabilities are clamped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=np.float64), _CLAMP, 1.0 - _CLAMP)
    pos = np.asarray(is_positive, dtype=bool)
    pt = np.where(pos, p, 1.0 - p)
    weight = np.where(pos, alpha, 1.0 - alpha)
    terms = -weight * (1.0 - pt) ** gamma * np.log(pt)
    return float(terms.sum() / max(int(pos.sum()), 1))


def diou_1d(pred, gt) -> float:
    """IoU minus the squared center gap over the squared enclosing span."""
    (ps, pe), (gs, ge) = pred, gt
    if not (ps < pe and gs < ge):
        raise ValueError("degenerate interval")
    inter = max(0.0, min(pe, ge) - max(ps, gs))
    union = (pe - ps) + (ge - gs) - inter
    iou = inter / union
    gap = 0.5 * (ps + pe) - 0.5 * (gs + ge)
    enclose = max(pe, ge) - min(ps, gs)
    return iou - (gap * gap) / (enclose * enclose)


def _focal_tape(logits: Tensor, one_hot: np.ndarray, cfg: LossConfig) -> Tensor:
    p = ad.sigmoid(logits)
    pt = ad.add(ad.mul(p, one_hot), ad.mul(ad.sub(1.0, p), 1.0 - one_hot))
    pt = ad.maximum(ad.minimum(pt, 1.0 - _CLAMP), _CLAMP)
    weight = cfg.alpha * one_hot + (1.0 - cfg.alpha) * (1.0 - one_hot)
    focus = ad.power(ad.sub(1.0, pt), cfg.gamma) if cfg.gamma != 2.0 else ad.square(ad.sub(1.0, pt))
    return ad.sum_all(ad.mul(Tensor(weight), ad.mul(focus, ad.mul(ad.log(pt), -1.0))))


def _diou_sum_tape(offsets: Tensor, idx: np.ndarray, dist: np.ndarray) -> Tensor:
    """Sum of (1 - DIoU) over the positive rows idx of one level."""
    picked = ad.take_time(offsets, idx)  # (P, 2)
    pos = idx.astype(np.float64)
    d_s = ad.reshape(ad.matmul(picked, Tensor(_COL_S)), (-1,))
    d_e = ad.reshape(ad.matmul(picked, Tensor(_COL_E)), (-1,))
    ps = ad.sub(Tensor(pos), d_s)
    pe = ad.add(Tensor(pos), d_e)
    gs = pos - dist[:, 0]
    ge = pos + dist[:, 1]
    inter = ad.sub(ad.minimum(pe, Tensor(ge)), ad.maximum(ps, Tensor(gs)))
    union = ad.sub(ad.add(ad.add(d_s, d_e), ge - gs), inter)
    iou = ad.div(inter, union)
    gap = ad.sub(ad.mul(ad.add(ps, pe), 0.5), 0.5 * (gs + ge))
    enclose = ad.sub(ad.maximum(pe, Tensor(ge)), ad.minimum(ps, Tensor(gs)))
    diou = ad.sub(iou, ad.div(ad.square(gap), ad.square(enclose)))
    return ad.sum_all(ad.sub(1.0, diou))


def loss_item_tape(head_out: list, targets: TargetMap, cfg: LossConfig,
                   normalizer: float) -> Tensor:
    """Unreduced objective for one item as a graph node, scaled by
    1/normalizer. head_out pairs (logits, offsets) per level."""
    all_logits = ad.concat_time([logits for logits, _ in head_out])
    one_hot = np.zeros(all_logits.data.shape)
    row = 0
    for lab in targets.labels:
        positive = np.nonzero(lab >= 0)[0]
        one_hot[row + positive, lab[positive]] = 1.0
        row += lab.shape[0]
    total = _focal_tape(all_logits, one_hot, cfg)
    if cfg.lambda_reg > 0:
        for (_, offsets), lab, dist in zip(head_out, targets.labels, targets.distances):
            idx = np.nonzero(lab >= 0)[0]
            if idx.size:
                total = ad.add(total, ad.mul(_diou_sum_tape(offsets, idx, dist[idx]),
                                             cfg.lambda_reg))
    return ad.mul(total, 1.0 / normalizer)


def total_loss(head_out: list, targets: TargetMap, cfg: LossConfig) -> float:
    """Combined objective for one item, normalized by max(positives, 1).

    head_out pairs per level: (logits (L,C), offsets (L,2)), arrays or
    Tensors.
    """
    tapes = [(t if isinstance(t, Tensor) else Tensor(t),
              o if isinstance(o, Tensor) else Tensor(o)) for t, o in head_out]
    norm = float(max(targets.positive_count, 1))
    return loss_item_tape(tapes, targets, cfg, norm).item()
