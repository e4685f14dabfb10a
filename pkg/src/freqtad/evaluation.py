"""Detection evaluation: temporal IoU, NMS, and mean average precision.

Inputs are keyed by video id: predictions as DetectionCandidate lists,
ground truth as ActionInstance lists, both in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sequence import DetectionCandidate


def threshold_grid(start: float, stop: float, step: float) -> tuple:
    """Inclusive arithmetic grid with decimal rounding, e.g. 0.5:0.95:0.05."""
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass
class EvalProtocol:
    tiou_thresholds: tuple = threshold_grid(0.5, 0.95, 0.05)
    nms_mode: str = "hard"
    nms_threshold: float = 0.5
    soft_sigma: float = 0.5
    score_floor: float = 0.001
    max_dets_per_video: int = 100

    def __post_init__(self):
        self.tiou_thresholds = tuple(float(t) for t in self.tiou_thresholds)
        if not self.tiou_thresholds:
            raise ValueError("need at least one tIoU threshold")
        if any(not 0.0 < t <= 1.0 for t in self.tiou_thresholds):
            raise ValueError("tIoU thresholds must lie in (0, 1]")
        if any(b <= a for a, b in zip(self.tiou_thresholds, self.tiou_thresholds[1:])):
            raise ValueError("tIoU thresholds must be strictly increasing")
        if self.nms_mode not in ("hard", "soft"):
            raise ValueError(f"unknown nms mode: {self.nms_mode}")


def interval_iou(a, b) -> float:
    (a_s, a_e), (b_s, b_e) = a, b
    if not (a_s < a_e and b_s < b_e):
        raise ValueError("degenerate interval")
    inter = max(0.0, min(a_e, b_e) - max(a_s, b_s))
    if inter == 0.0:
        return 0.0
    return inter / ((a_e - a_s) + (b_e - b_s) - inter)


def _rank_key(c: DetectionCandidate):
    # score descending, then earlier/shorter segment, then label: stable runs
    return (-c.score, c.start, c.end, c.label)


def nms(cands: list, protocol: EvalProtocol) -> list:
    """Class-wise suppression over one video's candidates.

    Hard mode keeps the greedy score-order survivors with scores unchanged;
    soft mode decays overlapping scores by exp(-tIoU^2 / sigma) and drops
    anything that falls below the score floor.
    """
    survivors = []
    for label in sorted({c.label for c in cands}):
        pool = sorted((c for c in cands if c.label == label), key=_rank_key)
        if protocol.nms_mode == "hard":
            while pool:
                best = pool.pop(0)
                survivors.append(best)
                pool = [c for c in pool
                        if interval_iou(best.segment, c.segment) <= protocol.nms_threshold]
        else:
            scores = [c.score for c in pool]
            while pool:
                i = int(np.argmax(scores))
                best, best_score = pool.pop(i), scores.pop(i)
                survivors.append(DetectionCandidate(
                    best.video_id, best.label, best_score, best.start, best.end))
                nxt_pool, nxt_scores = [], []
                for c, s in zip(pool, scores):
                    iou = interval_iou(best.segment, c.segment)
                    s = s * math.exp(-(iou * iou) / protocol.soft_sigma)
                    if s >= protocol.score_floor:
                        nxt_pool.append(c)
                        nxt_scores.append(s)
                pool, scores = nxt_pool, nxt_scores
    survivors.sort(key=_rank_key)
    return survivors[: protocol.max_dets_per_video]


def match_predictions(preds: dict, gts: dict, label: int, tiou: float):
    """Greedy score-order matching of one class across all videos.

    Returns (ranked predictions, per-prediction matched flag, per-video
    matched-GT flags). Each GT matches at most once; ties between GTs at
    equal tIoU go to the earlier-starting one.
    """
    ranked = sorted(
        (c for vid in sorted(preds) for c in preds[vid] if c.label == label),
        key=lambda c: (-c.score, c.start, c.end, c.video_id),
    )
    # iterate GTs in start order: a strict improvement test then breaks
    # equal-tIoU ties toward the earlier-starting GT
    gt_by_vid = {
        vid: sorted((g for g in gts.get(vid, []) if g.label == label),
                    key=lambda g: (g.start, g.end))
        for vid in gts
    }
    matched_gt = {vid: [False] * len(items) for vid, items in gt_by_vid.items()}
    hits = []
    for c in ranked:
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(gt_by_vid.get(c.video_id, [])):
            if matched_gt[c.video_id][j]:
                continue
            iou = interval_iou(c.segment, (g.start, g.end))
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= tiou:
            matched_gt[c.video_id][best_j] = True
            hits.append(True)
        else:
            hits.append(False)
    return ranked, hits, matched_gt


def average_precision(preds: dict, gts: dict, label: int, tiou: float):
    """Interpolated AP for one class at one threshold; None when the class
    has no ground truth."""
    num_gt = sum(1 for items in gts.values() for g in items if g.label == label)
    if num_gt == 0:
        return None
    _, hits, _ = match_predictions(preds, gts, label, tiou)
    if not hits:
        return 0.0
    tp = np.cumsum(np.asarray(hits, dtype=np.float64))
    recall = tp / num_gt
    precision = tp / np.arange(1, tp.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev) * envelope).sum())


@dataclass
class EvalResult:
    thresholds: tuple
    map_values: list
    average: float
    per_class: dict = field(default_factory=dict)  # label -> AP list over thresholds

    def rows(self):
        return list(zip(self.thresholds, self.map_values))


def evaluate_map(preds: dict, gts: dict, protocol: EvalProtocol) -> EvalResult:
    """mAP at each protocol threshold plus their mean, over classes that
    appear in the ground truth."""
    labels = sorted({g.label for items in gts.values() for g in items})
    per_class = {lab: [] for lab in labels}
    map_values = []
    for tiou in protocol.tiou_thresholds:
        aps = []
        for lab in labels:
            ap = average_precision(preds, gts, lab, tiou)
            per_class[lab].append(ap)
            aps.append(ap)
        map_values.append(float(np.mean(aps)) if aps else 0.0)
    average = float(np.mean(map_values)) if map_values else 0.0
    return EvalResult(protocol.tiou_thresholds, map_values, average, per_class)
