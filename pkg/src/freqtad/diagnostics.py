"""Post-hoc detection analysis: characteristic bins, false-positive
taxonomy, false-negative and sensitivity profiles, and a layer-wise
feature-smoothness probe.

Inputs mirror the evaluation module: predictions and ground truth keyed by
video id, in seconds, plus per-video durations in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import (average_precision, interval_iou, match_predictions,
                         threshold_grid)

CATEGORIES = ("true-positive", "double-detection", "wrong-label",
              "localization", "confusion", "background")
ERROR_CATEGORIES = CATEGORIES[1:]

# tIoU below this counts as no overlap at all
_NEAR_ZERO_IOU = 0.01

_COVERAGE_BINS = ((0.02, "XS"), (0.04, "S"), (0.06, "M"), (0.08, "L"),
                  (1.0, "XL"))
_LENGTH_BINS = ((3.0, "XS"), (6.0, "S"), (12.0, "M"), (18.0, "L"),
                (np.inf, "XL"))
_COUNT_BINS = ((1, "XS"), (40, "S"), (80, "M"), (np.inf, "L"))

CHARACTERISTICS = ("coverage", "length", "count")


@dataclass(frozen=True)
class CharacteristicBins:
    coverage: str
    length: str
    count: str


def _bin_of(value, bins):
    for upper, name in bins:
        if value <= upper:
            return name
    return bins[-1][1]


def bin_characteristics(gt, duration: float, same_class_count: int) -> CharacteristicBins:
    """Place one ground-truth segment (seconds) into its three bins.

    Coverage is the fraction of the video the segment spans; length is its
    absolute span in seconds; count is how many same-class segments its
    video holds (including itself).
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if same_class_count < 1:
        raise ValueError("count includes the segment itself, so >= 1")
    return CharacteristicBins(
        coverage=_bin_of(gt.span / duration, _COVERAGE_BINS),
        length=_bin_of(gt.span, _LENGTH_BINS),
        count=_bin_of(same_class_count, _COUNT_BINS),
    )


def _ranked_by_class(preds: dict) -> dict:
    """Predictions grouped by label, each group in evaluation rank order."""
    by_class = {}
    for vid in sorted(preds):
        for c in preds[vid]:
            by_class.setdefault(c.label, []).append(c)
    for label in by_class:
        by_class[label].sort(key=lambda c: (-c.score, c.start, c.end, c.video_id))
    return by_class


def _gt_counts(gts: dict) -> dict:
    counts = {}
    for items in gts.values():
        for g in items:
            counts[g.label] = counts.get(g.label, 0) + 1
    return counts


def categorize(preds_ranked: list, gts: dict, tiou: float) -> list:
    """Category per prediction for one class, preds already in rank order.

    Greedy same-label matching decides true positives; the remaining rules
    are applied in fixed precedence (double-detection, wrong-label,
    localization, confusion, background).
    """
    if not preds_ranked:
        return []
    label = preds_ranked[0].label
    same_by_vid = {
        vid: sorted((g for g in gts.get(vid, []) if g.label == label),
                    key=lambda g: (g.start, g.end))
        for vid in gts
    }
    other_by_vid = {
        vid: [g for g in gts.get(vid, []) if g.label != label] for vid in gts
    }
    matched = {vid: [False] * len(items) for vid, items in same_by_vid.items()}
    out = []
    for c in preds_ranked:
        same = same_by_vid.get(c.video_id, [])
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(same):
            if matched[c.video_id][j]:
                continue
            iou = interval_iou(c.segment, (g.start, g.end))
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= tiou:
            matched[c.video_id][best_j] = True
            out.append("true-positive")
            continue
        iou_same = max((interval_iou(c.segment, (g.start, g.end)) for g in same),
                       default=0.0)
        iou_other = max((interval_iou(c.segment, (g.start, g.end))
                         for g in other_by_vid.get(c.video_id, [])), default=0.0)
        if iou_same >= tiou:
            out.append("double-detection")
        elif iou_other >= tiou:
            out.append("wrong-label")
        elif iou_same >= _NEAR_ZERO_IOU:
            out.append("localization")
        elif iou_other >= _NEAR_ZERO_IOU:
            out.append("confusion")
        else:
            out.append("background")
    return out


@dataclass
class FPProfile:
    counts: dict       # k -> {category: count over all classes}
    impact: dict       # error category -> mean mAP gain from deleting it
    thresholds: tuple  # tIoU grid behind the impact numbers


def _mean_ap(preds: dict, gts: dict, labels, tiou: float) -> float:
    aps = [average_precision(preds, gts, lab, tiou) for lab in labels]
    aps = [a for a in aps if a is not None]
    return float(np.mean(aps)) if aps else 0.0


def _as_pred_dict(cands: list) -> dict:
    out = {}
    for c in cands:
        out.setdefault(c.video_id, []).append(c)
    return out


def classify_fp(preds: dict, gts: dict, tiou: float = 0.5, k_max: int = 5,
                thresholds: tuple = None) -> FPProfile:
    """Rank-budgeted false-positive taxonomy plus removal impact.

    For k = 1..k_max, the top k*G predictions per class are retained (G is
    that class's ground-truth count) and categorized at `tiou`. Impact is
    measured on the k_max budget: for each grid threshold, predictions are
    re-categorized, one error category is deleted, and the mAP gain is
    recorded; the report carries the mean gain per category.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    thresholds = tuple(thresholds) if thresholds else threshold_grid(0.5, 0.95, 0.05)
    by_class = _ranked_by_class(preds)
    gt_counts = _gt_counts(gts)
    labels = sorted(gt_counts)

    counts = {}
    for k in range(1, k_max + 1):
        tally = {cat: 0 for cat in CATEGORIES}
        for label in labels:
            retained = by_class.get(label, [])[: k * gt_counts[label]]
            for cat in categorize(retained, gts, tiou):
                tally[cat] += 1
        counts[k] = tally

    budget = []
    for label in labels:
        budget.extend(by_class.get(label, [])[: k_max * gt_counts[label]])
    impact = {cat: 0.0 for cat in ERROR_CATEGORIES}
    for tau in thresholds:
        cats = {}
        for label in labels:
            retained = by_class.get(label, [])[: k_max * gt_counts[label]]
            for c, cat in zip(retained, categorize(retained, gts, tau)):
                cats[id(c)] = cat
        base = _mean_ap(_as_pred_dict(budget), gts, labels, tau)
        for cat in ERROR_CATEGORIES:
            kept = [c for c in budget if cats[id(c)] != cat]
            gain = _mean_ap(_as_pred_dict(kept), gts, labels, tau) - base
            impact[cat] += gain / len(thresholds)
    return FPProfile(counts=counts, impact=impact, thresholds=thresholds)


def _gt_bins(gts: dict, durations: dict) -> dict:
    """CharacteristicBins for every GT, keyed by (video, index)."""
    out = {}
    for vid, items in gts.items():
        per_label = {}
        for g in items:
            per_label[g.label] = per_label.get(g.label, 0) + 1
        for j, g in enumerate(items):
            out[(vid, j)] = bin_characteristics(g, durations[vid],
                                                per_label[g.label])
    return out


@dataclass
class FNProfile:
    rates: dict    # characteristic -> {bin: miss fraction}
    overall: float


def fn_profile(preds: dict, gts: dict, durations: dict,
               tiou: float = 0.5) -> FNProfile:
    """Miss fraction per characteristic bin after greedy matching."""
    labels = sorted({g.label for items in gts.values() for g in items})
    missed = {}
    for vid, items in gts.items():
        missed[vid] = [True] * len(items)
    for label in labels:
        _, _, matched = match_predictions(preds, gts, label, tiou)
        for vid, flags in matched.items():
            ordered = sorted(
                (j for j, g in enumerate(gts[vid]) if g.label == label),
                key=lambda j: (gts[vid][j].start, gts[vid][j].end))
            for slot, j in enumerate(ordered):
                missed[vid][j] = not flags[slot]
    bins = _gt_bins(gts, durations)
    totals = {char: {} for char in CHARACTERISTICS}
    misses = {char: {} for char in CHARACTERISTICS}
    total_gt = total_fn = 0
    for vid, items in gts.items():
        for j, _ in enumerate(items):
            b = bins[(vid, j)]
            total_gt += 1
            total_fn += int(missed[vid][j])
            for char in CHARACTERISTICS:
                name = getattr(b, char)
                totals[char][name] = totals[char].get(name, 0) + 1
                misses[char][name] = misses[char].get(name, 0) + int(missed[vid][j])
    rates = {
        char: {name: misses[char][name] / totals[char][name]
               for name in sorted(totals[char])}
        for char in CHARACTERISTICS
    }
    overall = total_fn / total_gt if total_gt else 0.0
    return FNProfile(rates=rates, overall=overall)


@dataclass
class SensitivityProfile:
    overall: float
    maps: dict      # characteristic -> {bin: average mAP on that bin's GT}
    relative: dict  # same keys: (bin mAP - overall) / overall

    def bins(self, characteristic: str) -> list:
        return sorted(self.maps[characteristic])


def sensitivity_profile(preds: dict, gts: dict, durations: dict,
                        thresholds: tuple = None) -> SensitivityProfile:
    """Average mAP with ground truth restricted to one bin at a time.

    All predictions stay in play; only the GT set shrinks, so the metric
    is normalized by the restricted counts. Bins with no GT are absent.
    """
    thresholds = tuple(thresholds) if thresholds else threshold_grid(0.5, 0.95, 0.05)
    bins = _gt_bins(gts, durations)

    def avg_map(restricted: dict) -> float:
        labels = sorted({g.label for items in restricted.values() for g in items})
        if not labels:
            return 0.0
        return float(np.mean([_mean_ap(preds, restricted, labels, tau)
                              for tau in thresholds]))

    overall = avg_map(gts)
    maps, relative = {}, {}
    for char in CHARACTERISTICS:
        names = sorted({getattr(b, char) for b in bins.values()})
        maps[char], relative[char] = {}, {}
        for name in names:
            restricted = {
                vid: [g for j, g in enumerate(items)
                      if getattr(bins[(vid, j)], char) == name]
                for vid, items in gts.items()
            }
            restricted = {vid: items for vid, items in restricted.items() if items}
            if not restricted:
                continue
            value = avg_map(restricted)
            maps[char][name] = value
            relative[char][name] = ((value - overall) / overall
                                    if overall > 0 else 0.0)
    return SensitivityProfile(overall=overall, maps=maps, relative=relative)


def layer_similarity(model, features: np.ndarray) -> dict:
    """Mean adjacent-timestep cosine similarity at every probe point.

    Pairs containing a zero vector are skipped; probes with no valid pair
    are absent from the result.
    """
    _, probes = model.forward_item(np.asarray(features, dtype=np.float64),
                                   want_probes=True)
    order = [name for name in ("input", "enhanced") if name in probes]
    order += sorted((n for n in probes if n.startswith("level")),
                    key=lambda n: int(n[len("level"):]))
    out = {}
    for name in order:
        x = probes[name]
        norms = np.linalg.norm(x, axis=1)
        sims = []
        for t in range(x.shape[0] - 1):
            if norms[t] == 0.0 or norms[t + 1] == 0.0:
                continue
            sims.append(float(x[t] @ x[t + 1] / (norms[t] * norms[t + 1])))
        if sims:
            out[name] = float(np.mean(sims))
    return out
