#!/usr/bin/env python3
"""Train a detector on a slice of the benchmark and watch it work.

Trains on 60 benchmark videos for 28 epochs, prints the loss/quality
trajectory, then lines up the top detections against the ground truth
of one held-out video. Takes a couple of minutes; output is
deterministic.
"""

from freqtad.evaluation import EvalProtocol, evaluate_map, interval_iou
from freqtad.model import Detector, ModelConfig
from freqtad.sequence import FeatureSequence
from freqtad.synthetic import make_benchmark
from freqtad.training import TrainConfig, train_run


def split_predictions(model, videos, protocol):
    preds = {}
    for i in range(0, len(videos), 8):
        chunk = videos[i: i + 8]
        seq = FeatureSequence.from_items([v.features for v in chunk])
        ids = [v.video_id for v in chunk]
        for vid, cands in zip(ids, model.infer(seq, protocol, video_ids=ids)):
            preds[vid] = cands
    return preds


def average_map(model, videos, protocol):
    preds = split_predictions(model, videos, protocol)
    gts = {v.video_id: v.actions for v in videos}
    return evaluate_map(preds, gts, protocol).average


def main():
    all_train, all_test = make_benchmark()
    train_videos = all_train[:60]
    test_videos = all_test[:8]

    model_cfg = ModelConfig(input_dim=16, num_classes=3, seed=0)
    protocol = EvalProtocol()

    before = average_map(Detector(model_cfg), test_videos, protocol)
    print(f"untrained test avg mAP: {before:.4f}")
    print()

    print("training 28 epochs on 60 videos")
    train_cfg = TrainConfig(learning_rate=2e-3, epochs=28, batch_size=8,
                            seed=0)
    model, log = train_run(train_videos, model_cfg, train_cfg,
                           eval_videos=test_videos, protocol=protocol)
    for epoch, loss, amap in log:
        bar = "#" * int(30 * amap)
        print(f"  epoch {epoch:2d}  loss {loss:.4f}  test mAP {amap:.4f}  {bar}")
    print()

    preds = split_predictions(model, test_videos, protocol)
    video = max(test_videos, key=lambda v: len(v.actions))
    print(f"{video.video_id}: ground truth vs top detections (grid units)")
    for g in video.actions:
        print(f"  truth   class {g.label}  [{g.start:6.1f}, {g.end:6.1f})")
    top = sorted(preds[video.video_id], key=lambda c: -c.score)
    for c in top[:len(video.actions) + 2]:
        best = max((interval_iou(c.segment, (g.start, g.end))
                    for g in video.actions if g.label == c.label),
                   default=0.0)
        print(f"  detect  class {c.label}  [{c.start:6.1f}, {c.end:6.1f})  "
              f"score {c.score:.3f}  best IoU {best:.2f}")
    print()
    final = average_map(model, test_videos, protocol)
    print(f"final test avg mAP over tIoU 0.5..0.95: {final:.4f}")
    print("scores rank true segments first; boundary regression tightens")
    print("the spans well past the 0.5 overlap needed for a match.")


if __name__ == "__main__":
    main()
