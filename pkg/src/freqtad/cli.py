"""Command-line entry point: dataset synthesis, training, evaluation,
frequency decoupling dumps, gradient checks, and error diagnosis.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .diagnostics import (CATEGORIES, CHARACTERISTICS, classify_fp,
                          fn_profile, sensitivity_profile)
from .evaluation import EvalProtocol, evaluate_map, threshold_grid
from .fileio import (AnnotatedVideo, AnnotationSet, load_annotations,
                     load_checkpoint, load_config, load_predictions,
                     read_feature_file, save_annotations, save_checkpoint,
                     save_predictions, write_feature_file, write_json)
from .frequency import high_pass, low_pass
from .gradcheck import gradient_suite, worst_error
from .losses import LossConfig
from .model import Detector, ModelConfig
from .sequence import ActionInstance, FeatureSequence, VideoRecord
from .synthetic import SyntheticSpec, generate_synthetic
from .training import TrainConfig, TrainingDiverged, train_run

_GRADCHECK_LIMIT = 1e-4


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage through the exit-code contract
    instead of terminating the process."""

    def error(self, message):
        raise _UsageError(self, message)


# ---------------------------------------------------------------- config


def _coerce(key: str, text: str, like):
    """Parse a config string into the type of the default it replaces."""
    try:
        if isinstance(like, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"config key {key}: cannot parse {text!r}") from None
    return text


def _namespace_kwargs(file_cfg: dict, namespace: str, template) -> dict:
    """Pull `namespace.field` keys out of a flat config dict, typed against
    the template dataclass. Unknown fields in a consumed namespace are
    rejected; other namespaces are left for other subcommands."""
    allowed = {f.name: f for f in dataclasses.fields(template)}
    out = {}
    prefix = namespace + "."
    for key, value in file_cfg.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in allowed:
            raise ValueError(f"unknown config key: {key}")
        default = getattr(template, name, allowed[name].default)
        if default is dataclasses.MISSING or default is None:
            raise ValueError(f"config key {key} is not settable")
        out[name] = _coerce(key, value, default)
    return out


def _load_file_config(path) -> dict:
    return load_config(path) if path else {}


def _merged_model_config(args, file_cfg: dict, input_dim: int,
                         num_classes: int) -> ModelConfig:
    kwargs = _namespace_kwargs(file_cfg, "model", ModelConfig)
    for derived in ("input_dim", "num_classes"):
        kwargs.pop(derived, None)
    loss_kwargs = _namespace_kwargs(file_cfg, "loss", LossConfig)
    for flag in ("cutoff", "num_downsamples", "blocks_per_level", "seed"):
        value = getattr(args, f"model_{flag}", None)
        if value is not None:
            kwargs[flag] = value
    return ModelConfig(input_dim=input_dim, num_classes=num_classes,
                       loss=LossConfig(**loss_kwargs), **kwargs)


def _merged_train_config(args, file_cfg: dict) -> TrainConfig:
    kwargs = _namespace_kwargs(file_cfg, "train", TrainConfig)
    for flag in ("learning_rate", "epochs", "batch_size", "seed"):
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[flag] = value
    return TrainConfig(**kwargs)


def _parse_thresholds(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) == 3:
        return threshold_grid(float(parts[0]), float(parts[1]), float(parts[2]))
    raise ValueError(f"thresholds must be t or start:stop:step, got {text!r}")


def _protocol(args, file_cfg: dict) -> EvalProtocol:
    """Config keys use comma tuples; the --thresholds flag uses colon
    ranges and wins over the file."""
    kwargs = _namespace_kwargs(file_cfg, "eval", EvalProtocol)
    thresholds = getattr(args, "thresholds", None)
    if thresholds is not None:
        kwargs["tiou_thresholds"] = _parse_thresholds(thresholds)
    return EvalProtocol(**kwargs)


# ---------------------------------------------------------------- dataset IO


def _load_split(split_dir):
    """Annotation set plus grid-unit VideoRecords for one dataset split."""
    split_dir = Path(split_dir)
    aset = load_annotations(split_dir / "annotations.json")
    videos = []
    for entry in aset.videos:
        seq = read_feature_file(split_dir / entry.feature_file)
        actions = [ActionInstance(g.start * entry.fps_feature,
                                  g.end * entry.fps_feature, g.label)
                   for g in entry.actions]
        videos.append(VideoRecord(entry.video_id, seq.item(0), actions,
                                  entry.fps_feature, entry.duration_seconds))
    return aset, videos


def _write_split(split_dir, videos: list, labels: list):
    split_dir = Path(split_dir)
    (split_dir / "features").mkdir(parents=True, exist_ok=True)
    entries = []
    for video in videos:
        rel = f"features/{video.video_id}.fdd"
        write_feature_file(split_dir / rel, video.features)
        entries.append(AnnotatedVideo(video.video_id, video.duration,
                                      video.fps, rel, video.actions_seconds()))
    save_annotations(split_dir / "annotations.json",
                     AnnotationSet(list(labels), entries))


def _infer_split(model: Detector, videos: list, protocol: EvalProtocol,
                 batch_size: int = 8) -> dict:
    """Second-unit predictions per video id."""
    preds = {}
    for lo in range(0, len(videos), batch_size):
        chunk = videos[lo: lo + batch_size]
        seq = FeatureSequence.from_items([v.features for v in chunk])
        ids = [v.video_id for v in chunk]
        fps = [v.fps for v in chunk]
        for vid, cands in zip(ids, model.infer(seq, protocol, video_ids=ids,
                                               fps=fps)):
            preds[vid] = cands
    return preds


def _seconds_ground_truth(aset: AnnotationSet) -> dict:
    return aset.ground_truth()


# ---------------------------------------------------------------- subcommands


def _cmd_synth(args) -> int:
    file_cfg = _load_file_config(args.config)
    overrides = _namespace_kwargs(file_cfg, "synth", SyntheticSpec)
    for banned in ("num_videos", "first_index"):
        overrides.pop(banned, None)
    seed = args.seed if args.seed is not None else overrides.pop("seed", 7)
    overrides.pop("seed", None)
    train_spec = SyntheticSpec(num_videos=args.train_videos, seed=seed,
                               first_index=0, **overrides)
    test_spec = SyntheticSpec(num_videos=args.test_videos, seed=seed,
                              first_index=args.train_videos, **overrides)
    train_videos = generate_synthetic(train_spec)
    test_videos = generate_synthetic(test_spec)
    labels = [f"action_{k}" for k in range(train_spec.num_classes)]
    out = Path(args.out)
    _write_split(out / "train", train_videos, labels)
    _write_split(out / "test", test_videos, labels)
    print(f"wrote {len(train_videos)} train / {len(test_videos)} test videos "
          f"to {out}")
    return 0


def _cmd_train(args) -> int:
    file_cfg = _load_file_config(args.config)
    aset, videos = _load_split(args.data)
    eval_videos = None
    if args.eval_data:
        _, eval_videos = _load_split(args.eval_data)
    input_dim = videos[0].features.shape[1] if videos else 0
    model_cfg = _merged_model_config(args, file_cfg, input_dim, len(aset.labels))
    train_cfg = _merged_train_config(args, file_cfg)
    protocol = _protocol(args, file_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []

    def log_row(epoch, loss, avg_map):
        rows.append((epoch, loss, avg_map))
        print(f"epoch {epoch}\tloss {loss:.6f}\tavg_mAP {avg_map:.4f}")

    try:
        model, _ = train_run(videos, model_cfg, train_cfg,
                             eval_videos=eval_videos, protocol=protocol,
                             log_fn=log_row)
    except TrainingDiverged:
        print("error: diverged", file=sys.stderr)
        return 1
    save_checkpoint(out / "checkpoint.ckpt", model)
    log_lines = ["epoch\tloss\tavg_map"]
    log_lines += [f"{e}\t{l:.6f}\t{m:.6f}" for e, l, m in rows]
    (out / "train_log.tsv").write_text("\n".join(log_lines) + "\n")
    print(f"saved {out / 'checkpoint.ckpt'}")
    return 0


def _eval_result_report(result) -> dict:
    return {
        "thresholds": list(result.thresholds),
        "map": list(result.map_values),
        "average": result.average,
    }


def _cmd_eval(args) -> int:
    file_cfg = _load_file_config(args.config)
    protocol = _protocol(args, file_cfg)
    aset = load_annotations(args.gt)
    if args.pred:
        preds = load_predictions(args.pred, aset.labels)
    else:
        if not args.data:
            raise ValueError("--checkpoint needs --data for features")
        model = load_checkpoint(args.checkpoint)
        _, videos = _load_split(args.data)
        preds = _infer_split(model, videos, protocol)
    result = evaluate_map(preds, _seconds_ground_truth(aset), protocol)
    for tiou, value in result.rows():
        print(f"tIoU {tiou:.2f}\tmAP {value:.4f}")
    print(f"average\t{result.average:.4f}")
    if args.pred_out:
        save_predictions(args.pred_out, aset.labels, preds)
    if args.out:
        write_json(args.out, _eval_result_report(result))
    return 0


def _cmd_diagnose(args) -> int:
    aset = load_annotations(args.gt)
    preds = load_predictions(args.pred, aset.labels)
    gts = _seconds_ground_truth(aset)
    durations = aset.durations()
    fp = classify_fp(preds, gts, tiou=args.tiou, k_max=args.k_max)
    fn = fn_profile(preds, gts, durations, tiou=args.tiou)
    sens = sensitivity_profile(preds, gts, durations)

    print("false positives by rank budget")
    print("k\t" + "\t".join(CATEGORIES))
    for k in sorted(fp.counts):
        row = fp.counts[k]
        print(f"{k}\t" + "\t".join(str(row.get(c, 0)) for c in CATEGORIES))
    print("\nremoval impact (mean mAP gain)")
    for cat, gain in fp.impact.items():
        print(f"{cat}\t{gain:.4f}")
    print(f"\nfalse negatives (overall {fn.overall:.4f})")
    for char in CHARACTERISTICS:
        for name, rate in sorted(fn.rates[char].items()):
            print(f"{char}\t{name}\t{rate:.4f}")
    print(f"\nsensitivity (overall {sens.overall:.4f})")
    for char in CHARACTERISTICS:
        for name in sens.bins(char):
            print(f"{char}\t{name}\t{sens.maps[char][name]:.4f}"
                  f"\t{sens.relative[char][name]:+.4f}")
    if args.out:
        report = {
            "tiou": args.tiou,
            "false_positive_counts": {str(k): v for k, v in fp.counts.items()},
            "removal_impact": fp.impact,
            "false_negative_overall": fn.overall,
            "false_negative_rates": fn.rates,
            "sensitivity_overall": sens.overall,
            "sensitivity_map": sens.maps,
            "sensitivity_relative": sens.relative,
        }
        write_json(args.out, report)
    return 0


def _cmd_decouple(args) -> int:
    seq = read_feature_file(args.features)
    low = low_pass(seq, args.cutoff)
    high = high_pass(seq, args.cutoff)
    remix = low.values + (args.hf_gain ** 2) * high.values
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.features).stem
    for suffix, values in (("low", low.values), ("high", high.values),
                           ("remix", remix)):
        write_feature_file(out / f"{stem}.{suffix}.fdd", values[0])
    total = float(np.var(seq.values))
    share = float(np.var(low.values)) / total if total > 0 else 0.0
    print(f"cutoff {args.cutoff}\tlow-band variance share {share:.4f}")
    print(f"wrote {stem}.low.fdd {stem}.high.fdd {stem}.remix.fdd to {out}")
    return 0


def _cmd_gradcheck(args) -> int:
    results = gradient_suite(seed=args.seed)
    for name, err in results:
        print(f"{name}\t{err:.3e}")
    worst = worst_error(results)
    ok = worst <= _GRADCHECK_LIMIT
    print(f"worst {worst:.3e}\tlimit {_GRADCHECK_LIMIT:.0e}\t"
          f"{'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


def _parse_values(text: str) -> list:
    """Cutoff grids: comma list `1,3,5` or inclusive range `1..15`."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",")]


def _cmd_sweep_cutoff(args) -> int:
    file_cfg = _load_file_config(args.config)
    protocol = _protocol(args, file_cfg)
    values = _parse_values(args.values)
    trained = load_checkpoint(args.checkpoint)
    state = trained.params.state_dict()
    aset, videos = _load_split(args.data)
    gts = _seconds_ground_truth(aset)
    rows = []
    print("cutoff\tavg_mAP")
    for value in values:
        cfg_dict = trained.cfg.to_dict()
        cfg_dict["cutoff"] = value
        model = Detector(ModelConfig.from_dict(cfg_dict))
        model.params.load_state_dict(state)
        preds = _infer_split(model, videos, protocol)
        avg = evaluate_map(preds, gts, protocol).average
        rows.append({"cutoff": value, "average_map": avg})
        print(f"{value}\t{avg:.4f}")
    if args.out:
        write_json(args.out, {"rows": rows})
    return 0


_ABLATION_GRID = (
    ("baseline", False, False),
    ("enhancer", True, False),
    ("relation", False, True),
    ("full", True, True),
)


def _cmd_ablate(args) -> int:
    file_cfg = _load_file_config(args.config)
    aset, videos = _load_split(args.data)
    eval_videos = None
    if args.eval_data:
        _, eval_videos = _load_split(args.eval_data)
    input_dim = videos[0].features.shape[1] if videos else 0
    train_cfg = _merged_train_config(args, file_cfg)
    protocol = _protocol(args, file_cfg)
    rows = []
    print("variant\tavg_mAP")
    for name, use_enhancer, use_relation in _ABLATION_GRID:
        model_cfg = _merged_model_config(args, file_cfg, input_dim,
                                         len(aset.labels))
        model_cfg = ModelConfig.from_dict({**model_cfg.to_dict(),
                                           "use_enhancer": use_enhancer,
                                           "use_relation": use_relation})
        try:
            model, log = train_run(videos, model_cfg, train_cfg,
                                   eval_videos=eval_videos, protocol=protocol)
        except TrainingDiverged:
            print("error: diverged", file=sys.stderr)
            return 1
        avg = log[-1][2] if log else 0.0
        rows.append({"variant": name, "use_enhancer": use_enhancer,
                     "use_relation": use_relation, "average_map": avg})
        print(f"{name}\t{avg:.4f}")
    if args.out:
        write_json(args.out, {"epochs": train_cfg.epochs, "rows": rows})
    return 0


# ---------------------------------------------------------------- wiring


def _build_parser() -> _Parser:
    parser = _Parser(prog="freqtad", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", metavar="subcommand", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--train-videos", type=int, default=200)
    p.add_argument("--test-videos", type=int, default=50)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a detector on a dataset split")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eval-data")
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cutoff", dest="model_cutoff", type=int)
    p.add_argument("--thresholds")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred")
    group.add_argument("--checkpoint")
    p.add_argument("--gt", required=True)
    p.add_argument("--data")
    p.add_argument("--config")
    p.add_argument("--thresholds")
    p.add_argument("--pred-out", dest="pred_out",
                   help="write the scored predictions as JSON")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("diagnose", help="categorize detection errors")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tiou", type=float, default=0.5)
    p.add_argument("--k-max", dest="k_max", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("decouple",
                       help="dump low/high bands and their remix")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff", type=int, default=7)
    p.add_argument("--hf-gain", dest="hf_gain", type=float, default=1.0)
    p.set_defaults(func=_cmd_decouple)

    p = sub.add_parser("gradcheck", help="run the gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("sweep-cutoff",
                       help="re-evaluate a checkpoint across cutoffs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--values", default="1,3,5,7,9,11,15")
    p.add_argument("--config")
    p.add_argument("--thresholds")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_cutoff)

    p = sub.add_parser("ablate", help="train the component grid")
    p.add_argument("--data", required=True)
    p.add_argument("--eval-data")
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--thresholds")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ablate)

    return parser


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
        return args.func(args)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code) if isinstance(exc.code, int) else 0
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
