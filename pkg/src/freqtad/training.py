"""Optimizer and the deterministic training loop."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore
from .evaluation import EvalProtocol, evaluate_map
from .losses import assign_targets, loss_item_tape
from .model import Detector, ModelConfig
from .relation import level_lengths
from .rng import Rng
from .sequence import FeatureSequence


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 50
    batch_size: int = 8
    weight_decay: float = 0.05
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        b1, b2 = self.betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("need epochs >= 0 and batch_size >= 1")


class TrainingDiverged(RuntimeError):
    """Raised when the loss or a gradient stops being finite.

    Carries the last epoch-end parameter snapshot and the log rows
    collected so far, so callers can still save a usable checkpoint.
    """

    def __init__(self, state: dict, log: list):
        super().__init__("diverged")
        self.state = state
        self.log = log


class AdamW:
    """Adaptive moments with decoupled weight decay and global-norm clipping.

    The decay multiplies parameters after the moment update, so it never
    enters the moment statistics. grad_clip <= 0 disables clipping.
    """

    def __init__(self, store: ParamStore, learning_rate: float = 1e-4,
                 betas: tuple = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, grad_clip: float = 0.0):
        self.params = [p for p in store if p.trainable]
        self.lr = learning_rate
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    @classmethod
    def from_config(cls, store: ParamStore, cfg: TrainConfig) -> "AdamW":
        return cls(store, cfg.learning_rate, cfg.betas, cfg.eps,
                   cfg.weight_decay, cfg.grad_clip)

    def step(self):
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise ValueError("diverged")
        scale = 1.0
        if self.grad_clip > 0:
            norm = math.sqrt(sum(float((p.grad * p.grad).sum())
                                 for p in self.params))
            scale = self.grad_clip / max(norm, self.grad_clip)
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad * scale
            m[...] = b1 * m + (1.0 - b1) * g
            v[...] = b2 * v + (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay


def _prepare_targets(model: Detector, videos: list) -> list:
    """Per-video assignment maps; geometry only, so computed once up front."""
    out = []
    for video in videos:
        lens = level_lengths(video.features.shape[0], model.cfg.num_downsamples)
        out.append(assign_targets(video.actions, lens, model.strides,
                                  model.ranges, model.cfg.loss.center_radius))
    return out


def _grid_map(model: Detector, videos: list, protocol: EvalProtocol,
              batch_size: int) -> float:
    """Average mAP over the protocol grid, everything in feature-grid units."""
    preds = {}
    for i in range(0, len(videos), batch_size):
        chunk = videos[i: i + batch_size]
        seq = FeatureSequence.from_items([v.features for v in chunk])
        ids = [v.video_id for v in chunk]
        for vid, cands in zip(ids, model.infer(seq, protocol, video_ids=ids)):
            preds[vid] = cands
    gts = {v.video_id: v.actions for v in videos}
    return evaluate_map(preds, gts, protocol).average


def train_run(train_videos: list, model_cfg: ModelConfig, train_cfg: TrainConfig,
              eval_videos: list = None, protocol: EvalProtocol = None,
              log_fn=None):
    """Train a fresh detector; returns (model, log rows).

    Log rows are (epoch, mean batch loss, avg mAP) with mAP measured on
    eval_videos when given, else on the training split. Item order inside a
    batch is fixed and gradients reduce in that order, so a fixed seed
    reproduces parameters bit for bit.
    """
    if not train_videos:
        raise ValueError("training needs at least one video")
    model = Detector(model_cfg)
    if train_cfg.epochs == 0:
        return model, []
    protocol = protocol or EvalProtocol()
    targets = _prepare_targets(model, train_videos)
    optimizer = AdamW.from_config(model.params, train_cfg)
    shuffle_root = Rng(train_cfg.seed)
    eval_set = eval_videos if eval_videos is not None else train_videos
    log = []
    last_good = model.params.state_dict()
    for epoch in range(1, train_cfg.epochs + 1):
        order = shuffle_root.child(epoch).permutation(len(train_videos))
        batch_losses = []
        for lo in range(0, len(order), train_cfg.batch_size):
            batch = order[lo: lo + train_cfg.batch_size]
            normalizer = float(max(sum(targets[i].positive_count for i in batch), 1))
            model.params.zero_grads()
            batch_loss = 0.0
            for i in batch:
                head_out, _ = model.forward_item(train_videos[i].features)
                tape = loss_item_tape(head_out, targets[i], model.cfg.loss,
                                      normalizer)
                if not math.isfinite(tape.item()):
                    raise TrainingDiverged(last_good, log)
                tape.backward()
                batch_loss += tape.item()
            try:
                optimizer.step()
            except ValueError:
                raise TrainingDiverged(last_good, log) from None
            batch_losses.append(batch_loss)
        avg_map = _grid_map(model, eval_set, protocol, train_cfg.batch_size)
        row = (epoch, float(np.mean(batch_losses)), avg_map)
        log.append(row)
        if log_fn is not None:
            log_fn(*row)
        last_good = model.params.state_dict()
    return model, log
