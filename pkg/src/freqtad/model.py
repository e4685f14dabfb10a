"""Composition root: enhancer, relation pyramid, and detection head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParamStore, Tensor
from .evaluation import EvalProtocol, nms
from .frequency import FeatureEnhancer
from .head import DetectionHead, HeadOutput, decode_candidates
from .losses import LossConfig
from .relation import ConvBlock, RelationBlock, build_pyramid_item, level_lengths, level_ranges
from .rng import Rng
from .sequence import DetectionCandidate, FeatureSequence


@dataclass
class ModelConfig:
    input_dim: int
    num_classes: int
    cutoff: int = 7
    hf_gain_init: float = 1.0
    window: int = 3
    kernel: int = 3
    blocks_per_level: int = 2
    num_downsamples: int = 5
    latent_dim: int = 0          # 0: match input_dim
    head_width: int = 0          # 0: match input_dim
    head_depth: int = 2
    use_enhancer: bool = True
    use_relation: bool = True
    score_floor: float = 0.001
    pre_nms_topk: int = 200
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.num_classes < 1:
            raise ValueError("need input_dim >= 1 and num_classes >= 1")
        if self.num_downsamples < 0 or self.blocks_per_level < 1:
            raise ValueError("invalid pyramid configuration")

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "loss"}
        out["loss"] = dict(self.loss.__dict__)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        loss = LossConfig(**data.pop("loss", {}))
        return cls(loss=loss, **data)


class Detector:
    """Full detection model over pre-extracted features.

    Forward runs per batch item on the item's true (unpadded) length, so
    padding never reaches the spectral ops or the recurrences.
    """

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.params = ParamStore()
        rng = Rng(cfg.seed)
        dim = cfg.input_dim
        latent = cfg.latent_dim or dim
        self.enhancer = None
        if cfg.use_enhancer:
            self.enhancer = FeatureEnhancer(
                self.params, "enhancer", dim, cutoff=cfg.cutoff,
                window=cfg.window, kernel=cfg.kernel, gain_init=cfg.hf_gain_init)
        self.blocks = []
        for level in range(cfg.num_downsamples + 1):
            stack = []
            for i in range(cfg.blocks_per_level):
                prefix = f"level{level}.block{i}"
                if cfg.use_relation:
                    stack.append(RelationBlock(self.params, prefix, dim, latent, rng))
                else:
                    stack.append(ConvBlock(self.params, prefix, dim, rng))
            self.blocks.append(stack)
        width = cfg.head_width or dim
        self.head = DetectionHead(self.params, "head", dim, cfg.num_classes,
                                  width, cfg.head_depth, rng)
        self.strides = [2 ** level for level in range(cfg.num_downsamples + 1)]
        self.ranges = level_ranges(cfg.num_downsamples)

    def forward_item(self, features, want_probes: bool = False):
        """Head outputs for one unpadded (L, D) item, as graph Tensors.

        features may be an array or an existing graph Tensor (the latter
        lets callers differentiate with respect to the input). Returns
        (per-level (logits, offsets) pairs, probe dict). Probes are plain
        arrays snapshotting the input, the enhanced features, and each
        pyramid level.
        """
        if isinstance(features, Tensor):
            x = features
            features = x.data
        else:
            features = np.asarray(features, dtype=np.float64)
            x = Tensor(features)
        if features.ndim != 2 or features.shape[1] != self.cfg.input_dim:
            raise ValueError("feature width mismatch")
        probes = {}
        if want_probes:
            probes["input"] = features
        if self.enhancer is not None:
            x = self.enhancer.apply_item(x)
            if want_probes:
                probes["enhanced"] = x.data
        levels = build_pyramid_item(x, features.shape[0], self.blocks,
                                    self.cfg.num_downsamples)
        if want_probes:
            for i, lv in enumerate(levels):
                probes[f"level{i}"] = lv.data
        return self.head.apply_item(levels), probes

    def forward(self, seq: FeatureSequence, video_ids=None) -> HeadOutput:
        """Batched forward pass; per-level outputs padded to batch maxima."""
        if seq.channels != self.cfg.input_dim:
            raise ValueError("feature width mismatch")
        num_levels = self.cfg.num_downsamples + 1
        items = []
        lengths = np.zeros((seq.batch, num_levels), dtype=np.int64)
        for b in range(seq.batch):
            out, _ = self.forward_item(seq.item(b))
            items.append([(logits.data, offs.data) for logits, offs in out])
            lengths[b] = level_lengths(int(seq.lengths[b]), self.cfg.num_downsamples)
        logits_pad, offsets_pad = [], []
        for level in range(num_levels):
            max_len = int(lengths[:, level].max())
            lg = np.zeros((seq.batch, max_len, self.cfg.num_classes))
            of = np.zeros((seq.batch, max_len, 2))
            for b, item in enumerate(items):
                n = lengths[b, level]
                lg[b, :n] = item[level][0]
                of[b, :n] = item[level][1]
            logits_pad.append(lg)
            offsets_pad.append(of)
        return HeadOutput(
            class_logits=logits_pad,
            offsets=offsets_pad,
            strides=list(self.strides),
            level_lengths=[lengths[:, level] for level in range(num_levels)],
            input_lengths=seq.lengths,
            video_ids=list(video_ids) if video_ids else [],
        )

    def infer(self, seq: FeatureSequence, protocol: EvalProtocol,
              video_ids=None, fps=None) -> list:
        """Candidates per video after suppression, converted to seconds."""
        out = self.forward(seq, video_ids=video_ids)
        raw = decode_candidates(out, self.cfg.score_floor, self.cfg.pre_nms_topk)
        results = []
        for b, cands in enumerate(raw):
            kept = nms(cands, protocol)
            scale = 1.0 / fps[b] if fps is not None else 1.0
            results.append([
                DetectionCandidate(c.video_id, c.label, c.score,
                                   c.start * scale, c.end * scale)
                for c in kept
            ])
        return results
