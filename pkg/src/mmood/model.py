"""Full model assembly: three modality encoders, fusion, and heads.

Component initialization uses fixed seed slots, so ablating one component
away never changes how the remaining ones are initialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import MODALITIES, CorpusMeta, UtteranceRecord
from .encoders import ModalityEncoder
from .errors import ParameterError
from .fusion import FUSION_MODES, FusionNetwork
from .heads import BinaryHead, ContrastHead, CosineHead, LinearHead
from .layers import Param
from .numerics import component_rng

Array = np.ndarray

# fixed rng slots per component (see component_rng)
SLOT_ENCODER = {"T": 0, "V": 1, "A": 2}
SLOT_FUSION = 3
SLOT_BINARY = 4
SLOT_CLASS = 5
SLOT_CONTRAST = 6
SLOT_TRAIN_LOOP = 7
SLOT_SYNTH = 8


@dataclass
class ModelHyper:
    attn_heads: int = 4
    ffn_hidden: int = 0        # 0 -> matches each modality's input dim
    fusion_hidden: int = 256
    contrast_dim: int = 0      # 0 -> shared dim
    gamma: float = 16.0
    tau: float = 2.0
    dropout: float = 0.1
    positional_encoding: bool = False
    fusion_mode: str = "weighted"
    no_binary: bool = False
    no_cosine: bool = False
    no_contrast: bool = False

    def __post_init__(self):
        if self.fusion_mode not in FUSION_MODES:
            raise ParameterError(
                f"model: fusion_mode must be one of {FUSION_MODES}, "
                f"got {self.fusion_mode!r}"
            )
        if not self.tau > 0:
            raise ParameterError(f"model: tau must be > 0, got {self.tau}")
        if not self.gamma > 0:
            raise ParameterError(f"model: gamma must be > 0, got {self.gamma}")


class FusionModel:
    def __init__(self, meta: CorpusMeta, hyper: ModelHyper, seed: int):
        self.meta = meta
        self.hyper = hyper
        self.seed = seed
        self.d_shared = meta.shapes["T"][1]
        self.num_classes = meta.num_classes

        self.encoders: dict[str, ModalityEncoder] = {}
        for m in MODALITIES:
            d_in = meta.shapes[m][1]
            self.encoders[m] = ModalityEncoder(
                f"encoder.{m}", d_in=d_in, d_out=self.d_shared,
                n_heads=hyper.attn_heads,
                ffn_hidden=hyper.ffn_hidden or d_in,
                rng=component_rng(seed, SLOT_ENCODER[m]),
                use_class_token=(m == "T"),
                positional=hyper.positional_encoding,
            )
        self.fusion = FusionNetwork(
            "fusion", self.d_shared, hyper.fusion_hidden, hyper.dropout,
            hyper.fusion_mode, component_rng(seed, SLOT_FUSION),
        )
        self.binary_head = None if hyper.no_binary else BinaryHead(
            "binary", self.d_shared, component_rng(seed, SLOT_BINARY)
        )
        if hyper.no_cosine:
            self.class_head = LinearHead(
                "class", self.d_shared, self.num_classes,
                component_rng(seed, SLOT_CLASS),
            )
        else:
            self.class_head = CosineHead(
                "class", self.d_shared, self.num_classes, hyper.gamma,
                component_rng(seed, SLOT_CLASS),
            )
        self.contrast_head = None if hyper.no_contrast else ContrastHead(
            "contrast", self.d_shared,
            hyper.contrast_dim or self.d_shared, hyper.dropout,
            component_rng(seed, SLOT_CONTRAST),
        )

    # -- forward/backward -------------------------------------------------

    def encode_batch(self, seqs: dict[str, Array]):
        xs, caches = {}, {}
        for m in MODALITIES:
            xs[m], caches[m] = self.encoders[m].forward_batch(seqs[m])
        return xs, caches

    def encoders_backward(self, gxs: dict[str, Array], caches) -> None:
        for m in MODALITIES:
            self.encoders[m].backward_batch(gxs[m], caches[m])

    def fuse_batch(self, seqs: dict[str, Array], train: bool,
                   rng: np.random.Generator | None):
        xs, enc_caches = self.encode_batch(seqs)
        z, w, fuse_cache = self.fusion.forward(xs, train, rng)
        return z, w, (enc_caches, fuse_cache)

    # -- evaluation helpers ------------------------------------------------

    def features_for(self, records: list[UtteranceRecord],
                     chunk: int = 256) -> Array:
        """Eval-mode fused features, (N, d_shared)."""
        out = []
        for start in range(0, len(records), chunk):
            part = records[start:start + chunk]
            seqs = {m: np.stack([r.seqs[m] for r in part]) for m in MODALITIES}
            z, _, _ = self.fuse_batch(seqs, train=False, rng=None)
            out.append(z)
        return np.concatenate(out) if out else np.zeros((0, self.d_shared))

    def logits_for(self, features: Array) -> Array:
        logits, _ = self.class_head.forward(features)
        return logits

    def predict(self, records: list[UtteranceRecord]) -> np.ndarray:
        feats = self.features_for(records)
        return self.logits_for(feats).argmax(axis=1)

    # -- parameter bookkeeping ----------------------------------------------

    def params(self) -> list[Param]:
        out = []
        for m in MODALITIES:
            out += self.encoders[m].params()
        out += self.fusion.params()
        if self.binary_head is not None:
            out += self.binary_head.params()
        out += self.class_head.params()
        if self.contrast_head is not None:
            out += self.contrast_head.params()
        return out

    def named_params(self) -> dict[str, Param]:
        named = {}
        for p in self.params():
            if p.name in named:
                raise ParameterError(f"model: duplicate parameter name {p.name!r}")
            named[p.name] = p
        return named

    def stage1_params(self) -> list[Param]:
        out = []
        for m in MODALITIES:
            out += self.encoders[m].params()
        out += self.fusion.params()
        if self.binary_head is not None:
            out += self.binary_head.params()
        return out

    def stage2_params(self) -> list[Param]:
        out = []
        for m in MODALITIES:
            out += self.encoders[m].params()
        out += self.fusion.params()
        out += self.class_head.params()
        if self.contrast_head is not None:
            out += self.contrast_head.params()
        return out
