"""Checkpoint serialization: model params, class stats, and feature cache.

Uses the shared named-tensor blob convention (see blobio) at float64 so a
reloaded model reproduces evaluation outputs bit-exactly.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import numpy as np

from .corpus import CorpusMeta
from .blobio import read_tensor_store, write_tensor_store
from .errors import FormatError
from .model import FusionModel, ModelHyper
from .scoring import ClassStats
from .train import TrainedModel

CHECKPOINT_NAME = "checkpoint"


def save_checkpoint(trained: TrainedModel, directory) -> Path:
    model = trained.model
    tensors: dict[str, np.ndarray] = {
        name: p.value for name, p in model.named_params().items()
    }
    tensors["stats.means"] = trained.class_stats.means
    tensors["stats.covs"] = trained.class_stats.covs
    tensors["stats.counts"] = trained.class_stats.counts.astype(np.float64)
    tensors["stats.eps"] = trained.class_stats.eps
    tensors["stats.precisions"] = trained.class_stats.precisions
    tensors["cache.features"] = trained.train_features
    tensors["cache.logits"] = trained.train_logits

    cfg = trained.train_cfg
    meta = {
        "num_classes": model.meta.num_classes,
        "shapes": {m: list(s) for m, s in model.meta.shapes.items()},
        "hyper": asdict(cfg.model),
        "seed": cfg.seed,
        "train_config": {k: v for k, v in asdict(cfg).items() if k != "model"},
        "ood_config": asdict(trained.ood_cfg),
        "best": trained.best,
    }
    return write_tensor_store(directory, CHECKPOINT_NAME, tensors, meta,
                              dtype="<f8")


def load_checkpoint(directory):
    """Rebuild the model and fitted statistics from a checkpoint directory.

    Returns ``(model, class_stats, train_features, train_logits, meta)``.
    """
    manifest = Path(directory)
    if manifest.is_dir():
        manifest = manifest / f"{CHECKPOINT_NAME}.json"
    meta, tensors = read_tensor_store(manifest)

    corpus_meta = CorpusMeta(
        num_classes=int(meta["num_classes"]),
        shapes={m: tuple(s) for m, s in meta["shapes"].items()},
    )
    hyper = ModelHyper(**meta["hyper"])
    model = FusionModel(corpus_meta, hyper, seed=int(meta.get("seed", 0)))

    named = model.named_params()
    stored = {k: v for k, v in tensors.items()
              if not k.startswith(("stats.", "cache."))}
    missing = sorted(set(named) - set(stored))
    extra = sorted(set(stored) - set(named))
    if missing or extra:
        raise FormatError(
            f"checkpoint: parameter mismatch (missing={missing}, extra={extra})"
        )
    for name, param in named.items():
        value = stored[name]
        if value.shape != param.value.shape:
            raise FormatError(
                f"checkpoint: tensor {name!r} has shape {value.shape}, "
                f"model expects {param.value.shape}"
            )
        param.value[...] = value

    stats = ClassStats(
        means=tensors["stats.means"],
        covs=tensors["stats.covs"],
        counts=tensors["stats.counts"].astype(np.int64),
        eps=tensors["stats.eps"],
        precisions=tensors["stats.precisions"],
    )
    return model, stats, tensors["cache.features"], tensors["cache.logits"], meta
