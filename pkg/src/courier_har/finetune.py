"""Supervised fine-tuning of the pretrained encoder with the GRU classifier."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .checkpoint import Checkpoint
from .errors import ConfigError, ContractError, NumericError
from .model import (ClassifierConfig, EncoderConfig, HarModel,
                    classifier_param_shapes, init_params)
from .optim import Adam

TASK_CLASSES = {
    "activity3": ("still", "walk", "ride"),
    "riding2": ("non_riding", "riding"),
    "elevation2": ("non_vertical", "vertical"),
}


@dataclass(frozen=True)
class FinetuneConfig:
    task: str = "activity3"
    epochs: int = 700
    lr: float = 0.001
    batch_size: int = 128
    label_fraction: float = 1.0
    channels: int = 6
    augmentation: str = "none"  # "none" | "scale+rotate"
    val_fraction: float = 0.1
    freeze_encoder: bool = False  # ablation only; default trains everything
    eval_every: int = 1  # validation metrics every k epochs (0 = never)
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASK_CLASSES:
            raise ConfigError(f"unknown task {self.task!r}")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ConfigError("label_fraction must be in (0, 1]")
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ConfigError("epochs/batch_size/lr out of range")
        if self.channels not in (3, 6):
            raise ConfigError("channels must be 3 or 6")

    @property
    def class_names(self):
        return TASK_CLASSES[self.task]


def _random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return Rotation.from_rotvec(axis * angle).as_matrix()


def augment(values, rng, scale_range=(0.9, 1.1)):
    """Random per-axis scaling plus one shared 3-D rotation per window.

    The rotation is applied to the accel triplet and (when present) the gyro
    triplet; scaling follows the rotation.
    """
    values = np.asarray(values)
    channels = values.shape[-1]
    rot = _random_rotation(rng)
    out = np.empty_like(values)
    out[..., :3] = values[..., :3] @ rot.T
    if channels == 6:
        out[..., 3:] = values[..., 3:] @ rot.T
    scales = rng.uniform(scale_range[0], scale_range[1], size=channels)
    return (out * scales).astype(values.dtype)


def split_train_val(n, val_fraction, seed):
    """Seeded shuffle split; returns (train_idx, val_idx)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction))) if val_fraction > 0 else 0
    return order[n_val:], order[:n_val]


def select_label_fraction(indices, fraction, seed):
    """Exactly ceil(fraction * N) training windows via seeded shuffle."""
    rng = np.random.Generator(np.random.PCG64(seed + 7919))
    order = rng.permutation(len(indices))
    k = math.ceil(fraction * len(indices))
    return indices[order[:k]]


def build_model(cfg: FinetuneConfig, pretrained: Checkpoint | None,
                enc_cfg: EncoderConfig | None = None) -> HarModel:
    clf_cfg = ClassifierConfig(num_classes=len(cfg.class_names))
    if pretrained is not None:
        enc_cfg = pretrained.encoder_config
        if enc_cfg.channels != cfg.channels:
            raise ConfigError(
                f"checkpoint has {enc_cfg.channels} channels, task config "
                f"wants {cfg.channels}")
        params = {k: Tensor(v.data.copy(), requires_grad=True)
                  for k, v in pretrained.params.items()
                  if k.startswith("encoder.")}
        params.update(init_params(classifier_param_shapes(enc_cfg, clf_cfg),
                                  cfg.seed + 2))
        return HarModel(enc_cfg, clf_cfg, params=params)
    if enc_cfg is None:
        enc_cfg = EncoderConfig(channels=cfg.channels)
    elif enc_cfg.channels != cfg.channels:
        raise ConfigError(
            f"encoder config channels {enc_cfg.channels} != task channels "
            f"{cfg.channels}")
    return HarModel(enc_cfg, clf_cfg, seed=cfg.seed)


def _predict_array(model: HarModel, windows, batch_size=256):
    probs = []
    with no_grad():
        for lo in range(0, len(windows), batch_size):
            p = model.forward(Tensor(windows[lo:lo + batch_size]))
            probs.append(p.data.copy())
    return np.concatenate(probs, axis=0)


def _quick_metrics(preds, labels, num_classes):
    from .metrics import compute_metrics
    m = compute_metrics(preds, labels, num_classes=num_classes)
    return m.accuracy, m.macro_f1


def finetune(pretrained, windows, labels, cfg: FinetuneConfig,
             enc_cfg: EncoderConfig | None = None, norm_stats=None,
             progress=None):
    """Fine-tune on labeled normalized windows.

    ``labels`` are integer class ids matching cfg.class_names order.
    Returns (Checkpoint, history) where history rows are
    (epoch, split, accuracy, macro_f1).
    """
    windows = np.asarray(windows, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if windows.ndim != 3 or len(windows) != len(labels):
        raise ContractError("windows (N, L, C) and labels (N,) must align")
    if windows.shape[2] != cfg.channels:
        raise ConfigError(
            f"windows have {windows.shape[2]} channels, config wants "
            f"{cfg.channels}")
    model = build_model(cfg, pretrained, enc_cfg)
    train_idx, val_idx = split_train_val(len(windows), cfg.val_fraction,
                                         cfg.seed)
    train_idx = select_label_fraction(train_idx, cfg.label_fraction, cfg.seed)
    if len(np.unique(labels[train_idx])) < 2:
        raise ContractError(
            "training labels cover fewer than 2 classes; cannot fine-tune")
    trainable = {k: v for k, v in model.params.items()
                 if not (cfg.freeze_encoder and k.startswith("encoder."))}
    opt = Adam(trainable, lr=cfg.lr)
    rng = np.random.Generator(np.random.PCG64(cfg.seed + 13))
    aug_rng = np.random.Generator(np.random.PCG64(cfg.seed + 17))
    num_classes = len(cfg.class_names)
    history = []
    xs_train, ys_train = windows[train_idx], labels[train_idx]
    xs_val, ys_val = windows[val_idx], labels[val_idx]
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(xs_train))
        epoch_preds = np.empty(len(order), dtype=np.int64)
        for lo in range(0, len(order), cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            batch = xs_train[sel]
            if cfg.augmentation == "scale+rotate":
                batch = np.stack([augment(w, aug_rng) for w in batch])
            opt.zero_grad()
            logits = model.logits(Tensor(batch))
            loss = ad.cross_entropy(logits, ys_train[sel])
            if not np.isfinite(float(loss.data)):
                raise NumericError(
                    f"non-finite fine-tuning loss at epoch {epoch}")
            loss.backward()
            opt.step()
            epoch_preds[lo:lo + cfg.batch_size] = logits.data.argmax(axis=1)
        train_acc, train_f1 = _quick_metrics(epoch_preds, ys_train[order],
                                             num_classes)
        history.append((epoch + 1, "train", train_acc, train_f1))
        if len(xs_val) and cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            vp = _predict_array(model, xs_val).argmax(axis=1)
            acc, f1 = _quick_metrics(vp, ys_val, num_classes)
            history.append((epoch + 1, "val", acc, f1))
        if progress is not None:
            progress(epoch, history[-1])
    ckpt = Checkpoint(
        encoder_config=model.cfg, params=model.params,
        classifier_config=model.clf,
        norm_stats=(norm_stats.to_dict()
                    if norm_stats is not None and hasattr(norm_stats, "to_dict")
                    else norm_stats),
        metadata={"seed": cfg.seed, "epochs": cfg.epochs, "task": cfg.task,
                  "class_names": list(cfg.class_names),
                  "label_fraction": cfg.label_fraction,
                  "pretrained": pretrained is not None})
    return ckpt, history


def model_from_checkpoint(ckpt: Checkpoint) -> HarModel:
    if ckpt.classifier_config is None:
        raise ConfigError("checkpoint has no classifier head")
    return HarModel(ckpt.encoder_config, ckpt.classifier_config,
                    params=ckpt.params)


def predict(model: HarModel, window):
    """(class index, probability vector) for one window or a batch."""
    arr = np.asarray(window, dtype=np.float32)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.shape[2] != model.cfg.channels:
        raise ConfigError(
            f"window has {arr.shape[2]} channels, model wants "
            f"{model.cfg.channels}")
    probs = _predict_array(model, arr)
    classes = probs.argmax(axis=1)
    if single:
        return int(classes[0]), probs[0]
    return classes, probs


def write_history(history, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "split", "accuracy", "macro_f1"])
        for row in history:
            w.writerow(row)
