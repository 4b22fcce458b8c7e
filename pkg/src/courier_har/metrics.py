"""Classification metrics, the label-fraction study, and the scaling harness."""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import ContractError


@dataclass
class MetricsResult:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    precision: dict  # class index -> precision
    recall: dict
    f1: dict
    confusion: np.ndarray  # (k, k), rows = true class, cols = predicted
    class_names: tuple | None = None

    def render_confusion(self):
        names = self.class_names or tuple(
            str(i) for i in range(len(self.confusion)))
        width = max(8, max(len(n) for n in names) + 2)
        lines = [" " * width + "".join(f"{n:>{width}}" for n in names)]
        for name, row in zip(names, self.confusion):
            lines.append(f"{name:>{width}}"
                         + "".join(f"{int(v):>{width}}" for v in row))
        return "\n".join(lines)


def compute_metrics(preds, labels, num_classes=None, class_names=None):
    """Accuracy, per-class precision/recall/F1, macro/weighted F1, confusion.

    Classes absent from ``labels`` get F1 defined as 0 with a warning.
    """
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ContractError(
            f"preds shape {preds.shape} != labels shape {labels.shape}")
    if preds.size == 0:
        raise ContractError("need at least one sample")
    if num_classes is None:
        num_classes = int(max(preds.max(), labels.max())) + 1
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    accuracy = float(np.trace(cm) / cm.sum())
    precision, recall, f1 = {}, {}, {}
    support = cm.sum(axis=1)
    for c in range(num_classes):
        tp = cm[c, c]
        pred_c = cm[:, c].sum()
        true_c = support[c]
        if true_c == 0:
            warnings.warn(f"class {c} absent from labels; F1 defined as 0")
        precision[c] = float(tp / pred_c) if pred_c else 0.0
        recall[c] = float(tp / true_c) if true_c else 0.0
        denom = precision[c] + recall[c]
        f1[c] = 2 * precision[c] * recall[c] / denom if denom else 0.0
    macro_f1 = float(np.mean([f1[c] for c in range(num_classes)]))
    weighted_f1 = float(sum(f1[c] * support[c] for c in range(num_classes))
                        / cm.sum())
    return MetricsResult(accuracy=accuracy, macro_f1=macro_f1,
                         weighted_f1=weighted_f1, precision=precision,
                         recall=recall, f1=f1, confusion=cm,
                         class_names=class_names)


DEFAULT_FRACTIONS = (0.001, 0.01, 0.1, 0.2, 0.9)


def label_fraction_study(pretrained, windows, labels, cfg_base,
                         fractions=DEFAULT_FRACTIONS, csv_path=None):
    """Fine-tune with and without pretraining at each label fraction.

    Returns rows of dicts: fraction, arm, accuracy, macro_f1. Fractions
    leaving fewer than 2 classes in the training set are skipped with a note.
    """
    from dataclasses import replace

    from .finetune import (finetune, model_from_checkpoint, predict,
                           select_label_fraction, split_train_val)

    rows = []
    labels = np.asarray(labels)
    for fraction in fractions:
        cfg = replace(cfg_base, label_fraction=fraction)
        train_idx, _ = split_train_val(len(windows), cfg.val_fraction,
                                       cfg.seed)
        chosen = select_label_fraction(train_idx, fraction, cfg.seed)
        if len(np.unique(labels[chosen])) < 2:
            rows.append({"fraction": fraction, "arm": "skipped",
                         "accuracy": float("nan"),
                         "macro_f1": float("nan"),
                         "note": "fewer than 2 classes in train split"})
            continue
        for arm, pre in (("with_pretraining", pretrained),
                         ("without_pretraining", None)):
            ckpt, _ = finetune(pre, windows, labels, cfg)
            model = model_from_checkpoint(ckpt)
            _, val_idx = split_train_val(len(windows), cfg.val_fraction,
                                         cfg.seed)
            preds, _ = predict(model, windows[val_idx])
            m = compute_metrics(preds, labels[val_idx],
                                num_classes=len(cfg.class_names))
            rows.append({"fraction": fraction, "arm": arm,
                         "accuracy": m.accuracy, "macro_f1": m.macro_f1,
                         "note": ""})
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["fraction", "arm", "accuracy",
                                              "macro_f1", "note"])
            w.writeheader()
            w.writerows(rows)
    return rows


@dataclass
class ScalingPoint:
    train_samples: int
    model_params: int
    final_loss: float


@dataclass
class ScalingResult:
    points: list = field(default_factory=list)
    fit: dict | None = None  # {"a", "b", "c"} for loss ~ a*N^-b + c
    complete: bool = True


def fit_power_law(ns, losses):
    """Least-squares fit of loss ~ a * N^(-b) + c.

    The constant c captures the saturation floor: more data or parameters
    does not drive the reconstruction loss to zero.
    """
    ns = np.asarray(ns, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    if len(ns) < 3:
        return None

    def law(n, a, b, c):
        return a * np.power(n, -b) + c

    span = max(losses.max() - losses.min(), 1e-9)
    p0 = (span * ns.min() ** 0.3, 0.3, max(losses.min(), 1e-9))
    try:
        popt, _ = curve_fit(law, ns, losses, p0=p0, maxfev=20000)
    except RuntimeError:
        return None
    return {"a": float(popt[0]), "b": float(popt[1]), "c": float(popt[2])}


def scaling_run(make_corpus, data_sizes, model_sizes, pretrain_cfg, mask_spec,
                probe_windows, budget_s=None, csv_path=None):
    """Pretraining loss across data and model sizes, plus fitted curve.

    ``make_corpus(n)`` returns n training windows; ``model_sizes`` are
    (hidden, feedforward) pairs. Loss per point is the masked MSE on a fixed
    held-out probe set. A budget overrun returns partial results flagged
    ``complete=False``.
    """
    from dataclasses import replace

    from .model import ClassifierConfig, EncoderConfig, count_params
    from .pretrain import eval_masked_mse, run_pretraining

    if len(data_sizes) < 1 or len(model_sizes) < 1:
        raise ContractError("need at least one data size and model size")
    probe = np.asarray(probe_windows, dtype=np.float32)
    channels = probe.shape[2]
    result = ScalingResult()
    started = time.monotonic()
    for hidden, ff in model_sizes:
        enc_cfg = EncoderConfig(channels=channels, hidden=hidden,
                                feedforward=ff)
        for n in data_sizes:
            if budget_s is not None and time.monotonic() - started > budget_s:
                result.complete = False
                break
            corpus = make_corpus(n)
            ckpt, _ = run_pretraining(corpus, pretrain_cfg, mask_spec,
                                      enc_cfg=enc_cfg)
            loss = eval_masked_mse(ckpt.params, probe, mask_spec, enc_cfg)
            result.points.append(ScalingPoint(
                train_samples=int(n),
                model_params=count_params(enc_cfg, with_decoder=True),
                final_loss=loss))
        if not result.complete:
            break
    by_model = {}
    for p in result.points:
        by_model.setdefault(p.model_params, []).append(p)
    for pts in by_model.values():
        if len(pts) >= 3:
            result.fit = fit_power_law([p.train_samples for p in pts],
                                       [p.final_loss for p in pts])
            break
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["train_samples", "model_params", "final_loss"])
            for p in result.points:
                w.writerow([p.train_samples, p.model_params,
                            f"{p.final_loss:.8f}"])
    return result
