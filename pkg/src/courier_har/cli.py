"""Batch command-line surface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Config values layer as defaults < --config file < flags, and every artifact
gets a ``<name>.run.json`` sidecar with the resolved config and seed.
The COURIER_HAR_DATA environment variable supplies the default data dir.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import build_arrays, load_corpus_windows, load_stream_windows
from .errors import (CheckpointError, ConfigError, ContractError, DataError,
                     NumericError)
from .finetune import (FinetuneConfig, finetune, model_from_checkpoint,
                       predict, write_history)
from .masking import MaskSpec
from .metrics import compute_metrics, label_fraction_study, scaling_run
from .pretrain import PretrainConfig, run_pretraining, write_loss_history
from .sensorio import NormStats, normalize
from .synth import generate_corpus
from .trajectory import (TrajPoint, segment_trajectory, segments_to_geojson,
                         write_segments_ndjson)
from .weaklabel import elevation_label_window, label_window

ENV_DATA_DIR = "COURIER_HAR_DATA"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_sidecar(artifact_path, resolved):
    path = Path(str(artifact_path) + ".run.json")
    with open(path, "w") as f:
        json.dump(resolved, f, indent=2, sort_keys=True)


def _resolve(args, keys):
    """defaults < config file < explicit flags."""
    resolved = {}
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            file_cfg = json.load(f)
    for key, default in keys.items():
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _data_dir(args):
    if getattr(args, "data", None):
        return args.data
    env = os.environ.get(ENV_DATA_DIR)
    if env:
        return env
    raise DataError(f"no data directory given (flag --data or ${ENV_DATA_DIR})")


def cmd_synth(args):
    cfg = _resolve(args, {"streams": 20, "seed": 0,
                          "include_elevator": False})
    manifest, _ = generate_corpus(cfg["streams"], seed=cfg["seed"],
                                  out_dir=args.out,
                                  include_elevator=cfg["include_elevator"])
    _write_sidecar(Path(args.out) / "manifest.json", cfg)
    print(json.dumps({"streams": manifest["n_streams"],
                      "realized_mix": manifest["realized_mix"]}))
    return 0


def cmd_pretrain(args):
    cfg = _resolve(args, {"epochs": 200, "batch_size": 128, "lr": 0.001,
                          "seed": 0, "channels": 6, "mask_ratio": 1.0 / 6.0,
                          "span_len": 5})
    windows = load_corpus_windows(_data_dir(args), channels=cfg["channels"])
    x, _, stats = build_arrays(windows)
    pcfg = PretrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"],
                          lr=cfg["lr"], seed=cfg["seed"])
    spec = MaskSpec(mask_ratio=cfg["mask_ratio"], span_len=cfg["span_len"],
                    rng_seed=cfg["seed"])
    ckpt, history = run_pretraining(x, pcfg, spec, norm_stats=stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "pretrained.ckpt"
    save_checkpoint(ckpt, ckpt_path)
    write_loss_history(history, out / "pretrain_loss.csv")
    _write_sidecar(ckpt_path, cfg)
    print(json.dumps({"checkpoint": str(ckpt_path),
                      "final_loss": history[-1]}))
    return 0


def cmd_finetune(args):
    cfg = _resolve(args, {"task": "activity3", "epochs": 60, "lr": 0.001,
                          "batch_size": 128, "label_fraction": 1.0,
                          "channels": 6, "augmentation": "none", "seed": 0})
    pretrained = load_checkpoint(args.ckpt) if args.ckpt else None
    if pretrained is not None and pretrained.norm_stats:
        stats = NormStats.from_dict(pretrained.norm_stats)
    else:
        stats = None
    windows = load_corpus_windows(_data_dir(args), channels=cfg["channels"])
    x, y, stats = build_arrays(windows, task=cfg["task"], stats=stats)
    fcfg = FinetuneConfig(task=cfg["task"], epochs=cfg["epochs"],
                          lr=cfg["lr"], batch_size=cfg["batch_size"],
                          label_fraction=cfg["label_fraction"],
                          channels=cfg["channels"],
                          augmentation=cfg["augmentation"], seed=cfg["seed"])
    ckpt, history = finetune(pretrained, x, y, fcfg, norm_stats=stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "model.ckpt"
    save_checkpoint(ckpt, ckpt_path)
    write_history(history, out / "finetune_metrics.csv")
    _write_sidecar(ckpt_path, cfg)
    val_rows = [h for h in history if h[1] == "val"]
    print(json.dumps({"checkpoint": str(ckpt_path),
                      "val_accuracy": val_rows[-1][2] if val_rows else None}))
    return 0


def _model_and_stats(model_path):
    ckpt = load_checkpoint(model_path)
    model = model_from_checkpoint(ckpt)
    stats = NormStats.from_dict(ckpt.norm_stats) if ckpt.norm_stats else None
    return ckpt, model, stats


def _predict_stream(model, stats, stream_path, channels):
    windows = load_stream_windows(stream_path, channels=channels)
    preds = []
    for w in windows:
        values = normalize(w.values, stats) if stats else w.values
        cls, probs = predict(model, values)
        preds.append((w, cls, probs))
    return preds


def cmd_predict(args):
    ckpt, model, stats = _model_and_stats(args.model)
    names = ckpt.metadata.get("class_names") or [
        str(i) for i in range(model.clf.num_classes)]
    preds = _predict_stream(model, stats, args.traj, model.cfg.channels)
    with open(args.out, "w") as f:
        for w, cls, probs in preds:
            f.write(json.dumps({"start_t": w.start_t_ms,
                                "class": names[cls],
                                "probs": [round(float(p), 6)
                                          for p in probs]}) + "\n")
    _write_sidecar(args.out, {"model": str(args.model),
                              "traj": str(args.traj)})
    print(json.dumps({"windows": len(preds), "out": str(args.out)}))
    return 0


def cmd_label(args):
    cfg = _resolve(args, {"kind": "riding"})
    windows = load_stream_windows(args.traj, channels=3)
    labeler = (label_window if cfg["kind"] == "riding"
               else elevation_label_window)
    with open(args.out, "w") as f:
        for w in windows:
            f.write(json.dumps(labeler(w).to_obj()) + "\n")
    _write_sidecar(args.out, cfg)
    print(json.dumps({"windows": len(windows), "out": str(args.out)}))
    return 0


def cmd_segment(args):
    ckpt, model, stats = _model_and_stats(args.model)
    names = ckpt.metadata.get("class_names") or ["still", "walk", "ride"]
    preds = _predict_stream(model, stats, args.traj, model.cfg.channels)
    points = []
    for w, cls, _ in preds:
        if w.lat is None or w.lon is None:
            continue
        points.append(TrajPoint(t_ms=w.start_t_ms, lat=w.lat, lon=w.lon,
                                activity=names[cls]))
    segments = segment_trajectory(points)
    write_segments_ndjson(segments, args.out)
    if args.geojson:
        with open(args.geojson, "w") as f:
            json.dump(segments_to_geojson(segments, points), f)
    _write_sidecar(args.out, {"model": str(args.model),
                              "traj": str(args.traj)})
    print(json.dumps({"segments": len(segments), "out": str(args.out)}))
    return 0


def cmd_eval(args):
    cfg = _resolve(args, {"fractions": None})
    ckpt, model, stats = _model_and_stats(args.model)
    task = ckpt.metadata.get("task", "activity3")
    windows = load_corpus_windows(_data_dir(args),
                                  channels=model.cfg.channels)
    x, y, _ = build_arrays(windows, task=task, stats=stats)
    preds, _ = predict(model, x)
    names = tuple(ckpt.metadata.get("class_names", [])) or None
    m = compute_metrics(preds, y, num_classes=model.clf.num_classes,
                        class_names=names)
    print(m.render_confusion())
    summary = {"accuracy": m.accuracy, "macro_f1": m.macro_f1,
               "weighted_f1": m.weighted_f1}
    print(json.dumps(summary))
    if args.out:
        with open(args.out, "w") as f:
            json.dump(summary, f, indent=2)
        _write_sidecar(args.out, {"model": str(args.model), "task": task})
    return 0


def cmd_scaling(args):
    cfg = _resolve(args, {"data_sizes": [500, 1000, 2000],
                          "epochs": 3, "seed": 0, "budget_s": None})
    windows = load_corpus_windows(_data_dir(args))
    x, _, _ = build_arrays(windows)
    rng = np.random.Generator(np.random.PCG64(cfg["seed"]))
    order = rng.permutation(len(x))
    probe = x[order[:min(256, len(x) // 4)]]
    pool = x[order[len(probe):]]
    if max(cfg["data_sizes"]) > len(pool):
        raise DataError(
            f"largest data size {max(cfg['data_sizes'])} exceeds corpus "
            f"pool {len(pool)}")
    pcfg = PretrainConfig(epochs=cfg["epochs"], seed=cfg["seed"])
    result = scaling_run(lambda n: pool[:n], cfg["data_sizes"],
                         [(36, 72)], pcfg, MaskSpec(rng_seed=cfg["seed"]),
                         probe, budget_s=cfg["budget_s"],
                         csv_path=args.out)
    if args.out:
        _write_sidecar(args.out, cfg)
    print(json.dumps({"points": [(p.train_samples, p.final_loss)
                                 for p in result.points],
                      "fit": result.fit, "complete": result.complete}))
    return 0


def build_parser():
    parser = _Parser(prog="courier-har",
                     description="IMU activity recognition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic courier corpus")
    common(p)
    p.add_argument("--streams", type=int, default=None)
    p.add_argument("--include-elevator", dest="include_elevator",
                   action="store_const", const=True, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="masked-reconstruction pretraining")
    common(p)
    p.add_argument("--data")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="supervised fine-tuning")
    common(p)
    p.add_argument("--data")
    p.add_argument("--labels", dest="data")
    p.add_argument("--task", default=None)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--label-fraction", dest="label_fraction", type=float,
                   default=None)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--augmentation", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("predict", help="per-window activity predictions")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("label", help="rule-based weak labels for a stream")
    common(p)
    p.add_argument("--traj", required=True)
    p.add_argument("--kind", choices=["riding", "elevation"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("segment", help="trajectory segmentation")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--geojson", default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="metrics against corpus labels")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scaling", help="loss vs data size sweep")
    common(p)
    p.add_argument("--data")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code or 0
    try:
        return args.func(args)
    except (DataError, CheckpointError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except (ConfigError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
