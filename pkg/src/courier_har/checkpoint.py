"""Binary checkpoint format.

Layout: 8 magic bytes, format_version u32 LE, JSON header length u32 LE,
UTF-8 JSON header, then raw little-endian float32 parameter arrays in
lexicographic name order. The header carries the configs, parameter shapes,
normalization stats, and training metadata, so a load can validate shape and
config compatibility before touching the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import (CheckpointConfigError, CheckpointCorruptError,
                     CheckpointVersionError)
from .model import ClassifierConfig, EncoderConfig

MAGIC = b"HARCKPT\x00"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    encoder_config: EncoderConfig
    params: dict  # name -> Tensor
    classifier_config: ClassifierConfig | None = None
    norm_stats: dict | None = None  # {"mean": [...], "std": [...]}
    metadata: dict = field(default_factory=dict)

    def param_count(self):
        return int(sum(p.data.size for p in self.params.values()))


def save_checkpoint(ckpt: Checkpoint, path):
    names = sorted(ckpt.params)
    header = {
        "encoder_config": ckpt.encoder_config.to_dict(),
        "classifier_config": (ckpt.classifier_config.to_dict()
                              if ckpt.classifier_config else None),
        "norm_stats": ckpt.norm_stats,
        "metadata": ckpt.metadata,
        "params": {n: list(ckpt.params[n].data.shape) for n in names},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(
                ckpt.params[n].data, dtype="<f4").tobytes())
    return path


def load_checkpoint(path, expect_config: EncoderConfig | None = None):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(MAGIC) + 8 or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointCorruptError(f"{path}: bad magic bytes")
    version, = struct.unpack_from("<I", raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}")
    hlen, = struct.unpack_from("<I", raw, len(MAGIC) + 4)
    start = len(MAGIC) + 8
    if start + hlen > len(raw):
        raise CheckpointCorruptError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointCorruptError(f"{path}: unreadable header: {e}") from e
    try:
        enc_cfg = EncoderConfig(**header["encoder_config"])
        clf_raw = header.get("classifier_config")
        clf_cfg = None
        if clf_raw:
            clf_cfg = ClassifierConfig(
                gru_hidden_sizes=tuple(clf_raw["gru_hidden_sizes"]),
                num_classes=clf_raw["num_classes"])
        shapes = header["params"]
    except (KeyError, TypeError) as e:
        raise CheckpointCorruptError(f"{path}: malformed header: {e}") from e
    if expect_config is not None and enc_cfg != expect_config:
        raise CheckpointConfigError(
            f"{path}: stored config {enc_cfg} != requested {expect_config}")
    params = {}
    offset = start + hlen
    for name in sorted(shapes):
        shape = tuple(shapes[name])
        n_bytes = int(np.prod(shape)) * 4
        if offset + n_bytes > len(raw):
            raise CheckpointCorruptError(
                f"{path}: truncated payload at parameter '{name}'")
        arr = np.frombuffer(raw, dtype="<f4", count=int(np.prod(shape)),
                            offset=offset).reshape(shape)
        params[name] = Tensor(arr.copy(), requires_grad=True)
        offset += n_bytes
    if offset != len(raw):
        raise CheckpointCorruptError(f"{path}: trailing bytes after payload")
    return Checkpoint(encoder_config=enc_cfg, params=params,
                      classifier_config=clf_cfg,
                      norm_stats=header.get("norm_stats"),
                      metadata=header.get("metadata", {}))
