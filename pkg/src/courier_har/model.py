"""Encoder, reconstruction decoder, and GRU classifier.

The encoder is a small BERT-style transformer over 60-timestep IMU windows:
a per-timestep input projection plus a learned positional embedding, then
post-norm attention/feed-forward blocks. The classifier stacks three GRU
layers (20, 20, 10) over the embedding sequence and feeds the last hidden
state through a linear softmax head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError


@dataclass(frozen=True)
class EncoderConfig:
    window_len: int = 60
    channels: int = 6
    layers: int = 4
    attention_heads: int = 4
    hidden: int = 36
    feedforward: int = 72
    sampling_rate_hz: float = 10.0

    def __post_init__(self):
        if self.hidden % self.attention_heads != 0:
            raise ConfigError(
                f"hidden ({self.hidden}) must be divisible by "
                f"attention_heads ({self.attention_heads})"
            )
        if self.channels not in (3, 6):
            raise ConfigError(f"channels must be 3 or 6, got {self.channels}")

    @property
    def window_seconds(self):
        return self.window_len / self.sampling_rate_hz

    def to_dict(self):
        return {
            "window_len": self.window_len,
            "channels": self.channels,
            "layers": self.layers,
            "attention_heads": self.attention_heads,
            "hidden": self.hidden,
            "feedforward": self.feedforward,
            "sampling_rate_hz": self.sampling_rate_hz,
        }


@dataclass(frozen=True)
class ClassifierConfig:
    gru_hidden_sizes: tuple = (20, 20, 10)
    num_classes: int = 3

    def __post_init__(self):
        if len(self.gru_hidden_sizes) < 1:
            raise ConfigError("at least one GRU layer required")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")

    def to_dict(self):
        return {
            "gru_hidden_sizes": list(self.gru_hidden_sizes),
            "num_classes": self.num_classes,
        }


def encoder_param_shapes(cfg: EncoderConfig):
    """Parameter name -> shape map; the checkpoint layout derives from this."""
    shapes = {
        "encoder.proj.w": (cfg.channels, cfg.hidden),
        "encoder.proj.b": (cfg.hidden,),
        "encoder.pos": (cfg.window_len, cfg.hidden),
        "encoder.ln_in.g": (cfg.hidden,),
        "encoder.ln_in.b": (cfg.hidden,),
    }
    h, f = cfg.hidden, cfg.feedforward
    for i in range(cfg.layers):
        p = f"encoder.layer{i}"
        for name in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{name}"] = (h, h)
            shapes[f"{p}.attn.{name}_b"] = (h,)
        shapes[f"{p}.ln1.g"] = (h,)
        shapes[f"{p}.ln1.b"] = (h,)
        shapes[f"{p}.ff.w1"] = (h, f)
        shapes[f"{p}.ff.b1"] = (f,)
        shapes[f"{p}.ff.w2"] = (f, h)
        shapes[f"{p}.ff.b2"] = (h,)
        shapes[f"{p}.ln2.g"] = (h,)
        shapes[f"{p}.ln2.b"] = (h,)
    return shapes


def decoder_param_shapes(cfg: EncoderConfig):
    return {
        "decoder.w1": (cfg.hidden, cfg.feedforward),
        "decoder.b1": (cfg.feedforward,),
        "decoder.w2": (cfg.feedforward, cfg.channels),
        "decoder.b2": (cfg.channels,),
    }


def classifier_param_shapes(cfg: EncoderConfig, clf: ClassifierConfig):
    shapes = {}
    in_dim = cfg.hidden
    for i, h in enumerate(clf.gru_hidden_sizes):
        shapes[f"classifier.gru{i}.w"] = (in_dim, 3 * h)
        shapes[f"classifier.gru{i}.u"] = (h, 3 * h)
        shapes[f"classifier.gru{i}.b"] = (3 * h,)
        in_dim = h
    shapes["classifier.head.w"] = (in_dim, clf.num_classes)
    shapes["classifier.head.b"] = (clf.num_classes,)
    return shapes


def count_params(cfg: EncoderConfig, clf: ClassifierConfig | None = None,
                 with_decoder=False):
    """Exact parameter count derived from the configs alone."""
    shapes = dict(encoder_param_shapes(cfg))
    if with_decoder:
        shapes.update(decoder_param_shapes(cfg))
    if clf is not None:
        shapes.update(classifier_param_shapes(cfg, clf))
    return int(sum(int(np.prod(s)) for s in shapes.values()))


def init_params(shapes, seed, dtype=np.float32):
    """Fan-in scaled uniform init; deterministic for a given seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {}
    for name in sorted(shapes):
        shape = shapes[name]
        if name.endswith((".b", "_b", ".b1", ".b2")) or name.endswith("ln_in.b"):
            data = np.zeros(shape)
        elif ".ln" in name and name.endswith(".g"):
            data = np.ones(shape)
        elif name.endswith(".pos"):
            data = rng.uniform(-0.02, 0.02, size=shape)
        else:
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            data = rng.uniform(-bound, bound, size=shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
    return params


def _linear(x, params, wname, bname):
    return ad.add(ad.matmul(x, params[wname]), params[bname])


def _ln(x, params, prefix):
    normed = ad.layer_norm(x)
    return ad.add(ad.mul(normed, params[f"{prefix}.g"]), params[f"{prefix}.b"])


class EncoderModel:
    """Transformer encoder mapping (B, L, C) windows to (B, L, H) embeddings."""

    def __init__(self, cfg: EncoderConfig, params=None, seed=0,
                 dtype=np.float32):
        self.cfg = cfg
        if params is None:
            params = init_params(encoder_param_shapes(cfg), seed, dtype)
        self.params = params

    def forward(self, x: Tensor) -> Tensor:
        cfg = self.cfg
        if x.shape[-2:] != (cfg.window_len, cfg.channels):
            raise ConfigError(
                f"window shape {x.shape[-2:]} does not match encoder config "
                f"({cfg.window_len}, {cfg.channels})"
            )
        p = self.params
        h = ad.add(_linear(x, p, "encoder.proj.w", "encoder.proj.b"),
                   p["encoder.pos"])
        h = _ln(h, p, "encoder.ln_in")
        n_heads = cfg.attention_heads
        head_dim = cfg.hidden // n_heads
        scale = 1.0 / np.sqrt(head_dim)
        batched = len(x.shape) == 3
        b = x.shape[0] if batched else 1
        for i in range(cfg.layers):
            pre = f"encoder.layer{i}"
            q = _linear(h, p, f"{pre}.attn.wq", f"{pre}.attn.wq_b")
            k = _linear(h, p, f"{pre}.attn.wk", f"{pre}.attn.wk_b")
            v = _linear(h, p, f"{pre}.attn.wv", f"{pre}.attn.wv_b")

            def split(t):
                t = ad.reshape(t, (b, cfg.window_len, n_heads, head_dim))
                return ad.transpose(t, (0, 2, 1, 3))

            if not batched:
                q, k, v = (ad.reshape(t, (1,) + t.shape) for t in (q, k, v))
            q, k, v = split(q), split(k), split(v)
            scores = ad.mul(ad.matmul(q, ad.transpose(k)), scale)
            attn = ad.matmul(ad.softmax(scores), v)
            attn = ad.transpose(attn, (0, 2, 1, 3))
            attn = ad.reshape(attn, (b, cfg.window_len, cfg.hidden))
            if not batched:
                attn = ad.reshape(attn, (cfg.window_len, cfg.hidden))
            attn = _linear(attn, p, f"{pre}.attn.wo", f"{pre}.attn.wo_b")
            h = _ln(ad.add(h, attn), p, f"{pre}.ln1")
            ff = ad.gelu(_linear(h, p, f"{pre}.ff.w1", f"{pre}.ff.b1"))
            ff = _linear(ff, p, f"{pre}.ff.w2", f"{pre}.ff.b2")
            h = _ln(ad.add(h, ff), p, f"{pre}.ln2")
        return h


class DecoderModel:
    """Per-timestep MLP reconstructing (.., L, C) from embeddings."""

    def __init__(self, cfg: EncoderConfig, params=None, seed=1,
                 dtype=np.float32):
        self.cfg = cfg
        if params is None:
            params = init_params(decoder_param_shapes(cfg), seed, dtype)
        self.params = params

    def forward(self, emb: Tensor) -> Tensor:
        p = self.params
        h = ad.gelu(ad.add(ad.matmul(emb, p["decoder.w1"]), p["decoder.b1"]))
        return ad.add(ad.matmul(h, p["decoder.w2"]), p["decoder.b2"])


class GruClassifier:
    """Stacked GRU over the embedding sequence, softmax head on last state."""

    def __init__(self, cfg: EncoderConfig, clf: ClassifierConfig, params=None,
                 seed=2, dtype=np.float32):
        self.cfg = cfg
        self.clf = clf
        if params is None:
            params = init_params(classifier_param_shapes(cfg, clf), seed, dtype)
        self.params = params

    def _gru_layer(self, x: Tensor, idx: int, hidden: int) -> Tensor:
        p = self.params
        b, length = x.shape[0], x.shape[1]
        w, u, bias = (p[f"classifier.gru{idx}.{n}"] for n in ("w", "u", "b"))
        xw = ad.add(ad.matmul(x, w), bias)  # (B, L, 3H), gates precomputed
        h = Tensor(np.zeros((b, hidden), dtype=x.dtype))
        hs = []
        for t in range(length):
            xt = xw[:, t, :]
            hu = ad.matmul(h, u)
            z = ad.sigmoid(ad.add(xt[:, :hidden], hu[:, :hidden]))
            r = ad.sigmoid(ad.add(xt[:, hidden:2 * hidden],
                                  hu[:, hidden:2 * hidden]))
            n = ad.tanh(ad.add(xt[:, 2 * hidden:],
                               ad.mul(r, hu[:, 2 * hidden:])))
            h = ad.add(ad.mul(z, h), ad.mul(ad.add(ad.neg(z), 1.0), n))
            hs.append(ad.reshape(h, (b, 1, hidden)))
        return ad.concat(hs, axis=1), h

    def logits(self, emb: Tensor) -> Tensor:
        x = emb
        if len(x.shape) == 2:
            x = ad.reshape(x, (1,) + x.shape)
        last = None
        for i, hidden in enumerate(self.clf.gru_hidden_sizes):
            x, last = self._gru_layer(x, i, hidden)
        p = self.params
        return ad.add(ad.matmul(last, p["classifier.head.w"]),
                      p["classifier.head.b"])

    def forward(self, emb: Tensor) -> Tensor:
        """Class probability rows (softmax over logits)."""
        return ad.softmax(self.logits(emb))


class PretrainModel:
    """Encoder + decoder pair used for masked reconstruction."""

    def __init__(self, cfg: EncoderConfig, params=None, seed=0,
                 dtype=np.float32):
        self.cfg = cfg
        if params is None:
            params = init_params(encoder_param_shapes(cfg), seed, dtype)
            params.update(init_params(decoder_param_shapes(cfg), seed + 1,
                                      dtype))
        self.params = params
        self.encoder = EncoderModel(cfg, params)
        self.decoder = DecoderModel(cfg, params)

    def forward(self, x: Tensor) -> Tensor:
        return self.decoder.forward(self.encoder.forward(x))


class HarModel:
    """Encoder + GRU classifier used for supervised tasks."""

    def __init__(self, cfg: EncoderConfig, clf: ClassifierConfig, params=None,
                 seed=0, dtype=np.float32):
        self.cfg = cfg
        self.clf = clf
        if params is None:
            params = init_params(encoder_param_shapes(cfg), seed, dtype)
            params.update(init_params(classifier_param_shapes(cfg, clf),
                                      seed + 2, dtype))
        self.params = params
        self.encoder = EncoderModel(cfg, params)
        self.classifier = GruClassifier(cfg, clf, params)

    def logits(self, x: Tensor) -> Tensor:
        return self.classifier.logits(self.encoder.forward(x))

    def forward(self, x: Tensor) -> Tensor:
        return ad.softmax(self.logits(x))
