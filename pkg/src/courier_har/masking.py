"""Span masking and the masked reconstruction loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError


@dataclass(frozen=True)
class MaskSpec:
    mask_ratio: float = 1.0 / 6.0
    span_len: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_ratio < 1.0:
            raise ConfigError(f"mask_ratio must be in (0,1), got {self.mask_ratio}")
        if self.span_len < 1:
            raise ConfigError(f"span_len must be >= 1, got {self.span_len}")


def sample_mask(length, spec: MaskSpec, rng):
    """Sample masked timestep indices as a union of contiguous spans.

    Span starts are drawn so each index has uniform marginal coverage; the
    final span is truncated to hit the exact count round(length * ratio).
    """
    if length < spec.span_len:
        raise ConfigError(f"window length {length} < span_len {spec.span_len}")
    target = int(round(length * spec.mask_ratio))
    if target < 1:
        raise ConfigError(
            f"mask_ratio {spec.mask_ratio} yields zero masked positions "
            f"for length {length}")
    chosen = set()
    while len(chosen) < target:
        start = int(rng.integers(-(spec.span_len - 1), length))
        span = [i for i in range(start, start + spec.span_len)
                if 0 <= i < length and i not in chosen]
        need = target - len(chosen)
        chosen.update(span[:need])
    return np.array(sorted(chosen), dtype=np.int64)


def apply_mask(window, indices):
    """Zero-fill masked timesteps across all channels; return originals too."""
    masked = np.array(window, copy=True)
    originals = masked[indices].copy()
    masked[indices] = 0.0
    return masked, originals


def mask_matrix(shape, index_sets, dtype=np.float32):
    """0/1 matrix selecting masked positions, one row set per window."""
    m = np.zeros(shape, dtype=dtype)
    if len(shape) == 3:
        for i, idx in enumerate(index_sets):
            m[i, idx, :] = 1.0
    else:
        m[index_sets, :] = 1.0
    return m


def masked_mse(original: Tensor, reconstruction: Tensor, indices) -> Tensor:
    """Mean squared error over masked positions x channels only.

    ``indices`` is an index array for a single window or a list of index
    arrays for a batch. Gradient w.r.t. the reconstruction is exactly zero
    at unmasked positions.
    """
    if original.shape != reconstruction.shape:
        raise ContractError(
            f"shape mismatch: original {original.shape} vs "
            f"reconstruction {reconstruction.shape}")
    batched = len(original.shape) == 3
    sets = indices if batched else [indices]
    n_masked = sum(len(s) for s in sets)
    if n_masked == 0:
        raise ContractError("masked_mse requires at least one masked index")
    m = mask_matrix(original.shape,
                    indices if batched else indices,
                    dtype=original.data.dtype)
    diff = ad.mul(ad.sub(reconstruction, original), Tensor(m))
    sq = ad.mul(diff, diff)
    total = ad.reduce_sum(sq)
    channels = original.shape[-1]
    return ad.mul(total, 1.0 / float(n_masked * channels))
