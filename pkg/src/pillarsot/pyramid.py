"""Pyramid coordinate codec and its use as a per-point feature expansion.

Each selected channel value is decomposed by greedy truncated division into
one signed digit per pyramid level plus a residual smaller than the finest
scale; summing digits times scales plus the residual reconstructs the input
exactly. Truncation is toward zero so the code of -v is the negation of the
code of v. Emitted features are normalized into (-1, 1): digits times the
level ratio, residual divided by the finest scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelOutOfRangeError,
    EmptyInputError,
    NonFiniteInputError,
    SpecMismatchError,
    WidthMismatchError,
)
from .pillar import AUGMENTED_CHANNELS, PillarSet

REFLECTANCE_CHANNEL = 3
DEFAULT_COORD_CHANNELS = tuple(c for c in range(AUGMENTED_CHANNELS) if c != REFLECTANCE_CHANNEL)


@dataclass(frozen=True)
class PyramidSpec:
    """Geometric ladder of scales: level k uses base_scale * ratio**(k-1)."""

    levels: int = 3
    base_scale: float = 0.8
    ratio: float = 0.125
    normalize: bool = True

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not self.base_scale > 0:
            raise ValueError("base_scale must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must be in (0, 1)")
        if self.normalize:
            inv = 1.0 / self.ratio
            if abs(inv - round(inv)) > 1e-9:
                raise ValueError("normalize requires 1/ratio to be an integer")

    @property
    def scales(self) -> np.ndarray:
        return self.base_scale * self.ratio ** np.arange(self.levels)

    @property
    def finest_scale(self) -> float:
        return float(self.base_scale * self.ratio ** (self.levels - 1))

    def encoded_width(self, selected: int, passthrough: int) -> int:
        return selected * (self.levels + 1) + passthrough


@dataclass(frozen=True)
class PyramidCode:
    """Digits and residual for a single value (or an array of values)."""

    digits: np.ndarray  # (..., levels) signed integers stored as float
    residual: np.ndarray  # (...,)
    spec: PyramidSpec

    def negate(self) -> "PyramidCode":
        return PyramidCode(digits=-self.digits, residual=-self.residual, spec=self.spec)


def encode_value(v, spec: PyramidSpec) -> PyramidCode:
    """Greedy truncated division of v over the pyramid scales.

    r_0 = v; digit_k = trunc(r_{k-1} / scale_k); r_k = r_{k-1} - digit_k * scale_k.
    Works elementwise on arrays.
    """
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError("cannot pyramid-encode non-finite values")
    digits = np.empty(arr.shape + (spec.levels,))
    remainder = arr.copy()
    for k, scale in enumerate(spec.scales):
        d = np.trunc(remainder / scale)
        digits[..., k] = d
        remainder = remainder - d * scale
    return PyramidCode(digits=digits, residual=remainder, spec=spec)


def decode_value(code: PyramidCode, spec: PyramidSpec):
    """Sum digits * scales + residual; exact up to float rounding."""
    if code.spec != spec:
        raise SpecMismatchError(f"code built with {code.spec}, decoded with {spec}")
    value = code.digits @ spec.scales + code.residual
    return value if value.ndim else float(value)


def encode_array(values: np.ndarray, spec: PyramidSpec) -> np.ndarray:
    """Encode an array of values into (..., levels + 1) feature rows.

    With ``spec.normalize`` digits are scaled by the ratio and the residual
    by the finest scale; otherwise raw digits and residual are emitted.
    """
    code = encode_value(values, spec)
    if spec.normalize:
        digits = code.digits * spec.ratio
        residual = code.residual / spec.finest_scale
    else:
        digits, residual = code.digits, code.residual
    return np.concatenate([digits, residual[..., None]], axis=-1)


def encode_features(pillar_set: PillarSet, spec: PyramidSpec,
                    channel_selection=DEFAULT_COORD_CHANNELS) -> np.ndarray:
    """Expand selected channels of the 10-dim features into pyramid codes.

    Returns (P, N_v, W) features with W = |selected| * (levels + 1) +
    |unselected|; channel blocks appear in original channel order, unselected
    channels pass through in place. Padded rows stay all-zero.
    """
    if pillar_set.features is None:
        raise ValueError("pillar set has no augmented features")
    selection = sorted(set(int(c) for c in channel_selection))
    for c in selection:
        if not 0 <= c < AUGMENTED_CHANNELS:
            raise ChannelOutOfRangeError(f"channel {c} outside 0..{AUGMENTED_CHANNELS - 1}")
    feats = pillar_set.features
    blocks = []
    for c in range(AUGMENTED_CHANNELS):
        if c in selection:
            blocks.append(encode_array(feats[..., c], spec))
        else:
            blocks.append(feats[..., c:c + 1])
    out = np.concatenate(blocks, axis=-1)
    out *= pillar_set.mask[..., None]  # keep padded rows exactly zero
    return out


def distribution_distance(features_a: np.ndarray, features_b: np.ndarray):
    """Per-channel 1-Wasserstein distance between two empirical feature sets.

    Inputs are (N, C) rows. Each channel pair is compared by sorting both
    samples, resampling the larger one to the smaller count via linear
    quantile interpolation, and averaging the absolute differences. Returns
    (per_channel, mean).
    """
    a = np.asarray(features_a, dtype=float)
    b = np.asarray(features_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("expected (N, C) feature arrays")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptyInputError("both feature sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise WidthMismatchError(f"widths differ: {a.shape[1]} vs {b.shape[1]}")
    m = min(a.shape[0], b.shape[0])
    grid = (np.arange(m) + 0.5) / m
    per_channel = np.empty(a.shape[1])
    for c in range(a.shape[1]):
        qa = _quantiles(np.sort(a[:, c]), grid)
        qb = _quantiles(np.sort(b[:, c]), grid)
        per_channel[c] = np.mean(np.abs(qa - qb))
    return per_channel, float(per_channel.mean())


def _quantiles(sorted_vals: np.ndarray, grid: np.ndarray) -> np.ndarray:
    n = sorted_vals.shape[0]
    positions = (np.arange(n) + 0.5) / n
    return np.interp(grid, positions, sorted_vals)
