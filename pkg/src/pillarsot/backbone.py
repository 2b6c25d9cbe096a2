"""Forward-only multi-stage attention backbone, similarity neck, and box head.

The backbone is a 4-stage pyramid: each stage is a strided (non-overlapping)
patch embedding followed by ``depths[k]`` pre-norm blocks of spatially-reduced
multi-head self-attention plus a feed-forward layer. Keys/values attend over
an average-pooled token grid (reduction factor ``sr_ratios[k]``). The neck
cross-attends search tokens (queries) against template tokens (keys/values)
at every scale, upsamples everything to stride 4 and merges by per-scale 1x1
projection and sum. The head is a per-cell linear map whose output decodes to
a 7-DOF box relative to the prior pose.

There is no training here: weights are either seeded pseudo-random
(uniform scaled by 1/sqrt(fan_in)) or loaded from the binary weight file.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .core import Box7, normalize_angle, rotation_2d
from .errors import (
    CorruptWeightFileError,
    NonFiniteActivationError,
    ShapeMismatchError,
    ShapeMismatchOnLoadError,
)
from .pillar import GridSpec, PseudoImage

WEIGHT_MAGIC = b"PSOT-W1\x00"
HEAD_CHANNELS = 9  # heatmap 1, xy offset 2, z 1, size delta 3, sin/cos 2


@dataclass(frozen=True)
class BackboneConfig:
    depths: tuple[int, int, int, int] = (3, 1, 1, 1)
    heads: tuple[int, int, int, int] = (1, 2, 5, 8)
    channels: tuple[int, int, int, int] = (64, 128, 320, 512)
    mlp_ratios: tuple[int, int, int, int] = (8, 8, 4, 4)
    strides: tuple[int, int, int, int] = (4, 2, 2, 2)
    sr_ratios: tuple[int, int, int, int] = (8, 4, 2, 1)
    in_channels: int = 37

    def __post_init__(self):
        for name in ("depths", "heads", "channels", "mlp_ratios", "strides", "sr_ratios"):
            val = tuple(int(v) for v in getattr(self, name))
            if len(val) != 4:
                raise ValueError(f"{name} must have 4 entries")
            object.__setattr__(self, name, val)
        if any(d < 0 for d in self.depths):
            raise ValueError("depths must be >= 0")
        for c, h in zip(self.channels, self.heads):
            if c % h != 0:
                raise ValueError(f"channels {c} not divisible by heads {h}")

    @property
    def total_stride(self) -> int:
        out = 1
        for s in self.strides:
            out *= s
        return out

    def to_json(self) -> str:
        return json.dumps({
            "depths": self.depths, "heads": self.heads, "channels": self.channels,
            "mlp_ratios": self.mlp_ratios, "strides": self.strides,
            "sr_ratios": self.sr_ratios, "in_channels": self.in_channels,
        }, sort_keys=True)


@dataclass
class WeightStore:
    """Named tensors plus the seed/config they were derived from."""

    tensors: dict[str, np.ndarray]
    config_json: str
    seed: int | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.config_json != other.config_json or self.seed != other.seed:
            return False
        if self.tensors.keys() != other.tensors.keys():
            return False
        return all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)


def expected_shapes(cfg: BackboneConfig) -> dict[str, tuple[int, ...]]:
    """Every tensor shape is a pure function of the configuration."""
    shapes: dict[str, tuple[int, ...]] = {}
    c_prev = cfg.in_channels
    for k in range(4):
        c = cfg.channels[k]
        s = cfg.strides[k]
        p = f"stage{k}"
        shapes[f"{p}.embed.w"] = (c_prev * s * s, c)
        shapes[f"{p}.embed.b"] = (c,)
        shapes[f"{p}.embed.ln.g"] = (c,)
        shapes[f"{p}.embed.ln.b"] = (c,)
        for i in range(cfg.depths[k]):
            b = f"{p}.block{i}"
            for ln in ("ln1", "ln2"):
                shapes[f"{b}.{ln}.g"] = (c,)
                shapes[f"{b}.{ln}.b"] = (c,)
            for m in ("wq", "wk", "wv", "wo"):
                shapes[f"{b}.attn.{m}"] = (c, c)
            for v in ("bq", "bk", "bv", "bo"):
                shapes[f"{b}.attn.{v}"] = (c,)
            hidden = c * cfg.mlp_ratios[k]
            shapes[f"{b}.ffn.w1"] = (c, hidden)
            shapes[f"{b}.ffn.b1"] = (hidden,)
            shapes[f"{b}.ffn.w2"] = (hidden, c)
            shapes[f"{b}.ffn.b2"] = (c,)
        shapes[f"{p}.norm.g"] = (c,)
        shapes[f"{p}.norm.b"] = (c,)
        c_prev = c
    for k in range(4):
        c = cfg.channels[k]
        n = f"neck.scale{k}"
        for m in ("wq", "wk", "wv", "wo"):
            shapes[f"{n}.attn.{m}"] = (c, c)
        for v in ("bq", "bk", "bv", "bo"):
            shapes[f"{n}.attn.{v}"] = (c,)
        shapes[f"{n}.proj.w"] = (c, cfg.channels[0])
        shapes[f"{n}.proj.b"] = (cfg.channels[0],)
    shapes["head.w"] = (cfg.channels[0], HEAD_CHANNELS)
    shapes["head.b"] = (HEAD_CHANNELS,)
    return shapes


def init_weights(cfg: BackboneConfig, seed: int = 0) -> WeightStore:
    """Deterministic init: matrices ~ U(-1, 1) / sqrt(fan_in); biases zero;
    layer-norm gains one."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_shapes(cfg).items():
        if name.endswith(".g"):
            tensors[name] = np.ones(shape)
        elif len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[0]
            tensors[name] = rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(fan_in)
    return WeightStore(tensors=tensors, config_json=cfg.to_json(), seed=seed)


def save_weights(w: WeightStore, path) -> None:
    """Little-endian binary: magic, config JSON, tensor directory
    (name, shape, offset), data blob, crc32 trailer."""
    names = sorted(w.tensors)
    directory = bytearray()
    blob = bytearray()
    for name in names:
        arr = np.ascontiguousarray(w.tensors[name], dtype="<f8")
        nb = name.encode("utf-8")
        directory += struct.pack("<H", len(nb)) + nb
        directory += struct.pack("<B", arr.ndim)
        directory += struct.pack(f"<{arr.ndim}I", *arr.shape)
        directory += struct.pack("<Q", len(blob))
        blob += arr.tobytes()
    cfg_b = w.config_json.encode("utf-8")
    seed = -1 if w.seed is None else int(w.seed)
    header = (
        WEIGHT_MAGIC
        + struct.pack("<i", seed)
        + struct.pack("<I", len(cfg_b)) + cfg_b
        + struct.pack("<I", len(names))
        + bytes(directory)
        + struct.pack("<Q", len(blob))
    )
    payload = header + bytes(blob)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_weights(path, cfg: BackboneConfig) -> WeightStore:
    with open(path, "rb") as fh:
        payload = fh.read()
    if len(payload) < len(WEIGHT_MAGIC) + 4 or payload[:len(WEIGHT_MAGIC)] != WEIGHT_MAGIC:
        raise CorruptWeightFileError(f"{path}: bad magic")
    body, trailer = payload[:-4], payload[-4:]
    if struct.unpack("<I", trailer)[0] != zlib.crc32(body):
        raise CorruptWeightFileError(f"{path}: checksum mismatch")
    off = len(WEIGHT_MAGIC)
    seed = struct.unpack_from("<i", body, off)[0]
    off += 4
    cfg_len = struct.unpack_from("<I", body, off)[0]
    off += 4
    config_json = body[off:off + cfg_len].decode("utf-8")
    off += cfg_len
    if config_json != cfg.to_json():
        raise ShapeMismatchOnLoadError(
            f"{path}: stored config {config_json} != requested {cfg.to_json()}")
    count = struct.unpack_from("<I", body, off)[0]
    off += 4
    entries = []
    for _ in range(count):
        name_len = struct.unpack_from("<H", body, off)[0]
        off += 2
        name = body[off:off + name_len].decode("utf-8")
        off += name_len
        ndim = struct.unpack_from("<B", body, off)[0]
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", body, off)
        off += 4 * ndim
        data_off = struct.unpack_from("<Q", body, off)[0]
        off += 8
        entries.append((name, shape, data_off))
    blob_len = struct.unpack_from("<Q", body, off)[0]
    off += 8
    blob = body[off:off + blob_len]
    tensors = {}
    for name, shape, data_off in entries:
        n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n_items, offset=data_off)
        tensors[name] = arr.reshape(shape).copy()
    want = expected_shapes(cfg)
    got = {name: tuple(int(d) for d in t.shape) for name, t in tensors.items()}
    if got != want:
        raise ShapeMismatchOnLoadError(f"{path}: tensor shapes do not match config")
    return WeightStore(tensors=tensors, config_json=config_json,
                       seed=None if seed == -1 else seed)


# --- numerics ---

def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


def _gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation; framework-free
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x ** 3)))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def multi_head_attention(q_tokens: np.ndarray, kv_tokens: np.ndarray, w: WeightStore,
                         prefix: str, heads: int,
                         probe: dict | None = None) -> np.ndarray:
    """Generic MHA over (n, C) token matrices; kv may differ from q."""
    c = q_tokens.shape[1]
    d = c // heads
    q = q_tokens @ w[f"{prefix}.wq"] + w[f"{prefix}.bq"]
    k = kv_tokens @ w[f"{prefix}.wk"] + w[f"{prefix}.bk"]
    v = kv_tokens @ w[f"{prefix}.wv"] + w[f"{prefix}.bv"]
    q = q.reshape(-1, heads, d).transpose(1, 0, 2)
    k = k.reshape(-1, heads, d).transpose(1, 0, 2)
    v = v.reshape(-1, heads, d).transpose(1, 0, 2)
    attn = _softmax(q @ k.transpose(0, 2, 1) / np.sqrt(d))
    if probe is not None:
        probe["attn"] = attn
    out = (attn @ v).transpose(1, 0, 2).reshape(-1, c)
    return out @ w[f"{prefix}.wo"] + w[f"{prefix}.bo"]


def _pool_tokens(tokens: np.ndarray, h: int, wdt: int, sr: int) -> np.ndarray:
    """Average-pool an (h*w, C) token grid by sr along both axes."""
    if sr == 1:
        return tokens
    if h % sr or wdt % sr:
        raise ShapeMismatchError(f"token grid {h}x{wdt} not divisible by sr={sr}")
    c = tokens.shape[1]
    grid = tokens.reshape(h // sr, sr, wdt // sr, sr, c)
    return grid.mean(axis=(1, 3)).reshape(-1, c)


def _patch_embed(x: np.ndarray, stride: int, w: WeightStore, prefix: str) -> tuple[np.ndarray, int, int]:
    c_in, h, wdt = x.shape
    if h % stride or wdt % stride:
        raise ShapeMismatchError(f"input {h}x{wdt} not divisible by stride {stride}")
    h2, w2 = h // stride, wdt // stride
    patches = (
        x.reshape(c_in, h2, stride, w2, stride)
        .transpose(1, 3, 0, 2, 4)
        .reshape(h2 * w2, c_in * stride * stride)
    )
    tokens = patches @ w[f"{prefix}.w"] + w[f"{prefix}.b"]
    tokens = _layer_norm(tokens, w[f"{prefix}.ln.g"], w[f"{prefix}.ln.b"])
    return tokens, h2, w2


def _check_finite(x: np.ndarray, stage: int, block: int | None):
    if not np.all(np.isfinite(x)):
        raise NonFiniteActivationError(stage, block)


def backbone_forward(image, cfg: BackboneConfig, w: WeightStore,
                     probe: dict | None = None) -> list[np.ndarray]:
    """Run the 4-stage backbone; returns one (C_k, H_k, W_k) map per stage."""
    x = image.data if isinstance(image, PseudoImage) else np.asarray(image, dtype=float)
    if x.ndim != 3:
        raise ShapeMismatchError(f"expected (C, H, W) input, got {x.shape}")
    if x.shape[0] != cfg.in_channels:
        raise ShapeMismatchError(f"input has {x.shape[0]} channels, config wants {cfg.in_channels}")
    if x.shape[1] % cfg.total_stride or x.shape[2] % cfg.total_stride:
        raise ShapeMismatchError(
            f"H, W must be divisible by {cfg.total_stride}, got {x.shape[1:]}" )
    features: list[np.ndarray] = []
    for k in range(4):
        tokens, h, wdt = _patch_embed(x, cfg.strides[k], w, f"stage{k}.embed")
        _check_finite(tokens, k, None)
        for i in range(cfg.depths[k]):
            b = f"stage{k}.block{i}"
            normed = _layer_norm(tokens, w[f"{b}.ln1.g"], w[f"{b}.ln1.b"])
            kv = _pool_tokens(normed, h, wdt, cfg.sr_ratios[k])
            block_probe = None
            if probe is not None:
                block_probe = {}
                probe[f"{b}.attn"] = block_probe
            tokens = tokens + multi_head_attention(
                normed, kv, w, f"{b}.attn", cfg.heads[k], probe=block_probe)
            normed = _layer_norm(tokens, w[f"{b}.ln2.g"], w[f"{b}.ln2.b"])
            hidden = _gelu(normed @ w[f"{b}.ffn.w1"] + w[f"{b}.ffn.b1"])
            tokens = tokens + (hidden @ w[f"{b}.ffn.w2"] + w[f"{b}.ffn.b2"])
            _check_finite(tokens, k, i)
        tokens = _layer_norm(tokens, w[f"stage{k}.norm.g"], w[f"stage{k}.norm.b"])
        x = tokens.reshape(h, wdt, -1).transpose(2, 0, 1)
        features.append(x)
    return features


def _upsample_nearest(x: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return x
    return np.repeat(np.repeat(x, factor, axis=1), factor, axis=2)


def similarity_neck_forward(template: list[np.ndarray], search: list[np.ndarray],
                            cfg: BackboneConfig, w: WeightStore) -> np.ndarray:
    """Cross-attend search tokens against template tokens at each scale and
    fuse to a single (channels[0], H/4, W/4) map of the search branch."""
    if len(template) != 4 or len(search) != 4:
        raise ShapeMismatchError("expected 4 feature maps per branch")
    fused = None
    base_hw = search[0].shape[1:]
    for k in range(4):
        t_map, s_map = template[k], search[k]
        if t_map.shape[0] != cfg.channels[k] or s_map.shape[0] != cfg.channels[k]:
            raise ShapeMismatchError(f"scale {k} channels mismatch config")
        c, hs, ws = s_map.shape
        s_tokens = s_map.transpose(1, 2, 0).reshape(-1, c)
        t_tokens = t_map.transpose(1, 2, 0).reshape(-1, c)
        sim = multi_head_attention(s_tokens, t_tokens, w, f"neck.scale{k}.attn", cfg.heads[k])
        sim_map = sim.reshape(hs, ws, c).transpose(2, 0, 1)
        factor = base_hw[0] // hs
        up = _upsample_nearest(sim_map, factor)
        proj = np.einsum("chw,cd->dhw", up, w[f"neck.scale{k}.proj.w"]) \
            + w[f"neck.scale{k}.proj.b"][:, None, None]
        fused = proj if fused is None else fused + proj
    if not np.all(np.isfinite(fused)):
        raise NonFiniteActivationError(stage=4, block=None, message="neck output")
    return fused


def head_forward(fused: np.ndarray, w: WeightStore) -> np.ndarray:
    """Per-cell linear head: (C_f, H, W) -> (9, H, W) raw predictions."""
    return np.einsum("chw,cd->dhw", fused, w["head.w"]) + w["head.b"][:, None, None]


def decode_box(head_map: np.ndarray, prior: Box7, grid: GridSpec,
               bev_stride: int = 4) -> tuple[Box7, float]:
    """Decode the 9-channel head map into a global-frame box + confidence.

    The heatmap argmax picks a cell (first occurrence wins, i.e. lowest
    (row, col)); the cell anchors at ``range_min + index * cell_size`` in the
    prior's local frame, shifted by the predicted metric offsets. Size deltas
    add to the prior size, heading adds atan2(sin, cos) to the prior heading,
    and confidence is the logistic squashing of the heatmap peak.
    """
    if head_map.shape[0] != HEAD_CHANNELS:
        raise ShapeMismatchError(f"head map must have {HEAD_CHANNELS} channels")
    heat = head_map[0]
    flat_idx = int(np.argmax(heat))
    row, col = divmod(flat_idx, heat.shape[1])
    cell_x = grid.pillar_size[0] * bev_stride
    cell_y = grid.pillar_size[1] * bev_stride
    local_x = grid.x_range[0] + row * cell_x + float(head_map[1, row, col])
    local_y = grid.y_range[0] + col * cell_y + float(head_map[2, row, col])
    local_z = float(head_map[3, row, col])
    dh, dw, dl = (float(v) for v in head_map[4:7, row, col])
    sin_t, cos_t = float(head_map[7, row, col]), float(head_map[8, row, col])

    offset_xy = rotation_2d(prior.theta) @ np.array([local_x, local_y])
    theta = normalize_angle(np.arctan2(sin_t, cos_t) + prior.theta)
    box = Box7(
        cx=prior.cx + offset_xy[0],
        cy=prior.cy + offset_xy[1],
        cz=prior.cz + local_z,
        h=max(prior.h + dh, 1e-3),
        w=max(prior.w + dw, 1e-3),
        l=max(prior.l + dl, 1e-3),
        theta=theta,
    )
    confidence = float(1.0 / (1.0 + np.exp(-heat[row, col])))
    return box, confidence


def head_decode(fused: np.ndarray, prior: Box7, grid: GridSpec, w: WeightStore,
                bev_stride: int = 4) -> tuple[Box7, float]:
    """Apply the head to a fused map and decode the resulting box."""
    return decode_box(head_forward(fused, w), prior, grid, bev_stride)
