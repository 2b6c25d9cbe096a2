"""Analytic compute-cost model for the backbone depth configurations.

The model is affine in the per-stage block counts: a fixed patch-embedding
cost plus ``depths[k]`` times a per-stage block cost. Costs are counted in
multiply-accumulates and reported as GFLOPs at 1 MAC = 1 reported FLOP (the
convention of the common profiler tools), for a single backbone pass on the
64x64 template-sized pseudo-image. Patch embeddings are costed with the
overlapping kernels of the reference pyramid backbone (7 for stage 1, 3 for
later stages); attention is costed as q projection + k/v projections on the
spatially reduced token grid + logit/weighted-sum products + output
projection; the feed-forward layer as two C <-> ratio*C linears; norms and
nonlinearities at one op per token-channel.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backbone import BackboneConfig
from .errors import InvalidResolutionError

DEFAULT_RESOLUTION = 64
EMBED_KERNELS = (7, 3, 3, 3)

# the 15 depth configurations of the stage-allocation study, with the
# published GFLOPs for each
ABLATION_ROWS: tuple[tuple[tuple[int, int, int, int], float], ...] = (
    ((3, 4, 6, 3), 0.37),
    ((6, 6, 2, 2), 0.38),
    ((1, 1, 1, 1), 0.14),
    ((2, 1, 1, 1), 0.16),
    ((3, 1, 1, 1), 0.18),
    ((4, 1, 1, 1), 0.21),
    ((1, 2, 1, 1), 0.16),
    ((1, 3, 1, 1), 0.18),
    ((1, 4, 1, 1), 0.20),
    ((1, 1, 2, 1), 0.16),
    ((1, 1, 3, 1), 0.18),
    ((1, 1, 4, 1), 0.20),
    ((1, 1, 1, 2), 0.15),
    ((1, 1, 1, 3), 0.17),
    ((1, 1, 1, 4), 0.18),
)

CONVENTION = (
    "MACs reported as GFLOPs; single backbone pass on a "
    f"{DEFAULT_RESOLUTION}x{DEFAULT_RESOLUTION} pseudo-image; overlapping "
    "patch-embedding kernels (7, 3, 3, 3); norms/activations at n*C; "
    "template branch, neck and head excluded"
)


@dataclass(frozen=True)
class FlopReport:
    """Per-stage breakdown; total = sum(embed) + sum(depths[k] * block[k])."""

    depths: tuple[int, int, int, int]
    embed_flops: tuple[float, float, float, float]
    block_flops: tuple[float, float, float, float]
    convention: str = CONVENTION

    @property
    def total(self) -> float:
        return sum(self.embed_flops) + sum(d * b for d, b in zip(self.depths, self.block_flops))

    @property
    def gflops(self) -> float:
        return self.total / 1e9


def _stage_tokens(cfg: BackboneConfig, resolution: int) -> list[int]:
    if resolution % cfg.total_stride != 0:
        raise InvalidResolutionError(
            f"resolution {resolution} not divisible by total stride {cfg.total_stride}")
    tokens = []
    side = resolution
    for s in cfg.strides:
        side //= s
        tokens.append(side * side)
    return tokens


def block_flops(stage: int, cfg: BackboneConfig, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Cost of one attention + feed-forward block at the given stage."""
    n = _stage_tokens(cfg, resolution)[stage]
    c = cfg.channels[stage]
    sr = cfg.sr_ratios[stage]
    mlp = cfg.mlp_ratios[stage]
    n_kv = n // (sr * sr)
    attention = (
        n * c * c            # q projection
        + 2 * n_kv * c * c   # k and v projections on reduced tokens
        + 2 * n * n_kv * c   # logits + weighted sum
        + n * c * c          # output projection
    )
    ffn = 2 * n * c * c * mlp
    norms = 3 * n * c  # two layer norms + activation
    return float(attention + ffn + norms)


def embedding_flops(stage: int, cfg: BackboneConfig, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Patch-embedding cost for one stage (overlapping kernel convention)."""
    n = _stage_tokens(cfg, resolution)[stage]
    c_in = cfg.in_channels if stage == 0 else cfg.channels[stage - 1]
    k = EMBED_KERNELS[stage]
    return float(n * cfg.channels[stage] * c_in * k * k + n * cfg.channels[stage])


def model_flops(cfg: BackboneConfig, resolution: int = DEFAULT_RESOLUTION) -> FlopReport:
    """Full backbone cost for a depth configuration."""
    embeds = tuple(embedding_flops(k, cfg, resolution) for k in range(4))
    blocks = tuple(block_flops(k, cfg, resolution) for k in range(4))
    return FlopReport(depths=cfg.depths, embed_flops=embeds, block_flops=blocks)


def marginal_costs(cfg: BackboneConfig, resolution: int = DEFAULT_RESOLUTION) -> tuple[float, ...]:
    """Delta GFLOPs from adding one block at each stage; equals the per-stage
    block cost exactly (the model is affine in depths)."""
    base = model_flops(cfg, resolution).total
    deltas = []
    for k in range(4):
        depths = list(cfg.depths)
        depths[k] += 1
        bumped = BackboneConfig(
            depths=tuple(depths), heads=cfg.heads, channels=cfg.channels,
            mlp_ratios=cfg.mlp_ratios, strides=cfg.strides, sr_ratios=cfg.sr_ratios,
            in_channels=cfg.in_channels)
        deltas.append((model_flops(bumped, resolution).total - base) / 1e9)
    return tuple(deltas)


def ablation_table(cfg: BackboneConfig | None = None,
                   resolution: int = DEFAULT_RESOLUTION) -> list[dict]:
    """The 15-row depth study: model GFLOPs next to the published values."""
    if cfg is None:
        cfg = BackboneConfig()
    rows = []
    base = None
    for depths, published in ABLATION_ROWS:
        row_cfg = BackboneConfig(
            depths=depths, heads=cfg.heads, channels=cfg.channels,
            mlp_ratios=cfg.mlp_ratios, strides=cfg.strides, sr_ratios=cfg.sr_ratios,
            in_channels=cfg.in_channels)
        g = model_flops(row_cfg, resolution).gflops
        if base is None:
            base = g
        rows.append({
            "depths": depths,
            "gflops": round(g, 3),
            "delta_vs_first": round(g - base, 3),
            "published_gflops": published,
        })
    return rows
