"""TOML run configuration: [grid], [pyramid], [backbone], [tracker]."""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .backbone import BackboneConfig
from .pyramid import PyramidSpec
from .tracking import DEFAULT_SEARCH_REGION, DEFAULT_TEMPLATE_REGION, TrackerSpec


def load_tracker_spec(path) -> TrackerSpec:
    """Build a TrackerSpec from a TOML file; every key is optional."""
    with open(Path(path), "rb") as fh:
        doc = tomllib.load(fh)
    grid = doc.get("grid", {})
    pyramid = doc.get("pyramid", {})
    backbone = doc.get("backbone", {})
    tracker = doc.get("tracker", {})

    pyramid_spec = PyramidSpec(
        levels=int(pyramid.get("levels", 3)),
        base_scale=float(pyramid.get("base_scale", 0.8)),
        ratio=float(pyramid.get("ratio", 0.125)),
        normalize=bool(pyramid.get("normalize", True)),
    )
    backbone_cfg = BackboneConfig(
        depths=tuple(backbone.get("depths", (3, 1, 1, 1))),
        heads=tuple(backbone.get("heads", (1, 2, 5, 8))),
        channels=tuple(backbone.get("channels", (64, 128, 320, 512))),
        mlp_ratios=tuple(backbone.get("mlp_ratios", (8, 8, 4, 4))),
        strides=tuple(backbone.get("strides", (4, 2, 2, 2))),
        sr_ratios=tuple(backbone.get("sr_ratios", (8, 4, 2, 1))),
        in_channels=int(backbone.get(
            "in_channels", pyramid_spec.encoded_width(9, 1))),
    )
    return TrackerSpec(
        kind=tracker.get("kind", "centroid"),
        confidence_floor=float(tracker.get("confidence_floor", 0.1)),
        search_region=tuple(grid.get("search_region", DEFAULT_SEARCH_REGION)),
        template_region=tuple(grid.get("template_region", DEFAULT_TEMPLATE_REGION)),
        pillar_size=tuple(grid.get("pillar_size", (0.05, 0.05))),
        max_points_per_pillar=int(grid.get("max_points_per_pillar", 32)),
        max_pillars=int(grid.get("max_pillars", 16384)),
        pyramid=pyramid_spec,
        backbone=backbone_cfg,
        weights_path=tracker.get("weights_path"),
        weights_seed=int(tracker.get("weights_seed", 0)),
    )


def load_synth_params(path):
    """Read synthetic-sequence parameters from a TOML [synth] table."""
    from .tracking import SynthParams

    with open(Path(path), "rb") as fh:
        doc = tomllib.load(fh)
    synth = doc.get("synth", doc)
    kwargs = {}
    for key in ("object_points", "clutter_points", "frames", "seed"):
        if key in synth:
            kwargs[key] = int(synth[key])
    for key in ("noise_sigma", "start_theta"):
        if key in synth:
            kwargs[key] = float(synth[key])
    for key in ("object_size", "motion", "start_center"):
        if key in synth:
            kwargs[key] = tuple(float(v) for v in synth[key])
    for key in ("category", "sequence_id"):
        if key in synth:
            kwargs[key] = str(synth[key])
    return SynthParams(**kwargs)
