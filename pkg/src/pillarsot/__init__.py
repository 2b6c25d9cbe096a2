"""Pillar-based LiDAR single-object tracking toolkit."""

from .core import (
    Box7,
    Frame,
    PointCloud,
    RigidScaleTransform,
    Sequence,
    box_corners,
    crop_to_region,
    ingest_sequence,
    load_point_cloud_bin,
    transform_cloud,
    write_point_cloud_bin,
    write_sequence,
)
from .pillar import GridSpec, PillarSet, PseudoImage, augment_points, pillarize, scatter
from .pyramid import (
    PyramidCode,
    PyramidSpec,
    decode_value,
    distribution_distance,
    encode_features,
    encode_value,
)
from .backbone import (
    BackboneConfig,
    WeightStore,
    backbone_forward,
    head_decode,
    init_weights,
    load_weights,
    save_weights,
    similarity_neck_forward,
)
from .flops import FlopReport, ablation_table, block_flops, marginal_costs, model_flops
from .metrics import (
    FrameResult,
    OpeSummary,
    center_distance,
    iou3d,
    ope_report,
    precision_score,
    success_score,
)
from .tracking import (
    CentroidTracker,
    GroundTruthAudit,
    NetworkTracker,
    SynthParams,
    TrackerSpec,
    run_tracker,
    synth_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "Box7", "Frame", "PointCloud", "RigidScaleTransform", "Sequence",
    "box_corners", "crop_to_region", "ingest_sequence", "load_point_cloud_bin",
    "transform_cloud", "write_point_cloud_bin", "write_sequence",
    "GridSpec", "PillarSet", "PseudoImage", "augment_points", "pillarize", "scatter",
    "PyramidCode", "PyramidSpec", "decode_value", "distribution_distance",
    "encode_features", "encode_value",
    "BackboneConfig", "WeightStore", "backbone_forward", "head_decode",
    "init_weights", "load_weights", "save_weights", "similarity_neck_forward",
    "FlopReport", "ablation_table", "block_flops", "marginal_costs", "model_flops",
    "FrameResult", "OpeSummary", "center_distance", "iou3d", "ope_report",
    "precision_score", "success_score",
    "CentroidTracker", "GroundTruthAudit", "NetworkTracker", "SynthParams",
    "TrackerSpec", "run_tracker", "synth_sequence",
]
