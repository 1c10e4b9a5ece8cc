"""Offline multi-object tracking with temporally propagated mask cues.

A ByteTrack-style two-stage tracker whose IoU association is refined, on
ambiguous pairs only, by how well each tracklet's propagated mask fills a
detection box, plus optional camera motion compensation. Masks, detections
and camera warps come from files or from the bundled synthetic scenes.
"""
try:
    from importlib.metadata import version

    __version__ = version("artifact")
except Exception:  # pragma: no cover - source checkout without metadata
    __version__ = "0.1.0"

from .errors import McByteError
from .geometry import BoundingBox, BufferScales, buffered_iou, iou, iou_matrix
from .maskops import MaskBitmap, MaskSet, mm1, mm2
from .metrics import EvalConfig, MetricReport, evaluate
from .pipeline import (
    ALL_VARIANTS, PipelineConfig, SequenceInputs, TrackRecord, Variant, run_sequence, step,
    variant_behavior,
)
from .synth import Scenario, bundled_suite, generate

__all__ = [
    "ALL_VARIANTS", "BoundingBox", "BufferScales", "EvalConfig", "MaskBitmap", "MaskSet",
    "McByteError", "MetricReport", "PipelineConfig", "Scenario", "SequenceInputs", "TrackRecord",
    "Variant", "buffered_iou", "bundled_suite", "evaluate", "generate", "iou", "iou_matrix",
    "mm1", "mm2", "run_sequence", "step", "variant_behavior", "__version__",
]
