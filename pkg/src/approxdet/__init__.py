"""Bit-exact approximate floating-point emulation with fault injection,
plus an object-detection evaluation harness (IoU/AP/mAP, temporal
confidence fusion, misdetection analyses)."""

from .approx_units import (
    add_approx,
    approx_add_significand,
    approx_mul_significand,
    mul_approx,
    udm2x2,
)
from .errors import ConfigError, DataError, ShapeError
from .faults import FaultInjector, FaultModel, FaultStats, wrap_arithmetic
from .fusion import FrameSequence, associate, fuse, fuse_sequence
from .kernels import ArithmeticConfig, Setup, Tensor, conv2d, gemm
from .metrics import (
    BoundingBox,
    Detection,
    GroundTruthObject,
    average_precision,
    iou,
    match_detections,
    mean_average_precision,
)
from .softfloat import (
    BINARY16,
    BINARY32,
    RoundingMode,
    add_half,
    add_single,
    decode_half,
    decode_single,
    mul_half,
    mul_single,
    quantize_32_to_16,
    widen_16_to_32,
)

__version__ = "0.1.0"

__all__ = [
    "ArithmeticConfig",
    "BINARY16",
    "BINARY32",
    "BoundingBox",
    "ConfigError",
    "DataError",
    "Detection",
    "FaultInjector",
    "FaultModel",
    "FaultStats",
    "FrameSequence",
    "GroundTruthObject",
    "RoundingMode",
    "Setup",
    "ShapeError",
    "Tensor",
    "add_approx",
    "add_half",
    "add_single",
    "approx_add_significand",
    "approx_mul_significand",
    "associate",
    "average_precision",
    "conv2d",
    "decode_half",
    "decode_single",
    "fuse",
    "fuse_sequence",
    "gemm",
    "iou",
    "match_detections",
    "mean_average_precision",
    "mul_approx",
    "mul_half",
    "mul_single",
    "quantize_32_to_16",
    "udm2x2",
    "widen_16_to_32",
    "wrap_arithmetic",
]
