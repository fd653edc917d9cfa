"""Desk-scale 4D radar human pose pipeline.

Simulation of a 77 GHz TDM-MIMO FMCW radar, the signal processing chain
to a (doppler, z, y, x) Cartesian tensor, CFAR point clouds, and a 3D
convolutional center-offset pose estimator with evaluation tooling.
"""

from .cfar import (
    CfarConfig,
    RadarPointCloud,
    ca_cfar_detect,
    detect_points,
    detections_to_points,
)
from .config import RadarConfig, ResolutionReport, derive_resolutions
from .decode import CenterTargetMap, decode, encode_targets, suppress_duplicates
from .dsp import (
    PolarTensor,
    RadarTensor4D,
    RangeDopplerCube,
    angle_ffts,
    polar_to_cartesian,
    process_frame,
    range_doppler,
)
from .errors import (
    AnnotationError,
    ConfigurationError,
    DimensionError,
    NumericalError,
    RadarPoseError,
    ValidationError,
)
from .geometry import TensorGeometry, default_geometry
from .metrics import EvalReport, evaluate, report_json, report_text
from .pose import JOINT_COUNT, JOINT_NAMES, Person, PoseSet
from .posenet import (
    NetworkConfig,
    PoseNet,
    forward_tensor,
    micro_config,
    tensor_to_input,
    train_micro,
)
from .scene import Scatterer, Scene, skeleton_to_scatterers
from .simulate import AdcCube, synthesize_frame

__version__ = "0.1.0"

__all__ = [
    "AdcCube",
    "AnnotationError",
    "CenterTargetMap",
    "CfarConfig",
    "ConfigurationError",
    "DimensionError",
    "EvalReport",
    "JOINT_COUNT",
    "JOINT_NAMES",
    "NetworkConfig",
    "NumericalError",
    "Person",
    "PolarTensor",
    "PoseNet",
    "PoseSet",
    "RadarConfig",
    "RadarPointCloud",
    "RadarPoseError",
    "RadarTensor4D",
    "RangeDopplerCube",
    "ResolutionReport",
    "Scatterer",
    "Scene",
    "TensorGeometry",
    "ValidationError",
    "angle_ffts",
    "ca_cfar_detect",
    "decode",
    "default_geometry",
    "derive_resolutions",
    "detect_points",
    "detections_to_points",
    "encode_targets",
    "evaluate",
    "forward_tensor",
    "micro_config",
    "polar_to_cartesian",
    "process_frame",
    "range_doppler",
    "report_json",
    "report_text",
    "skeleton_to_scatterers",
    "suppress_duplicates",
    "synthesize_frame",
    "tensor_to_input",
    "train_micro",
]
