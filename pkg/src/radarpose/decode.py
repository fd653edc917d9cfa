"""Center-map target encoding and its inverse, peak decoding.

Targets follow the center-point detection recipe: a person is a Gaussian
bump (in voxel index units, exactly 1 at the pelvis voxel) on a
confidence map over the pooled grid, plus a 45-vector at that voxel
holding the 15 joint positions relative to the voxel center, in meters.
Decoding finds local maxima, reads the offsets back, and suppresses
duplicate people by 3D distance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import AnnotationError, DimensionError
from .geometry import TensorGeometry
from .pose import JOINT_COUNT, PoseSet, Person

DEFAULT_SIGMA_VOXELS = 2.0
DEFAULT_THRESHOLD = 0.3
DEFAULT_TOP_K = 8
DEFAULT_NMS_RADIUS = 0.5


@dataclass
class CenterTargetMap:
    """Training targets for one frame on a given (usually pooled) geometry."""

    confidence: np.ndarray  # (z, y, x) in [0, 1]
    centers: np.ndarray  # (people, 3) int voxel indices (iz, iy, ix)
    offsets: np.ndarray  # (people, 15, 3) meters relative to the center voxel center
    geometry: TensorGeometry

    def __post_init__(self):
        if self.confidence.shape != self.geometry.spatial_shape:
            raise DimensionError(
                f"confidence shape {self.confidence.shape} does not match geometry"
            )


def _index_grids(geometry: TensorGeometry):
    return np.meshgrid(
        np.arange(geometry.z_size),
        np.arange(geometry.y_size),
        np.arange(geometry.x_size),
        indexing="ij",
    )


def encode_targets(
    poses: PoseSet, geometry: TensorGeometry, sigma: float = DEFAULT_SIGMA_VOXELS
) -> CenterTargetMap:
    """Gaussian center map plus per-person joint offsets.

    The bump is centered on the integer pelvis voxel and measured in
    voxel index distance, so its peak value is exactly 1 there. Maps of
    several people combine by maximum. A pelvis outside the grid is an
    annotation error.
    """
    iz, iy, ix = _index_grids(geometry)
    confidence = np.zeros(geometry.spatial_shape, dtype=np.float64)
    centers = np.zeros((len(poses), 3), dtype=np.int64)
    offsets = np.zeros((len(poses), JOINT_COUNT, 3), dtype=np.float64)
    for p, person in enumerate(poses):
        if not geometry.contains(person.pelvis):
            raise AnnotationError(
                f"person {p} pelvis {person.pelvis} lies outside the grid"
            )
        cz, cy, cx = geometry.nearest_voxel(person.pelvis)
        dist_sq = (iz - cz) ** 2 + (iy - cy) ** 2 + (ix - cx) ** 2
        np.maximum(confidence, np.exp(-dist_sq / (2.0 * sigma * sigma)), out=confidence)
        centers[p] = (cz, cy, cx)
        offsets[p] = person.joints - geometry.voxel_center(cz, cy, cx)
    return CenterTargetMap(confidence, centers, offsets, geometry)


def offsets_to_map(targets: CenterTargetMap) -> np.ndarray:
    """Dense (45, z, y, x) offset map, zero away from person centers."""
    out = np.zeros((3 * JOINT_COUNT,) + targets.geometry.spatial_shape, dtype=np.float64)
    for center, off in zip(targets.centers, targets.offsets):
        out[:, center[0], center[1], center[2]] = off.reshape(-1)
    return out


def encode_joint_targets(
    poses: PoseSet, geometry: TensorGeometry, sigma: float = DEFAULT_SIGMA_VOXELS
) -> np.ndarray:
    """(15, z, y, x) per-joint Gaussian maps; joints outside the grid are skipped."""
    iz, iy, ix = _index_grids(geometry)
    out = np.zeros((JOINT_COUNT,) + geometry.spatial_shape, dtype=np.float64)
    for person in poses:
        for j in range(JOINT_COUNT):
            if not geometry.contains(person.joints[j]):
                continue
            cz, cy, cx = geometry.nearest_voxel(person.joints[j])
            dist_sq = (iz - cz) ** 2 + (iy - cy) ** 2 + (ix - cx) ** 2
            np.maximum(out[j], np.exp(-dist_sq / (2.0 * sigma * sigma)), out=out[j])
    return out


def suppress_duplicates(people: list[Person], nms_radius: float = DEFAULT_NMS_RADIUS) -> list[Person]:
    """Greedy non-maximum suppression on detection centers.

    Input must be sorted by descending score; a person whose center lies
    within ``nms_radius`` meters of an already kept center is dropped.
    Applying this twice changes nothing: survivors are pairwise farther
    apart than the radius.
    """
    kept: list[Person] = []
    for person in people:
        anchor = person.anchor
        if any(np.linalg.norm(anchor - k.anchor) < nms_radius for k in kept):
            continue
        kept.append(person)
    return kept


def decode(
    confidence: np.ndarray,
    offsets: np.ndarray,
    geometry: TensorGeometry,
    threshold: float = DEFAULT_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
    nms_radius: float = DEFAULT_NMS_RADIUS,
) -> PoseSet:
    """Confidence + offset maps -> people, strongest first.

    A candidate is a cell that attains the maximum of its 3x3x3
    neighborhood and exceeds the threshold. The strongest ``top_k``
    candidates are read out as people anchored at their voxel centers,
    then duplicates are greedily suppressed by center distance. A kept
    candidate with non-finite offsets is dropped with a warning.
    """
    confidence = np.asarray(confidence, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    if confidence.shape != geometry.spatial_shape:
        raise DimensionError(f"confidence shape {confidence.shape} does not match geometry")
    if offsets.shape != (3 * JOINT_COUNT,) + geometry.spatial_shape:
        raise DimensionError(f"offsets shape {offsets.shape} does not match geometry")

    local_max = maximum_filter(confidence, size=3, mode="constant", cval=-np.inf)
    mask = (confidence >= local_max) & (confidence >= threshold)
    candidates = np.argwhere(mask)
    if len(candidates) == 0:
        return PoseSet([])
    scores = confidence[mask]
    order = np.argsort(-scores, kind="stable")[:top_k]

    people: list[Person] = []
    for rank in order:
        cz, cy, cx = candidates[rank]
        center = geometry.voxel_center(cz, cy, cx)
        local = offsets[:, cz, cy, cx].reshape(JOINT_COUNT, 3)
        if not np.all(np.isfinite(local)):
            warnings.warn(
                f"dropping detection at voxel ({cz}, {cy}, {cx}): non-finite offsets",
                stacklevel=2,
            )
            continue
        people.append(Person(center + local, float(scores[rank]), center))
    return PoseSet(suppress_duplicates(people, nms_radius))


def decode_per_joint(joint_confidence: np.ndarray, geometry: TensorGeometry) -> Person:
    """Single-person readout for the per-joint map head: argmax per joint."""
    if joint_confidence.shape != (JOINT_COUNT,) + geometry.spatial_shape:
        raise DimensionError(
            f"joint map shape {joint_confidence.shape} does not match geometry"
        )
    joints = np.zeros((JOINT_COUNT, 3))
    peak = 0.0
    for j in range(JOINT_COUNT):
        iz, iy, ix = np.unravel_index(
            np.argmax(joint_confidence[j]), geometry.spatial_shape
        )
        joints[j] = geometry.voxel_center(iz, iy, ix)
        peak += float(joint_confidence[j, iz, iy, ix])
    return Person(joints, peak / JOINT_COUNT)
