"""Human pose representation: 15 joints per person, meters, radar frame.

Coordinate frame: X right, Y forward (away from the sensor), Z up, origin
at the sensor. Joint 0 (pelvis) doubles as the person center for
detection and matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AnnotationError

POSE_FORMAT_VERSION = 1

JOINT_NAMES = (
    "pelvis",
    "thorax",
    "head",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
)

JOINT_COUNT = len(JOINT_NAMES)

PELVIS = 0

# Bone list (parent, child) used for rendering and for sanity-checking
# skeleton templates; not used by any numeric pipeline stage.
SKELETON_EDGES = (
    (0, 1), (1, 2),
    (1, 3), (3, 4), (4, 5),
    (1, 6), (6, 7), (7, 8),
    (0, 9), (9, 10), (10, 11),
    (0, 12), (12, 13), (13, 14),
)


@dataclass
class Person:
    """One subject: joint coordinates and an optional confidence score.

    ``center`` records where a detector localized the person (used for
    suppression of duplicate detections); ground-truth poses leave it
    unset and it is not serialized.
    """

    joints: np.ndarray  # (15, 3) float
    score: float = 1.0
    center: np.ndarray | None = None

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.shape != (JOINT_COUNT, 3):
            raise AnnotationError(
                f"person joints must have shape ({JOINT_COUNT}, 3), got {self.joints.shape}"
            )
        if not np.all(np.isfinite(self.joints)):
            raise AnnotationError("person joints must be finite")
        if self.center is not None:
            self.center = np.asarray(self.center, dtype=np.float64).reshape(3)

    @property
    def pelvis(self) -> np.ndarray:
        return self.joints[PELVIS]

    @property
    def anchor(self) -> np.ndarray:
        """Detection center if present, else the pelvis."""
        return self.pelvis if self.center is None else self.center

    def translated(self, offset) -> "Person":
        offset = np.asarray(offset, dtype=np.float64)
        center = None if self.center is None else self.center + offset
        return Person(self.joints + offset, self.score, center)


@dataclass
class PoseSet:
    """All people in one frame."""

    people: list[Person] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.people)

    def __iter__(self):
        return iter(self.people)

    def to_text(self) -> str:
        lines = [f"format_version = {POSE_FORMAT_VERSION}", f"people = {len(self.people)}"]
        for p, person in enumerate(self.people):
            lines.append(f"person {p} score = {float(person.score)!r}")
            for j, name in enumerate(JOINT_NAMES):
                x, y, z = (float(v) for v in person.joints[j])
                lines.append(f"person {p} {name} = {x!r} {y!r} {z!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PoseSet":
        kv: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise AnnotationError(f"malformed pose line: {raw!r}")
            key, value = line.split("=", 1)
            kv[key.strip()] = value.strip()
        version = int(kv.pop("format_version", "0"))
        if version != POSE_FORMAT_VERSION:
            raise AnnotationError(f"unsupported pose format_version {version}")
        try:
            count = int(kv["people"])
            people = []
            for p in range(count):
                score = float(kv.get(f"person {p} score", "1.0"))
                joints = np.zeros((JOINT_COUNT, 3))
                for j, name in enumerate(JOINT_NAMES):
                    parts = kv[f"person {p} {name}"].split()
                    if len(parts) != 3:
                        raise AnnotationError(f"joint {name!r} of person {p} needs 3 coordinates")
                    joints[j] = [float(v) for v in parts]
                people.append(Person(joints, score))
        except KeyError as exc:
            raise AnnotationError(f"pose file missing key {exc}") from exc
        return cls(people)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "PoseSet":
        with open(path) as fh:
            return cls.from_text(fh.read())


def standing_template(height: float = 1.75) -> np.ndarray:
    """Joint offsets (15, 3) of an upright person relative to their pelvis.

    Proportions are rough anthropometric fractions of body height; good
    enough to place plausible scatterers, not a biomechanical model.
    """
    h = height
    pelvis_z = 0.53 * h
    offsets = np.zeros((JOINT_COUNT, 3))

    def put(j, x, z):
        offsets[j] = (x, 0.0, z - pelvis_z)

    put(0, 0.0, pelvis_z)
    put(1, 0.0, 0.78 * h)
    put(2, 0.0, 0.93 * h)
    shoulder_x = 0.13 * h
    put(3, +shoulder_x, 0.81 * h)
    put(4, +shoulder_x + 0.02 * h, 0.63 * h)
    put(5, +shoulder_x + 0.03 * h, 0.47 * h)
    put(6, -shoulder_x, 0.81 * h)
    put(7, -shoulder_x - 0.02 * h, 0.63 * h)
    put(8, -shoulder_x - 0.03 * h, 0.47 * h)
    hip_x = 0.06 * h
    put(9, +hip_x, 0.52 * h)
    put(10, +hip_x, 0.28 * h)
    put(11, +hip_x, 0.04 * h)
    put(12, -hip_x, 0.52 * h)
    put(13, -hip_x, 0.28 * h)
    put(14, -hip_x, 0.04 * h)
    return offsets


def person_at(position, height: float = 1.75, score: float = 1.0) -> Person:
    """Standing person whose pelvis sits at ``position``."""
    return Person(standing_template(height) + np.asarray(position, dtype=np.float64), score)
