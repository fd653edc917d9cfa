"""Point-scatterer scenes: what the simulated radar actually sees.

A scene is a bag of point scatterers (initial position, constant
velocity, reflectivity) plus the noise level and frame count of the
short sequence it describes. Human subjects become scatterers with one
reflector per joint; trunk joints reflect more strongly than limbs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .pose import JOINT_COUNT, Person, PoseSet

SCENE_FORMAT_VERSION = 1

TRUNK_REFLECTIVITY = 2.0
LIMB_REFLECTIVITY = 1.0
TRUNK_JOINTS = (0, 1)  # pelvis, thorax


@dataclass(frozen=True)
class Scatterer:
    """Idealized point reflector moving at constant velocity."""

    initial_position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    reflectivity: float = 1.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.initial_position)
        vel = tuple(float(v) for v in self.velocity)
        if len(pos) != 3 or len(vel) != 3:
            raise ValidationError("scatterer position and velocity must be 3-vectors")
        if not all(np.isfinite(pos)) or not all(np.isfinite(vel)):
            raise ValidationError("scatterer position and velocity must be finite")
        if not (np.isfinite(self.reflectivity) and self.reflectivity > 0):
            raise ValidationError("scatterer reflectivity must be finite and positive")
        object.__setattr__(self, "initial_position", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "reflectivity", float(self.reflectivity))

    def position_at(self, t: float) -> np.ndarray:
        """Position after t seconds of constant-velocity motion."""
        return np.asarray(self.initial_position) + t * np.asarray(self.velocity)

    def range_at(self, t: float = 0.0) -> float:
        return float(np.linalg.norm(self.position_at(t)))

    def radial_speed_at(self, t: float = 0.0) -> float:
        """Rate of change of range; positive when receding."""
        pos = self.position_at(t)
        r = float(np.linalg.norm(pos))
        if r == 0.0:
            return 0.0
        return float(np.dot(pos, self.velocity) / r)


@dataclass
class Scene:
    scatterers: list[Scatterer] = field(default_factory=list)
    noise_stddev: float = 0.0
    duration_frames: int = 1
    truth: list[PoseSet] = field(default_factory=list)  # optional, one per frame

    def __post_init__(self):
        if self.noise_stddev < 0:
            raise ValidationError("noise_stddev must be non-negative")
        if self.duration_frames < 1:
            raise ValidationError("duration_frames must be at least 1")
        if self.truth and len(self.truth) != self.duration_frames:
            raise ValidationError(
                f"{len(self.truth)} truth frames for {self.duration_frames} duration"
            )

    def __len__(self) -> int:
        return len(self.scatterers)

    def to_text(self) -> str:
        lines = [
            f"format_version = {SCENE_FORMAT_VERSION}",
            f"noise_stddev = {self.noise_stddev!r}",
            f"duration_frames = {self.duration_frames}",
            f"scatterers = {len(self.scatterers)}",
        ]
        for i, s in enumerate(self.scatterers):
            px, py, pz = s.initial_position
            vx, vy, vz = s.velocity
            lines.append(
                f"scatterer {i} = {px!r} {py!r} {pz!r} {vx!r} {vy!r} {vz!r} {s.reflectivity!r}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Scene":
        kv: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"malformed scene line: {raw!r}")
            key, value = line.split("=", 1)
            kv[key.strip()] = value.strip()
        version = int(kv.pop("format_version", "0"))
        if version != SCENE_FORMAT_VERSION:
            raise ValidationError(f"unsupported scene format_version {version}")
        try:
            count = int(kv["scatterers"])
            scatterers = []
            for i in range(count):
                parts = [float(v) for v in kv[f"scatterer {i}"].split()]
                if len(parts) != 7:
                    raise ValidationError(f"scatterer {i} needs 7 numbers")
                scatterers.append(Scatterer(tuple(parts[0:3]), tuple(parts[3:6]), parts[6]))
            return cls(
                scatterers,
                noise_stddev=float(kv.get("noise_stddev", "0.0")),
                duration_frames=int(kv.get("duration_frames", "1")),
            )
        except KeyError as exc:
            raise ValidationError(f"scene file missing key {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "Scene":
        with open(path) as fh:
            return cls.from_text(fh.read())


def default_reflectivity(joint: int) -> float:
    return TRUNK_REFLECTIVITY if joint in TRUNK_JOINTS else LIMB_REFLECTIVITY


def skeleton_to_scatterers(
    poses: PoseSet,
    per_joint_reflectivity: dict[int, float] | None = None,
    velocities=None,
    noise_stddev: float = 0.0,
    duration_frames: int = 1,
    frame_rate: float = 10.0,
) -> Scene:
    """One scatterer per joint per person.

    Trunk joints (pelvis, thorax) default to a stronger reflectivity than
    the limbs; ``per_joint_reflectivity`` overrides individual joints.
    Each person's scatterers share that person's velocity. The returned
    scene carries per-frame ground truth propagated at ``frame_rate``.
    """
    if len(poses) == 0:
        raise ValidationError("cannot build a scene from an empty pose set")
    reflectivity = {j: default_reflectivity(j) for j in range(JOINT_COUNT)}
    if per_joint_reflectivity:
        reflectivity.update(per_joint_reflectivity)

    scatterers: list[Scatterer] = []
    for p, person in enumerate(poses):
        vel = (0.0, 0.0, 0.0) if velocities is None else tuple(velocities[p])
        for j in range(JOINT_COUNT):
            scatterers.append(Scatterer(tuple(person.joints[j]), vel, reflectivity[j]))

    truth = []
    for f in range(duration_frames):
        t = f / frame_rate
        people = []
        for p, person in enumerate(poses):
            vel = np.zeros(3) if velocities is None else np.asarray(velocities[p], dtype=float)
            people.append(Person(person.joints + vel * t, person.score))
        truth.append(PoseSet(people))
    return Scene(scatterers, noise_stddev, duration_frames, truth)
