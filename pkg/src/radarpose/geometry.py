"""Voxel geometry of the 4D radar tensor and its pooled variants.

The tensor axes are (doppler, z, y, x). World coordinates are meters in
the radar frame (X right, Y forward, Z up); voxel i on an axis covers
[lower + i*step, lower + (i+1)*step) and its center sits at
lower + (i + 0.5)*step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class TensorGeometry:
    doppler_size: int = 64
    x_min: float = -3.2
    x_max: float = 3.2
    x_size: int = 256
    y_min: float = 1.6
    y_max: float = 8.0
    y_size: int = 128
    z_min: float = -0.8
    z_max: float = 0.8
    z_size: int = 32

    def __post_init__(self):
        for axis in "xyz":
            lo = getattr(self, f"{axis}_min")
            hi = getattr(self, f"{axis}_max")
            n = getattr(self, f"{axis}_size")
            if not hi > lo:
                raise ValidationError(f"{axis} extent must be positive")
            if n <= 0:
                raise ValidationError(f"{axis}_size must be positive")
        if self.doppler_size <= 0:
            raise ValidationError("doppler_size must be positive")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.doppler_size, self.z_size, self.y_size, self.x_size)

    @property
    def spatial_shape(self) -> tuple[int, int, int]:
        return (self.z_size, self.y_size, self.x_size)

    @property
    def x_step(self) -> float:
        return (self.x_max - self.x_min) / self.x_size

    @property
    def y_step(self) -> float:
        return (self.y_max - self.y_min) / self.y_size

    @property
    def z_step(self) -> float:
        return (self.z_max - self.z_min) / self.z_size

    def axis_centers(self, axis: str) -> np.ndarray:
        lo = getattr(self, f"{axis}_min")
        step = getattr(self, f"{axis}_step")
        n = getattr(self, f"{axis}_size")
        return lo + (np.arange(n) + 0.5) * step

    def voxel_center(self, iz: int, iy: int, ix: int) -> np.ndarray:
        """World (x, y, z) of a voxel center."""
        return np.array(
            [
                self.x_min + (ix + 0.5) * self.x_step,
                self.y_min + (iy + 0.5) * self.y_step,
                self.z_min + (iz + 0.5) * self.z_step,
            ]
        )

    def voxel_centers(self) -> np.ndarray:
        """(z_size, y_size, x_size, 3) array of world centers."""
        zc = self.axis_centers("z")
        yc = self.axis_centers("y")
        xc = self.axis_centers("x")
        out = np.empty(self.spatial_shape + (3,))
        out[..., 0] = xc[None, None, :]
        out[..., 1] = yc[None, :, None]
        out[..., 2] = zc[:, None, None]
        return out

    def world_to_voxel(self, point) -> np.ndarray:
        """Fractional (iz, iy, ix) such that integer values are voxel centers."""
        x, y, z = np.asarray(point, dtype=np.float64)
        return np.array(
            [
                (z - self.z_min) / self.z_step - 0.5,
                (y - self.y_min) / self.y_step - 0.5,
                (x - self.x_min) / self.x_step - 0.5,
            ]
        )

    def nearest_voxel(self, point) -> tuple[int, int, int]:
        frac = self.world_to_voxel(point)
        idx = np.clip(
            np.round(frac).astype(int),
            [0, 0, 0],
            [self.z_size - 1, self.y_size - 1, self.x_size - 1],
        )
        return (int(idx[0]), int(idx[1]), int(idx[2]))

    def contains(self, point) -> bool:
        x, y, z = np.asarray(point, dtype=np.float64)
        return bool(
            self.x_min <= x < self.x_max
            and self.y_min <= y < self.y_max
            and self.z_min <= z < self.z_max
        )

    def pooled(self, factors: tuple[int, int, int, int]) -> "TensorGeometry":
        """Geometry after average-pooling by (doppler, z, y, x) factors.

        Pooled voxel centers coincide with the mean of the fine centers
        they cover, so index math stays exact.
        """
        fd, fz, fy, fx = factors
        for f, n, name in (
            (fd, self.doppler_size, "doppler"),
            (fz, self.z_size, "z"),
            (fy, self.y_size, "y"),
            (fx, self.x_size, "x"),
        ):
            if f <= 0 or n % f != 0:
                raise DimensionError(
                    f"pool factor {f} does not divide {name} size {n}"
                )
        return TensorGeometry(
            doppler_size=self.doppler_size // fd,
            x_min=self.x_min,
            x_max=self.x_max,
            x_size=self.x_size // fx,
            y_min=self.y_min,
            y_max=self.y_max,
            y_size=self.y_size // fy,
            z_min=self.z_min,
            z_max=self.z_max,
            z_size=self.z_size // fz,
        )


def default_geometry() -> TensorGeometry:
    return TensorGeometry()
