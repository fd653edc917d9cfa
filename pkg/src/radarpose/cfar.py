"""Cell-averaging CFAR detection on the range-Doppler map.

The detector thresholds single-antenna power against a local noise
estimate from a square training ring. Working on one antenna keeps the
cell statistics exactly exponential under complex Gaussian noise, which
makes the false-alarm calibration exact rather than approximate.
Detected cells are then beamformed individually to recover direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .config import RadarConfig
from .dsp import (
    AZIMUTH_FFT_SIZE,
    ELEVATION_FFT_SIZE,
    RangeDopplerCube,
    angle_transform,
    doppler_bin_velocity,
    tdm_phase_correction,
)
from .errors import ValidationError


@dataclass(frozen=True)
class CfarConfig:
    guard_cells: int = 4
    train_cells: int = 16
    pfa: float = 1e-4

    def __post_init__(self):
        if self.guard_cells < 0 or self.train_cells < 1:
            raise ValidationError("need guard_cells >= 0 and train_cells >= 1")
        if not 0.0 < self.pfa < 1.0:
            raise ValidationError("pfa must lie strictly between 0 and 1")

    @property
    def outer_size(self) -> int:
        return 2 * (self.guard_cells + self.train_cells) + 1

    @property
    def inner_size(self) -> int:
        return 2 * self.guard_cells + 1

    @property
    def train_count(self) -> int:
        return self.outer_size**2 - self.inner_size**2

    @property
    def threshold_factor(self) -> float:
        """Scale alpha with N * (pfa^(-1/N) - 1) for exponential cells."""
        n = self.train_count
        return n * (self.pfa ** (-1.0 / n) - 1.0)


def antenna_power_map(rd: RangeDopplerCube, antenna: int = 0) -> np.ndarray:
    """Squared magnitude of one virtual channel, (doppler, range)."""
    if not 0 <= antenna < rd.config.virtual_count:
        raise ValidationError(f"antenna {antenna} out of range")
    cell = rd.data[:, antenna, :]
    return (cell.real**2 + cell.imag**2).astype(np.float64)


def ca_cfar_threshold(power_map: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    """Per-cell threshold alpha * local training mean, wrapped at edges.

    The training mean comes from the ring between the guard box and the
    outer box; both box sums are uniform filters, so the whole map costs
    two passes regardless of window size.
    """
    outer = uniform_filter(power_map, size=cfg.outer_size, mode="wrap") * cfg.outer_size**2
    inner = uniform_filter(power_map, size=cfg.inner_size, mode="wrap") * cfg.inner_size**2
    noise = (outer - inner) / cfg.train_count
    return cfg.threshold_factor * noise


def cfar_mask(power_map: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    return power_map > ca_cfar_threshold(power_map, cfg)


def ca_cfar_detect(
    rd: RangeDopplerCube,
    guard_cells: int = 4,
    train_cells: int = 16,
    pfa: float = 1e-4,
    antenna: int = 0,
) -> np.ndarray:
    """Detected cells as an (N, 2) array of (range_bin, doppler_bin)."""
    cfg = CfarConfig(guard_cells, train_cells, pfa)
    mask = cfar_mask(antenna_power_map(rd, antenna), cfg)
    hits = np.argwhere(mask)  # rows are (doppler, range)
    return hits[:, ::-1].copy()


@dataclass
class RadarPointCloud:
    """Sparse detections: positions (N,3), radial velocities (N), intensities (N)."""

    positions: np.ndarray
    velocities: np.ndarray
    intensities: np.ndarray
    bins: np.ndarray = field(default=None)  # (N, 2) of (range_bin, doppler_bin)
    frame_index: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = self.positions.shape[0]
        self.velocities = np.asarray(self.velocities, dtype=np.float64).reshape(n)
        self.intensities = np.asarray(self.intensities, dtype=np.float64).reshape(n)
        if self.bins is None:
            self.bins = np.zeros((n, 2), dtype=np.int64)
        self.bins = np.asarray(self.bins, dtype=np.int64).reshape(n, 2)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def to_text(self) -> str:
        lines = []
        for i in range(len(self)):
            x, y, z = (float(v) for v in self.positions[i])
            lines.append(
                f"{x!r} {y!r} {z!r} {float(self.velocities[i])!r} "
                f"{float(self.intensities[i])!r}"
            )
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "RadarPointCloud":
        positions, velocities, intensities = [], [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [float(v) for v in line.split()]
            if len(parts) != 5:
                raise ValidationError(f"point line needs 5 numbers: {raw!r}")
            positions.append(parts[0:3])
            velocities.append(parts[3])
            intensities.append(parts[4])
        return cls(
            np.array(positions, dtype=np.float64).reshape(-1, 3),
            np.array(velocities, dtype=np.float64),
            np.array(intensities, dtype=np.float64),
        )

    def save_text(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load_text(cls, path) -> "RadarPointCloud":
        with open(path) as fh:
            return cls.from_text(fh.read())


def detections_to_points(
    detections: np.ndarray,
    rd: RangeDopplerCube,
    config: RadarConfig | None = None,
) -> RadarPointCloud:
    """Angle-process each detected cell into a 3D point.

    For every (range_bin, doppler_bin) the channel vector is TDM
    corrected, scattered onto the aperture grid, and angle transformed;
    the spectrum argmax gives the direction sines. Detections whose
    sines fall outside the unit circle are discarded.
    """
    config = config if config is not None else rd.config
    detections = np.asarray(detections, dtype=np.int64).reshape(-1, 2)
    az_extent, el_extent = config.aperture_extents()
    correction = tdm_phase_correction(config)

    positions, velocities, intensities, kept = [], [], [], []
    for range_bin, doppler_bin in detections:
        vec = rd.data[doppler_bin, :, range_bin] * correction[doppler_bin]
        aperture = np.zeros((el_extent, az_extent), dtype=np.complex128)
        for a in range(config.virtual_count):
            d_az, d_el = config.antenna_positions[a]
            aperture[d_el, d_az] += vec[a]
        spectrum = np.abs(angle_transform(aperture[..., None]))[..., 0]
        ie, ia = np.unravel_index(np.argmax(spectrum), spectrum.shape)
        v_sin = 2.0 * (ie - ELEVATION_FFT_SIZE // 2) / ELEVATION_FFT_SIZE
        u_sin = 2.0 * (ia - AZIMUTH_FFT_SIZE // 2) / AZIMUTH_FFT_SIZE
        if u_sin * u_sin + v_sin * v_sin >= 1.0:
            continue
        radius = range_bin * config.range_resolution
        y_dir = np.sqrt(1.0 - u_sin * u_sin - v_sin * v_sin)
        positions.append([radius * u_sin, radius * y_dir, radius * v_sin])
        velocities.append(doppler_bin_velocity(doppler_bin, config))
        intensities.append(float(np.mean(np.abs(vec) ** 2)))
        kept.append([range_bin, doppler_bin])

    return RadarPointCloud(
        np.array(positions, dtype=np.float64).reshape(-1, 3),
        np.array(velocities, dtype=np.float64),
        np.array(intensities, dtype=np.float64),
        np.array(kept, dtype=np.int64).reshape(-1, 2),
    )


def detect_points(
    rd: RangeDopplerCube,
    guard_cells: int = 4,
    train_cells: int = 16,
    pfa: float = 1e-4,
    antenna: int = 0,
) -> RadarPointCloud:
    detections = ca_cfar_detect(rd, guard_cells, train_cells, pfa, antenna)
    return detections_to_points(detections, rd)
