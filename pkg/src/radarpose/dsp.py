"""Signal chain from raw ADC samples to the 4D Cartesian tensor.

Stage order: range FFT over fast time, Doppler FFT over slow time
(centered so zero velocity lands mid-axis), rearrangement of the virtual
channels onto the 2D aperture grid with the TDM Doppler phase undone,
zero-padded angle FFTs, then magnitude and a trilinear resample from
polar (range, azimuth sine, elevation sine) onto a fixed Cartesian
voxel grid, one Doppler slice at a time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from .config import RadarConfig
from .errors import DimensionError, ValidationError
from .geometry import TensorGeometry, default_geometry
from .simulate import AdcCube

WINDOW_KINDS = ("none", "hann")

AZIMUTH_FFT_SIZE = 128
ELEVATION_FFT_SIZE = 32


@dataclass
class RangeDopplerCube:
    """Complex spectrum indexed (doppler bin, virtual antenna, range bin)."""

    data: np.ndarray
    config: RadarConfig

    def __post_init__(self):
        expected = (
            self.config.chirps_per_frame,
            self.config.virtual_count,
            self.config.samples_per_chirp,
        )
        if self.data.shape != expected:
            raise DimensionError(
                f"range-doppler cube shape {self.data.shape}, expected {expected}"
            )

    @property
    def velocity_axis(self) -> np.ndarray:
        """Radial velocity of each Doppler bin, receding positive."""
        n = self.config.chirps_per_frame
        return (np.arange(n) - n // 2) * self.config.velocity_resolution

    @property
    def range_axis(self) -> np.ndarray:
        return np.arange(self.config.samples_per_chirp) * self.config.range_resolution


@dataclass
class PolarTensor:
    """Non-negative magnitudes indexed (doppler, elevation, azimuth, range)."""

    data: np.ndarray
    config: RadarConfig

    def __post_init__(self):
        if self.data.ndim != 4:
            raise DimensionError("polar tensor must be 4-dimensional")

    @property
    def elevation_sines(self) -> np.ndarray:
        n = self.data.shape[1]
        return 2.0 * (np.arange(n) - n // 2) / n

    @property
    def azimuth_sines(self) -> np.ndarray:
        n = self.data.shape[2]
        return 2.0 * (np.arange(n) - n // 2) / n


@dataclass
class RadarTensor4D:
    """Real magnitudes on the fixed voxel grid, (doppler, z, y, x)."""

    data: np.ndarray
    geometry: TensorGeometry

    def __post_init__(self):
        if self.data.shape != self.geometry.shape:
            raise DimensionError(
                f"tensor shape {self.data.shape} does not match geometry {self.geometry.shape}"
            )


def doppler_bin_velocity(bin_index: int, config: RadarConfig) -> float:
    """Radial velocity at a (centered) Doppler bin, receding positive."""
    center = config.chirps_per_frame // 2
    return (bin_index - center) * config.velocity_resolution


def _window_vector(kind: str, length: int) -> np.ndarray:
    if kind not in WINDOW_KINDS:
        raise ValidationError(f"unknown window kind {kind!r}, expected one of {WINDOW_KINDS}")
    if kind == "none":
        return np.ones(length)
    return get_window("hann", length, fftbins=True)


def range_fft(adc: AdcCube, window: str = "hann") -> np.ndarray:
    """FFT over fast time; beat frequency maps to range bin 2*slope*R/(c*fs/N)."""
    w = _window_vector(window, adc.config.samples_per_chirp)
    return np.fft.fft(adc.data * w, axis=-1)


def doppler_fft(range_spectrum: np.ndarray, window: str = "none") -> np.ndarray:
    """FFT over slow time, shifted so zero Doppler sits at bin N/2."""
    w = _window_vector(window, range_spectrum.shape[0])
    spec = np.fft.fft(range_spectrum * w[:, None, None], axis=0)
    return np.fft.fftshift(spec, axes=0)


def range_doppler(adc: AdcCube, window: str = "hann") -> RangeDopplerCube:
    return RangeDopplerCube(doppler_fft(range_fft(adc, window)), adc.config)


def tdm_phase_correction(config: RadarConfig) -> np.ndarray:
    """Phasors undoing the per-transmitter Doppler ramp, (doppler, antenna).

    Transmitter k fires k/tx_count of a chirp interval late, so a target
    in centered Doppler bin d accumulates phase 2*pi*(d - N/2)*k/(N*tx_count)
    on its channels. Multiplying by the conjugate ramp aligns all
    transmitters before the angle transform.
    """
    n = config.chirps_per_frame
    if not config.tdm_mimo:
        return np.ones((n, config.virtual_count), dtype=np.complex128)
    doppler = np.arange(n) - n // 2
    tx_of = np.array([config.tx_index(a) for a in range(config.virtual_count)])
    phase = doppler[:, None] * tx_of[None, :] / (n * config.tx_count)
    return np.exp(-2j * np.pi * phase)


def remodulate_virtual_array(rd: RangeDopplerCube) -> np.ndarray:
    """Scatter channels onto the aperture grid, (doppler, el, az, range).

    Grid cells with no physical element stay zero, which the zero-padded
    angle FFTs treat as missing aperture. TDM Doppler phase is corrected
    per bin during the scatter.
    """
    config = rd.config
    az_extent, el_extent = config.aperture_extents()
    corrected = rd.data * tdm_phase_correction(config)[:, :, None]
    grid = np.zeros(
        (config.chirps_per_frame, el_extent, az_extent, config.samples_per_chirp),
        dtype=np.complex128,
    )
    for a in range(config.virtual_count):
        d_az, d_el = config.antenna_positions[a]
        grid[:, d_el, d_az, :] += corrected[:, a, :]
    return grid


def angle_transform(
    aperture: np.ndarray,
    azimuth_size: int = AZIMUTH_FFT_SIZE,
    elevation_size: int = ELEVATION_FFT_SIZE,
) -> np.ndarray:
    """Zero-padded FFTs over the aperture axes (..., el, az, range).

    After the shift, bin i along an axis of size N corresponds to
    direction sine 2*(i - N/2)/N.
    """
    if aperture.shape[-3] > elevation_size or aperture.shape[-2] > azimuth_size:
        raise DimensionError("aperture exceeds angle FFT size")
    spec = np.fft.fft(aperture, n=elevation_size, axis=-3)
    spec = np.fft.fft(spec, n=azimuth_size, axis=-2)
    return np.fft.fftshift(spec, axes=(-3, -2))


def angle_ffts(
    grid: np.ndarray,
    config: RadarConfig,
    azimuth_size: int = AZIMUTH_FFT_SIZE,
    elevation_size: int = ELEVATION_FFT_SIZE,
) -> PolarTensor:
    """Magnitude polar tensor from the remodulated aperture grid.

    Materializes the full (doppler, el, az, range) array; for the default
    configuration that is several hundred MB, so the frame pipeline
    streams one Doppler slice at a time instead of calling this.
    """
    return PolarTensor(np.abs(angle_transform(grid, azimuth_size, elevation_size)), config)


class CartesianResampler:
    """Trilinear resampling from polar magnitudes onto the voxel grid.

    The eight corner indices and weights of every voxel center are
    precomputed once; each Doppler slice is then eight flat gathers.
    Voxels whose polar coordinate leaves the node extent on any axis
    read zero (same convention as constant-mode interpolation).
    """

    def __init__(
        self,
        geometry: TensorGeometry,
        range_resolution: float,
        azimuth_size: int = AZIMUTH_FFT_SIZE,
        elevation_size: int = ELEVATION_FFT_SIZE,
    ):
        self.geometry = geometry
        self.range_resolution = range_resolution
        self.slice_shape = None  # fixed by the first slice, then enforced
        centers = geometry.voxel_centers()  # (z, y, x, 3) world coordinates
        x = centers[..., 0]
        y = centers[..., 1]
        z = centers[..., 2]
        radius = np.sqrt(x * x + y * y + z * z)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(radius > 0, x / radius, 0.0)
            v = np.where(radius > 0, z / radius, 0.0)
        fe = v * (elevation_size / 2) + elevation_size / 2
        fa = u * (azimuth_size / 2) + azimuth_size / 2
        fr = radius / range_resolution
        # rows ordered like the polar slice axes (el, az, range); corner
        # indices are resolved against the slice shape on first use
        self._coords = np.stack([fe.ravel(), fa.ravel(), fr.ravel()])
        self.out_shape = geometry.spatial_shape

    def _bind(self, shape: tuple[int, int, int]) -> None:
        coords = self._coords
        dims = np.array(shape)
        base = np.floor(coords).astype(np.int64)
        valid = np.all((coords >= 0.0) & (coords <= dims[:, None] - 1.0), axis=0)
        base = np.clip(base, 0, np.maximum(dims[:, None] - 2, 0))
        frac = (coords - base).astype(np.float32)
        sz, sy = shape[1] * shape[2], shape[2]
        flat0 = base[0] * sz + base[1] * sy + base[2]
        self._indices = np.stack(
            [
                (flat0 + dz * sz + dy * sy + dx).astype(np.int64)
                for dz in (0, 1)
                for dy in (0, 1)
                for dx in (0, 1)
            ]
        )
        weights = np.stack(
            [
                (frac[0] if dz else 1.0 - frac[0])
                * (frac[1] if dy else 1.0 - frac[1])
                * (frac[2] if dx else 1.0 - frac[2])
                for dz in (0, 1)
                for dy in (0, 1)
                for dx in (0, 1)
            ]
        )
        weights *= valid
        self._weights = weights.astype(np.float32)
        self.slice_shape = shape

    def resample_slice(self, polar_slice: np.ndarray) -> np.ndarray:
        shape = polar_slice.shape
        if shape != self.slice_shape:
            self._bind(shape)
        flat = np.ascontiguousarray(polar_slice, dtype=np.float32).ravel()
        out = np.zeros(self._weights.shape[1], dtype=np.float32)
        for k in range(8):
            out += self._weights[k] * flat[self._indices[k]]
        return out.reshape(self.out_shape)


@lru_cache(maxsize=4)
def _cached_resampler(
    geometry: TensorGeometry, range_resolution: float, azimuth_size: int, elevation_size: int
) -> CartesianResampler:
    return CartesianResampler(geometry, range_resolution, azimuth_size, elevation_size)


def polar_to_cartesian(
    polar: PolarTensor, geometry: TensorGeometry | None = None
) -> RadarTensor4D:
    """Resample a polar magnitude tensor onto the Cartesian voxel grid."""
    geometry = geometry if geometry is not None else default_geometry()
    config = polar.config
    if geometry.doppler_size != polar.data.shape[0]:
        raise DimensionError(
            f"geometry doppler size {geometry.doppler_size} "
            f"!= polar doppler size {polar.data.shape[0]}"
        )
    max_covered = polar.data.shape[3] * config.range_resolution
    if geometry.y_max > max_covered:
        warnings.warn(
            f"voxel grid reaches {geometry.y_max:.2f} m but the polar tensor "
            f"covers {max_covered:.2f} m; out-of-domain voxels read zero",
            stacklevel=2,
        )
    resampler = _cached_resampler(
        geometry, config.range_resolution, polar.data.shape[2], polar.data.shape[1]
    )
    out = np.empty(geometry.shape, dtype=np.float32)
    for d in range(polar.data.shape[0]):
        out[d] = resampler.resample_slice(polar.data[d]).astype(np.float32)
    return RadarTensor4D(out, geometry)


def process_frame(
    adc: AdcCube,
    geometry: TensorGeometry | None = None,
    window: str = "hann",
    power: bool = False,
    azimuth_size: int = AZIMUTH_FFT_SIZE,
    elevation_size: int = ELEVATION_FFT_SIZE,
) -> RadarTensor4D:
    """Full chain from one ADC frame to the 4D Cartesian tensor.

    Runs one Doppler slice at a time to keep the peak footprint near the
    size of a single polar slice. ``power`` stores squared magnitudes
    instead of magnitudes.
    """
    config = adc.config
    geometry = geometry if geometry is not None else default_geometry()
    if geometry.doppler_size != config.chirps_per_frame:
        raise DimensionError(
            f"geometry doppler size {geometry.doppler_size} "
            f"!= chirps per frame {config.chirps_per_frame}"
        )
    if geometry.y_max > config.max_range:
        warnings.warn(
            f"voxel grid reaches {geometry.y_max:.2f} m but the configuration "
            f"resolves {config.max_range:.2f} m; out-of-domain voxels read zero",
            stacklevel=2,
        )
    rd = range_doppler(adc, window)
    # single precision through the angle transform: magnitudes only feed
    # argmax-level uses downstream and the tensor is float32 anyway
    grid = remodulate_virtual_array(rd).astype(np.complex64)
    resampler = _cached_resampler(
        geometry, config.range_resolution, azimuth_size, elevation_size
    )
    out = np.empty(geometry.shape, dtype=np.float32)
    for d in range(config.chirps_per_frame):
        spectrum = np.abs(angle_transform(grid[d], azimuth_size, elevation_size))
        if power:
            np.square(spectrum, out=spectrum)
        out[d] = resampler.resample_slice(spectrum)
    return RadarTensor4D(out, geometry)
