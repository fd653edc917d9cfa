"""Raw ADC synthesis for point-scatterer scenes.

Each scatterer contributes a complex exponential whose frequency along
the fast-time axis encodes range, along the slow-time axis encodes
radial velocity, and whose phase across the virtual array encodes
direction. Transmitters fire in time-division rounds inside each chirp
repetition interval, so moving targets pick up an extra per-transmitter
phase ramp that the processing chain must undo.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RadarConfig, SPEED_OF_LIGHT
from .errors import DimensionError, ValidationError
from .scene import Scene


@dataclass
class AdcCube:
    """One frame of raw samples, indexed (chirp, virtual antenna, sample)."""

    data: np.ndarray
    config: RadarConfig
    frame_index: int = 0

    def __post_init__(self):
        expected = (
            self.config.chirps_per_frame,
            self.config.virtual_count,
            self.config.samples_per_chirp,
        )
        if self.data.shape != expected:
            raise DimensionError(f"adc cube shape {self.data.shape}, expected {expected}")
        if not np.iscomplexobj(self.data):
            raise ValidationError("adc cube must be complex")


def synthesize_frame(
    scene: Scene,
    config: RadarConfig,
    frame_index: int = 0,
    rng_seed: int | None = None,
    check_ambiguity: bool = True,
    range_falloff: bool = False,
) -> AdcCube:
    """Simulate one frame of raw ADC data.

    Scatterer positions are propagated to ``frame_index / frame_rate``
    seconds before synthesis; within the frame the stop-and-hop
    approximation holds (position frozen per chirp, motion expressed
    only through the Doppler phase ramp). Noise is circular complex
    Gaussian with total standard deviation ``scene.noise_stddev``.
    Identical (scene, config, frame_index, rng_seed) reproduce the cube
    bit for bit. ``range_falloff`` optionally applies 1/R^2 amplitude
    decay; by default amplitude is range-independent.
    """
    if not 0 <= frame_index < scene.duration_frames:
        raise ValidationError(
            f"frame_index {frame_index} outside scene duration {scene.duration_frames}"
        )
    n_chirps = config.chirps_per_frame
    n_virtual = config.virtual_count
    n_samples = config.samples_per_chirp

    t_frame = frame_index / config.frame_rate
    wavelength = config.wavelength
    ts = config.sample_spacing
    tc = config.chirp_repetition_interval
    t_sub = tc / config.tx_count if config.tdm_mimo else 0.0

    positions = np.array([config.antenna_positions[a] for a in range(n_virtual)], dtype=float)
    d_az = positions[:, 0]
    d_el = positions[:, 1]
    tx_of = np.array([config.tx_index(a) for a in range(n_virtual)], dtype=float)

    sample_idx = np.arange(n_samples, dtype=float)
    chirp_idx = np.arange(n_chirps, dtype=float)

    cube = np.zeros((n_chirps, n_virtual, n_samples), dtype=np.complex128)
    for s in scene.scatterers:
        pos = s.position_at(t_frame)
        r = float(np.linalg.norm(pos))
        if r <= 0.0:
            raise ValidationError("scatterer coincides with the radar origin")
        v_r = float(np.dot(pos, np.asarray(s.velocity)) / r)
        if check_ambiguity:
            if r >= config.max_range:
                raise ValidationError(
                    f"scatterer range {r:.2f} m exceeds max unambiguous range "
                    f"{config.max_range:.2f} m"
                )
            if abs(v_r) >= config.max_unambiguous_speed:
                raise ValidationError(
                    f"radial speed {v_r:.2f} m/s exceeds unambiguous span "
                    f"{config.max_unambiguous_speed:.2f} m/s"
                )
        # direction cosines relative to boresight (+y)
        u = pos[0] / r
        v = pos[2] / r

        f_beat = 2.0 * config.frequency_slope * r / SPEED_OF_LIGHT
        f_doppler = 2.0 * v_r / wavelength

        amp = s.reflectivity / (r * r) if range_falloff else s.reflectivity
        phase_sample = np.exp(2j * np.pi * f_beat * ts * sample_idx)
        phase_chirp = np.exp(2j * np.pi * f_doppler * tc * chirp_idx)
        phase_antenna = np.exp(
            2j * np.pi * (0.5 * (d_az * u + d_el * v) + f_doppler * t_sub * tx_of)
        )
        cube += amp * (
            phase_chirp[:, None, None]
            * phase_antenna[None, :, None]
            * phase_sample[None, None, :]
        )

    if scene.noise_stddev > 0.0:
        rng = np.random.default_rng(
            None if rng_seed is None else (rng_seed, frame_index)
        )
        sigma = scene.noise_stddev / np.sqrt(2.0)
        cube += sigma * (
            rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape)
        )
    return AdcCube(cube, config, frame_index)
