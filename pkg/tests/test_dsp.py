"""Processing chain: FFT stages, MIMO remodulation, angle transform,
polar-to-Cartesian resampling, and the assembled frame pipeline."""

import numpy as np
import pytest

from radarpose.dsp import (
    AZIMUTH_FFT_SIZE,
    ELEVATION_FFT_SIZE,
    CartesianResampler,
    PolarTensor,
    RadarTensor4D,
    angle_transform,
    doppler_bin_velocity,
    doppler_fft,
    polar_to_cartesian,
    process_frame,
    range_doppler,
    range_fft,
    remodulate_virtual_array,
    tdm_phase_correction,
)
from radarpose.errors import DimensionError, ValidationError
from radarpose.geometry import TensorGeometry
from radarpose.oracles import naive_dft, trilinear_reference
from radarpose.scene import Scatterer, Scene
from radarpose.simulate import AdcCube, synthesize_frame


def _random_cube(config, seed):
    rng = np.random.default_rng(seed)
    shape = (config.chirps_per_frame, config.virtual_count, config.samples_per_chirp)
    data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return AdcCube(data, config)


# ---------------------------------------------------------------- FFT stages


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_range_fft_matches_naive_dft(small_config, seed):
    cube = _random_cube(small_config, seed)
    spectrum = range_fft(cube, window="none")
    reference = naive_dft(cube.data, axis=-1)
    scale = np.max(np.abs(reference))
    assert np.max(np.abs(spectrum - reference)) < 1e-9 * scale


def test_windowed_range_fft_matches_naive_dft(small_config):
    cube = _random_cube(small_config, 3)
    spectrum = range_fft(cube, window="hann")
    from scipy.signal import get_window

    w = get_window("hann", small_config.samples_per_chirp, fftbins=True)
    reference = naive_dft(cube.data * w, axis=-1)
    scale = np.max(np.abs(reference))
    assert np.max(np.abs(spectrum - reference)) < 1e-9 * scale


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_doppler_fft_matches_naive_dft(small_config, seed):
    cube = _random_cube(small_config, seed)
    spectrum = range_fft(cube, window="none")
    doppler = doppler_fft(spectrum)
    reference = np.fft.fftshift(naive_dft(spectrum, axis=0), axes=0)
    scale = np.max(np.abs(reference))
    assert np.max(np.abs(doppler - reference)) < 1e-9 * scale


def test_unwindowed_fft_preserves_energy(small_config):
    # Parseval: sum |X|^2 == N * sum |x|^2 for a bare DFT
    cube = _random_cube(small_config, 4)
    n = small_config.samples_per_chirp
    spectrum = range_fft(cube, window="none")
    assert np.sum(np.abs(spectrum) ** 2) == pytest.approx(
        n * np.sum(np.abs(cube.data) ** 2), rel=1e-9
    )
    m = small_config.chirps_per_frame
    doppler = doppler_fft(spectrum)
    assert np.sum(np.abs(doppler) ** 2) == pytest.approx(
        m * np.sum(np.abs(spectrum) ** 2), rel=1e-9
    )


def test_zero_cube_stays_zero(small_config):
    cube = AdcCube(
        np.zeros(
            (
                small_config.chirps_per_frame,
                small_config.virtual_count,
                small_config.samples_per_chirp,
            ),
            dtype=np.complex128,
        ),
        small_config,
    )
    rd = range_doppler(cube, window="none")
    assert np.all(rd.data == 0)


def test_rejects_unknown_window(small_config):
    cube = _random_cube(small_config, 5)
    with pytest.raises(ValidationError):
        range_fft(cube, window="hamming")


def test_axes_of_range_doppler(default_config):
    scene = Scene([Scatterer((0.0, 4.0, 0.0), (0.0, 0.0, 0.0), 1.0)])
    rd = range_doppler(synthesize_frame(scene, default_config), window="none")
    assert rd.velocity_axis[32] == 0.0
    assert np.diff(rd.velocity_axis) == pytest.approx(default_config.velocity_resolution)
    assert rd.range_axis[0] == 0.0
    assert np.diff(rd.range_axis) == pytest.approx(default_config.range_resolution)
    assert doppler_bin_velocity(42, default_config) == pytest.approx(
        10 * default_config.velocity_resolution
    )


def test_static_target_sits_at_center_doppler_bin(default_config):
    scene = Scene([Scatterer((0.3, 4.0, 0.0), (0.0, 0.0, 0.0), 1.0)])
    rd = range_doppler(synthesize_frame(scene, default_config), window="none")
    d, _, _ = np.unravel_index(np.argmax(np.abs(rd.data)), rd.data.shape)
    assert d == 32


def test_receding_target_doppler_bin(default_config):
    speed = 10 * default_config.velocity_resolution
    scene = Scene([Scatterer((0.0, 4.0, 0.0), (0.0, speed, 0.0), 1.0)])
    rd = range_doppler(synthesize_frame(scene, default_config), window="none")
    d, _, r = np.unravel_index(np.argmax(np.abs(rd.data)), rd.data.shape)
    assert d == 42
    assert abs(r - round(4.0 / default_config.range_resolution)) <= 1


def test_ambiguous_velocity_wraps(default_config):
    speed = 40 * default_config.velocity_resolution  # 8 bins past the edge
    scene = Scene([Scatterer((0.0, 4.0, 0.0), (0.0, speed, 0.0), 1.0)])
    cube = synthesize_frame(scene, default_config, check_ambiguity=False)
    rd = range_doppler(cube, window="none")
    d, _, _ = np.unravel_index(np.argmax(np.abs(rd.data)), rd.data.shape)
    assert d == (32 + 40) % 64


def test_resolves_two_targets_in_range(default_config):
    r1 = 60 * default_config.range_resolution
    r2 = 70 * default_config.range_resolution
    scene = Scene(
        [
            Scatterer((0.0, r1, 0.0), (0.0, 0.0, 0.0), 1.0),
            Scatterer((0.0, r2, 0.0), (0.0, 0.0, 0.0), 1.0),
        ]
    )
    cube = synthesize_frame(scene, default_config)
    profile = np.abs(range_fft(cube, window="none"))[0, 0, :128]
    peaks = [
        i
        for i in range(1, 127)
        if profile[i] > profile[i - 1] and profile[i] >= profile[i + 1]
    ]
    top = sorted(sorted(peaks, key=lambda i: profile[i])[-2:])
    assert top == [60, 70]


# ------------------------------------------------- remodulation and angles


def test_tdm_correction_is_unit_modulus(default_config):
    phasors = tdm_phase_correction(default_config)
    assert phasors.shape == (64, 192)
    np.testing.assert_allclose(np.abs(phasors), 1.0, atol=1e-12)
    # the first transmitter needs no correction, and neither does bin N/2
    np.testing.assert_array_equal(phasors[:, :16], 1.0)
    np.testing.assert_array_equal(phasors[32, :], 1.0)


def test_tdm_correction_disabled(default_config):
    config = default_config.with_overrides(tdm_mimo=False)
    assert np.all(tdm_phase_correction(config) == 1.0)


def test_remodulate_identity_layout_is_a_reshape():
    from radarpose.config import RadarConfig

    config = RadarConfig(samples_per_chirp=32, chirps_per_frame=8, tx_count=1, rx_count=4)
    rng = np.random.default_rng(0)
    shape = (8, 4, 32)
    cube = AdcCube(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), config)
    rd = range_doppler(cube, window="none")
    grid = remodulate_virtual_array(rd)
    assert grid.shape == (8, 1, 4, 32)
    np.testing.assert_array_equal(grid[:, 0, :, :], rd.data)


def test_remodulate_zero_in_zero_out(default_config):
    rd = range_doppler(
        AdcCube(np.zeros((64, 192, 256), dtype=np.complex128), default_config),
        window="none",
    )
    assert np.all(remodulate_virtual_array(rd) == 0)


def test_corrected_aperture_carries_pure_azimuth_ramp(default_config):
    # off-boresight target receding at a bin-centered speed; after TDM
    # correction the populated azimuth row must show a uniform phase step
    # of pi*u between adjacent elements, including across transmitter
    # boundaries every 16 cells
    r = 4.0
    u = 0.3
    position = np.array([r * u, r * np.sqrt(1 - u**2), 0.0])
    speed = 6 * default_config.velocity_resolution
    velocity = speed * position / np.linalg.norm(position)
    scene = Scene([Scatterer(tuple(position), tuple(velocity), 1.0)])
    cube = synthesize_frame(scene, default_config)
    rd = range_doppler(cube, window="none")
    grid = remodulate_virtual_array(rd)
    d, _, _, rbin = np.unravel_index(np.argmax(np.abs(grid)), grid.shape)
    assert d == 32 + 6
    row = grid[d, 0, :, rbin]
    assert np.min(np.abs(row)) > 0
    expected = np.pi * float(position[0] / np.linalg.norm(position))
    steps = np.angle(row[1:] * np.conj(row[:-1]))
    assert np.max(np.abs(steps - expected)) < 1e-6


def test_uncorrected_aperture_has_transmitter_phase_jumps(default_config):
    # same scene, but remodulated as if no correction were needed: the
    # staggered transmit times leave phase jumps at the tx boundaries
    r = 4.0
    u = 0.3
    position = np.array([r * u, r * np.sqrt(1 - u**2), 0.0])
    speed = 6 * default_config.velocity_resolution
    velocity = speed * position / np.linalg.norm(position)
    scene = Scene([Scatterer(tuple(position), tuple(velocity), 1.0)])
    cube = synthesize_frame(scene, default_config)
    rd = range_doppler(cube, window="none")
    from radarpose.dsp import RangeDopplerCube

    uncorrected = RangeDopplerCube(
        rd.data, default_config.with_overrides(tdm_mimo=False)
    )
    grid = remodulate_virtual_array(uncorrected)
    d = 32 + 6
    rbin = int(np.argmax(np.abs(grid[d, 0, 0, :])))
    row = grid[d, 0, :, rbin]
    expected = np.pi * float(position[0] / np.linalg.norm(position))
    steps = np.angle(row[1:] * np.conj(row[:-1]))
    within_tx = np.delete(steps, np.arange(15, 79, 16))
    at_boundary = steps[np.arange(15, 79, 16)]
    assert np.max(np.abs(within_tx - expected)) < 1e-6
    assert np.min(np.abs(at_boundary - expected)) > 1e-3


def test_boresight_target_peaks_at_center_bins(single_target_frame):
    position, cube, _ = single_target_frame
    rd = range_doppler(cube, window="none")
    grid = remodulate_virtual_array(rd)
    spectrum = np.abs(angle_transform(grid[32]))
    el, az, rbin = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    r = np.linalg.norm(position)
    u = position[0] / r
    v = position[2] / r
    assert abs(az - (64 + u * 64)) <= 1
    assert abs(el - (16 + v * 16)) <= 1
    assert abs(rbin - r / cube.config.range_resolution) <= 1


def test_azimuth_angle_bin(default_config):
    theta = np.radians(10.0)
    r = 4.0
    position = (r * np.sin(theta), r * np.cos(theta), 0.0)
    scene = Scene([Scatterer(position, (0.0, 0.0, 0.0), 1.0)])
    cube = synthesize_frame(scene, default_config)
    rd = range_doppler(cube, window="none")
    grid = remodulate_virtual_array(rd)
    spectrum = np.abs(angle_transform(grid[32]))
    _, az, _ = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    assert abs(az - (64 + np.sin(theta) * 64)) <= 1


def test_angle_spectrum_mirror_symmetry():
    # conjugating the aperture ramp mirrors the shifted spectrum about
    # its center: shifted index s maps to (N - s) mod N
    rng = np.random.default_rng(1)
    amplitudes = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    ramp = np.exp(1j * np.pi * 0.37 * np.arange(16))
    aperture = np.zeros((1, 32, 1), dtype=np.complex128)
    mirrored = np.zeros_like(aperture)
    # conjugating the whole signal mirrors the magnitude spectrum, so use
    # real amplitudes under opposite-sign ramps
    aperture[0, :16, 0] = np.abs(amplitudes) * ramp
    mirrored[0, :16, 0] = np.abs(amplitudes) * np.conj(ramp)
    spec = np.abs(angle_transform(aperture, azimuth_size=64, elevation_size=1))
    spec_m = np.abs(angle_transform(mirrored, azimuth_size=64, elevation_size=1))
    remapped = np.roll(spec[0, ::-1, 0], 1)
    np.testing.assert_allclose(spec_m[0, :, 0], remapped, rtol=1e-9, atol=1e-12)


def test_angle_transform_rejects_oversized_aperture():
    with pytest.raises(DimensionError):
        angle_transform(np.zeros((33, 2, 4), dtype=np.complex128))
    with pytest.raises(DimensionError):
        angle_transform(np.zeros((2, 129, 4), dtype=np.complex128))


def test_polar_tensor_sine_axes(default_config):
    polar = PolarTensor(np.zeros((1, 32, 128, 4)), default_config)
    assert polar.elevation_sines[16] == 0.0
    assert polar.azimuth_sines[64] == 0.0
    assert polar.azimuth_sines[0] == -1.0
    assert np.diff(polar.azimuth_sines) == pytest.approx(2 / 128)


# ------------------------------------------------------------- resampling


def test_resampler_matches_hand_trilinear():
    geometry = TensorGeometry(
        doppler_size=1,
        x_min=-1.0,
        x_max=1.0,
        x_size=8,
        y_min=0.5,
        y_max=4.5,
        y_size=8,
        z_min=-0.5,
        z_max=0.5,
        z_size=4,
    )
    resampler = CartesianResampler(
        geometry, range_resolution=0.5, azimuth_size=8, elevation_size=8
    )
    rng = np.random.default_rng(2)
    volume = rng.random((8, 8, 8)).astype(np.float32)
    result = resampler.resample_slice(volume)
    centers = geometry.voxel_centers()
    dims = np.array(volume.shape, dtype=float)
    for iz in range(4):
        for iy in range(8):
            for ix in range(8):
                x, y, z = centers[iz, iy, ix]
                r = np.sqrt(x * x + y * y + z * z)
                coord = (z / r * 4 + 4, x / r * 4 + 4, r / 0.5)
                inside = all(0.0 <= c <= d - 1.0 for c, d in zip(coord, dims))
                expected = trilinear_reference(volume, coord) if inside else 0.0
                assert result[iz, iy, ix] == pytest.approx(expected, abs=1e-5)


def test_resampler_zero_volume(small_geometry):
    resampler = CartesianResampler(small_geometry, range_resolution=0.25)
    out = resampler.resample_slice(np.zeros((32, 128, 64), dtype=np.float32))
    assert out.shape == small_geometry.spatial_shape
    assert np.all(out == 0)


def test_polar_to_cartesian_slices_are_independent(default_config):
    rng = np.random.default_rng(3)
    geometry = TensorGeometry(doppler_size=4, x_size=32, y_size=16, z_size=8)
    polar = PolarTensor(
        rng.random((4, 32, 128, 256)).astype(np.float32), default_config
    )
    tensor = polar_to_cartesian(polar, geometry)
    lone = PolarTensor(polar.data[2:3], default_config)
    lone_geometry = TensorGeometry(doppler_size=1, x_size=32, y_size=16, z_size=8)
    single = polar_to_cartesian(lone, lone_geometry)
    np.testing.assert_array_equal(tensor.data[2], single.data[0])


def test_polar_to_cartesian_warns_on_short_range_coverage(default_config):
    geometry = TensorGeometry(doppler_size=1, x_size=32, y_size=16, z_size=8)
    polar = PolarTensor(
        np.zeros((1, 32, 128, 64), dtype=np.float32), default_config
    )
    with pytest.warns(UserWarning, match="covers"):
        polar_to_cartesian(polar, geometry)


def test_polar_to_cartesian_rejects_doppler_mismatch(default_config):
    geometry = TensorGeometry(doppler_size=4, x_size=32, y_size=16, z_size=8)
    polar = PolarTensor(np.zeros((2, 32, 128, 256), dtype=np.float32), default_config)
    with pytest.raises(DimensionError):
        polar_to_cartesian(polar, geometry)


# ------------------------------------------------------------ full frame


def test_process_frame_output_shape(single_target_frame):
    _, _, tensor = single_target_frame
    assert tensor.data.shape == (64, 32, 128, 256)
    assert tensor.data.dtype == np.float32
    assert np.all(np.isfinite(tensor.data))
    assert np.all(tensor.data >= 0)


def test_process_frame_localizes_target(single_target_frame):
    position, cube, tensor = single_target_frame
    d, iz, iy, ix = np.unravel_index(np.argmax(tensor.data), tensor.data.shape)
    assert d == 32
    # The grid argmax can only be as good as the polar measurement behind
    # it, so bound the peak in measurement coordinates: range to within
    # 1.5 bins, each sine angle to within 2 FFT bins. The 6-element
    # elevation aperture makes the last bound worth about 0.5 m of z at
    # this range; per-voxel z assertions would overstate what it resolves.
    center = tensor.geometry.voxel_center(iz, iy, ix)
    r_true = np.linalg.norm(position)
    r_peak = np.linalg.norm(center)
    assert abs(r_peak - r_true) <= 1.5 * cube.config.range_resolution
    assert abs(center[0] / r_peak - position[0] / r_true) <= 2 * (2.0 / 128)
    assert abs(center[2] / r_peak - position[2] / r_true) <= 2 * (2.0 / 32)


def test_static_energy_concentrates_at_zero_doppler(single_target_frame):
    _, _, tensor = single_target_frame
    energy = np.sum(tensor.data.astype(np.float64) ** 2, axis=(1, 2, 3))
    assert energy[32] / np.sum(energy) >= 0.9


def test_process_frame_scale_invariant_argmax(single_target_frame):
    _, cube, tensor = single_target_frame
    scaled = process_frame(
        AdcCube(cube.data * 3.0, cube.config, cube.frame_index), window="none"
    )
    assert np.argmax(scaled.data) == np.argmax(tensor.data)
    np.testing.assert_allclose(scaled.data, 3.0 * tensor.data, rtol=2e-4)


def test_process_frame_power_mode(single_target_frame):
    position, cube, tensor = single_target_frame
    powered = process_frame(cube, window="none", power=True)
    peak = np.unravel_index(np.argmax(tensor.data), tensor.data.shape)
    # squaring happens before interpolation, so the two modes only agree
    # to the extent the peak voxel is dominated by one polar node, and
    # near-tie voxels along the blurred elevation axis may swap argmax
    assert powered.data[peak] == pytest.approx(tensor.data[peak] ** 2, rel=0.1)
    assert np.max(powered.data) <= 1.1 * powered.data[peak]
    d_peak = np.unravel_index(np.argmax(powered.data), powered.data.shape)[0]
    assert d_peak == peak[0]


def test_process_frame_rejects_doppler_mismatch(single_target_frame, default_config):
    _, cube, _ = single_target_frame
    geometry = TensorGeometry(doppler_size=32, x_size=32, y_size=16, z_size=8)
    with pytest.raises(DimensionError):
        process_frame(cube, geometry)


def test_radar_tensor_validates_shape(small_geometry):
    with pytest.raises(DimensionError):
        RadarTensor4D(np.zeros((1, 2, 3, 4), dtype=np.float32), small_geometry)
