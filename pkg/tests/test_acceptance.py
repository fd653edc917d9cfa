"""Black-box checks of the guarantees this package makes, one per test.

Each test prints a single `criterion N PASS` line with the measured
numbers once its assertions hold, so a verbose run doubles as a short
conformance report. Tolerances and budgets are pinned in the asserts.
"""

import math
import time

import numpy as np
import torch

from radarpose.cfar import CfarConfig, antenna_power_map, ca_cfar_detect, cfar_mask
from radarpose.config import RadarConfig, derive_resolutions
from radarpose.decode import decode, encode_targets, offsets_to_map, suppress_duplicates
from radarpose.dsp import (
    RadarTensor4D,
    RangeDopplerCube,
    angle_transform,
    doppler_fft,
    process_frame,
    range_doppler,
    range_fft,
)
from radarpose.geometry import TensorGeometry
from radarpose.metrics import (
    abs_mpjpe,
    aligned_joint_errors,
    evaluate,
    joint_errors,
    mpjpe,
    mrpe,
)
from radarpose.oracles import (
    condition_for_gradient_check,
    finite_difference_gradients,
    focal_loss_reference,
    naive_dft,
    offset_loss_reference,
)
from radarpose.pose import JOINT_COUNT, Person, PoseSet, person_at, standing_template
from radarpose.posenet import (
    NetworkConfig,
    PoseNet,
    count_parameters,
    focal_loss,
    forward_tensor,
    offset_loss,
    total_loss,
    train_micro,
)
from radarpose.scene import Scatterer, Scene, skeleton_to_scatterers
from radarpose.simulate import AdcCube, synthesize_frame


def _rel(fast: np.ndarray, slow: np.ndarray) -> float:
    return float(np.max(np.abs(fast - slow)) / np.max(np.abs(slow)))


def test_criterion_1_resolution_reproduction():
    start = time.monotonic()
    res = derive_resolutions(RadarConfig())
    elapsed = time.monotonic() - start
    assert abs(res.range_res - 0.045) <= 0.05 * 0.045
    assert abs(res.velocity_res - 0.039) <= 0.05 * 0.039
    assert elapsed < 1.0
    print(
        f"criterion 1 PASS: range res {res.range_res * 100:.3f} cm, velocity res "
        f"{res.velocity_res * 100:.3f} cm/s, derived in {elapsed * 1e3:.1f} ms"
    )


def test_criterion_2_fft_stages_match_naive_dft():
    start = time.monotonic()
    rng = np.random.default_rng(21)
    config = RadarConfig(samples_per_chirp=32, chirps_per_frame=8, tx_count=2, rx_count=2)
    shape = (config.chirps_per_frame, config.virtual_count, config.samples_per_chirp)
    worst_dft = 0.0
    worst_parseval = 0.0

    def parseval(freq, time_domain, n_fft):
        nonlocal worst_parseval
        ratio = np.sum(np.abs(freq) ** 2) / (n_fft * np.sum(np.abs(time_domain) ** 2))
        worst_parseval = max(worst_parseval, abs(ratio - 1.0))

    for _ in range(20):
        data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        fast = range_fft(AdcCube(data, config), window="none")
        worst_dft = max(worst_dft, _rel(fast, naive_dft(data, axis=-1)))
        parseval(fast, data, shape[-1])

    for _ in range(20):
        data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        fast = doppler_fft(data)
        slow = np.fft.fftshift(naive_dft(data, axis=0), axes=0)
        worst_dft = max(worst_dft, _rel(fast, slow))
        parseval(fast, data, shape[0])

    angle_cases = [(3, 5, 7, 8, 16)] * 18 + [(6, 80, 3, 128, 32)] * 2
    for el_in, az_in, ranges, az_size, el_size in angle_cases:
        data = rng.standard_normal((el_in, az_in, ranges)) + 1j * rng.standard_normal(
            (el_in, az_in, ranges)
        )
        fast = angle_transform(data, azimuth_size=az_size, elevation_size=el_size)
        slow = np.fft.fftshift(
            naive_dft(naive_dft(data, axis=-3, n=el_size), axis=-2, n=az_size),
            axes=(-3, -2),
        )
        worst_dft = max(worst_dft, _rel(fast, slow))
        parseval(fast, data, el_size * az_size)

    elapsed = time.monotonic() - start
    assert worst_dft <= 1e-6
    assert worst_parseval <= 1e-9
    assert elapsed < 120.0
    print(
        "criterion 2 PASS: 60 random inputs over range/doppler/angle stages, worst "
        f"DFT rel err {worst_dft:.2e}, worst Parseval dev {worst_parseval:.2e}, "
        f"{elapsed:.1f} s"
    )


def test_criterion_3_end_to_end_localization():
    start = time.monotonic()
    config = RadarConfig()
    # single z row centered on the scatterer plane; the 6-row elevation
    # aperture cannot separate voxels finer than that anyway
    geometry = TensorGeometry(
        doppler_size=64,
        z_min=-0.025, z_max=0.025, z_size=1,
        y_min=1.6, y_max=8.0, y_size=128,
        x_min=-3.2, x_max=3.2, x_size=256,
    )
    dr = config.range_resolution
    vel_res = config.velocity_resolution
    rng = np.random.default_rng(7)
    worst_axis = np.zeros(3)
    worst_doppler = 0
    for trial in range(50):
        if trial % 2 == 0:
            # direction on an azimuth FFT bin, range crossing a row center
            j = int(rng.integers(15, 96))
            y = 1.6 + (j + 0.5) * 0.05
            u_cap = (-y + math.sqrt(y * y + 0.9216)) / 0.96
            kmax = int(u_cap * 64)
            k = int(rng.integers(-kmax, kmax + 1))
            u = k / 64.0
            r = y / math.sqrt(1.0 - u * u)
            x = u * r
        else:
            # radius on a range bin, crossing a row center off boresight
            while True:
                j = int(rng.integers(15, 91))
                y = 1.6 + (j + 0.5) * 0.05
                candidates = []
                for irng in range(56, 146):
                    r = irng * dr
                    if r <= y:
                        continue
                    u = math.sqrt(1.0 - (y / r) ** 2)
                    low = (-r + math.sqrt(r * r + 21.9)) / 4.68
                    if low <= u <= 0.62 and u * r <= 2.9:
                        candidates.append((r, u))
                if candidates:
                    break
            r, u = candidates[int(rng.integers(len(candidates)))]
            x = math.copysign(u * r, rng.uniform(-1.0, 1.0))
        m = int(rng.integers(-25, 26))
        pos = np.array([x, y, 0.0])
        vel = m * vel_res * pos / np.linalg.norm(pos)
        scene = Scene([Scatterer(tuple(pos), tuple(vel), 1.0)])
        cube = synthesize_frame(scene, config, frame_index=0)
        tensor = process_frame(cube, geometry, window="none")
        d, iz, iy, ix = np.unravel_index(np.argmax(tensor.data), tensor.data.shape)
        frac = geometry.world_to_voxel(pos)
        err = np.abs(np.array([iz, iy, ix], dtype=float) - frac)
        worst_axis = np.maximum(worst_axis, err)
        doppler_err = abs(d - (32 + m))
        worst_doppler = max(worst_doppler, doppler_err)
        assert (err <= 1.0).all(), f"trial {trial}: voxel error {err} at {pos}"
        assert doppler_err <= 1, f"trial {trial}: doppler bin {d} vs {32 + m}"
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    print(
        "criterion 3 PASS: 50 noise-free scenes localized, worst voxel error "
        f"(z, y, x) = ({worst_axis[0]:.2f}, {worst_axis[1]:.2f}, {worst_axis[2]:.2f}), "
        f"worst doppler bin error {worst_doppler}, {elapsed:.1f} s"
    )


def test_criterion_4_tensor_shape(single_target_frame):
    _, cube, _ = single_target_frame
    tensor = process_frame(cube)
    assert tensor.data.shape == (64, 32, 128, 256)
    print(
        "criterion 4 PASS: default processing emits shape "
        f"{tensor.data.shape} (doppler, z, y, x)"
    )


def test_criterion_5_cfar_calibration():
    start = time.monotonic()
    # false-alarm rate on pure noise power (unit-mean exponential cells)
    rng = np.random.default_rng(50)
    pfa = 1e-3
    noise = rng.exponential(size=(512, 512))
    rate = float(cfar_mask(noise, CfarConfig(4, 16, pfa)).mean())
    assert noise.size >= 100_000
    assert pfa / 3.0 <= rate <= 3.0 * pfa

    # a strong scatterer lands in its own range/doppler cell
    config = RadarConfig()
    r = 84 * config.range_resolution
    v = 6 * config.velocity_resolution
    scene = Scene([Scatterer((0.0, r, 0.0), (0.0, v, 0.0), 1.0)], noise_stddev=12.8)
    cube = synthesize_frame(scene, config, rng_seed=11)
    rd = range_doppler(cube, window="none")
    detections = ca_cfar_detect(rd, pfa=1e-6)
    hits = {tuple(row) for row in detections}
    assert (84, 38) in hits, f"target bin missing from {sorted(hits)}"

    power = antenna_power_map(rd)
    noise_floor = float(np.median(power)) / math.log(2.0)  # exponential median
    snr_db = 10.0 * math.log10(float(power[38, 84]) / noise_floor)

    # threshold scales with the data, so the detection set must not move
    scaled = ca_cfar_detect(RangeDopplerCube(rd.data * 8.0, config), pfa=1e-6)
    assert {tuple(row) for row in scaled} == hits

    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    print(
        f"criterion 5 PASS: noise false-alarm rate {rate:.2e} vs pfa {pfa:.0e} "
        f"over {noise.size} cells, {snr_db:.1f} dB scatterer at bin (84, 38), "
        f"scale-invariant {len(hits)} detections, {elapsed:.1f} s"
    )


def test_criterion_6_loss_oracles():
    rng = np.random.default_rng(6)
    worst_focal = 0.0
    for _ in range(10):
        conf = rng.uniform(0.01, 0.99, size=(3, 4, 5))
        target = rng.uniform(0.0, 0.999, size=(3, 4, 5))
        target.ravel()[rng.choice(target.size, 2, replace=False)] = 1.0
        fast = float(focal_loss(torch.from_numpy(conf), torch.from_numpy(target)))
        slow = focal_loss_reference(conf, target)
        worst_focal = max(worst_focal, abs(fast - slow) / max(abs(slow), 1e-12))
    assert worst_focal <= 1e-9

    geometry = TensorGeometry(doppler_size=4, x_size=16, y_size=8, z_size=4)
    worst_offset = 0.0
    for case in range(10):
        people = [Person(standing_template(1.7) * 0.2 + np.array([0.0, 3.0 + case * 0.2, 0.0]))]
        if case % 2:
            people.append(Person(standing_template(1.8) * 0.2 + np.array([1.0, 5.0, 0.0])))
        targets = encode_targets(PoseSet(people), geometry)
        pred = rng.standard_normal((1, 3 * JOINT_COUNT) + geometry.spatial_shape)
        fast = float(offset_loss(torch.from_numpy(pred), [targets]))
        slow = offset_loss_reference(
            [
                pred[0, :, c[0], c[1], c[2]].reshape(JOINT_COUNT, 3)
                for c in targets.centers
            ],
            list(targets.offsets),
        )
        worst_offset = max(worst_offset, abs(fast - slow) / max(abs(slow), 1e-12))
    assert worst_offset <= 1e-9

    # branch behavior: an exact-one target uses the positive term, anything
    # below one the distance-weighted negative term
    p = 0.7
    conf = torch.full((1, 1, 1), p, dtype=torch.float64)
    pos_val = float(focal_loss(conf, torch.ones((1, 1, 1), dtype=torch.float64)))
    pos_hand = -((1.0 - p) ** 2) * math.log(p)
    assert abs(pos_val - pos_hand) / pos_hand <= 1e-12
    y = 0.999
    neg_val = float(focal_loss(conf, torch.full((1, 1, 1), y, dtype=torch.float64)))
    neg_hand = -((1.0 - y) ** 4) * p**2 * math.log(1.0 - p)
    assert abs(neg_val - neg_hand) / neg_hand <= 1e-12
    assert pos_val != neg_val
    print(
        "criterion 6 PASS: 10 focal + 10 offset cases vs scalar oracles, worst rel "
        f"err {max(worst_focal, worst_offset):.2e}; pos/neg branch values "
        f"{pos_val:.3e} / {neg_val:.3e} match hand formulas"
    )


def test_criterion_7_gradient_check():
    start = time.monotonic()
    rng = np.random.default_rng(70)
    model = PoseNet(
        NetworkConfig(
            in_channels=2,
            base_channels=8,
            stages=2,
            modules_per_stage=1,
            blocks_per_module=1,
            norm_kind="group",
        ),
        seed=3,
    ).double()
    model.eval()
    params = count_parameters(model)
    assert params <= 100_000
    condition_for_gradient_check(model)

    geometry = TensorGeometry(doppler_size=4, x_size=16, y_size=8, z_size=4)
    person = Person(standing_template(1.7) * 0.2 + np.array([0.0, 4.0, 0.0]))
    targets = encode_targets(PoseSet([person]), geometry)
    net_input = torch.from_numpy(rng.standard_normal((1, 2) + geometry.spatial_shape))

    def loss_fn():
        return total_loss(model(net_input), [targets])["total"]

    samples = 120
    worst = finite_difference_gradients(loss_fn, model, samples=samples, h=1e-3, seed=7)
    elapsed = time.monotonic() - start
    assert worst <= 1e-4
    assert elapsed < 600.0
    print(
        f"criterion 7 PASS: autograd vs central differences on {samples} of "
        f"{params} parameters, worst rel err {worst:.2e}, {elapsed:.1f} s"
    )


def test_criterion_8_roundtrip_and_suppression():
    start = time.monotonic()
    geometry = TensorGeometry(doppler_size=4, x_size=64, y_size=64, z_size=16)
    rng = np.random.default_rng(8)
    worst_joint = 0.0
    for _ in range(100):
        people = [
            person_at(
                (rng.uniform(-1.8, 1.8), rng.uniform(2.2, 6.5), 0.0),
                height=rng.uniform(1.5, 1.95),
            )
        ]
        if rng.uniform() < 0.5:
            while True:
                second = (rng.uniform(-1.8, 1.8), rng.uniform(2.2, 6.5), 0.0)
                if np.linalg.norm(np.array(second) - people[0].pelvis) >= 1.2:
                    break
            people.append(person_at(second, height=rng.uniform(1.5, 1.95)))
        poses = PoseSet(people)
        targets = encode_targets(poses, geometry)
        decoded = decode(
            targets.confidence, offsets_to_map(targets), geometry, threshold=0.5
        )
        assert len(decoded) == len(poses)
        for truth in poses.people:
            nearest = min(
                decoded.people,
                key=lambda p: float(np.linalg.norm(p.pelvis - truth.pelvis)),
            )
            worst_joint = max(
                worst_joint, float(np.max(np.abs(nearest.joints - truth.joints)))
            )
    assert worst_joint <= 1e-6

    # random decoder heads: count monotone in the candidate budget, and the
    # survivor list is a fixed point of suppression
    head_shape = (8, 16, 24)
    head_geometry = TensorGeometry(doppler_size=4, x_size=24, y_size=16, z_size=8)
    for _ in range(100):
        conf = rng.uniform(size=head_shape)
        offs = rng.normal(scale=0.1, size=(3 * JOINT_COUNT,) + head_shape)
        counts = [
            len(decode(conf, offs, head_geometry, top_k=k)) for k in (1, 2, 4, 8)
        ]
        assert all(a <= b for a, b in zip(counts, counts[1:]))
        people = decode(conf, offs, head_geometry).people
        again = suppress_duplicates(people)
        assert len(again) == len(people)
        assert all(a is b for a, b in zip(again, people))
    elapsed = time.monotonic() - start
    print(
        "criterion 8 PASS: 100 pose roundtrips worst joint err "
        f"{worst_joint:.2e} m; suppression idempotent and count monotone in "
        f"top_k on 100 random heads, {elapsed:.1f} s"
    )


def test_criterion_9_micro_overfit():
    start = time.monotonic()
    config = RadarConfig()
    rng = np.random.default_rng(42)
    frames = []
    for _ in range(8):
        person = person_at(
            (rng.uniform(-1.8, 1.8), rng.uniform(2.6, 6.2), 0.0),
            height=rng.uniform(1.6, 1.9),
        )
        poses = PoseSet([person])
        scene = skeleton_to_scatterers(poses)
        cube = synthesize_frame(scene, config, frame_index=0)
        tensor = process_frame(cube)
        # unit peak keeps the input scale friendly to plain SGD
        tensor = RadarTensor4D(tensor.data / tensor.data.max(), tensor.geometry)
        frames.append((tensor, poses))

    results = {}
    for norm in ("group", "batch"):
        net_config = NetworkConfig(
            in_channels=16,
            base_channels=8,
            stages=2,
            modules_per_stage=1,
            blocks_per_module=1,
            norm_kind=norm,
            input_downsample=(4, 4, 8, 8),
        )
        model, losses = train_micro(
            frames, net_config, epochs=500, lr=2e-3, momentum=0.9
        )
        model.eval()
        preds, truths = [], []
        for tensor, poses in frames:
            with torch.no_grad():
                out, pooled = forward_tensor(model, tensor)
            preds.append(
                decode(out.confidence[0, 0].numpy(), out.offsets[0].numpy(), pooled)
            )
            truths.append(poses)
        report = evaluate(preds, truths, max_distance=1.0).overall
        results[norm] = (losses[-1], report)
        assert report.matched == 8, f"{norm}: matched {report.matched} of 8"
        # pooled voxels step 0.4 m along y, so two voxels span 80 cm
        assert report.mpjpe_cm < 80.0, f"{norm}: MPJPE {report.mpjpe_cm:.1f} cm"
    elapsed = time.monotonic() - start
    assert elapsed < 1800.0
    group_loss, group_row = results["group"]
    batch_loss, batch_row = results["batch"]
    print(
        "criterion 9 PASS: decoded train MPJPE group "
        f"{group_row.mpjpe_cm:.1f} cm / batch {batch_row.mpjpe_cm:.1f} cm "
        f"(bound 80 cm, 8/8 matched); final loss group {group_loss:.4f} vs "
        f"batch {batch_loss:.4f}, {elapsed:.0f} s"
    )


def test_criterion_10_metric_identities():
    rng = np.random.default_rng(10)
    truth = Person(rng.integers(-2048, 2048, size=(JOINT_COUNT, 3)) / 1024.0)
    pred = Person(truth.joints + np.array([1.0, 0.0, 0.0]))
    row = evaluate([PoseSet([pred])], [PoseSet([truth])], max_distance=1.5).overall
    assert row.mpjpe_cm == 0.0
    assert row.abs_mpjpe_cm == 100.0
    assert row.mrpe_cm == 100.0

    worst = 0.0
    for _ in range(20):
        a = Person(rng.normal(size=(JOINT_COUNT, 3)))
        b = Person(rng.normal(size=(JOINT_COUNT, 3)))
        direct = np.sqrt(((a.joints - b.joints) ** 2).sum(axis=1))
        shifted = a.joints - a.joints[0] + b.joints[0]
        direct_aligned = np.sqrt(((shifted - b.joints) ** 2).sum(axis=1))
        worst = max(
            worst,
            float(np.max(np.abs(joint_errors(a, b) - direct))),
            float(np.max(np.abs(aligned_joint_errors(a, b) - direct_aligned))),
            abs(mrpe(a, b) - direct[0]),
            abs(abs_mpjpe(a, b) - direct.mean()),
            abs(mpjpe(a, b) - direct_aligned.mean()),
        )
    assert worst <= 1e-9
    print(
        "criterion 10 PASS: 1 m translation gives MPJPE 0 / Abs-MPJPE 100 cm / "
        f"MRPE 100 cm exactly; 20 random pairs vs direct formulas, worst abs err "
        f"{worst:.2e}"
    )
