"""Slow reference implementations used to cross-check the fast paths.

Everything here is written the obvious way (explicit loops, O(N^2)
transforms, scalar arithmetic) so it can serve as an independent oracle
in tests and in the `oracle` self-check command. None of it is used by
the processing pipeline itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .pose import JOINT_COUNT


def naive_dft(x: np.ndarray, axis: int = -1, n: int | None = None) -> np.ndarray:
    """Matrix-multiplication DFT, optionally zero-padded to length n."""
    x = np.asarray(x, dtype=np.complex128)
    x = np.moveaxis(x, axis, -1)
    length = x.shape[-1] if n is None else n
    if n is not None and n > x.shape[-1]:
        pad = np.zeros(x.shape[:-1] + (n - x.shape[-1],), dtype=np.complex128)
        x = np.concatenate([x, pad], axis=-1)
    k = np.arange(length)
    matrix = np.exp(-2j * np.pi * np.outer(k, k) / length)
    out = x @ matrix.T
    return np.moveaxis(out, -1, axis)


def focal_loss_reference(
    confidence: np.ndarray,
    target: np.ndarray,
    alpha: float = 2.0,
    beta: float = 4.0,
    eps: float = 1e-6,
) -> float:
    """Scalar-loop version of the center-map focal loss."""
    p_flat = np.asarray(confidence, dtype=np.float64).ravel()
    y_flat = np.asarray(target, dtype=np.float64).ravel()
    pos_sum = 0.0
    neg_sum = 0.0
    pos_count = 0
    for p, y in zip(p_flat, y_flat):
        p = min(max(p, eps), 1.0 - eps)
        if y >= 1.0:
            pos_count += 1
            pos_sum += (1.0 - p) ** alpha * math.log(p)
        else:
            neg_sum += (1.0 - y) ** beta * p**alpha * math.log(1.0 - p)
    return -(pos_sum + neg_sum) / max(pos_count, 1)


def offset_loss_reference(
    pred_per_person: list[np.ndarray], truth_per_person: list[np.ndarray]
) -> float:
    """Scalar version of the offset regression loss over matched people."""
    if not pred_per_person:
        return 0.0
    person_means = []
    for pred, truth in zip(pred_per_person, truth_per_person):
        total = 0.0
        for j in range(JOINT_COUNT):
            norm1 = 0.0
            for c in range(3):
                norm1 += abs(float(pred[j][c]) - float(truth[j][c]))
            total += norm1
        person_means.append(total / JOINT_COUNT)
    return sum(person_means) / len(person_means)


def gaussian_map_reference(
    centers: list[tuple[int, int, int]], shape: tuple[int, int, int], sigma: float
) -> np.ndarray:
    """Loop-built max-of-Gaussians confidence map in voxel index space."""
    out = np.zeros(shape)
    for iz in range(shape[0]):
        for iy in range(shape[1]):
            for ix in range(shape[2]):
                best = 0.0
                for cz, cy, cx in centers:
                    d2 = (iz - cz) ** 2 + (iy - cy) ** 2 + (ix - cx) ** 2
                    best = max(best, math.exp(-d2 / (2.0 * sigma * sigma)))
                out[iz, iy, ix] = best
    return out


def trilinear_reference(volume: np.ndarray, coord: tuple[float, float, float]) -> float:
    """Hand-rolled trilinear interpolation; outside the volume counts as 0."""
    value = 0.0
    base = [math.floor(c) for c in coord]
    frac = [c - b for c, b in zip(coord, base)]
    for bz in (0, 1):
        for by in (0, 1):
            for bx in (0, 1):
                iz, iy, ix = base[0] + bz, base[1] + by, base[2] + bx
                w = (
                    (frac[0] if bz else 1.0 - frac[0])
                    * (frac[1] if by else 1.0 - frac[1])
                    * (frac[2] if bx else 1.0 - frac[2])
                )
                inside = (
                    0 <= iz < volume.shape[0]
                    and 0 <= iy < volume.shape[1]
                    and 0 <= ix < volume.shape[2]
                )
                if inside:
                    value += w * float(volume[iz, iy, ix])
    return value


def exhaustive_match_reference(
    pred_pelvises: np.ndarray, truth_pelvises: np.ndarray, max_distance: float
) -> list[tuple[int, int]]:
    """Minimum-total-distance matching by brute force over all assignments.

    Only feasible for a handful of people; used to sanity-check the
    greedy matcher on benign configurations.
    """
    from itertools import permutations

    n_p, n_t = len(pred_pelvises), len(truth_pelvises)
    if n_p == 0 or n_t == 0:
        return []
    dist = np.linalg.norm(
        pred_pelvises[:, None, :] - truth_pelvises[None, :, :], axis=2
    )
    best_cost = math.inf
    best: list[tuple[int, int]] = []
    indices = list(range(n_p))
    for size in range(min(n_p, n_t), -1, -1):
        from itertools import combinations

        for chosen in combinations(indices, size):
            for perm in permutations(range(n_t), size):
                if any(dist[i, j] > max_distance for i, j in zip(chosen, perm)):
                    continue
                cost = sum(dist[i, j] for i, j in zip(chosen, perm))
                if size > len(best) or (size == len(best) and cost < best_cost):
                    best_cost = cost
                    best = sorted(zip(chosen, perm))
        if best:
            break
    return best


def condition_for_gradient_check(
    model: torch.nn.Module, norm_scale: float = 0.2, bias_shift: float = 1.0
) -> torch.nn.Module:
    """Move every rectifier input away from zero before a finite-difference run.

    Central differences measure the true derivative only where the loss is
    smooth across the whole step, and a rectifier whose input sits within
    the step of zero breaks that. Normalized activations are unit scale,
    so an affine of norm_scale * x + bias_shift keeps rectifier inputs
    near bias_shift with a comfortable margin, and biased head
    convolutions get the same shift (their weights are shrunk to match).
    Gradients still flow through every layer, so autograd is exercised
    end to end; only the evaluation point changes.
    """
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, (torch.nn.GroupNorm, torch.nn.BatchNorm3d)):
                m.weight.fill_(norm_scale)
                m.bias.fill_(bias_shift)
            elif isinstance(m, torch.nn.Conv3d) and m.bias is not None:
                m.weight.mul_(norm_scale)
                m.bias.fill_(bias_shift)
    return model


def finite_difference_gradients(
    loss_fn, model: torch.nn.Module, samples: int = 100, h: float = 1e-3, seed: int = 0
) -> float:
    """Max relative error between autograd and central differences.

    ``loss_fn`` takes no arguments and evaluates the scalar loss with the
    model's current parameters. The model should be in float64 and eval
    mode so the loss is a smooth deterministic function of the weights.
    """
    params = [p for p in model.parameters() if p.requires_grad]
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    # parameters that do not influence the loss keep grad None; finite
    # differences should then agree that the derivative is zero
    grads = [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        for p in params
    ]

    sizes = [p.numel() for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(samples, total), replace=False)

    worst = 0.0
    for flat_index in picks:
        pi = 0
        while flat_index >= sizes[pi]:
            flat_index -= sizes[pi]
            pi += 1
        param = params[pi]
        flat = param.data.view(-1)
        original = float(flat[flat_index])
        with torch.no_grad():
            flat[flat_index] = original + h
            f_plus = float(loss_fn())
            flat[flat_index] = original - h
            f_minus = float(loss_fn())
            flat[flat_index] = original
        fd = (f_plus - f_minus) / (2.0 * h)
        ag = float(grads[pi].view(-1)[flat_index])
        denom = max(abs(fd) + abs(ag), 1e-8)
        worst = max(worst, abs(fd - ag) / denom)
    return worst


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str


def run_all(seed: int = 0) -> list[OracleResult]:
    """Self-checks pairing each fast path with its slow reference."""
    from . import posenet
    from .decode import CenterTargetMap, encode_targets
    from .geometry import TensorGeometry
    from .pose import Person, PoseSet, standing_template

    rng = np.random.default_rng(seed)
    results = []

    x = rng.standard_normal((6, 16)) + 1j * rng.standard_normal((6, 16))
    fast = np.fft.fft(x, axis=-1)
    slow = naive_dft(x, axis=-1)
    err = np.max(np.abs(fast - slow)) / np.max(np.abs(slow))
    results.append(OracleResult("fft_vs_naive_dft", err < 1e-9, f"rel err {err:.2e}"))

    padded_fast = np.fft.fft(x, n=32, axis=-1)
    padded_slow = naive_dft(x, axis=-1, n=32)
    err = np.max(np.abs(padded_fast - padded_slow)) / np.max(np.abs(padded_slow))
    results.append(
        OracleResult("padded_fft_vs_naive_dft", err < 1e-9, f"rel err {err:.2e}")
    )

    conf = rng.uniform(0.01, 0.99, size=(4, 5, 6))
    target = rng.uniform(0.0, 0.999, size=(4, 5, 6))
    target.ravel()[rng.choice(conf.size, 3, replace=False)] = 1.0
    fast_val = float(
        posenet.focal_loss(torch.from_numpy(conf), torch.from_numpy(target))
    )
    slow_val = focal_loss_reference(conf, target)
    err = abs(fast_val - slow_val) / max(abs(slow_val), 1e-12)
    results.append(OracleResult("focal_loss_vs_scalar", err < 1e-9, f"rel err {err:.2e}"))

    geometry = TensorGeometry(
        doppler_size=4, x_size=16, y_size=8, z_size=4,
    )
    person = Person(standing_template(1.7) * 0.2 + np.array([0.0, 4.0, 0.0]))
    targets = encode_targets(PoseSet([person]), geometry)
    pred_off = rng.standard_normal((1, 3 * JOINT_COUNT) + geometry.spatial_shape)
    fast_val = float(posenet.offset_loss(torch.from_numpy(pred_off), [targets]))
    c = targets.centers[0]
    slow_val = offset_loss_reference(
        [pred_off[0, :, c[0], c[1], c[2]].reshape(JOINT_COUNT, 3)], [targets.offsets[0]]
    )
    err = abs(fast_val - slow_val) / max(abs(slow_val), 1e-12)
    results.append(
        OracleResult("offset_loss_vs_scalar", err < 1e-9, f"rel err {err:.2e}")
    )

    model = posenet.PoseNet(
        posenet.NetworkConfig(
            in_channels=2, base_channels=8, stages=2, modules_per_stage=1,
            blocks_per_module=1, norm_kind="group",
        ),
        seed=seed,
    ).double()
    model.eval()
    condition_for_gradient_check(model)
    net_input = torch.from_numpy(
        rng.standard_normal((1, 2) + geometry.spatial_shape)
    )

    def loss_fn():
        return posenet.total_loss(model(net_input), [targets])["total"]

    worst = finite_difference_gradients(loss_fn, model, samples=60, h=1e-3, seed=seed)
    results.append(
        OracleResult("autograd_vs_finite_differences", worst < 1e-4, f"max rel err {worst:.2e}")
    )
    return results
