"""3D convolutional pose network over the pooled radar tensor.

The Doppler axis of the (doppler, z, y, x) tensor becomes the input
channel dimension after average pooling, so the network sees a
(batch, doppler_bins, z, y, x) volume. The backbone keeps a
high-resolution branch throughout and grows a pyramid of parallel
lower-resolution branches (channels double, spatial dims halve with
ceiling); every module ends by fusing all branches into each other
(strided convolutions downward, 1x1 convolution plus trilinear
upsampling upward, summed and rectified).

Two interchangeable heads read the highest-resolution branch:

* ``center_offset``: one sigmoid confidence map for person centers plus
  45 offset channels (15 joints * xyz, meters relative to the voxel
  center), decoded by ``radarpose.decode.decode``.
* ``per_joint``: 15 sigmoid maps, one per joint, decoded by argmax. Kept
  for ablation against the center-offset formulation.

Normalization is selectable between batch norm and group norm with an
identical layer layout, so parameter counts match exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .decode import CenterTargetMap, encode_joint_targets, encode_targets
from .dsp import RadarTensor4D
from .errors import (
    AnnotationError,
    ConfigurationError,
    DimensionError,
    NumericalError,
)
from .geometry import TensorGeometry
from .pose import JOINT_COUNT, PoseSet

FOCAL_ALPHA = 2.0
FOCAL_BETA = 4.0
FOCAL_EPS = 1e-6
INITIAL_CENTER_PRIOR = 0.1

NORM_KINDS = ("batch", "group")
HEAD_KINDS = ("center_offset", "per_joint")

DEFAULT_POOL_FACTORS = (4, 2, 4, 4)

MICRO_PARAMETER_BUDGET = 100_000
MICRO_FRAME_LIMIT = 64
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class NetworkConfig:
    in_channels: int = 16
    base_channels: int = 32
    stages: int = 3
    modules_per_stage: int = 1
    blocks_per_module: int = 2
    norm_kind: str = "batch"
    group_count: int = 8
    head_kind: str = "center_offset"
    input_downsample: tuple[int, int, int, int] = DEFAULT_POOL_FACTORS

    def __post_init__(self):
        if self.norm_kind not in NORM_KINDS:
            raise ConfigurationError(f"norm_kind must be one of {NORM_KINDS}")
        if self.head_kind not in HEAD_KINDS:
            raise ConfigurationError(f"head_kind must be one of {HEAD_KINDS}")
        for name in ("in_channels", "base_channels", "stages", "modules_per_stage",
                     "blocks_per_module", "group_count"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        factors = tuple(int(f) for f in self.input_downsample)
        if len(factors) != 4 or any(f < 1 for f in factors):
            raise ConfigurationError("input_downsample needs 4 factors of at least 1")
        object.__setattr__(self, "input_downsample", factors)
        if self.norm_kind == "group":
            for c in self.branch_channels():
                if c % self.group_count:
                    raise ConfigurationError(
                        f"group_count {self.group_count} does not divide branch width {c}"
                    )

    def branch_channels(self) -> list[int]:
        return [self.base_channels * 2**i for i in range(self.stages)]

    def to_meta(self) -> dict:
        meta = asdict(self)
        meta["input_downsample"] = list(self.input_downsample)
        return meta

    @classmethod
    def from_meta(cls, meta: dict) -> "NetworkConfig":
        meta = dict(meta)
        if "input_downsample" in meta:
            meta["input_downsample"] = tuple(meta["input_downsample"])
        return cls(**meta)

    def to_text(self) -> str:
        lines = ["format_version = 1"]
        for key, value in self.to_meta().items():
            if key == "input_downsample":
                value = ",".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NetworkConfig":
        from .config import parse_key_values

        kv = parse_key_values(text)
        kv.pop("format_version", None)
        kwargs: dict = {}
        for key, value in kv.items():
            if key == "input_downsample":
                kwargs[key] = tuple(int(v) for v in value.split(","))
            elif key in ("norm_kind", "head_kind"):
                kwargs[key] = value
            else:
                kwargs[key] = int(value)
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "NetworkConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def micro_config(
    in_channels: int = 16,
    input_downsample: tuple[int, int, int, int] = DEFAULT_POOL_FACTORS,
) -> NetworkConfig:
    """Smallest useful network; group norm so batch size 1 trains cleanly."""
    return NetworkConfig(
        in_channels=in_channels,
        base_channels=8,
        stages=2,
        modules_per_stage=1,
        blocks_per_module=1,
        norm_kind="group",
        input_downsample=input_downsample,
    )


def make_norm(kind: str, channels: int, group_count: int) -> nn.Module:
    if kind == "batch":
        return nn.BatchNorm3d(channels)
    if kind == "group":
        if channels % group_count:
            raise ConfigurationError(
                f"group_count {group_count} does not divide {channels} channels"
            )
        return nn.GroupNorm(group_count, channels)
    raise ConfigurationError(f"norm_kind must be one of {NORM_KINDS}")


class BasicBlock(nn.Module):
    """Two 3x3x3 convolutions with an identity skip."""

    def __init__(self, channels: int, norm_kind: str, group_count: int):
        super().__init__()
        self.conv1 = nn.Conv3d(channels, channels, 3, padding=1, bias=False)
        self.norm1 = make_norm(norm_kind, channels, group_count)
        self.conv2 = nn.Conv3d(channels, channels, 3, padding=1, bias=False)
        self.norm2 = make_norm(norm_kind, channels, group_count)

    def forward(self, x):
        out = F.relu(self.norm1(self.conv1(x)))
        out = self.norm2(self.conv2(out))
        return F.relu(out + x)


def _downsample_chain(
    in_channels: int, steps: int, norm_kind: str, group_count: int
) -> nn.Sequential:
    layers: list[nn.Module] = []
    for k in range(steps):
        c_in = in_channels * 2**k
        c_out = in_channels * 2 ** (k + 1)
        layers.append(nn.Conv3d(c_in, c_out, 3, stride=2, padding=1, bias=False))
        layers.append(make_norm(norm_kind, c_out, group_count))
        if k < steps - 1:
            layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


class FusionModule(nn.Module):
    """Per-branch residual blocks followed by all-to-all branch fusion."""

    def __init__(self, channels: list[int], blocks: int, norm_kind: str, group_count: int):
        super().__init__()
        self.branches = nn.ModuleList(
            nn.Sequential(*[BasicBlock(c, norm_kind, group_count) for _ in range(blocks)])
            for c in channels
        )
        n = len(channels)
        rows = []
        for j in range(n):
            row: list[nn.Module] = []
            for i in range(n):
                if i == j:
                    row.append(nn.Identity())
                elif i < j:
                    row.append(_downsample_chain(channels[i], j - i, norm_kind, group_count))
                else:
                    row.append(
                        nn.Sequential(
                            nn.Conv3d(channels[i], channels[j], 1, bias=False),
                            make_norm(norm_kind, channels[j], group_count),
                        )
                    )
            rows.append(nn.ModuleList(row))
        self.fuse = nn.ModuleList(rows)

    def forward(self, xs: list[torch.Tensor]) -> list[torch.Tensor]:
        xs = [branch(x) for branch, x in zip(self.branches, xs)]
        if len(xs) == 1:
            return xs
        outs = []
        for j in range(len(xs)):
            acc = xs[j]
            for i in range(len(xs)):
                if i == j:
                    continue
                y = self.fuse[j][i](xs[i])
                if i > j:
                    y = F.interpolate(
                        y, size=xs[j].shape[2:], mode="trilinear", align_corners=False
                    )
                acc = acc + y
            outs.append(F.relu(acc))
        return outs


@dataclass
class HeadOutput:
    """Raw head tensors; ``confidence`` applies the sigmoid."""

    center_logits: torch.Tensor | None = None
    offsets: torch.Tensor | None = None
    joint_logits: torch.Tensor | None = None

    @property
    def confidence(self) -> torch.Tensor:
        return torch.sigmoid(self.center_logits)

    @property
    def joint_confidence(self) -> torch.Tensor:
        return torch.sigmoid(self.joint_logits)


class PoseNet(nn.Module):
    def __init__(self, config: NetworkConfig, seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.config = config
        channels = config.branch_channels()
        c0 = channels[0]

        self.stem = nn.Sequential(
            nn.Conv3d(config.in_channels, c0, 3, padding=1, bias=False),
            make_norm(config.norm_kind, c0, config.group_count),
            nn.ReLU(inplace=True),
            nn.Conv3d(c0, c0, 3, padding=1, bias=False),
            make_norm(config.norm_kind, c0, config.group_count),
            nn.ReLU(inplace=True),
        )
        self.transitions = nn.ModuleList(
            nn.Sequential(
                nn.Conv3d(channels[s - 1], channels[s], 3, stride=2, padding=1, bias=False),
                make_norm(config.norm_kind, channels[s], config.group_count),
                nn.ReLU(inplace=True),
            )
            for s in range(1, config.stages)
        )
        self.stages = nn.ModuleList(
            nn.ModuleList(
                FusionModule(
                    channels[: s + 1],
                    config.blocks_per_module,
                    config.norm_kind,
                    config.group_count,
                )
                for _ in range(config.modules_per_stage)
            )
            for s in range(config.stages)
        )

        prior_bias = math.log(INITIAL_CENTER_PRIOR / (1.0 - INITIAL_CENTER_PRIOR))
        if config.head_kind == "center_offset":
            self.center_head = nn.Sequential(
                nn.Conv3d(c0, c0, 3, padding=1), nn.ReLU(inplace=True), nn.Conv3d(c0, 1, 1)
            )
            self.offset_head = nn.Sequential(
                nn.Conv3d(c0, c0, 3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv3d(c0, 3 * JOINT_COUNT, 1),
            )
            nn.init.constant_(self.center_head[-1].bias, prior_bias)
        else:
            self.joint_head = nn.Sequential(
                nn.Conv3d(c0, c0, 3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv3d(c0, JOINT_COUNT, 1),
            )
            nn.init.constant_(self.joint_head[-1].bias, prior_bias)

    def forward(self, x: torch.Tensor) -> HeadOutput:
        if x.ndim != 5 or x.shape[1] != self.config.in_channels:
            raise DimensionError(
                f"expected input (batch, {self.config.in_channels}, z, y, x), got {tuple(x.shape)}"
            )
        xs = [self.stem(x)]
        for s in range(self.config.stages):
            if s > 0:
                xs.append(self.transitions[s - 1](xs[-1]))
            for module in self.stages[s]:
                xs = module(xs)
        top = xs[0]
        if self.config.head_kind == "center_offset":
            return HeadOutput(
                center_logits=self.center_head(top), offsets=self.offset_head(top)
            )
        return HeadOutput(joint_logits=self.joint_head(top))


def count_parameters(model: nn.Module, trainable_only: bool = True) -> int:
    return sum(
        p.numel() for p in model.parameters() if p.requires_grad or not trainable_only
    )


# -- tensor pooling ---------------------------------------------------------


def pool_tensor(
    tensor: RadarTensor4D, factors: tuple[int, int, int, int] = DEFAULT_POOL_FACTORS
) -> tuple[np.ndarray, TensorGeometry]:
    """Average-pool the 4D tensor; returns (pooled array, pooled geometry)."""
    pooled_geometry = tensor.geometry.pooled(factors)
    fd, fz, fy, fx = factors
    d, z, y, x = tensor.data.shape
    pooled = (
        tensor.data.astype(np.float32)
        .reshape(d // fd, fd, z // fz, fz, y // fy, fy, x // fx, fx)
        .mean(axis=(1, 3, 5, 7))
    )
    return pooled, pooled_geometry


def tensor_to_input(
    tensor: RadarTensor4D, factors: tuple[int, int, int, int] = DEFAULT_POOL_FACTORS
) -> tuple[torch.Tensor, TensorGeometry]:
    """Pooled network input of shape (1, doppler_bins, z, y, x)."""
    pooled, geometry = pool_tensor(tensor, factors)
    return torch.from_numpy(pooled)[None], geometry


def forward_tensor(model: PoseNet, tensor: RadarTensor4D) -> tuple[HeadOutput, TensorGeometry]:
    """Pool per the model's configured factors and run the network.

    Returns the head output and the pooled geometry it is defined on.
    """
    x, geometry = tensor_to_input(tensor, model.config.input_downsample)
    if x.shape[1] != model.config.in_channels:
        raise DimensionError(
            f"pooled tensor has {x.shape[1]} Doppler channels, "
            f"network expects {model.config.in_channels}"
        )
    return model(x), geometry


# -- losses -----------------------------------------------------------------


def focal_loss(
    confidence: torch.Tensor,
    target: torch.Tensor,
    alpha: float = FOCAL_ALPHA,
    beta: float = FOCAL_BETA,
    eps: float = FOCAL_EPS,
) -> torch.Tensor:
    """Penalty-reduced pixel-wise focal loss on sigmoid confidences.

    Cells where the target is exactly 1 are positives; everything else is
    a negative whose penalty is damped by (1 - target)^beta. Normalized
    by the positive count (at least 1).
    """
    if confidence.shape != target.shape:
        raise DimensionError(
            f"confidence {tuple(confidence.shape)} vs target {tuple(target.shape)}"
        )
    p = confidence.clamp(eps, 1.0 - eps)
    pos = target >= 1.0
    pos_count = pos.sum().clamp(min=1).to(p.dtype)
    pos_term = ((1.0 - p) ** alpha * torch.log(p))[pos].sum()
    neg_term = (((1.0 - target) ** beta) * p**alpha * torch.log(1.0 - p))[~pos].sum()
    return -(pos_term + neg_term) / pos_count


def offset_loss(pred_offsets: torch.Tensor, targets: list[CenterTargetMap]) -> torch.Tensor:
    """Mean over people of the mean per-joint L1 offset error, meters.

    Offsets are only supervised at each person's center voxel.
    """
    if pred_offsets.shape[0] != len(targets):
        raise DimensionError(
            f"batch size {pred_offsets.shape[0]} vs {len(targets)} target maps"
        )
    per_person = []
    for b, t in enumerate(targets):
        foreground = {tuple(int(i) for i in v) for v in np.argwhere(t.confidence >= 1.0)}
        recorded = {tuple(int(i) for i in c) for c in t.centers}
        if foreground != recorded:
            raise AnnotationError(
                f"target {b}: foreground voxels {sorted(foreground ^ recorded)} "
                "have no matching person center"
            )
        for center, off in zip(t.centers, t.offsets):
            pred = pred_offsets[b, :, center[0], center[1], center[2]].view(JOINT_COUNT, 3)
            truth = torch.as_tensor(off, dtype=pred_offsets.dtype, device=pred_offsets.device)
            per_person.append((pred - truth).abs().sum(dim=1).mean())
    if not per_person:
        return pred_offsets.sum() * 0.0
    return torch.stack(per_person).mean()


def total_loss(
    output: HeadOutput,
    targets: list[CenterTargetMap],
    class_weight: float = 1.0,
    reg_weight: float = 1.0,
) -> dict[str, torch.Tensor]:
    conf_target = torch.stack(
        [
            torch.as_tensor(
                t.confidence, dtype=output.center_logits.dtype,
                device=output.center_logits.device,
            )
            for t in targets
        ]
    )[:, None]
    class_term = focal_loss(output.confidence, conf_target)
    reg_term = offset_loss(output.offsets, targets)
    return {
        "class": class_term,
        "reg": reg_term,
        "total": class_weight * class_term + reg_weight * reg_term,
    }


def per_joint_loss(output: HeadOutput, joint_targets: torch.Tensor) -> torch.Tensor:
    """Focal loss over the 15 per-joint maps of the alternate head."""
    return focal_loss(output.joint_confidence, joint_targets)


# -- micro training ---------------------------------------------------------


def _check_gradients(model: nn.Module) -> None:
    for name, p in model.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise NumericalError(f"non-finite gradient in parameter {name!r}")


def train_micro(
    frames: list[tuple[RadarTensor4D, PoseSet]],
    config: NetworkConfig,
    epochs: int = 300,
    lr: float = 3e-3,
    momentum: float = 0.0,
    sigma: float = 2.0,
    seed: int = 0,
    class_weight: float = 1.0,
    reg_weight: float = 1.0,
) -> tuple[PoseNet, list[float]]:
    """Overfit a small network on a handful of labeled frames.

    Full-batch gradient descent with a fixed learning rate; every epoch
    runs all frames at once. Intended for pipeline validation, so the
    frame count and the parameter budget are deliberately capped. A loss
    above 1e6 aborts as divergence and any non-finite gradient aborts
    naming the parameter. Returns the trained network and the per-epoch
    loss trace.
    """
    if not frames:
        raise ConfigurationError("train_micro needs at least one frame")
    if len(frames) > MICRO_FRAME_LIMIT:
        raise ConfigurationError(
            f"train_micro caps at {MICRO_FRAME_LIMIT} frames, got {len(frames)}"
        )

    inputs, target_maps, pooled_geometry = [], [], None
    for tensor, poses in frames:
        x, geometry = tensor_to_input(tensor, config.input_downsample)
        if x.shape[1] != config.in_channels:
            raise DimensionError(
                f"pooled tensor has {x.shape[1]} Doppler channels, "
                f"network expects {config.in_channels}"
            )
        if pooled_geometry is None:
            pooled_geometry = geometry
        inputs.append(x)
        target_maps.append(encode_targets(poses, geometry, sigma))
    batch = torch.cat(inputs, dim=0)

    model = PoseNet(config, seed)
    n_params = count_parameters(model)
    if n_params > MICRO_PARAMETER_BUDGET:
        raise ConfigurationError(
            f"{n_params} parameters exceed the micro budget of {MICRO_PARAMETER_BUDGET}"
        )

    joint_targets = None
    if config.head_kind == "per_joint":
        joint_targets = torch.stack(
            [
                torch.as_tensor(
                    encode_joint_targets(poses, pooled_geometry, sigma), dtype=torch.float32
                )
                for _, poses in frames
            ]
        )

    optimizer = torch.optim.SGD(model.parameters(), lr=lr, momentum=momentum)
    model.train()
    losses: list[float] = []
    for epoch in range(epochs):
        optimizer.zero_grad()
        output = model(batch)
        if config.head_kind == "center_offset":
            loss = total_loss(output, target_maps, class_weight, reg_weight)["total"]
        else:
            loss = per_joint_loss(output, joint_targets)
        value = float(loss.detach())
        if not math.isfinite(value) or value > DIVERGENCE_LIMIT:
            raise NumericalError(
                f"training diverged at epoch {epoch}: loss {value:.3g} "
                f"(limit {DIVERGENCE_LIMIT:.0e}); lower the learning rate"
            )
        loss.backward()
        _check_gradients(model)
        optimizer.step()
        losses.append(value)
    return model, losses


# -- parameter files --------------------------------------------------------


def state_to_arrays(model: nn.Module) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def save_network(path, model: PoseNet, extra_meta: dict | None = None) -> None:
    from .io import save_params

    meta = dict(extra_meta or {})
    meta["network"] = model.config.to_meta()
    save_params(path, state_to_arrays(model), meta)


def load_network(path) -> tuple[PoseNet, dict]:
    """Rebuild a saved network; returns (model, file metadata)."""
    from .io import load_params

    meta, arrays = load_params(path)
    model = PoseNet(NetworkConfig.from_meta(meta["network"]))
    state = {k: torch.from_numpy(np.array(v)) for k, v in arrays.items()}
    model.load_state_dict(state, strict=True)
    return model, meta
