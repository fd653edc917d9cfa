"""Binary container files and dataset layout.

One container format serves every array payload (ADC cubes, 4D tensors,
point clouds, network parameters):

    8 bytes   magic "RPOSEBIN"
    u32       container format version
    u64       length of the metadata blob
    ...       metadata: JSON object with sorted keys, UTF-8; always has "kind"
    u32       array count
    per array (sorted by name):
        u16 name length, name bytes
        u16 dtype length, dtype string (numpy dtype.str, endian-explicit)
        u8  ndim, then ndim * u64 dims
        raw C-order data bytes

All integers little-endian. Sorting the metadata keys and arrays makes
the encoding canonical: equal payloads produce identical bytes.

A dataset is a directory:

    radar.cfg            RadarConfig text
    manifest.txt         frame ids and action labels
    frames/NNNNNN.adc    raw ADC container per frame
    frames/NNNNNN.pose   ground-truth poses (text)
    frames/NNNNNN.tensor processed 4D tensor container (after `process`)
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .cfar import RadarPointCloud
from .config import RadarConfig
from .dsp import RadarTensor4D
from .errors import ValidationError
from .geometry import TensorGeometry
from .simulate import AdcCube

MAGIC = b"RPOSEBIN"
CONTAINER_VERSION = 1

MANIFEST_FORMAT_VERSION = 1


def save_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    meta = dict(meta)
    meta["kind"] = kind
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", CONTAINER_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name])
            name_b = name.encode()
            dtype_b = arr.dtype.str.encode()
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<H", len(dtype_b)))
            fh.write(dtype_b)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
            fh.write(arr.tobytes())


def load_container(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValidationError(f"{path}: not a radar container file")
        version, meta_len = struct.unpack("<IQ", fh.read(12))
        if version != CONTAINER_VERSION:
            raise ValidationError(f"{path}: unsupported container version {version}")
        meta = json.loads(fh.read(meta_len).decode())
        kind = meta.pop("kind", None)
        if kind is None:
            raise ValidationError(f"{path}: container metadata lacks a kind")
        (count,) = struct.unpack("<I", fh.read(4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            (dtype_len,) = struct.unpack("<H", fh.read(2))
            dtype = np.dtype(fh.read(dtype_len).decode())
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            data = fh.read(nbytes)
            if len(data) != nbytes:
                raise ValidationError(f"{path}: truncated array {name!r}")
            arrays[name] = np.frombuffer(data, dtype=dtype).reshape(shape)
    return kind, meta, arrays


def expect_kind(path, kind: str, expected: str) -> None:
    if kind != expected:
        raise ValidationError(f"{path}: expected a {expected!r} container, found {kind!r}")


# -- typed payloads ---------------------------------------------------------


def save_adc(path, adc: AdcCube) -> None:
    save_container(
        path,
        "adc",
        {"radar_config": adc.config.to_text(), "frame_index": adc.frame_index},
        {"data": adc.data.astype(np.complex64)},
    )


def load_adc(path) -> AdcCube:
    kind, meta, arrays = load_container(path)
    expect_kind(path, kind, "adc")
    config = RadarConfig.from_text(meta["radar_config"])
    return AdcCube(
        arrays["data"].astype(np.complex128), config, int(meta.get("frame_index", 0))
    )


def save_tensor(path, tensor: RadarTensor4D) -> None:
    save_container(
        path,
        "tensor",
        {"geometry": asdict(tensor.geometry)},
        {"data": tensor.data.astype(np.float32)},
    )


def load_tensor(path) -> RadarTensor4D:
    kind, meta, arrays = load_container(path)
    expect_kind(path, kind, "tensor")
    return RadarTensor4D(arrays["data"], TensorGeometry(**meta["geometry"]))


def save_points(path, points: RadarPointCloud) -> None:
    save_container(
        path,
        "points",
        {"frame_index": points.frame_index},
        {
            "positions": points.positions,
            "velocities": points.velocities,
            "intensities": points.intensities,
            "bins": points.bins,
        },
    )


def load_points(path) -> RadarPointCloud:
    kind, meta, arrays = load_container(path)
    expect_kind(path, kind, "points")
    return RadarPointCloud(
        arrays["positions"],
        arrays["velocities"],
        arrays["intensities"],
        arrays["bins"],
        int(meta.get("frame_index", 0)),
    )


def save_params(path, state: dict[str, np.ndarray], meta: dict) -> None:
    save_container(path, "params", meta, state)


def load_params(path) -> tuple[dict, dict[str, np.ndarray]]:
    kind, meta, arrays = load_container(path)
    expect_kind(path, kind, "params")
    return meta, arrays


# -- dataset layout ---------------------------------------------------------


def frame_id(index: int) -> str:
    return f"{index:06d}"


def dataset_paths(root) -> dict[str, Path]:
    root = Path(root)
    return {
        "root": root,
        "config": root / "radar.cfg",
        "manifest": root / "manifest.txt",
        "frames": root / "frames",
    }


def write_manifest(
    path,
    entries: list[tuple[str, str]],
    config_hash: str = "",
    seed: int | None = None,
) -> None:
    """Sequence manifest: config hash, generator seed, frame id per action."""
    lines = [f"format_version = {MANIFEST_FORMAT_VERSION}"]
    if config_hash:
        lines.append(f"config_hash = {config_hash}")
    if seed is not None:
        lines.append(f"seed = {seed}")
    lines.append(f"frames = {len(entries)}")
    for fid, action in entries:
        lines.append(f"frame {fid} = {action}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> list[tuple[str, str]]:
    entries, _ = read_manifest_meta(path)
    return entries


def read_manifest_meta(path) -> tuple[list[tuple[str, str]], dict[str, str]]:
    """Manifest entries plus the header fields (config_hash, seed, ...)."""
    kv: dict[str, str] = {}
    order: list[str] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"malformed manifest line: {raw!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            kv[key] = value.strip()
            if key.startswith("frame "):
                order.append(key[len("frame "):])
    version = int(kv.get("format_version", "0"))
    if version != MANIFEST_FORMAT_VERSION:
        raise ValidationError(f"unsupported manifest format_version {version}")
    expected = int(kv.get("frames", "-1"))
    if expected != len(order):
        raise ValidationError(
            f"manifest declares {expected} frames but lists {len(order)}"
        )
    entries = [(fid, kv[f"frame {fid}"]) for fid in order]
    header = {
        k: v
        for k, v in kv.items()
        if not k.startswith("frame ") and k not in ("frames", "format_version")
    }
    return entries, header
