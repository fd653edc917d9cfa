"""Command line front end.

Subcommands cover the whole pipeline: `simulate` writes a synthetic
dataset, `process` turns raw ADC frames into 4D tensors, `cfar` extracts
point clouds, `train-micro` overfits a small network on a few frames,
`infer`/`decode` produce pose predictions, `eval` scores them, and
`oracle` runs the numeric self-checks.

Exit codes: 0 success, 1 bad input or configuration, 2 numerical
self-check failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dsp, io, metrics, oracles, posenet
from .config import RadarConfig, derive_resolutions
from .cfar import ca_cfar_detect, detections_to_points
from .decode import (
    DEFAULT_NMS_RADIUS,
    DEFAULT_SIGMA_VOXELS,
    DEFAULT_THRESHOLD,
    DEFAULT_TOP_K,
    decode_per_joint,
)
from .decode import decode as decode_maps
from .errors import NumericalError, RadarPoseError, ValidationError
from .geometry import default_geometry
from .pose import PoseSet, person_at
from .scene import Scene, skeleton_to_scatterers
from .simulate import synthesize_frame


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; keep 2 reserved for numerical
    # failures and report usage problems as plain input errors instead
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_factors(text: str) -> tuple[int, int, int, int]:
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValidationError("pool factors must be four comma-separated integers")
    return tuple(parts)  # type: ignore[return-value]


# -- simulate ---------------------------------------------------------------


def _place_people(rng, count: int) -> list:
    people = []
    spots: list[tuple[float, float]] = []
    attempts = 0
    while len(people) < count:
        attempts += 1
        if attempts > 2000:
            raise ValidationError(f"could not place {count} people with 1.2 m separation")
        x = rng.uniform(-2.2, 2.2)
        y = rng.uniform(2.2, 6.8)
        if any((x - sx) ** 2 + (y - sy) ** 2 < 1.2**2 for sx, sy in spots):
            continue
        spots.append((x, y))
        people.append(person_at((x, y, 0.0), height=rng.uniform(1.6, 1.9)))
    return people


def _simulate_scene_file(args, config, paths) -> int:
    """Synthesize a frame sequence from one scene file, motion propagated."""
    scene = Scene.load(args.scene)
    frames = args.frames if args.frames is not None else scene.duration_frames
    if frames != scene.duration_frames:
        scene = Scene(scene.scatterers, scene.noise_stddev, frames)
    entries = []
    for f in range(frames):
        fid = io.frame_id(f)
        adc = synthesize_frame(scene, config, f, rng_seed=args.seed)
        io.save_adc(paths["frames"] / f"{fid}.adc", adc)
        entries.append((fid, args.action))
    io.write_manifest(paths["manifest"], entries, config.config_hash, args.seed)
    print(f"wrote {frames} frames from {args.scene} to {paths['root']}")
    return 0


def cmd_simulate(args) -> int:
    config = RadarConfig.load(args.config) if args.config else RadarConfig()
    paths = io.dataset_paths(args.out)
    paths["frames"].mkdir(parents=True, exist_ok=True)
    config.save(paths["config"])

    if args.scene:
        return _simulate_scene_file(args, config, paths)

    actions = [a.strip() for a in args.actions.split(",") if a.strip()]
    if not actions:
        raise ValidationError("need at least one action label")
    frames = args.frames if args.frames is not None else 4

    rng = np.random.default_rng(args.seed)
    entries = []
    for f in range(frames):
        fid = io.frame_id(f)
        action = actions[f % len(actions)]
        people = _place_people(rng, args.people)
        velocities = []
        for _ in people:
            if action == "static":
                velocities.append((0.0, 0.0, 0.0))
            else:
                velocities.append((rng.uniform(-0.3, 0.3), rng.uniform(-0.8, 0.8), 0.0))
        scene = skeleton_to_scatterers(
            PoseSet(people),
            velocities=velocities,
            noise_stddev=args.noise,
            frame_rate=config.frame_rate,
        )
        adc = synthesize_frame(
            scene, config, 0, rng_seed=int(rng.integers(2**62))
        )
        io.save_adc(paths["frames"] / f"{fid}.adc", adc)
        scene.truth[0].save(paths["frames"] / f"{fid}.pose")
        entries.append((fid, action))
    io.write_manifest(paths["manifest"], entries, config.config_hash, args.seed)

    res = derive_resolutions(config)
    print(f"wrote {frames} frames ({args.people} people each) to {paths['root']}")
    print(
        f"range res {res.range_res * 100:.2f} cm, velocity res "
        f"{res.velocity_res * 100:.2f} cm/s, azimuth res {res.azimuth_res_deg:.2f} deg"
    )
    return 0


# -- process ----------------------------------------------------------------


def cmd_process(args) -> int:
    geometry = default_geometry()
    if args.in_path:
        if not args.out:
            raise ValidationError("--out is required with --in")
        adc = io.load_adc(args.in_path)
        tensor = dsp.process_frame(adc, geometry, window=args.window, power=args.power)
        io.save_tensor(args.out, tensor)
        print(f"wrote {args.out}")
        return 0
    if not args.dataset:
        raise ValidationError("give either --dataset or --in/--out")
    paths = io.dataset_paths(args.dataset)
    entries = io.read_manifest(paths["manifest"])
    for fid, _ in entries:
        target = paths["frames"] / f"{fid}.tensor"
        if target.exists() and not args.overwrite:
            print(f"frame {fid}: tensor exists, skipping")
            continue
        adc = io.load_adc(paths["frames"] / f"{fid}.adc")
        tensor = dsp.process_frame(adc, geometry, window=args.window, power=args.power)
        io.save_tensor(target, tensor)
        print(f"frame {fid}: tensor written")
    return 0


# -- cfar -------------------------------------------------------------------


def cmd_cfar(args) -> int:
    def one(adc_path, out_path, text_path):
        adc = io.load_adc(adc_path)
        rd = dsp.range_doppler(adc, window=args.window)
        detections = ca_cfar_detect(rd, args.guard, args.train, args.pfa, args.antenna)
        points = detections_to_points(detections, rd)
        points.frame_index = adc.frame_index
        io.save_points(out_path, points)
        if text_path:
            points.save_text(text_path)
        print(f"{adc_path}: {len(points)} points -> {out_path}")

    if args.in_path:
        if not args.out:
            raise ValidationError("--out is required with --in")
        one(args.in_path, args.out, args.text)
        return 0
    if not args.dataset:
        raise ValidationError("give either --dataset or --in/--out")
    paths = io.dataset_paths(args.dataset)
    for fid, _ in io.read_manifest(paths["manifest"]):
        one(
            paths["frames"] / f"{fid}.adc",
            paths["frames"] / f"{fid}.points",
            paths["frames"] / f"{fid}.points.txt",
        )
    return 0


# -- training and inference -------------------------------------------------


def _load_frame_ids(dataset, limit=None):
    paths = io.dataset_paths(dataset)
    entries = io.read_manifest(paths["manifest"])
    if limit is not None:
        entries = entries[:limit]
    return paths, entries


def cmd_train_micro(args) -> int:
    paths, entries = _load_frame_ids(args.dataset, args.frames)
    if not entries:
        raise ValidationError("dataset has no frames")

    frames = []
    for fid, _ in entries:
        tensor_path = paths["frames"] / f"{fid}.tensor"
        if not tensor_path.exists():
            raise ValidationError(f"{tensor_path} missing; run `process` first")
        tensor = io.load_tensor(tensor_path)
        truth = PoseSet.load(paths["frames"] / f"{fid}.pose")
        frames.append((tensor, truth))

    if args.config:
        net_config = posenet.NetworkConfig.load(args.config)
    else:
        factors = _parse_factors(args.factors)
        doppler = frames[0][0].geometry.doppler_size
        net_config = posenet.NetworkConfig(
            in_channels=doppler // factors[0],
            base_channels=args.base_channels,
            stages=args.stages,
            modules_per_stage=args.modules,
            blocks_per_module=args.blocks,
            norm_kind=args.norm,
            head_kind=args.head,
            input_downsample=factors,
        )

    model, losses = posenet.train_micro(
        frames,
        net_config,
        epochs=args.epochs,
        lr=args.lr,
        momentum=args.momentum,
        sigma=args.sigma,
        seed=args.seed,
    )
    print(f"network parameters: {posenet.count_parameters(model)}")
    for e in range(0, len(losses), max(1, len(losses) // 10)):
        print(f"epoch {e}: loss {losses[e]:.4f}")
    print(f"epoch {len(losses) - 1}: loss {losses[-1]:.4f}")
    posenet.save_network(args.out, model, {"sigma": args.sigma, "final_loss": losses[-1]})
    print(f"saved parameters to {args.out}")
    return 0


def _predict_poses(model, tensor, args) -> PoseSet:
    import torch

    model.eval()
    with torch.no_grad():
        out, pooled_geometry = posenet.forward_tensor(model, tensor)
    if model.config.head_kind == "per_joint":
        person = decode_per_joint(
            out.joint_confidence[0].numpy(), pooled_geometry
        )
        return PoseSet([person])
    return decode_maps(
        out.confidence[0, 0].numpy(),
        out.offsets[0].numpy(),
        pooled_geometry,
        threshold=args.threshold,
        top_k=args.top_k,
        nms_radius=args.nms_radius,
    )


def cmd_infer(args) -> int:
    model, _ = posenet.load_network(args.params)
    paths, entries = _load_frame_ids(args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = 0
    for fid, _ in entries:
        tensor = io.load_tensor(paths["frames"] / f"{fid}.tensor")
        poses = _predict_poses(model, tensor, args)
        poses.save(out_dir / f"{fid}.pose")
        total += len(poses)
    print(f"wrote predictions for {len(entries)} frames ({total} people) to {out_dir}")
    return 0


def cmd_decode(args) -> int:
    model, _ = posenet.load_network(args.params)
    poses = _predict_poses(model, io.load_tensor(args.tensor), args)
    poses.save(args.out)
    print(f"decoded {len(poses)} people -> {args.out}")
    return 0


# -- evaluation -------------------------------------------------------------


def cmd_eval(args) -> int:
    paths, entries = _load_frame_ids(args.dataset)
    pred_dir = Path(args.pred_dir)
    preds, truths, actions = [], [], []
    for fid, action in entries:
        truths.append(PoseSet.load(paths["frames"] / f"{fid}.pose"))
        pred_path = pred_dir / f"{fid}.pose"
        if pred_path.exists():
            preds.append(PoseSet.load(pred_path))
        else:
            print(f"warning: no prediction for frame {fid}", file=sys.stderr)
            preds.append(PoseSet([]))
        actions.append(action)
    report = metrics.evaluate(preds, truths, actions, max_distance=args.max_dist)
    print(metrics.report_text(report))
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(metrics.report_json(report))
        print(f"wrote {args.out_json}")
    return 0


def cmd_oracle(args) -> int:
    results = oracles.run_all(seed=args.seed)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    if failed:
        raise NumericalError(f"{failed} oracle check(s) failed")
    return 0


# -- wiring -----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="radarpose", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--scene", help="scene file; omit to generate random people")
    p.add_argument("--frames", type=int, help="frame count (default 4, or scene duration)")
    p.add_argument("--people", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--actions", default="static,walk", help="cycled across generated frames")
    p.add_argument("--action", default="scene", help="label used with --scene")
    p.add_argument("--config", help="radar config file (default: built-in)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="ADC frames -> 4D tensors")
    p.add_argument("--dataset")
    p.add_argument("--in", dest="in_path", help="single ADC container")
    p.add_argument("--out")
    p.add_argument("--window", default="hann", choices=dsp.WINDOW_KINDS)
    p.add_argument("--power", action="store_true", help="store power instead of magnitude")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("cfar", help="detect points on range-Doppler maps")
    p.add_argument("--dataset")
    p.add_argument("--in", dest="in_path", help="single ADC container")
    p.add_argument("--out")
    p.add_argument("--text", help="also write the text point list here")
    p.add_argument("--pfa", type=float, default=1e-4)
    p.add_argument("--guard", type=int, default=4)
    p.add_argument("--train", type=int, default=16)
    p.add_argument("--antenna", type=int, default=0)
    p.add_argument("--window", default="none", choices=dsp.WINDOW_KINDS)
    p.set_defaults(func=cmd_cfar)

    p = sub.add_parser("train-micro", help="overfit a small network on a few frames")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="network config file; overrides architecture flags")
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA_VOXELS)
    p.add_argument("--factors", default="4,2,4,4", help="doppler,z,y,x pool factors")
    p.add_argument("--base-channels", type=int, default=8)
    p.add_argument("--stages", type=int, default=2)
    p.add_argument("--modules", type=int, default=1)
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--norm", default="group", choices=posenet.NORM_KINDS)
    p.add_argument("--head", default="center_offset", choices=posenet.HEAD_KINDS)
    p.set_defaults(func=cmd_train_micro)

    for name, fn in (("infer", cmd_infer), ("decode", cmd_decode)):
        p = sub.add_parser(
            name,
            help="predict poses for a dataset" if name == "infer"
            else "predict poses for one tensor file",
        )
        p.add_argument("--params", required=True)
        if name == "infer":
            p.add_argument("--dataset", required=True)
            p.add_argument("--out-dir", required=True)
        else:
            p.add_argument("--tensor", required=True)
            p.add_argument("--out", required=True)
        p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
        p.add_argument("--nms-radius", type=float, default=DEFAULT_NMS_RADIUS)
        p.set_defaults(func=fn)

    p = sub.add_parser("eval", help="score predictions against dataset truth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--max-dist", type=float, default=metrics.DEFAULT_MATCH_DISTANCE)
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="run numeric self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical check failed: {exc}", file=sys.stderr)
        return 2
    except RadarPoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
