"""Command-line pipeline: embed -> render -> correspondences -> eval -> grasp.

Exit codes: 0 success, 2 argument error, 3 data error. Errors are emitted as
one JSON object on stderr. A TOML config (``--config``) supplies defaults;
explicit flags win. All randomness flows from ``--seed``. The
``DESCFORGE_THREADS`` environment variable caps internal parallelism (the
reference implementation runs single-threaded, so any positive cap is
honored as-is).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib

from . import __version__
from .camera import CameraIntrinsics, RigidTransform, look_at
from .correspond import find_correspondences
from .descriptors import background_descriptor, embed, load_field, normalize_descriptors, save_field
from .errors import DescforgeError
from .grasp import axis_grasp, top_down_grasp
from .losses import contrastive_loss
from .mesh import load_mesh, save_mesh, shapes, validate_mesh
from .mesh.laplacian import build_laplacian
from .render import rasterize
from .scene import (Trajectory, descriptor_preview, generate_scene,
                    load_dataset)
from .tracking import export_statistics, select_references, track


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        json.dump({"error": "ArgumentError", "message": message}, sys.stderr)
        sys.stderr.write("\n")
        raise SystemExit(2)


def thread_cap() -> int:
    raw = os.environ.get("DESCFORGE_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"DESCFORGE_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        raise ValueError("DESCFORGE_THREADS must be >= 1")
    return cap


def _parse_triple(text: str, n: int, name: str):
    parts = [float(p) for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != n:
        raise ValueError(f"{name} needs {n} comma-separated numbers")
    return parts


def _parse_pixel(text: str):
    u, v = _parse_triple(text, 2, "pixel")
    return int(u), int(v)


def _pose_from_arg(text):
    if text is None:
        return RigidTransform.identity()
    vals = _parse_triple(text, 16, "pose")
    return RigidTransform.from_matrix(np.asarray(vals).reshape(4, 4))


def _intrinsics_from_args(args) -> CameraIntrinsics:
    return CameraIntrinsics(fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy,
                            width=args.width, height=args.height)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- subcommands ---------------------------------------------------------------

def cmd_gen_mesh(args) -> int:
    if args.shape == "torus":
        mesh = shapes.torus(args.major, args.minor, args.n, args.m)
    elif args.shape == "cylinder":
        mesh = shapes.cylinder(args.radius, args.height, args.n, args.m)
    elif args.shape == "box":
        mesh = shapes.box(args.sx, args.sy, args.sz)
    else:
        mesh = shapes.uv_sphere(args.radius, args.n, args.m)
    save_mesh(mesh, args.out)
    report = validate_mesh(mesh)
    print(json.dumps({"out": str(args.out), **report.to_dict()}, sort_keys=True))
    return 0


def _preview_camera(mesh, pose: RigidTransform):
    center = pose.apply(mesh.centroid())
    extent = np.linalg.norm(mesh.vertices - mesh.centroid(), axis=1).max()
    eye = center + 2.8 * extent * np.array([0.55, -0.55, 0.63])
    return look_at(eye, center)


def cmd_embed(args) -> int:
    mesh = load_mesh(args.mesh)
    if mesh.n_vertices < 4:
        raise ValueError(f"embedding needs at least 4 vertices, got {mesh.n_vertices}")
    pair = build_laplacian(mesh, weighting=args.weighting, mass=args.mass)
    result = embed(pair, args.dim, symmetry=args.symmetry, epsilon=args.epsilon,
                   method=args.solver)
    field = normalize_descriptors(result.field)
    background = background_descriptor(field, grid_resolution=args.grid_resolution)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_field(field, out / "field.dfld")
    report = {
        "mesh": Path(args.mesh).name,
        "dim": field.dim,
        "weighting": args.weighting,
        "mass": args.mass,
        "symmetry": args.symmetry,
        "epsilon": args.epsilon,
        "clamped_fallback": pair.clamped_fallback,
        "eigenvalues": [float(v) for v in result.spectrum.eigenvalues],
        "groups": result.groups.to_report() if result.groups else None,
        "sources": field.sources,
        "background": [float(v) for v in background],
    }
    _write_json(out / "spectrum.json", report)

    from PIL import Image
    intr = CameraIntrinsics(420.0, 420.0, 240.0, 180.0, 480, 360)
    cam = _preview_camera(mesh, RigidTransform.identity())
    img = rasterize(mesh, field, intr, cam.inverse())
    Image.fromarray(descriptor_preview(img.descriptors), mode="RGB").save(out / "preview.png")
    print(json.dumps({"out": str(out), "dim": field.dim,
                      "eigenvalues": report["eigenvalues"][:args.dim + 1]}, sort_keys=True))
    return 0


def cmd_render(args) -> int:
    mesh = load_mesh(args.mesh)
    field = load_field(args.field)
    intr = _intrinsics_from_args(args)
    trajectory = Trajectory(
        radius_min=args.radius_min, radius_max=args.radius_max,
        elevation_min=np.deg2rad(args.elev_min), elevation_max=np.deg2rad(args.elev_max),
    )
    generate_scene(
        mesh, field, intr, _pose_from_arg(args.object_pose), trajectory,
        count=args.frames, seed=args.seed,
        view_dependent=args.view_dependent.replace("-", "_"), band_px=args.band,
        shading=args.shading.replace("-", "_"),
        randomize_background=args.randomize_background,
        out_dir=args.out,
    )
    print(json.dumps({"out": str(args.out), "frames": args.frames}, sort_keys=True))
    return 0


def cmd_correspondences(args) -> int:
    ds = load_dataset(args.dataset)
    frame_a = ds.frame(args.frame_a)
    frame_b = ds.frame(args.frame_b)
    pairs = find_correspondences(frame_a, frame_b, args.n_match, args.n_nonmatch,
                                 seed=args.seed,
                                 background_fraction=args.background_fraction)
    pairs.frame_a, pairs.frame_b = args.frame_a, args.frame_b
    pairs.save_jsonl(args.out)
    loss = contrastive_loss(frame_a.descriptors, frame_b.descriptors, pairs,
                            margin_object=args.margin_object,
                            margin_background=args.margin_background)
    print(json.dumps({"out": str(args.out), "n_matches": pairs.n_matches,
                      "n_non_matches": pairs.n_non_matches,
                      "loss": loss.to_dict()}, sort_keys=True))
    return 0


def _auto_reference_pixels(image, count: int, seed: int):
    ok = np.nonzero((image.mask & (image.depth > 0)).reshape(-1))[0]
    if ok.size == 0:
        raise DescforgeError("reference frame has no valid object pixel")
    rng = np.random.default_rng(seed)
    take = min(count, ok.size)
    flat = rng.choice(ok, size=take, replace=False)
    v, u = np.divmod(flat, image.mask.shape[1])
    return np.stack([u, v], axis=1)


def cmd_eval(args) -> int:
    ds = load_dataset(args.dataset)
    ref_image = ds.frame(args.ref_frame)
    if args.ref_pixels:
        pixels = [_parse_pixel(p) for p in args.ref_pixels.split(";") if p.strip()]
        if not pixels:
            raise ValueError("no reference pixels given")
    else:
        if args.num_refs < 1:
            raise ValueError("need at least one reference")
        pixels = _auto_reference_pixels(ref_image, args.num_refs, args.seed)
    refs = select_references(ref_image, pixels)
    results = []
    for j in range(len(ds)):
        results.append(track(refs, ds.frame(j), frame_id=j,
                             visibility=args.visibility,
                             visibility_threshold=args.threshold))
    summary = export_statistics(results, args.out)
    print(json.dumps({"out": str(args.out), "pooled": summary["pooled"],
                      "pooled_px": summary["pooled_px"]}, sort_keys=True))
    return 0


def cmd_grasp(args) -> int:
    ds = load_dataset(args.dataset)
    ref_image = ds.frame(args.ref_frame)
    target = ds.frame(args.target_frame)
    if args.top_down:
        refs = select_references(ref_image, [_parse_pixel(args.pixel_1)])
        point = top_down_grasp(refs.descriptors[0], target)
        payload = {"mode": "top_down", "point": [float(v) for v in point]}
    else:
        pix = [_parse_pixel(args.pixel_1), _parse_pixel(args.pixel_2)]
        refs = select_references(ref_image, pix)
        tracked = track(refs, target, frame_id=args.target_frame)
        if not np.isfinite(tracked.point).all():
            raise DescforgeError("tracked points lack valid depth in the target frame")
        pose = axis_grasp(tracked.point[0], tracked.point[1],
                          np.asarray(_parse_triple(args.axis, 3, "axis")),
                          blend=args.blend)
        payload = {"mode": "axis", **pose.to_dict()}
    _write_json(Path(args.out), payload)
    print(json.dumps({"out": str(args.out), "mode": payload["mode"]}, sort_keys=True))
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="descforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"descforge {__version__}")
    parser.add_argument("--config", type=str, default=None,
                        help="TOML config file; explicit flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-mesh", help="generate a fixture mesh")
    p.add_argument("shape", choices=["torus", "cylinder", "box", "uv-sphere"])
    p.add_argument("--out", required=True)
    p.add_argument("--major", type=float, default=0.1)
    p.add_argument("--minor", type=float, default=0.04)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--height", type=float, default=0.12)
    p.add_argument("--sx", type=float, default=0.08)
    p.add_argument("--sy", type=float, default=0.06)
    p.add_argument("--sz", type=float, default=0.04)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=32)
    p.set_defaults(func=cmd_gen_mesh)

    p = sub.add_parser("embed", help="embed a mesh into descriptor space")
    p.add_argument("--mesh", required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--symmetry", choices=["off", "gisif"], default="off")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--weighting", choices=["cotangent", "uniform"], default="cotangent")
    p.add_argument("--mass", choices=["degree", "barycentric"], default="degree")
    p.add_argument("--solver", choices=["auto", "dense", "lanczos"], default="auto")
    p.add_argument("--grid-resolution", type=int, default=9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("render", help="render a synthetic orbit dataset")
    p.add_argument("--mesh", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--fx", type=float, default=550.0)
    p.add_argument("--fy", type=float, default=550.0)
    p.add_argument("--cx", type=float, default=320.0)
    p.add_argument("--cy", type=float, default=240.0)
    p.add_argument("--radius-min", type=float, default=0.45)
    p.add_argument("--radius-max", type=float, default=0.6)
    p.add_argument("--elev-min", type=float, default=20.0, help="degrees")
    p.add_argument("--elev-max", type=float, default=65.0, help="degrees")
    p.add_argument("--object-pose", type=str, default=None,
                   help="16 comma-separated floats, 4x4 row-major")
    p.add_argument("--view-dependent", choices=["none", "edge-blend", "mask-ramp"],
                   default="none")
    p.add_argument("--band", type=int, default=4)
    p.add_argument("--shading", choices=["lambert", "normal-colors"], default="lambert")
    p.add_argument("--randomize-background", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("correspondences", help="sample cross-frame correspondences")
    p.add_argument("--dataset", required=True)
    p.add_argument("--frame-a", type=int, default=0)
    p.add_argument("--frame-b", type=int, default=1)
    p.add_argument("--n-match", type=int, default=5000)
    p.add_argument("--n-nonmatch", type=int, default=5000)
    p.add_argument("--background-fraction", type=float, default=0.5)
    p.add_argument("--margin-object", type=float, default=0.5)
    p.add_argument("--margin-background", type=float, default=2.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correspondences)

    p = sub.add_parser("eval", help="track references across a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ref-frame", type=int, default=0)
    p.add_argument("--num-refs", type=int, default=10)
    p.add_argument("--ref-pixels", type=str, default=None,
                   help="semicolon-separated u,v pairs; overrides --num-refs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--visibility", choices=["geometric", "descriptor"],
                   default="geometric")
    p.add_argument("--threshold", type=float, default=0.2)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grasp", help="construct a grasp pose from tracked points")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ref-frame", type=int, default=0)
    p.add_argument("--target-frame", type=int, default=1)
    p.add_argument("--pixel-1", required=True, help="u,v on the reference frame")
    p.add_argument("--pixel-2", default=None, help="u,v on the reference frame")
    p.add_argument("--axis", type=str, default="0,0,1")
    p.add_argument("--blend", type=float, default=0.5)
    p.add_argument("--top-down", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grasp)
    return parser


def _apply_config(parser: _Parser, argv):
    """TOML values become parser defaults; explicit flags still win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    cfg_path = argv[idx + 1]
    with open(cfg_path, "rb") as fh:
        cfg = tomllib.load(fh)
    command = next((a for a in argv if not a.startswith("-") and a != cfg_path), None)
    values = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    if command and command in cfg:
        values.update(cfg[command])
    flat = {k.replace("-", "_"): v for k, v in values.items()}
    for action in parser._subparsers._group_actions:
        for name, sp in action.choices.items():
            if name == command:
                known = {a.dest for a in sp._actions}
                sp.set_defaults(**{k: v for k, v in flat.items() if k in known})
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        thread_cap()
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if (args.command == "grasp" and not args.top_down
                and args.pixel_2 is None):
            raise ValueError("--pixel-2 is required unless --top-down is set")
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except DescforgeError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
