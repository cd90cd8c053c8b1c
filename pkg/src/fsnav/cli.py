"""Subcommand front-end: gradients, blur, extract, project, pipeline,
eval, bench, synth."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, pipeline
from .errors import ConfigError, FsnavError
from .extraction import ExtractionConfig, extract, read_mask, write_border_csv, write_mask
from .imaging import CropMeta, blur_factor, gradient_stack, save_gradient_planes, to_grayscale
from .netpbm import read_pnm, write_ppm
from .projection import DEFAULT_MAX_RANGE, build_pointcloud, load_camera, save_camera, write_ply
from .segmenter import parse_backend_spec


def _load_gray(path) -> np.ndarray:
    img = read_pnm(path)
    return to_grayscale(img) if img.ndim == 3 else img


def _extraction_config(args) -> ExtractionConfig:
    return ExtractionConfig(method=args.method, count=args.count, contour_stride=args.stride)


def cmd_gradients(args) -> int:
    gray = _load_gray(args.image)
    sidecar = save_gradient_planes(gradient_stack(gray), args.out, stem=Path(args.image).stem)
    print(json.dumps(sidecar, indent=2))
    return 0


def cmd_blur(args) -> int:
    bf = blur_factor(_load_gray(args.image), normalized=args.normalized)
    print(json.dumps({"beta": bf.beta, "beta_mean_abs": bf.beta_mean_abs, "normalized": args.normalized}))
    return 0


def cmd_extract(args) -> int:
    points = extract(read_mask(args.mask), _extraction_config(args))
    write_border_csv(args.out, points)
    print(f"{len(points)} border points -> {args.out}")
    return 0


def cmd_project(args) -> int:
    mask = read_mask(args.mask)
    cam = load_camera(args.camera)
    if args.meta:
        meta = CropMeta.from_dict(json.loads(Path(args.meta).read_text()))
    else:
        meta = CropMeta.identity(mask.shape[0])
    points = extract(mask, _extraction_config(args))
    cloud = build_pointcloud(
        points, cam, meta, beta=args.beta, beta0=args.beta0,
        frame_id=Path(args.mask).stem, max_range=args.max_range,
    )
    write_ply(args.out, cloud)
    print(f"{len(cloud.points)} points -> {args.out}")
    return 0


def _pipeline_config(args) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        camera=load_camera(args.camera),
        segmenter=args.segmenter,
        extraction=_extraction_config(args),
        resolution=args.resolution,
        map_size_m=args.map_size,
        beta0=args.beta0,
        beta_normalized=args.normalized,
        max_range=args.max_range,
        no_crop=args.no_crop,
    )


def cmd_pipeline(args) -> int:
    report = pipeline.run_pipeline(args.frames, _pipeline_config(args), args.out)
    print(json.dumps(report, indent=2))
    return 0


def cmd_bench(args) -> int:
    config = _pipeline_config(args)
    config.write_clouds = False
    report = pipeline.bench(args.frames, config, args.iterations)
    print(json.dumps(report, indent=2))
    return 0


def cmd_eval(args) -> int:
    scenes = evaluation.load_scenes(args.scenes)
    if not scenes:
        raise ConfigError(f"no scenes in {args.scenes}")
    reports = []
    backend = parse_backend_spec(args.segmenter)
    try:
        for i, scene in enumerate(scenes):
            rgb, truth, _ = evaluation.render_scene(scene)
            pred = backend.segment(rgb, frame_index=i)
            reports.append(evaluation.miou(pred, truth))
    finally:
        backend.close()
    print(json.dumps(evaluation.aggregate_reports(reports).to_dict(), indent=2))
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    frames_dir = out / "frames"
    masks_dir = out / "masks"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)
    scenes = evaluation.make_corpus(args.count, seed=args.seed, with_holes=args.holes)
    borders = []
    for i, scene in enumerate(scenes):
        rgb, truth, rays = evaluation.render_scene(scene, ray_count=args.rays)
        write_ppm(frames_dir / f"{i}.ppm", rgb)
        write_mask(masks_dir / f"{i}.pgm", truth)
        borders.append([{"ray": b.ray_index, "x": b.x, "y": b.y, "kind": b.kind} for b in rays])
    evaluation.save_scenes(out / "scenes.json", scenes)
    save_camera(out / "camera.json", scenes[0].camera)
    (out / "borders.json").write_text(json.dumps(borders, indent=2))
    print(f"{len(scenes)} scenes -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_extraction_flags(p):
        p.add_argument("--method", choices=("vertical", "polar", "contour"), default="polar")
        p.add_argument("--count", type=int, default=64, help="lines/rays for vertical/polar")
        p.add_argument("--stride", type=int, default=4, help="contour sampling stride")

    p = sub.add_parser("gradients", help="write Sobel/Laplacian planes as 16-bit PGM + sidecar")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gradients)

    p = sub.add_parser("blur", help="print the blur factor of an image")
    p.add_argument("--image", required=True)
    p.add_argument("--normalized", action="store_true", help="divide by pixel count (true variance)")
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("extract", help="border points from a freespace-map PGM")
    p.add_argument("--mask", required=True)
    add_extraction_flags(p)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("project", help="freespace-map borders to a 3D PLY cloud")
    p.add_argument("--mask", required=True)
    p.add_argument("--camera", required=True, help="camera JSON")
    add_extraction_flags(p)
    p.add_argument("--meta", help="crop metadata JSON (default: identity)")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--max-range", type=float, default=DEFAULT_MAX_RANGE)
    p.add_argument("--out", required=True, help="output PLY")
    p.set_defaults(func=cmd_project)

    def add_pipeline_flags(p):
        p.add_argument("--frames", required=True, help="directory of PPM frames")
        p.add_argument("--camera", required=True)
        p.add_argument("--segmenter", default="flood", help="file:<dir> | flood[:threshold] | exec:<command>")
        add_extraction_flags(p)
        p.add_argument("--resolution", type=float, default=0.05, help="costmap m/cell")
        p.add_argument("--map-size", type=float, default=20.0, help="costmap side length, m")
        p.add_argument("--beta0", type=float, default=None, help="blur normalizer (default: run median)")
        p.add_argument("--normalized", action="store_true", help="normalize beta by pixel count")
        p.add_argument("--max-range", type=float, default=DEFAULT_MAX_RANGE)
        p.add_argument("--no-crop", action="store_true", help="frames are already 224x224 network inputs")

    p = sub.add_parser("pipeline", help="frames -> clouds + costmap + timing report")
    add_pipeline_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bench", help="repeat the pipeline stages and report throughput")
    add_pipeline_flags(p)
    p.add_argument("--iterations", type=int, default=10)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="segmenter mIoU against rendered scene truth")
    p.add_argument("--scenes", required=True, help="scenes JSON")
    p.add_argument("--segmenter", default="flood")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus (frames, masks, camera, scenes)")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holes", action="store_true", help="add a drop-off to every scene")
    p.add_argument("--rays", type=int, default=64, help="rays for analytic borders")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FsnavError as exc:
        print(f"fsnav: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fsnav: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
