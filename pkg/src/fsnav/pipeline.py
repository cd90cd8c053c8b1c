"""Frame-directory pipeline: preprocess, segment, weigh, extract, project,
integrate. Also the benchmark harness reporting per-stage timings.

Frames are processed in filename order; costmap integration is the
serialization point, so the resulting grid is deterministic regardless of
the worker thread count (FSNAV_THREADS).
"""

from __future__ import annotations

import json
import os
import statistics
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costmap import Costmap, RobotPose
from .errors import BackendError, ConfigError, FsnavError
from .extraction import ExtractionConfig, extract
from .imaging import blur_factor, normalize_only, preprocess_frame, to_grayscale
from .netpbm import read_pnm
from .projection import DEFAULT_MAX_RANGE, CameraModel, PointCloud3D, build_pointcloud, write_ply
from .segmenter import parse_backend_spec

STAGES = ("read", "preprocess", "segment", "blur", "extract", "project", "integrate")
WARMUP_FRAMES = 10


@dataclass
class PipelineConfig:
    camera: CameraModel
    segmenter: str = "flood"
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    resolution: float = 0.05
    map_size_m: float = 20.0  # square grid, robot at the center
    beta0: float | None = None  # None = median beta of the run
    beta_normalized: bool = False
    max_range: float = DEFAULT_MAX_RANGE
    no_crop: bool = False  # frames are already 224x224 segmenter inputs
    mark_step: int = 128
    clear_step: int = 32
    write_clouds: bool = True

    def make_costmap(self) -> Costmap:
        cells = max(1, int(round(self.map_size_m / self.resolution)))
        half = cells * self.resolution / 2.0
        return Costmap(self.resolution, cells, cells, origin_x=-half, origin_y=-half)


@dataclass
class FrameResult:
    index: int
    name: str
    cloud: PointCloud3D | None
    timings_ms: dict
    skipped: bool = False


def list_frames(frames_dir) -> list[Path]:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise ConfigError(f"frames directory {frames_dir} does not exist")
    return sorted(p for p in frames_dir.iterdir() if p.suffix.lower() in (".ppm", ".pgm"))


def worker_count() -> int:
    raw = os.environ.get("FSNAV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"FSNAV_THREADS must be an integer, got {raw!r}")


def _tensor_to_u8(tensor: np.ndarray) -> np.ndarray:
    return np.clip(np.round((tensor + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _prepare(path: Path, no_crop: bool):
    rgb = read_pnm(path)
    if rgb.ndim != 3:
        raise ConfigError(f"{path.name}: expected a color PPM frame")
    if no_crop:
        tensor, meta = normalize_only(rgb)
    else:
        tensor, meta = preprocess_frame(rgb)
    return _tensor_to_u8(tensor), meta


class FramePipeline:
    """Per-frame stage runner; reusable from run_pipeline and bench."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.backend = parse_backend_spec(config.segmenter)
        self._segment_lock = threading.Lock()
        self.beta0 = config.beta0

    def close(self):
        self.backend.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def resolve_beta0(self, frames: list[Path]) -> float:
        """Median beta over the run when no explicit normalizer is given."""
        if self.beta0 is not None:
            return self.beta0
        betas = []
        for path in frames:
            try:
                net_input, _ = _prepare(path, self.config.no_crop)
            except FsnavError:
                continue
            betas.append(blur_factor(to_grayscale(net_input), self.config.beta_normalized).beta)
        median = statistics.median(betas) if betas else 0.0
        self.beta0 = median if median > 0.0 else 1.0
        return self.beta0

    def process_frame(self, index: int, path: Path) -> FrameResult:
        cfg = self.config
        timings: dict = {}
        clock = time.perf_counter
        t0 = clock()
        try:
            rgb = read_pnm(path)
            if rgb.ndim != 3:
                raise ConfigError(f"{path.name}: expected a color PPM frame")
        except FsnavError as exc:
            print(f"fsnav: warning: skipping malformed frame {path.name}: {exc}", file=sys.stderr)
            return FrameResult(index, path.name, None, {}, skipped=True)
        timings["read"] = clock() - t0

        t0 = clock()
        if cfg.no_crop:
            tensor, meta = normalize_only(rgb)
        else:
            tensor, meta = preprocess_frame(rgb)
        net_input = _tensor_to_u8(tensor)
        timings["preprocess"] = clock() - t0

        t0 = clock()
        try:
            with self._segment_lock:
                mask = self.backend.segment(net_input, frame_index=index)
        except BackendError as exc:
            raise BackendError(f"frame {index} ({path.name}): {exc}") from exc
        timings["segment"] = clock() - t0

        t0 = clock()
        beta = blur_factor(to_grayscale(net_input), cfg.beta_normalized)
        timings["blur"] = clock() - t0

        t0 = clock()
        points = extract(mask, cfg.extraction)
        timings["extract"] = clock() - t0

        t0 = clock()
        cloud = build_pointcloud(
            points,
            cfg.camera,
            meta,
            beta,
            beta0=self.beta0 if self.beta0 is not None else 1.0,
            frame_id=path.stem,
            max_range=cfg.max_range,
        )
        timings["project"] = clock() - t0
        return FrameResult(index, path.name, cloud, timings)


def _stage_stats(samples_ms: dict) -> dict:
    stats = {}
    for stage, values in samples_ms.items():
        if values:
            stats[stage] = {
                "median_ms": float(np.median(values)),
                "p95_ms": float(np.percentile(values, 95)),
            }
    return stats


def run_pipeline(frames_dir, config: PipelineConfig, out_dir) -> dict:
    """Process every frame in the directory into a costmap.

    Writes per-frame PLY clouds, the final costmap (PGM + JSON sidecar),
    and a timing report JSON; returns the report.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = list_frames(frames_dir)
    grid = config.make_costmap()
    pose = RobotPose(0.0, 0.0, 0.0)
    samples: dict = {s: [] for s in (*STAGES, "total")}
    skipped = 0

    with FramePipeline(config) as pipe:
        beta0_used = pipe.resolve_beta0(frames)
        cloud_dir = out_dir / "clouds"
        if config.write_clouds and frames:
            cloud_dir.mkdir(exist_ok=True)

        def integrate(result: FrameResult):
            nonlocal skipped
            if result.skipped:
                skipped += 1
                return
            t0 = time.perf_counter()
            grid.integrate_pointcloud(result.cloud, pose, config.mark_step, config.clear_step)
            result.timings_ms["integrate"] = time.perf_counter() - t0
            if config.write_clouds:
                write_ply(cloud_dir / f"{Path(result.name).stem}.ply", result.cloud)
            total = 0.0
            for stage, dt in result.timings_ms.items():
                samples[stage].append(dt * 1000.0)
                total += dt
            samples["total"].append(total * 1000.0)

        workers = worker_count()
        if workers == 1:
            for i, path in enumerate(frames):
                integrate(pipe.process_frame(i, path))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(pipe.process_frame, range(len(frames)), frames):
                    integrate(result)

    grid.save(out_dir / "costmap.pgm")
    report = {
        "frames": len(frames),
        "processed": len(frames) - skipped,
        "skipped": skipped,
        "beta0": beta0_used,
        "stages": _stage_stats(samples),
        "fps": (1000.0 / float(np.median(samples["total"]))) if samples["total"] else None,
    }
    (out_dir / "timing.json").write_text(json.dumps(report, indent=2))
    return report


def bench(frames_dir, config: PipelineConfig, iterations: int) -> dict:
    """Repeatedly run the per-frame stages and report throughput.

    The first WARMUP_FRAMES frame passes are excluded from the statistics;
    integration runs against a scratch costmap.
    """
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    frames = list_frames(frames_dir)
    if not frames:
        raise ConfigError(f"no frames in {frames_dir}")
    grid = config.make_costmap()
    pose = RobotPose(0.0, 0.0, 0.0)
    samples: dict = {s: [] for s in (*STAGES, "total")}

    with FramePipeline(config) as pipe:
        pipe.resolve_beta0(frames[:1])
        passes = [(i % len(frames), frames[i % len(frames)]) for i in range(WARMUP_FRAMES + iterations * len(frames))]
        for n, (index, path) in enumerate(passes):
            result = pipe.process_frame(index, path)
            if result.skipped:
                raise ConfigError(f"malformed frame {path.name} in benchmark input")
            t0 = time.perf_counter()
            grid.integrate_pointcloud(result.cloud, pose, config.mark_step, config.clear_step)
            result.timings_ms["integrate"] = time.perf_counter() - t0
            if n < WARMUP_FRAMES:
                continue
            total = 0.0
            for stage, dt in result.timings_ms.items():
                samples[stage].append(dt * 1000.0)
                total += dt
            samples["total"].append(total * 1000.0)

    median_total = float(np.median(samples["total"]))
    return {
        "frames": len(frames),
        "iterations": iterations,
        "samples": len(samples["total"]),
        "warmup_excluded": WARMUP_FRAMES,
        "stages": _stage_stats(samples),
        "total": {"median_ms": median_total, "p95_ms": float(np.percentile(samples["total"], 95))},
        "fps": 1000.0 / median_total if median_total > 0 else float("inf"),
    }
