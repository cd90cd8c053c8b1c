"""Synthetic-scene oracle and metrics.

Scenes are axis-aligned rectangles on a flat ground plane: walls (standing
obstacles, treated as tall enough to occlude everything behind their
footprint) and holes (drop-offs: missing floor, ground beyond stays
visible). Closed-form geometry keeps the rendered truth independent of the
pipeline under test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SceneError, ShapeError
from .projection import CameraModel, backproject_ground_batch

POLY_LR_BASE = 0.0006
POLY_LR_EPOCHS = 1000
POLY_LR_POWER = 0.9


@dataclass(frozen=True)
class Rect:
    """Axis-aligned ground rectangle, meters; x forward, y left."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise SceneError(f"degenerate rectangle {self}")

    def to_dict(self) -> dict:
        return {"x_range": [self.x_min, self.x_max], "y_range": [self.y_min, self.y_max]}

    @classmethod
    def from_dict(cls, d: dict) -> "Rect":
        (x0, x1), (y0, y1) = d["x_range"], d["y_range"]
        return cls(float(x0), float(x1), float(y0), float(y1))


@dataclass(frozen=True)
class SceneSpec:
    camera: CameraModel
    extent: float  # ground is the square |x| <= extent, |y| <= extent
    walls: tuple[Rect, ...] = ()
    holes: tuple[Rect, ...] = ()
    floor_color: tuple[int, int, int] = (86, 86, 92)
    obstacle_color: tuple[int, int, int] = (208, 198, 186)

    def __post_init__(self):
        if self.extent <= 0:
            raise SceneError(f"extent must be positive, got {self.extent}")
        for r in (*self.walls, *self.holes):
            if max(abs(r.x_min), abs(r.x_max), abs(r.y_min), abs(r.y_max)) > self.extent:
                raise SceneError(f"rectangle {r} outside extent {self.extent}")
        if tuple(self.floor_color) == tuple(self.obstacle_color):
            raise SceneError("floor and obstacle colors must differ")
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "holes", tuple(self.holes))

    def to_dict(self) -> dict:
        return {
            "camera": self.camera.to_dict(),
            "extent": self.extent,
            "walls": [r.to_dict() for r in self.walls],
            "holes": [r.to_dict() for r in self.holes],
            "floor_color": list(self.floor_color),
            "obstacle_color": list(self.obstacle_color),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            camera=CameraModel.from_dict(d["camera"]),
            extent=float(d["extent"]),
            walls=tuple(Rect.from_dict(r) for r in d.get("walls", [])),
            holes=tuple(Rect.from_dict(r) for r in d.get("holes", [])),
            floor_color=tuple(d.get("floor_color", (86, 86, 92))),
            obstacle_color=tuple(d.get("obstacle_color", (208, 198, 186))),
        )


def load_scenes(path) -> list[SceneSpec]:
    with open(path) as fh:
        data = json.load(fh)
    return [SceneSpec.from_dict(d) for d in data]


def save_scenes(path, scenes: list[SceneSpec]) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in scenes], fh, indent=2)


@dataclass(frozen=True)
class RayBorder:
    """First end of free space along one polar ray's ground trace."""

    ray_index: int
    x: float  # m forward at the border
    y: float  # m left
    kind: str  # wall | hole | extent | start


def _inside_any(rects, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    hit = np.zeros(x.shape, dtype=bool)
    for r in rects:
        hit |= (x >= r.x_min) & (x <= r.x_max) & (y >= r.y_min) & (y <= r.y_max)
    return hit


def _segment_hits_rect(r: Rect, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """True where the ground segment (0,0) -> (x, y) intersects rect r."""
    with np.errstate(divide="ignore", invalid="ignore"):
        tx0 = r.x_min / x
        tx1 = r.x_max / x
        ty0 = r.y_min / y
        ty1 = r.y_max / y
    t_enter_x = np.where(x != 0, np.minimum(tx0, tx1), np.where((0 >= r.x_min) & (0 <= r.x_max), -np.inf, np.inf))
    t_exit_x = np.where(x != 0, np.maximum(tx0, tx1), np.where((0 >= r.x_min) & (0 <= r.x_max), np.inf, -np.inf))
    t_enter_y = np.where(y != 0, np.minimum(ty0, ty1), np.where((0 >= r.y_min) & (0 <= r.y_max), -np.inf, np.inf))
    t_exit_y = np.where(y != 0, np.maximum(ty0, ty1), np.where((0 >= r.y_min) & (0 <= r.y_max), np.inf, -np.inf))
    t_enter = np.maximum(t_enter_x, t_enter_y)
    t_exit = np.minimum(t_exit_x, t_exit_y)
    return (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter <= 1.0)


def classify_ground(spec: SceneSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Free/obstacle truth for visible ground points (camera at origin)."""
    free = (np.abs(x) <= spec.extent) & (np.abs(y) <= spec.extent)
    free &= ~_inside_any(spec.holes, x, y)
    for wall in spec.walls:
        free &= ~_segment_hits_rect(wall, x, y)
    return free


def _ray_entry_param(r: Rect, ax: float, ay: float, dx: float, dy: float) -> float | None:
    """Smallest s >= 0 with (ax, ay) + s*(dx, dy) inside rect r."""
    t_enter, t_exit = -math.inf, math.inf
    for a, d, lo, hi in ((ax, dx, r.x_min, r.x_max), (ay, dy, r.y_min, r.y_max)):
        if d == 0.0:
            if not lo <= a <= hi:
                return None
        else:
            t0, t1 = (lo - a) / d, (hi - a) / d
            if t0 > t1:
                t0, t1 = t1, t0
            t_enter = max(t_enter, t0)
            t_exit = min(t_exit, t1)
    if t_enter > t_exit or t_exit < 0.0:
        return None
    return max(t_enter, 0.0)


def _ray_exit_extent(extent: float, ax: float, ay: float, dx: float, dy: float) -> float:
    """s at which the ray leaves the extent square (assumes start inside)."""
    s = math.inf
    for a, d in ((ax, dx), (ay, dy)):
        if d > 0.0:
            s = min(s, (extent - a) / d)
        elif d < 0.0:
            s = min(s, (-extent - a) / d)
    return s


def _first_shadow_param(r: Rect, ax: float, ay: float, dx: float, dy: float) -> float | None:
    """Smallest s >= 0 where the ground point A + s*D falls behind wall r
    as seen from the camera footprint at the origin.

    Shadow boundaries are the rectangle's own edges plus the extreme rays
    from the origin through its corners, so the onset is one of those
    crossing parameters.
    """
    events = [0.0]
    s_in = _ray_entry_param(r, ax, ay, dx, dy)
    if s_in is not None:
        events.append(s_in)
    for cx, cy in ((r.x_min, r.y_min), (r.x_min, r.y_max), (r.x_max, r.y_min), (r.x_max, r.y_max)):
        det = dx * cy - dy * cx
        if abs(det) > 1e-12:
            s = (ay * cx - ax * cy) / det
            if s >= 0.0:
                events.append(s)
    for s in sorted(events):
        px, py = ax + (s + 1e-9) * dx, ay + (s + 1e-9) * dy
        if _segment_hits_rect(r, np.asarray([px]), np.asarray([py]))[0]:
            return s
    return None


def ray_borders(spec: SceneSpec, ray_count: int = 64) -> list[RayBorder]:
    """Analytic free-space end per polar extraction ray.

    Each image-space ray from the bottom-center maps to a straight line on
    the ground; the border is its first entry into a hole, the first point
    shadowed by a wall, or the extent edge, whichever comes first.
    """
    cam = spec.camera
    w, h = cam.image_width, cam.image_height
    u0, v0 = w // 2, h - 1
    ax_arr, ay_arr, ok = backproject_ground_batch(cam, np.array([float(u0)]), np.array([float(v0)]))
    if not ok[0]:
        raise SceneError("bottom-center pixel looks above the horizon")
    ax, ay = float(ax_arr[0]), float(ay_arr[0])
    start_free = bool(classify_ground(spec, np.asarray([ax]), np.asarray([ay]))[0])
    borders: list[RayBorder] = []
    for j in range(ray_count):
        theta = math.pi * (j + 0.5) / ray_count
        if not start_free:
            borders.append(RayBorder(j, ax, ay, "start"))
            continue
        # second ray pixel, far enough out for a stable direction but below horizon
        t_probe = 8.0
        u1 = u0 - t_probe * math.cos(theta)
        v1 = v0 - t_probe * math.sin(theta)
        bx_arr, by_arr, ok1 = backproject_ground_batch(cam, np.array([u1]), np.array([v1]))
        if not ok1[0]:
            continue
        dx, dy = float(bx_arr[0]) - ax, float(by_arr[0]) - ay
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            continue
        dx, dy = dx / norm, dy / norm
        best_s = _ray_exit_extent(spec.extent, ax, ay, dx, dy)
        best_kind = "extent"
        for wall in spec.walls:
            s = _first_shadow_param(wall, ax, ay, dx, dy)
            if s is not None and s < best_s:
                best_s, best_kind = s, "wall"
        for hole in spec.holes:
            s = _ray_entry_param(hole, ax, ay, dx, dy)
            if s is not None and s < best_s:
                best_s, best_kind = s, "hole"
        if not math.isfinite(best_s):
            continue
        borders.append(RayBorder(j, ax + best_s * dx, ay + best_s * dy, best_kind))
    return borders


def render_scene(spec: SceneSpec, ray_count: int = 64) -> tuple[np.ndarray, np.ndarray, list[RayBorder]]:
    """Render (rgb, truth freespace map, analytic ray borders).

    Pixel (u, v) is classified by the ground point of its exact integer
    coordinates; rays above the horizon are obstacle class, as is ground
    outside the extent.
    """
    cam = spec.camera
    w, h = cam.image_width, cam.image_height
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    x, y, ok = backproject_ground_batch(cam, us, vs)
    if not ok.any():
        raise SceneError("camera sees no ground at all")
    free = np.zeros((h, w), dtype=bool)
    idx = np.nonzero(ok)
    free[idx] = classify_ground(spec, x[idx], y[idx])
    rgb = np.where(
        free[:, :, None],
        np.asarray(spec.floor_color, dtype=np.uint8),
        np.asarray(spec.obstacle_color, dtype=np.uint8),
    )
    return rgb.astype(np.uint8), free.astype(np.uint8), ray_borders(spec, ray_count)


@dataclass(frozen=True)
class MetricReport:
    miou: float
    per_class_iou: dict
    frame_count: int = 1

    def to_dict(self) -> dict:
        return {"miou": self.miou, "per_class_iou": dict(self.per_class_iou), "frame_count": self.frame_count}


def miou(pred: np.ndarray, gt: np.ndarray) -> MetricReport:
    """Mean intersection-over-union over the free and obstacle classes.

    A class absent from both masks (empty union) scores IoU 1.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    per_class = {}
    for name, value in (("obstacle", 0), ("free", 1)):
        p = pred == value
        g = gt == value
        union = int(np.sum(p | g))
        inter = int(np.sum(p & g))
        per_class[name] = 1.0 if union == 0 else inter / union
    return MetricReport(miou=(per_class["free"] + per_class["obstacle"]) / 2.0, per_class_iou=per_class)


def aggregate_reports(reports: list[MetricReport]) -> MetricReport:
    """Average per-image reports (per-class IoU per image, then across images)."""
    if not reports:
        return MetricReport(miou=float("nan"), per_class_iou={}, frame_count=0)
    per_class = {
        name: sum(r.per_class_iou[name] for r in reports) / len(reports)
        for name in reports[0].per_class_iou
    }
    return MetricReport(
        miou=sum(r.miou for r in reports) / len(reports),
        per_class_iou=per_class,
        frame_count=len(reports),
    )


def poly_lr(epoch: float) -> float:
    """Poly decay schedule: 0.0006 * ((1000 - epoch) / 1000) ** 0.9."""
    if not 0 <= epoch <= POLY_LR_EPOCHS:
        raise DomainError(f"epoch {epoch} outside [0, {POLY_LR_EPOCHS}]")
    return POLY_LR_BASE * ((POLY_LR_EPOCHS - epoch) / POLY_LR_EPOCHS) ** POLY_LR_POWER


def relu6_rewrite(x):
    """ReLU(x) - ReLU(x - 6); identical to clamp(x, 0, 6) for all finite x."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) - np.maximum(x - 6.0, 0.0)
    return float(out) if out.ndim == 0 else out


def make_random_scene(rng: np.random.Generator, with_holes: bool = False) -> SceneSpec:
    """Random wall scene for corpus evaluation; seed region stays free."""
    cam = CameraModel.level(fx=300.0, fy=300.0, cx=112.0, cy=112.0, width=224, height=224, camera_height=0.5)
    extent = 8.0
    floor_gray = int(rng.integers(40, 110))
    obstacle_gray = int(rng.integers(floor_gray + 70, 256))
    jit = lambda g: tuple(int(np.clip(g + rng.integers(-12, 13), 0, 255)) for _ in range(3))
    walls = []
    for _ in range(int(rng.integers(1, 4))):
        x0 = float(rng.uniform(1.6, 4.0))
        y_c = float(rng.uniform(-3.0, 3.0))
        y_half = float(rng.uniform(0.6, 3.0))
        walls.append(
            Rect(
                x0,
                min(extent, x0 + float(rng.uniform(0.3, 1.5))),
                max(-extent, y_c - y_half),
                min(extent, y_c + y_half),
            )
        )
    holes = []
    if with_holes:
        x0 = float(rng.uniform(1.6, 3.0))
        holes.append(Rect(x0, min(extent, x0 + float(rng.uniform(0.5, 1.5))), -extent, extent))
    return SceneSpec(
        camera=cam,
        extent=extent,
        walls=tuple(walls),
        holes=tuple(holes),
        floor_color=jit(floor_gray),
        obstacle_color=jit(obstacle_gray),
    )


def make_corpus(count: int, seed: int = 0, with_holes: bool = False) -> list[SceneSpec]:
    rng = np.random.default_rng(seed)
    return [make_random_scene(rng, with_holes=with_holes) for _ in range(count)]
