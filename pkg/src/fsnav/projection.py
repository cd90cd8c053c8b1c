"""Ground-plane pinhole geometry: freespace-map pixels to 3D world points.

Camera frame: X right, Y down, Z forward (optical axis). The camera sits
camera_height meters above the ground; rotation maps the level world basis
(same axis convention, gravity along +Y) to the camera frame. Output points
live in the robot base frame: x forward, y left, z up; ground points have
z = 0 exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AboveHorizon, ConfigError, DistortionError
from .extraction import BorderPoint
from .imaging import BlurFactor, CropMeta

HORIZON_EPS = 1e-6  # minimum downward component of a unit ground ray
DEFAULT_MAX_RANGE = 10.0  # m, drop points farther than this
UNDISTORT_ITERATIONS = 5


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int
    rotation: np.ndarray  # 3x3, level-world -> camera
    camera_height: float  # m above ground
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.camera_height <= 0:
            raise ConfigError(f"camera_height must be positive, got {self.camera_height}")
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ConfigError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6):
            raise ConfigError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ConfigError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)

    @classmethod
    def level(cls, fx, fy, cx, cy, width, height, camera_height, k1=0.0, k2=0.0) -> "CameraModel":
        """Camera looking straight forward, no tilt."""
        return cls(fx, fy, cx, cy, width, height, np.eye(3), camera_height, k1, k2)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.image_width,
            "height": self.image_height,
            "rotation": [float(x) for x in self.rotation.ravel()],
            "camera_height_m": self.camera_height,
            "k1": self.k1,
            "k2": self.k2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            image_width=int(d["width"]),
            image_height=int(d["height"]),
            rotation=np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
            camera_height=float(d["camera_height_m"]),
            k1=float(d.get("k1", 0.0)),
            k2=float(d.get("k2", 0.0)),
        )


def load_camera(path) -> CameraModel:
    with open(path) as fh:
        return CameraModel.from_dict(json.load(fh))


def save_camera(path, cam: CameraModel) -> None:
    with open(path, "w") as fh:
        json.dump(cam.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class Point3D:
    x: float  # m forward
    y: float  # m left
    z: float  # m up
    intensity: float  # blur weight in [0, 1]


@dataclass(frozen=True)
class PointCloud3D:
    points: list[Point3D]
    frame_id: str = ""
    beta: BlurFactor | None = None

    def __len__(self) -> int:
        return len(self.points)


def map_to_image_coords(point: BorderPoint, meta: CropMeta) -> tuple[float, float]:
    """Invert the preprocess crop/resize for one border point."""
    if meta is None:
        raise ConfigError("crop metadata required to map border points to source pixels")
    return point.u * meta.scale_x, meta.offset_y + point.v * meta.scale_y


def distort_point(cam: CameraModel, u: float, v: float) -> tuple[float, float]:
    """Apply the forward radial model (ideal pixel -> observed pixel)."""
    x = (u - cam.cx) / cam.fx
    y = (v - cam.cy) / cam.fy
    r2 = x * x + y * y
    scale = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2
    return cam.cx + cam.fx * x * scale, cam.cy + cam.fy * y * scale


def undistort_point(cam: CameraModel, u: float, v: float) -> tuple[float, float]:
    """Invert the radial model by fixed-point iteration in normalized coords."""
    xs, ys = _undistort_arrays(cam, np.asarray([u], dtype=np.float64), np.asarray([v], dtype=np.float64))
    return float(xs[0] * cam.fx + cam.cx), float(ys[0] * cam.fy + cam.cy)


def _undistort_arrays(cam: CameraModel, us: np.ndarray, vs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch undistort; returns normalized (x, y) coordinates."""
    xd = (us - cam.cx) / cam.fx
    yd = (vs - cam.cy) / cam.fy
    if cam.k1 == 0.0 and cam.k2 == 0.0:
        return xd, yd
    x, y = xd.copy(), yd.copy()
    for _ in range(UNDISTORT_ITERATIONS):
        r2 = x * x + y * y
        scale = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2
        x = xd / scale
        y = yd / scale
    bad = ~np.isfinite(x) | ~np.isfinite(y) | (np.abs(x - xd) > 1.0) | (np.abs(y - yd) > 1.0)
    if bad.any():
        raise DistortionError(f"undistortion diverged for {int(bad.sum())} point(s)")
    return x, y


def pixel_ray(cam: CameraModel, u: float, v: float) -> np.ndarray:
    """Unit viewing direction of pixel (u, v) in the level world basis."""
    d = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    d /= np.linalg.norm(d)
    return cam.rotation.T @ d


def backproject_ground(cam: CameraModel, u: float, v: float) -> Point3D:
    """Intersect an (undistorted) pixel ray with the ground plane.

    Raises AboveHorizon when the ray's downward component is <= 1e-6;
    callers skip such points.
    """
    d = pixel_ray(cam, u, v)
    if d[1] <= HORIZON_EPS:
        raise AboveHorizon(f"pixel ({u}, {v}) does not look at the ground")
    t = cam.camera_height / d[1]
    p = t * d
    return Point3D(x=float(p[2]), y=float(-p[0]), z=0.0, intensity=1.0)


def backproject_ground_batch(
    cam: CameraModel, us: np.ndarray, vs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ground intersection of pixel rays (no distortion handling).

    Returns (x forward, y left, hits_ground); x/y are valid where
    hits_ground is True.
    """
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    d = np.stack([(us - cam.cx) / cam.fx, (vs - cam.cy) / cam.fy, np.ones_like(us)])
    d /= np.linalg.norm(d, axis=0)
    d_lvl = cam.rotation.T @ d.reshape(3, -1)
    down = d_lvl[1]
    ok = down > HORIZON_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ok, cam.camera_height / down, np.nan)
    x_fwd = (t * d_lvl[2]).reshape(us.shape)
    y_left = (-t * d_lvl[0]).reshape(us.shape)
    return x_fwd, y_left, ok.reshape(us.shape)


def project_ground_point(cam: CameraModel, x_fwd: float, y_left: float) -> tuple[float, float]:
    """Forward-project a ground point (robot frame) to ideal pixel coords."""
    p_lvl = np.array([-y_left, cam.camera_height, x_fwd])
    p_cam = cam.rotation @ p_lvl
    if p_cam[2] <= 0:
        raise AboveHorizon(f"ground point ({x_fwd}, {y_left}) is behind the camera")
    return (
        float(cam.fx * p_cam[0] / p_cam[2] + cam.cx),
        float(cam.fy * p_cam[1] / p_cam[2] + cam.cy),
    )


def blur_intensity(beta: float, beta0: float) -> float:
    """Weight in [0, 1): sharper frames (higher beta) approach 1."""
    if beta < 0 or beta0 < 0:
        raise ConfigError(f"beta terms must be non-negative, got beta={beta} beta0={beta0}")
    if beta == 0.0:
        return 0.0
    return beta / (beta + beta0)


def build_pointcloud(
    points: list[BorderPoint],
    cam: CameraModel,
    meta: CropMeta,
    beta: BlurFactor | float,
    beta0: float,
    frame_id: str = "",
    max_range: float = DEFAULT_MAX_RANGE,
) -> PointCloud3D:
    """Project border points to weighted ground points.

    Composes crop-metadata unmapping, undistortion, and ground-plane
    backprojection; above-horizon and beyond-max-range points are dropped.
    Every point carries intensity beta / (beta + beta0).
    """
    bf = beta if isinstance(beta, BlurFactor) else BlurFactor(beta=float(beta), beta_mean_abs=0.0)
    intensity = blur_intensity(bf.beta, beta0)
    if not points:
        return PointCloud3D(points=[], frame_id=frame_id, beta=bf)
    us = np.array([p.u for p in points], dtype=np.float64) * meta.scale_x
    vs = meta.offset_y + np.array([p.v for p in points], dtype=np.float64) * meta.scale_y
    xn, yn = _undistort_arrays(cam, us, vs)
    x_fwd, y_left, ok = backproject_ground_batch(cam, xn * cam.fx + cam.cx, yn * cam.fy + cam.cy)
    keep = ok & (np.hypot(np.where(ok, x_fwd, 0.0), np.where(ok, y_left, 0.0)) <= max_range)
    cloud = [
        Point3D(x=float(x_fwd[i]), y=float(y_left[i]), z=0.0, intensity=intensity)
        for i in np.nonzero(keep)[0]
    ]
    return PointCloud3D(points=cloud, frame_id=frame_id, beta=bf)


def write_ply(path, cloud: PointCloud3D) -> None:
    """ASCII PLY with float x, y, z, intensity per vertex."""
    with open(path, "w") as fh:
        fh.write("ply\n")
        fh.write("format ascii 1.0\n")
        if cloud.frame_id:
            fh.write(f"comment frame {cloud.frame_id}\n")
        if cloud.beta is not None:
            fh.write(f"comment beta {cloud.beta.beta!r}\n")
        fh.write(f"element vertex {len(cloud.points)}\n")
        fh.write("property float x\n")
        fh.write("property float y\n")
        fh.write("property float z\n")
        fh.write("property float intensity\n")
        fh.write("end_header\n")
        for p in cloud.points:
            fh.write(f"{p.x:.6f} {p.y:.6f} {p.z:.6f} {p.intensity:.6f}\n")


def read_ply(path) -> PointCloud3D:
    """Read clouds written by write_ply (ASCII, xyz + intensity)."""
    points: list[Point3D] = []
    frame_id = ""
    with open(path) as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise ValueError(f"{path}: not a PLY file")
        count = 0
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            line = line.strip()
            if line.startswith("comment frame "):
                frame_id = line[len("comment frame "):]
            elif line.startswith("element vertex "):
                count = int(line.split()[-1])
            elif line == "end_header":
                break
        for _ in range(count):
            xs = fh.readline().split()
            points.append(Point3D(float(xs[0]), float(xs[1]), float(xs[2]), float(xs[3])))
    return PointCloud3D(points=points, frame_id=frame_id)
