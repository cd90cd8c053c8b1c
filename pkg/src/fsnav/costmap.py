"""2D occupancy costmap accumulating weighted obstacle pointclouds.

Costs are uint8, 255 = lethal. Marking raises the cell containing each
obstacle point; clearing lowers every cell the sensor ray crosses on the
way there. Both are scaled by the cloud's blur-derived intensity, so sharp
frames carry more weight than blurred ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, OutOfBounds
from .netpbm import read_pnm, write_pgm
from .projection import PointCloud3D

DEFAULT_MARK_STEP = 128  # two consistent sharp observations lethalize a cell
DEFAULT_CLEAR_STEP = 32  # clearing is slower than marking
LETHAL_THRESHOLD = 128


@dataclass(frozen=True)
class RobotPose:
    x: float
    y: float
    heading: float = 0.0  # radians, in (-pi, pi]

    def __post_init__(self):
        if not -math.pi < self.heading <= math.pi:
            raise ConfigError(f"heading {self.heading} outside (-pi, pi]")


def supercover_cells(
    ax: float, ay: float, bx: float, by: float, resolution: float, origin_x: float = 0.0, origin_y: float = 0.0
) -> list[tuple[int, int]]:
    """Every grid cell the segment a->b passes through, in order.

    Cells are (col, row) indices; enumeration works on the crossing
    parameters of the grid lines, so zero-length corner touches are not
    included.
    """
    gx0 = (ax - origin_x) / resolution
    gy0 = (ay - origin_y) / resolution
    gx1 = (bx - origin_x) / resolution
    gy1 = (by - origin_y) / resolution
    dx = gx1 - gx0
    dy = gy1 - gy0
    ts = [np.array([0.0, 1.0])]
    if dx != 0.0:
        lo, hi = sorted((gx0, gx1))
        lines = np.arange(math.floor(lo) + 1, math.ceil(hi))
        ts.append((lines - gx0) / dx)
    if dy != 0.0:
        lo, hi = sorted((gy0, gy1))
        lines = np.arange(math.floor(lo) + 1, math.ceil(hi))
        ts.append((lines - gy0) / dy)
    t = np.sort(np.concatenate(ts))
    t = t[(t >= 0.0) & (t <= 1.0)]
    spans = np.diff(t)
    mids = (t[:-1] + t[1:])[spans > 1e-12] * 0.5
    cols = np.floor(gx0 + mids * dx).astype(np.intp)
    rows = np.floor(gy0 + mids * dy).astype(np.intp)
    return list(zip(cols.tolist(), rows.tolist()))


class Costmap:
    def __init__(self, resolution: float, width: int, height: int, origin_x: float = 0.0, origin_y: float = 0.0):
        if resolution <= 0:
            raise ConfigError(f"resolution must be positive, got {resolution}")
        if width < 1 or height < 1:
            raise ConfigError(f"grid must be at least 1x1, got {width}x{height}")
        self.resolution = float(resolution)
        self.width = int(width)
        self.height = int(height)
        self.origin_x = float(origin_x)
        self.origin_y = float(origin_y)
        self.cells = np.zeros((self.height, self.width), dtype=np.uint8)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """(col, row) of the cell containing world point (x, y)."""
        col = math.floor((x - self.origin_x) / self.resolution)
        row = math.floor((y - self.origin_y) / self.resolution)
        if not (0 <= col < self.width and 0 <= row < self.height):
            raise OutOfBounds(f"({x}, {y}) outside the {self.width}x{self.height} grid")
        return col, row

    def _cell_or_none(self, x: float, y: float) -> tuple[int, int] | None:
        col = math.floor((x - self.origin_x) / self.resolution)
        row = math.floor((y - self.origin_y) / self.resolution)
        if 0 <= col < self.width and 0 <= row < self.height:
            return col, row
        return None

    def integrate_pointcloud(
        self,
        cloud: PointCloud3D,
        pose: RobotPose,
        mark_step: int = DEFAULT_MARK_STEP,
        clear_step: int = DEFAULT_CLEAR_STEP,
    ) -> None:
        """Mark each point's cell and clear the ray cells in front of it.

        Points are in the robot frame of `pose`; out-of-bounds points are
        skipped. Costs saturate at [0, 255].
        """
        if not cloud.points:
            return
        cos_h = math.cos(pose.heading)
        sin_h = math.sin(pose.heading)
        cells = self.cells
        for p in cloud.points:
            mark = int(round(p.intensity * mark_step))
            clear = int(round(p.intensity * clear_step))
            if mark == 0 and clear == 0:
                continue
            wx = pose.x + cos_h * p.x - sin_h * p.y
            wy = pose.y + sin_h * p.x + cos_h * p.y
            end = self._cell_or_none(wx, wy)
            if end is None:
                continue
            start = self._cell_or_none(pose.x, pose.y)
            if clear > 0:
                for col, row in supercover_cells(
                    pose.x, pose.y, wx, wy, self.resolution, self.origin_x, self.origin_y
                ):
                    if (col, row) == end or (col, row) == start:
                        continue
                    if 0 <= col < self.width and 0 <= row < self.height:
                        c = cells[row, col]
                        cells[row, col] = c - clear if c >= clear else 0
            if mark > 0:
                col, row = end
                c = int(cells[row, col]) + mark
                cells[row, col] = 255 if c > 255 else c

    def is_traversable(self, x: float, y: float, robot_radius: float, lethal_threshold: int = LETHAL_THRESHOLD) -> bool:
        """True iff every cell the robot disk overlaps has cost below the
        lethal threshold. A disk reaching past the grid edge is unsafe."""
        if robot_radius < 0:
            raise ConfigError(f"robot_radius must be >= 0, got {robot_radius}")
        r = robot_radius
        if not (
            x - r >= self.origin_x
            and y - r >= self.origin_y
            and x + r <= self.origin_x + self.width * self.resolution
            and y + r <= self.origin_y + self.height * self.resolution
        ):
            return False
        c0 = max(0, math.floor((x - r - self.origin_x) / self.resolution))
        c1 = min(self.width - 1, math.floor((x + r - self.origin_x) / self.resolution))
        r0 = max(0, math.floor((y - r - self.origin_y) / self.resolution))
        r1 = min(self.height - 1, math.floor((y + r - self.origin_y) / self.resolution))
        cols = np.arange(c0, c1 + 1)
        rows = np.arange(r0, r1 + 1)
        # closest point of each cell rectangle to the query point
        cx = np.clip(x, self.origin_x + cols * self.resolution, self.origin_x + (cols + 1) * self.resolution)
        cy = np.clip(y, self.origin_y + rows * self.resolution, self.origin_y + (rows + 1) * self.resolution)
        dist2 = (cx[None, :] - x) ** 2 + (cy[:, None] - y) ** 2
        footprint = dist2 <= r * r + 1e-12
        block = self.cells[r0 : r1 + 1, c0 : c1 + 1]
        return bool(np.all(block[footprint] < lethal_threshold))

    def save(self, path) -> None:
        """PGM raster (cost as gray) plus a JSON sidecar with the geometry."""
        path = Path(path)
        write_pgm(path, self.cells, maxval=255)
        sidecar = {
            "resolution": self.resolution,
            "origin_x": self.origin_x,
            "origin_y": self.origin_y,
            "width": self.width,
            "height": self.height,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, path) -> "Costmap":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        grid = cls(
            resolution=meta["resolution"],
            width=meta["width"],
            height=meta["height"],
            origin_x=meta["origin_x"],
            origin_y=meta["origin_y"],
        )
        cells = read_pnm(path)
        if cells.shape != (grid.height, grid.width):
            raise ConfigError(f"{path}: raster {cells.shape} does not match sidecar")
        grid.cells = cells.astype(np.uint8)
        return grid
