"""Border-point extraction from binary freespace maps.

A freespace map is a uint8 (h, w) array, origin top-left, 1 = free,
0 = obstacle/background. Three extraction methods: vertical line
projection, polar ray projection from the bottom-center, and contour
following over the free region.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .netpbm import read_pnm, write_pgm

RAY_STEP = 0.5  # px, polar march increment


@dataclass(frozen=True)
class BorderPoint:
    u: int
    v: int
    method: str  # vertical | polar | contour
    ray_index: int | None = None
    # bottom-row obstacle directly at the sensor: range ~0, not a free/obstacle edge
    min_range: bool = False
    # line ran out of image without a transition (max-range marker mode only)
    range_limit: bool = False


@dataclass(frozen=True)
class Contour:
    """Ordered pixel loop (u, v); hole contours bound free regions from inside."""

    points: list[tuple[int, int]]
    hole: bool = False

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ExtractionConfig:
    method: str = "polar"
    count: int = 64
    contour_stride: int = 4
    emit_range_limits: bool = False

    def __post_init__(self):
        if self.method not in ("vertical", "polar", "contour"):
            raise ConfigError(f"unknown extraction method {self.method!r}")
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}")
        if self.contour_stride < 1:
            raise ConfigError(f"contour_stride must be >= 1, got {self.contour_stride}")


def as_freespace_map(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"freespace map must be 2-D, got shape {mask.shape}")
    if mask.dtype != np.uint8:
        mask = mask.astype(np.uint8)
    return mask


def mask_from_gray(gray: np.ndarray) -> np.ndarray:
    """Threshold a grayscale image: value >= 128 parses as free."""
    return (np.asarray(gray) >= 128).astype(np.uint8)


def read_mask(path) -> np.ndarray:
    img = read_pnm(path)
    if img.ndim != 2:
        raise ValueError(f"{path}: mask must be single-channel PGM")
    return mask_from_gray(img)


def write_mask(path, mask: np.ndarray) -> None:
    write_pgm(path, as_freespace_map(mask) * np.uint8(255))


def border_predicate(mask: np.ndarray, u: int, v: int) -> bool:
    """True iff (u, v) is free and some in-bounds 4-neighbor is an obstacle.

    The image edge does not count as an obstacle.
    """
    mask = as_freespace_map(mask)
    h, w = mask.shape
    if not (0 <= u < w and 0 <= v < h):
        raise IndexError(f"({u}, {v}) outside {w}x{h} map")
    if mask[v, u] != 1:
        return False
    if u > 0 and mask[v, u - 1] == 0:
        return True
    if u < w - 1 and mask[v, u + 1] == 0:
        return True
    if v > 0 and mask[v - 1, u] == 0:
        return True
    if v < h - 1 and mask[v + 1, u] == 0:
        return True
    return False


def vertical_projection(mask: np.ndarray, k: int, emit_range_limits: bool = False) -> list[BorderPoint]:
    """Lowest border point per vertical line.

    Lines sit at columns floor((i + 0.5) * w / k). Scanning upward from the
    bottom row: a bottom-row obstacle yields a minimal-range point; otherwise
    the last free pixel before the first obstacle is emitted; a line that is
    free all the way to the top emits nothing (or a flagged top-row marker
    when emit_range_limits is set).
    """
    mask = as_freespace_map(mask)
    h, w = mask.shape
    if not 1 <= k <= w:
        raise ConfigError(f"line count {k} outside [1, {w}]")
    cols = ((np.arange(k) + 0.5) * w / k).astype(np.intp)
    lines = mask[::-1, cols]  # row 0 = bottom row
    zeros = lines == 0
    has_zero = zeros.any(axis=0)
    first_zero = zeros.argmax(axis=0)
    points: list[BorderPoint] = []
    for i in range(k):
        c = int(cols[i])
        if zeros[0, i]:
            points.append(BorderPoint(c, h - 1, "vertical", i, min_range=True))
        elif has_zero[i]:
            points.append(BorderPoint(c, h - int(first_zero[i]), "vertical", i))
        elif emit_range_limits:
            points.append(BorderPoint(c, 0, "vertical", i, range_limit=True))
    return points


def polar_projection(mask: np.ndarray, k: int, emit_range_limits: bool = False) -> list[BorderPoint]:
    """First free/obstacle transition along rays from the bottom-center.

    Ray j leaves pixel (w//2, h-1) at angle theta = pi*(j+0.5)/k measured
    from the +u axis, marching t in 0.5 px steps through pixels
    (floor(w/2 - t*cos(theta)), h-1 - floor(t*sin(theta))) until it exits
    the image. An obstacle at the origin cell yields a minimal-range point.
    """
    mask = as_freespace_map(mask)
    h, w = mask.shape
    if k < 1:
        raise ConfigError(f"ray count {k} must be >= 1")
    theta = np.pi * (np.arange(k) + 0.5) / k
    t_max = float(np.hypot(w, h)) + 1.0
    t = np.arange(0.0, t_max, RAY_STEP)
    x = np.floor(w / 2 - np.outer(np.cos(theta), t)).astype(np.intp)
    y_up = np.floor(np.outer(np.sin(theta), t)).astype(np.intp)
    v = h - 1 - y_up
    valid = (x >= 0) & (x < w) & (v >= 0)  # v <= h-1 since sin(theta) > 0
    xc = np.clip(x, 0, w - 1)
    vc = np.clip(v, 0, h - 1)
    obstacle = valid & (mask[vc, xc] == 0)
    has_hit = obstacle.any(axis=1)
    first_hit = obstacle.argmax(axis=1)
    points: list[BorderPoint] = []
    for j in range(k):
        if has_hit[j]:
            i0 = int(first_hit[j])
            if i0 == 0:
                points.append(BorderPoint(int(x[j, 0]), int(v[j, 0]), "polar", j, min_range=True))
            else:
                # prefix-valid rays: sample i0-1 is in bounds and free
                points.append(BorderPoint(int(x[j, i0 - 1]), int(v[j, i0 - 1]), "polar", j))
        elif emit_range_limits:
            i_last = int(valid[j].sum()) - 1
            points.append(BorderPoint(int(x[j, i_last]), int(v[j, i_last]), "polar", j, range_limit=True))
    return points


# clockwise / counterclockwise 8-neighborhoods starting East, as (di, dj)
_CW = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
_CCW = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
_CW_INDEX = {d: i for i, d in enumerate(_CW)}
_CCW_INDEX = {d: i for i, d in enumerate(_CCW)}


def _follow_border(f: np.ndarray, i: int, j: int, i2: int, j2: int, nbd: int) -> list[tuple[int, int]]:
    """Suzuki-Abe border following from start pixel (i,j) with initial
    background neighbor (i2,j2). Marks f in place; returns (i,j) pixel loop."""
    start = _CW_INDEX[(i2 - i, j2 - j)]
    i1 = j1 = -1
    for k in range(8):
        di, dj = _CW[(start + k) % 8]
        if f[i + di, j + dj] != 0:
            i1, j1 = i + di, j + dj
            break
    if i1 < 0:
        f[i, j] = -nbd
        return [(i, j)]
    i2, j2 = i1, j1
    i3, j3 = i, j
    points: list[tuple[int, int]] = []
    while True:
        start = _CCW_INDEX[(i2 - i3, j2 - j3)]
        east_zero = False
        i4 = j4 = -1
        for k in range(1, 9):
            di, dj = _CCW[(start + k) % 8]
            if f[i3 + di, j3 + dj] != 0:
                i4, j4 = i3 + di, j3 + dj
                break
            if di == 0 and dj == 1:
                east_zero = True
        points.append((i3, j3))
        if east_zero:
            f[i3, j3] = -nbd
        elif f[i3, j3] == 1:
            f[i3, j3] = nbd
        if i4 == i and j4 == j and i3 == i1 and j3 == j1:
            return points
        i2, j2 = i3, j3
        i3, j3 = i4, j4


def extract_contours(mask: np.ndarray) -> list[Contour]:
    """Trace the borders of the free region, Suzuki-Abe style.

    Free cells are 8-connected, background 4-connected. Each free component
    yields one outer contour plus one contour per hole, as ordered pixel
    loops with 8-adjacent consecutive points.
    """
    mask = as_freespace_map(mask)
    h, w = mask.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int32)
    f[1:-1, 1:-1] = mask
    contours: list[Contour] = []
    nbd = 1
    for i in range(1, h + 1):
        row = f[i]
        nonzero = np.nonzero(row[1 : w + 1])[0]
        for j0 in nonzero:
            j = int(j0) + 1
            fij = row[j]
            if fij == 1 and row[j - 1] == 0:
                hole = False
            elif fij >= 1 and row[j + 1] == 0:
                hole = True
            else:
                continue
            nbd += 1
            traced = _follow_border(f, i, j, i, j - 1 if not hole else j + 1, nbd)
            contours.append(Contour(points=[(pj - 1, pi - 1) for pi, pj in traced], hole=hole))
    return contours


def contour_border_points(mask: np.ndarray, contour_stride: int = 1) -> list[BorderPoint]:
    """Sample contour points, dropping those on the image boundary.

    Boundary rows/columns are field-of-view limits rather than obstacles;
    the surviving points all satisfy border_predicate.
    """
    if contour_stride < 1:
        raise ConfigError(f"contour_stride must be >= 1, got {contour_stride}")
    mask = as_freespace_map(mask)
    h, w = mask.shape
    points: list[BorderPoint] = []
    for idx, contour in enumerate(extract_contours(mask)):
        for u, v in contour.points[::contour_stride]:
            if u == 0 or u == w - 1 or v == 0 or v == h - 1:
                continue
            points.append(BorderPoint(u, v, "contour", idx))
    return points


def extract(mask: np.ndarray, config: ExtractionConfig) -> list[BorderPoint]:
    if config.method == "vertical":
        return vertical_projection(mask, config.count, config.emit_range_limits)
    if config.method == "polar":
        return polar_projection(mask, config.count, config.emit_range_limits)
    return contour_border_points(mask, config.contour_stride)


def write_border_csv(path, points: list[BorderPoint]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "method", "ray_index"])
        for p in points:
            writer.writerow([p.u, p.v, p.method, "" if p.ray_index is None else p.ray_index])


def read_border_csv(path) -> list[BorderPoint]:
    points: list[BorderPoint] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ray = row["ray_index"]
            points.append(
                BorderPoint(int(row["u"]), int(row["v"]), row["method"], int(ray) if ray else None)
            )
    return points
