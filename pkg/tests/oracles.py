"""Brute-force reference implementations used as independent oracles.

These deliberately do not call into the package: quadruple-loop
convolutions, pixel enumeration, line sampling. Slow and obvious.
"""

import numpy as np


def naive_convolve3x3(img, kernel):
    """Quadruple loop, replicate padding, sliding dot product."""
    img = np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    acc += kernel[dy + 1, dx + 1] * img[yy, xx]
            out[y, x] = acc
    return out


def naive_downsample2x(plane):
    plane = np.asarray(plane, dtype=np.float64)
    h2, w2 = plane.shape[0] // 2, plane.shape[1] // 2
    out = np.zeros((h2, w2))
    for y in range(h2):
        for x in range(w2):
            out[y, x] = plane[2 * y : 2 * y + 2, 2 * x : 2 * x + 2].mean()
    return out


def naive_blur_beta(gray):
    """The blur equation evaluated term by term in float64."""
    lap = naive_convolve3x3(gray, [[0, -1, 0], [-1, 4, -1], [0, -1, 0]])
    mag = np.abs(lap)
    lbar = mag.sum() / mag.size
    return float(((mag - lbar) ** 2).sum())


def enumerate_iou(pred, gt, value):
    inter = union = 0
    for p, g in zip(np.asarray(pred).ravel(), np.asarray(gt).ravel()):
        if p == value and g == value:
            inter += 1
        if p == value or g == value:
            union += 1
    return 1.0 if union == 0 else inter / union


def sample_line_cells(ax, ay, bx, by, resolution, origin_x=0.0, origin_y=0.0):
    """Cells touched by the segment, found by dense sampling at 0.1*res."""
    length = np.hypot(bx - ax, by - ay)
    n = max(2, int(np.ceil(length / (0.1 * resolution))) + 1)
    cells = []
    seen = set()
    for t in np.linspace(0.0, 1.0, n):
        x = ax + t * (bx - ax)
        y = ay + t * (by - ay)
        cell = (int(np.floor((x - origin_x) / resolution)), int(np.floor((y - origin_y) / resolution)))
        if cell not in seen:
            seen.add(cell)
            cells.append(cell)
    return cells


def blobby_mask(rng, h=224, w=224, coarse=14, threshold=0.5):
    """Random smooth binary mask: low-res noise upsampled then thresholded."""
    noise = rng.random((coarse, coarse))
    reps = (h + coarse - 1) // coarse
    big = np.repeat(np.repeat(noise, reps, axis=0), reps, axis=1)[:h, :w]
    # cheap smoothing to round the block edges
    big = (
        big
        + np.roll(big, 3, axis=0)
        + np.roll(big, -3, axis=0)
        + np.roll(big, 3, axis=1)
        + np.roll(big, -3, axis=1)
    ) / 5.0
    return (big > threshold).astype(np.uint8)
