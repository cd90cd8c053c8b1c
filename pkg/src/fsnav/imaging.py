"""Gradient kernels, frame normalization, and blur-factor computation.

Images are numpy arrays, origin top-left, row-major: RGB uint8 (h, w, 3),
grayscale uint8 (h, w), float planes float32 (h, w).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmall, InvalidChannels
from .netpbm import write_pgm

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32)
SOBEL_Y = SOBEL_X.T.copy()
# Positive-center form; the same kernel drives the blur factor.
LAPLACIAN = np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], dtype=np.float32)

NETWORK_INPUT_SIZE = 224


@dataclass(frozen=True)
class GradientStack:
    """Sobel-X, Sobel-Y and Laplacian planes at half the source resolution."""

    sobel_x: np.ndarray
    sobel_y: np.ndarray
    laplacian: np.ndarray

    @property
    def width(self) -> int:
        return self.sobel_x.shape[1]

    @property
    def height(self) -> int:
        return self.sobel_x.shape[0]


@dataclass(frozen=True)
class BlurFactor:
    """Dispersion of the Laplacian magnitude; low beta means blurred."""

    beta: float
    beta_mean_abs: float


@dataclass(frozen=True)
class CropMeta:
    """Geometry of the bottom-crop + resize done by preprocess_frame.

    Maps network-input coordinates back to source pixels:
    u_src = u * scale_x, v_src = offset_y + v * scale_y.
    """

    src_width: int
    src_height: int
    offset_y: int
    crop_height: int
    target: int = NETWORK_INPUT_SIZE

    @property
    def scale_x(self) -> float:
        return self.src_width / self.target

    @property
    def scale_y(self) -> float:
        return self.crop_height / self.target

    @classmethod
    def identity(cls, size: int = NETWORK_INPUT_SIZE) -> "CropMeta":
        """Metadata for a frame already at network size (no crop, no resize)."""
        return cls(src_width=size, src_height=size, offset_y=0, crop_height=size, target=size)

    def to_dict(self) -> dict:
        return {
            "src_width": self.src_width,
            "src_height": self.src_height,
            "offset_y": self.offset_y,
            "crop_height": self.crop_height,
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CropMeta":
        return cls(**{k: int(d[k]) for k in ("src_width", "src_height", "offset_y", "crop_height", "target")})


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luminance: Y = round(0.299 R + 0.587 G + 0.114 B)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidChannels(f"expected (h, w, 3) RGB, got shape {rgb.shape}")
    y = (
        0.299 * rgb[:, :, 0].astype(np.float64)
        + 0.587 * rgb[:, :, 1].astype(np.float64)
        + 0.114 * rgb[:, :, 2].astype(np.float64)
    )
    return np.clip(np.round(y), 0, 255).astype(np.uint8)


def convolve3x3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """3x3 sliding-window filter with replicate edge padding.

    The kernel is applied as a sliding dot product (no flip), so output
    size equals input size. float32 arithmetic.
    """
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 2:
        raise InvalidChannels(f"expected a single-channel plane, got shape {img.shape}")
    h, w = img.shape
    if h < 3 or w < 3:
        raise ImageTooSmall(f"need at least 3x3, got {w}x{h}")
    kernel = np.asarray(kernel, dtype=np.float32)
    if kernel.shape != (3, 3):
        raise ValueError(f"kernel must be 3x3, got {kernel.shape}")
    p = np.pad(img, 1, mode="edge")
    out = np.zeros((h, w), dtype=np.float32)
    for dy in range(3):
        for dx in range(3):
            k = kernel[dy, dx]
            if k != 0.0:
                out += k * p[dy : dy + h, dx : dx + w]
    return out


def _downsample2x(plane: np.ndarray) -> np.ndarray:
    """2x2 area average; odd trailing row/column is dropped."""
    h, w = plane.shape
    h2, w2 = h // 2, w // 2
    v = plane[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2)
    return v.mean(axis=(1, 3))


def gradient_stack(gray: np.ndarray) -> GradientStack:
    """Sobel-X, Sobel-Y and Laplacian responses, each 2x2 area-averaged
    to half resolution (224x224 in, 112x112 out)."""
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise InvalidChannels(f"expected grayscale (h, w), got shape {gray.shape}")
    plane = gray.astype(np.float32)
    return GradientStack(
        sobel_x=_downsample2x(convolve3x3(plane, SOBEL_X)),
        sobel_y=_downsample2x(convolve3x3(plane, SOBEL_Y)),
        laplacian=_downsample2x(convolve3x3(plane, LAPLACIAN)),
    )


def blur_factor(gray: np.ndarray, normalized: bool = False) -> BlurFactor:
    """Blur factor beta from the Laplacian magnitude.

    L = laplacian response (replicate edges), Lbar = mean |L|,
    beta = sum((|L| - Lbar)^2). The sum is unnormalized; pass
    normalized=True to divide by the pixel count (true variance).
    Accumulation in float64.
    """
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise InvalidChannels(f"expected grayscale (h, w), got shape {gray.shape}")
    lap = convolve3x3(gray.astype(np.float32), LAPLACIAN)
    mag = np.abs(lap).astype(np.float64)
    mean_abs = float(mag.mean())
    dev = mag - mean_abs
    beta = float(np.sum(dev * dev))
    if normalized:
        beta /= mag.size
    return BlurFactor(beta=beta, beta_mean_abs=mean_abs)


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment (float32 output)."""
    src = np.asarray(img, dtype=np.float32)
    h, w = src.shape[:2]
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).astype(np.float32)
    fx = (xs - x0).astype(np.float32)
    if src.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
        a = src[y0][:, x0]
        b = src[y0][:, x1]
        c = src[y1][:, x0]
        d = src[y1][:, x1]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
        a = src[np.ix_(y0, x0)]
        b = src[np.ix_(y0, x1)]
        c = src[np.ix_(y1, x0)]
        d = src[np.ix_(y1, x1)]
    top = a + (b - a) * fx
    bot = c + (d - c) * fx
    return top + (bot - top) * fy


def preprocess_frame(rgb: np.ndarray, target: int = NETWORK_INPUT_SIZE) -> tuple[np.ndarray, CropMeta]:
    """Crop to the bottom 2/3, resize to target x target, scale to [-1, 1].

    Returns the float32 (target, target, 3) tensor and the crop metadata
    needed to map network coordinates back to source pixels.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidChannels(f"expected (h, w, 3) RGB, got shape {rgb.shape}")
    h, w = rgb.shape[:2]
    if h < 3 or w < 1:
        raise ImageTooSmall(f"cannot crop bottom 2/3 of a {w}x{h} frame")
    offset_y = h // 3
    cropped = rgb[offset_y:, :, :]
    crop_h = cropped.shape[0]
    if crop_h < 1:
        raise ImageTooSmall(f"empty crop from a {w}x{h} frame")
    resized = _bilinear_resize(cropped, target, target)
    tensor = resized * np.float32(2.0 / 255.0) - np.float32(1.0)
    meta = CropMeta(src_width=w, src_height=h, offset_y=offset_y, crop_height=crop_h, target=target)
    return tensor, meta


def normalize_only(rgb: np.ndarray) -> tuple[np.ndarray, CropMeta]:
    """Scale an already network-sized frame to [-1, 1] with identity metadata."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidChannels(f"expected (h, w, 3) RGB, got shape {rgb.shape}")
    h, w = rgb.shape[:2]
    if h != w:
        raise ImageTooSmall(f"identity preprocessing needs a square frame, got {w}x{h}")
    tensor = rgb.astype(np.float32) * np.float32(2.0 / 255.0) - np.float32(1.0)
    return tensor, CropMeta.identity(h)


def save_gradient_planes(stack: GradientStack, out_dir, stem: str = "gradients") -> dict:
    """Write the three planes as 16-bit PGMs.

    Each plane is mapped affinely [-m, m] -> [0, 65535] with m = max |value|
    (m = 1 for an all-zero plane); the scales land in <stem>.json so the
    planes can be decoded.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sidecar = {"width": stack.width, "height": stack.height, "planes": {}}
    for name, plane in (
        ("sobel_x", stack.sobel_x),
        ("sobel_y", stack.sobel_y),
        ("laplacian", stack.laplacian),
    ):
        m = float(np.max(np.abs(plane)))
        scale = m if m > 0.0 else 1.0
        encoded = np.round((plane / scale + 1.0) * 32767.5).astype(np.uint16)
        write_pgm(out_dir / f"{stem}_{name}.pgm", encoded, maxval=65535)
        sidecar["planes"][name] = {"file": f"{stem}_{name}.pgm", "max_abs": m}
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps(sidecar, indent=2))
    return sidecar
