"""Binary netpbm reader/writer (PGM P5 grayscale, PPM P6 color).

Images are numpy arrays: gray (h, w) and RGB (h, w, 3), uint8 for
maxval <= 255, uint16 otherwise. 16-bit rasters are big-endian on disk
per the netpbm format.
"""

from __future__ import annotations

import numpy as np

from .errors import FsnavError


class NetpbmError(FsnavError):
    """Malformed or unsupported netpbm file."""


def _read_header_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated numeric tokens, skipping # comments.

    Returns the tokens and the offset of the first raster byte (one
    whitespace character after the last token).
    """
    tokens: list[int] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise NetpbmError("truncated header")
        try:
            tokens.append(int(data[start:i]))
        except ValueError as exc:
            raise NetpbmError(f"bad header token {data[start:i]!r}") from exc
    if i >= n:
        raise NetpbmError("missing raster")
    return tokens, i + 1  # single whitespace terminates the header


def read_pnm(path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file.

    Returns (h, w) for PGM, (h, w, 3) for PPM; dtype uint8 or uint16.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise NetpbmError(f"unsupported magic {magic!r} (only binary P5/P6)")
    (width, height, maxval), offset = _read_header_tokens(data[2:], 3)
    offset += 2
    if width <= 0 or height <= 0:
        raise NetpbmError(f"bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise NetpbmError(f"bad maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    if raster.size < count:
        raise NetpbmError("raster shorter than header promises")
    if channels == 3:
        img = raster.reshape(height, width, 3)
    else:
        img = raster.reshape(height, width)
    if dtype.str == ">u2":
        img = img.astype(np.uint16)
    return np.ascontiguousarray(img)


def write_pgm(path, img: np.ndarray, maxval: int | None = None) -> None:
    """Write a grayscale array as binary PGM (P5)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise NetpbmError(f"PGM needs a 2-D array, got shape {img.shape}")
    if maxval is None:
        maxval = 65535 if img.dtype.itemsize > 1 else 255
    h, w = img.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        raster = img.astype(">u2").tobytes()
    else:
        raster = img.astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster)


def write_ppm(path, img: np.ndarray) -> None:
    """Write an RGB uint8 array as binary PPM (P6)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise NetpbmError(f"PPM needs an (h, w, 3) array, got shape {img.shape}")
    h, w, _ = img.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.astype(np.uint8).tobytes())
