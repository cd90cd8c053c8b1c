"""Pluggable freespace-map producers.

Three backends: file-backed masks, a gradient flood-fill heuristic, and an
external child process speaking the FSEG wire protocol over stdin/stdout.
Every backend returns a binary 224x224 freespace map or raises; never a
partial map.

FSEG frame layout (little-endian):
    magic        4 bytes  b"FSEG"
    kind         1 byte   0 = request (RGB frame), 1 = response (mask)
    payload_len  u32      exact byte count of the following payload
    frame_index  u32      echoed by the responder
Request payload is 224*224*3 interleaved RGB bytes; response payload is
224*224 mask bytes, nonzero = free.
"""

from __future__ import annotations

import os
import select
import shlex
import struct
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import BackendError, BackendTimeout, ConfigError, ProtocolError
from .extraction import mask_from_gray
from .imaging import SOBEL_X, SOBEL_Y, convolve3x3, to_grayscale
from .netpbm import read_pnm

MASK_SIZE = 224
MAGIC = b"FSEG"
KIND_REQUEST = 0
KIND_RESPONSE = 1
HEADER = struct.Struct("<4sBII")
RGB_PAYLOAD = MASK_SIZE * MASK_SIZE * 3
MASK_PAYLOAD = MASK_SIZE * MASK_SIZE
DEFAULT_TIMEOUT_MS = 1000
DEFAULT_FLOOD_THRESHOLD = 30.0
FLOOD_SEED = (112, 223)  # (u, v)


def pack_header(kind: int, payload_len: int, frame_index: int) -> bytes:
    return HEADER.pack(MAGIC, kind, payload_len, frame_index)


def unpack_header(buf: bytes) -> tuple[int, int, int]:
    magic, kind, payload_len, frame_index = HEADER.unpack(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    return kind, payload_len, frame_index


def _check_rgb(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb)
    if rgb.shape != (MASK_SIZE, MASK_SIZE, 3):
        raise BackendError(f"segmenter input must be {MASK_SIZE}x{MASK_SIZE} RGB, got {rgb.shape}")
    return rgb.astype(np.uint8)


class FileBackend:
    """Masks from <index>.pgm files in a directory; value >= 128 is free."""

    name = "file"

    def __init__(self, mask_dir):
        self.mask_dir = Path(mask_dir)
        if not self.mask_dir.is_dir():
            raise ConfigError(f"mask directory {self.mask_dir} does not exist")

    def segment(self, rgb: np.ndarray | None = None, frame_index: int = 0) -> np.ndarray:
        path = self.mask_dir / f"{frame_index}.pgm"
        try:
            img = read_pnm(path)
        except Exception as exc:
            raise BackendError(f"cannot read mask {path}: {exc}") from exc
        if img.ndim != 2 or img.shape != (MASK_SIZE, MASK_SIZE):
            raise BackendError(f"{path}: mask must be {MASK_SIZE}x{MASK_SIZE} gray, got {img.shape}")
        return mask_from_gray(img)

    def close(self):
        pass


class FloodBackend:
    """Heuristic baseline: flood fill from the bottom-center over pixels
    with Sobel gradient magnitude below the threshold.

    Rests on obstacle edges showing up as color variation; the filled
    4-connected region is declared free.
    """

    name = "flood"

    def __init__(self, gradient_threshold: float = DEFAULT_FLOOD_THRESHOLD):
        if gradient_threshold < 0:
            raise ConfigError(f"gradient threshold must be >= 0, got {gradient_threshold}")
        self.gradient_threshold = float(gradient_threshold)

    def segment(self, rgb: np.ndarray, frame_index: int = 0) -> np.ndarray:
        rgb = _check_rgb(rgb)
        gray = to_grayscale(rgb).astype(np.float32)
        sx = convolve3x3(gray, SOBEL_X)
        sy = convolve3x3(gray, SOBEL_Y)
        magnitude = np.hypot(sx, sy)
        below = magnitude < self.gradient_threshold
        seed_u, seed_v = FLOOD_SEED
        if not below[seed_v, seed_u]:
            return np.zeros((MASK_SIZE, MASK_SIZE), dtype=np.uint8)
        labels, _ = ndimage.label(below)  # default structure = 4-connectivity
        return (labels == labels[seed_v, seed_u]).astype(np.uint8)

    def close(self):
        pass


class ExecBackend:
    """External segmenter child speaking FSEG over stdin/stdout."""

    name = "exec"

    def __init__(self, command: str | list, timeout_ms: int = DEFAULT_TIMEOUT_MS):
        self.args = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.args:
            raise ConfigError("empty segmenter command")
        self.timeout_s = timeout_ms / 1000.0
        try:
            self.proc = subprocess.Popen(
                self.args, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL
            )
        except OSError as exc:
            raise BackendError(f"cannot launch {self.args[0]!r}: {exc}") from exc
        os.set_blocking(self.proc.stdin.fileno(), False)
        os.set_blocking(self.proc.stdout.fileno(), False)

    def _fail(self, exc):
        self.close()
        raise exc

    def _write_all(self, data: bytes, deadline: float) -> None:
        fd = self.proc.stdin.fileno()
        view = memoryview(data)
        while view:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._fail(BackendTimeout(f"child did not accept request within {self.timeout_s:.3f}s"))
            _, writable, _ = select.select([], [fd], [], remaining)
            if not writable:
                continue
            try:
                n = os.write(fd, view)
            except BrokenPipeError:
                self._fail(BackendError("segmenter child closed its stdin (exited?)"))
            except BlockingIOError:
                continue
            view = view[n:]

    def _read_exact(self, count: int, deadline: float, what: str) -> bytes:
        fd = self.proc.stdout.fileno()
        chunks = []
        got = 0
        while got < count:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._fail(BackendTimeout(f"child did not answer within {self.timeout_s:.3f}s"))
            readable, _, _ = select.select([fd], [], [], remaining)
            if not readable:
                continue
            try:
                chunk = os.read(fd, count - got)
            except BlockingIOError:
                continue
            if not chunk:
                if got == 0 and what == "header":
                    self._fail(BackendError("segmenter child exited"))
                self._fail(ProtocolError(f"truncated {what}: got {got} of {count} bytes"))
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def segment(self, rgb: np.ndarray, frame_index: int = 0) -> np.ndarray:
        if self.proc is None or self.proc.poll() is not None:
            raise BackendError("segmenter child is not running")
        rgb = _check_rgb(rgb)
        deadline = time.monotonic() + self.timeout_s
        self._write_all(pack_header(KIND_REQUEST, RGB_PAYLOAD, frame_index) + rgb.tobytes(), deadline)
        header = self._read_exact(HEADER.size, deadline, "header")
        try:
            kind, payload_len, echo = unpack_header(header)
        except ProtocolError as exc:
            self._fail(exc)
        if kind != KIND_RESPONSE:
            self._fail(ProtocolError(f"expected response kind {KIND_RESPONSE}, got {kind}"))
        if payload_len != MASK_PAYLOAD:
            self._fail(ProtocolError(f"mask payload must be {MASK_PAYLOAD} bytes, child promised {payload_len}"))
        if echo != frame_index:
            self._fail(ProtocolError(f"frame index mismatch: sent {frame_index}, child echoed {echo}"))
        payload = self._read_exact(MASK_PAYLOAD, deadline, "payload")
        mask = np.frombuffer(payload, dtype=np.uint8).reshape(MASK_SIZE, MASK_SIZE)
        return (mask != 0).astype(np.uint8)

    def close(self):
        proc, self.proc = getattr(self, "proc", None), None
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            if stream:
                try:
                    stream.close()
                except OSError:
                    pass
        if proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        self.close()


def run_child_loop(segment_fn, stdin=None, stdout=None) -> None:
    """Serve FSEG requests until EOF; for implementing segmenter children.

    segment_fn(rgb_u8_224x224x3, frame_index) must return a 224x224 array;
    nonzero cells are sent as free (255).
    """
    src = stdin or sys.stdin.buffer
    dst = stdout or sys.stdout.buffer
    while True:
        header = src.read(HEADER.size)
        if not header:
            return
        if len(header) < HEADER.size:
            raise ProtocolError("truncated request header")
        kind, payload_len, frame_index = unpack_header(header)
        if kind != KIND_REQUEST or payload_len != RGB_PAYLOAD:
            raise ProtocolError(f"unexpected request kind={kind} len={payload_len}")
        payload = src.read(payload_len)
        if len(payload) < payload_len:
            raise ProtocolError("truncated request payload")
        rgb = np.frombuffer(payload, dtype=np.uint8).reshape(MASK_SIZE, MASK_SIZE, 3)
        mask = np.asarray(segment_fn(rgb, frame_index))
        out = np.where(mask != 0, 255, 0).astype(np.uint8)
        dst.write(pack_header(KIND_RESPONSE, MASK_PAYLOAD, frame_index))
        dst.write(out.tobytes())
        dst.flush()


def parse_backend_spec(spec: str, timeout_ms: int = DEFAULT_TIMEOUT_MS):
    """Build a backend from a CLI spec: file:<dir> | flood[:threshold] | exec:<command>."""
    if spec.startswith("file:"):
        return FileBackend(spec[len("file:"):])
    if spec == "flood":
        return FloodBackend()
    if spec.startswith("flood:"):
        try:
            threshold = float(spec[len("flood:"):])
        except ValueError as exc:
            raise ConfigError(f"bad flood threshold in {spec!r}") from exc
        return FloodBackend(threshold)
    if spec.startswith("exec:"):
        return ExecBackend(spec[len("exec:"):], timeout_ms=timeout_ms)
    raise ConfigError(f"unknown segmenter spec {spec!r}")
