"""Pixel buffers, netpbm I/O, luminance conversion and resampling.

Color rasters are carried as :class:`Image` (8-bit, 1 or 3 channels, RGB
order).  Grayscale working images are plain ``float64`` arrays of shape
``(h, w)`` with values in ``[0, 1]``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageFormatError(ValueError):
    """Base class for unreadable netpbm files."""


class MalformedHeaderError(ImageFormatError):
    pass


class UnsupportedMaxvalError(ImageFormatError):
    pass


class TruncatedPayloadError(ImageFormatError):
    pass


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit raster with shape ``(height, width, channels)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, 1|3) raster, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            raise TypeError(f"expected uint8 samples, got {px.dtype}")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_bytes(cls, width: int, height: int, channels: int, data: bytes) -> "Image":
        if len(data) != width * height * channels:
            raise ValueError("data length must equal width*height*channels")
        arr = np.frombuffer(bytes(data), dtype=np.uint8)
        return cls(arr.reshape(height, width, channels).copy())

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Image(w={self.width}, h={self.height}, c={self.channels})"


# ---------------------------------------------------------------- netpbm I/O

def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeaderError("malformed header: unexpected end of header")
    return buf[start:pos], pos


def load_image(path: str | os.PathLike) -> Image:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image file: {path}")
    with open(path, "rb") as fh:
        buf = fh.read()

    magic = buf[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MalformedHeaderError(f"malformed header: bad magic {magic!r} in {path}")

    pos = 2
    if pos >= len(buf) or not (buf[pos:pos + 1].isspace() or buf[pos:pos + 1] == b"#"):
        raise MalformedHeaderError(f"malformed header in {path}")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise MalformedHeaderError(f"malformed header: non-integer field {tok!r} in {path}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"malformed header: bad dimensions {width}x{height} in {path}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"unsupported maxval {maxval} in {path}")
    # exactly one whitespace byte separates header and payload
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise MalformedHeaderError(f"malformed header: missing separator in {path}")
    pos += 1

    need = width * height * channels
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise TruncatedPayloadError(
            f"truncated payload in {path}: expected {need} bytes, found {len(payload)}")
    return Image.from_bytes(width, height, channels, payload)


def save_image(image: Image, path: str | os.PathLike) -> None:
    magic = b"P5" if image.channels == 1 else b"P6"
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.data)


# ----------------------------------------------------------- color / sampling

def to_gray(image: Image) -> np.ndarray:
    """Luminance in [0, 1] as a ``(h, w)`` float array."""
    px = image.pixels.astype(np.float64)
    if image.channels == 1:
        gray = px[:, :, 0] / 255.0
    else:
        gray = (px @ LUMA_WEIGHTS) / 255.0
    return np.clip(gray, 0.0, 1.0)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resample_bilinear(arr: np.ndarray, out_w: int, out_h: int, scale: float) -> np.ndarray:
    """Bilinear resampling where output pixel (u, v) reads input (u/scale, v/scale).

    Source coordinates are clamped to the input grid.  Works on ``(h, w)`` and
    ``(h, w, c)`` arrays and always returns float64.
    """
    h, w = arr.shape[:2]
    xs = np.clip(np.arange(out_w) / scale, 0.0, w - 1)
    ys = np.clip(np.arange(out_h) / scale, 0.0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 3:
        fx = fx[:, None]
        fy_col = fy[:, None, None]
    else:
        fy_col = fy[:, None]
    top = a[y0][:, x0] * (1 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1 - fx) + a[y1][:, x1] * fx
    return top * (1 - fy_col) + bot * fy_col


def resize_to_megapix(image: Image, megapix: float) -> tuple[Image, float]:
    """Downscale so the image holds at most ``megapix`` million pixels.

    ``megapix <= 0`` disables resizing.  Never upscales.
    """
    if megapix <= 0:
        return image, 1.0
    w, h = image.width, image.height
    scale = min(1.0, math.sqrt(megapix * 1e6 / (w * h)))
    if scale >= 1.0:
        return image, 1.0
    out_w = max(1, round_half_up(w * scale))
    out_h = max(1, round_half_up(h * scale))
    res = resample_bilinear(image.pixels, out_w, out_h, scale)
    return Image(np.clip(np.floor(res + 0.5), 0, 255).astype(np.uint8)), scale


def bilinear_sample(gray: np.ndarray, x: float, y: float) -> float | None:
    """Interpolated value at (x, y), or None outside ``[0, w-1] x [0, h-1]``."""
    h, w = gray.shape[:2]
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        return None
    x0 = min(int(math.floor(x)), w - 1)
    y0 = min(int(math.floor(y)), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = gray[y0, x0] * (1 - fx) + gray[y0, x1] * fx
    bot = gray[y1, x0] * (1 - fx) + gray[y1, x1] * fx
    return float(top * (1 - fy) + bot * fy)


def sample_bilinear_many(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Vectorized :func:`bilinear_sample` over coordinate arrays.

    Returns ``(values, valid)``; ``values`` has a trailing channel axis when
    ``arr`` is 3-D and is zero where ``valid`` is False.
    """
    h, w = arr.shape[:2]
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xc = np.where(valid, xs, 0.0)
    yc = np.where(valid, ys, 0.0)
    x0 = np.minimum(np.floor(xc).astype(np.intp), w - 1)
    y0 = np.minimum(np.floor(yc).astype(np.intp), h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = a[y0, x0] * (1 - fx) + a[y0, x1] * fx
    bot = a[y1, x0] * (1 - fx) + a[y1, x1] * fx
    vals = top * (1 - fy) + bot * fy
    if a.ndim == 3:
        vals = np.where(valid[..., None], vals, 0.0)
    else:
        vals = np.where(valid, vals, 0.0)
    return vals, valid
