"""Oriented FAST keypoints with steered binary (BRIEF-style) descriptors.

All functions operate on grayscale float images in ``[0, 1]`` with shape
``(h, w)``.  Descriptors are ``(n, 32)`` uint8 arrays; bit ``k`` of a
descriptor lives in byte ``k // 8`` at position ``k % 8`` counted from the
least significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .image import resample_bilinear, round_half_up

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
CIRCLE = np.array([
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
])

FAST_BORDER = 3
PATCH_RADIUS = 15
DESCRIPTOR_MARGIN = 22
MIN_LEVEL_SIZE = 32
DESCRIPTOR_BYTES = 32


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    octave: int
    response: float
    angle: float


@dataclass(frozen=True, eq=False)
class SamplingPattern:
    """256 point pairs ``(dx1, dy1, dx2, dy2)`` inside a radius-15 disk."""

    pairs: np.ndarray
    seed: int

    def __eq__(self, other):
        if not isinstance(other, SamplingPattern):
            return NotImplemented
        return np.array_equal(self.pairs, other.pairs)


def _clamp_to_disk(pts: np.ndarray, radius: int) -> np.ndarray:
    norm = np.hypot(pts[:, 0], pts[:, 1])
    far = norm > radius
    out = pts.astype(np.float64)
    out[far] *= (radius / norm[far])[:, None]
    return np.trunc(out).astype(np.int64)


@lru_cache(maxsize=8)
def make_pattern(seed: int = 42) -> SamplingPattern:
    rng = np.random.default_rng(seed)
    pairs = np.empty((256, 4), dtype=np.int64)
    filled = 0
    while filled < 256:
        raw = rng.integers(-PATCH_RADIUS, PATCH_RADIUS + 1, size=(256, 4))
        p1 = _clamp_to_disk(raw[:, :2], PATCH_RADIUS)
        p2 = _clamp_to_disk(raw[:, 2:], PATCH_RADIUS)
        ok = np.any(p1 != p2, axis=1)
        cand = np.hstack([p1, p2])[ok]
        take = min(256 - filled, len(cand))
        pairs[filled:filled + take] = cand[:take]
        filled += take
    pairs.setflags(write=False)
    return SamplingPattern(pairs, seed)


def build_pyramid(gray: np.ndarray, n_levels: int = 8,
                  scale_factor: float = 1.2) -> list[tuple[np.ndarray, float]]:
    """Bilinear scale-space pyramid as ``[(level_image, scale), ...]``.

    ``scale`` is the factor that maps level coordinates back to level 0.
    Levels whose smaller side would drop below 32 pixels are omitted.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    if scale_factor <= 1:
        raise ValueError("scale_factor must be > 1")
    h, w = gray.shape
    levels = [(gray, 1.0)]
    for k in range(1, n_levels):
        s = scale_factor ** k
        lw = max(1, round_half_up(w / s))
        lh = max(1, round_half_up(h / s))
        if min(lw, lh) < MIN_LEVEL_SIZE:
            break
        levels.append((resample_bilinear(gray, lw, lh, 1.0 / s), s))
    return levels


# ------------------------------------------------------------------- FAST

def _arc_windows(flags: np.ndarray, arc: int) -> np.ndarray:
    """``win[s]`` is True where circle positions s..s+arc-1 (mod 16) all hold."""
    if arc <= 0:
        return np.ones_like(flags)
    arc = min(arc, 16)
    win = flags
    length = 1
    while length * 2 <= arc:
        win = win & np.roll(win, -length, axis=0)
        length *= 2
    if length < arc:
        # two overlapping windows of `length` cover exactly `arc` positions
        win = win & np.roll(win, -(arc - length), axis=0)
    return win


def fast_segment_test(gray: np.ndarray, threshold: float = 20 / 255,
                      arc: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """Segment test at every pixel, before non-maximum suppression.

    Returns a boolean corner map and a score map of the image's shape.  The
    score is the sum of absolute differences over the qualifying arc.
    """
    h, w = gray.shape
    if min(h, w) < 2 * FAST_BORDER + 1:
        raise ValueError(f"image too small for FAST: {w}x{h}")
    b = FAST_BORDER
    center = gray[b:h - b, b:w - b]
    ring = np.stack([gray[b + dy:h - b + dy, b + dx:w - b + dx] for dx, dy in CIRCLE])
    bright = ring > center + threshold
    dark = ring < center - threshold
    win_b = _arc_windows(bright, arc)
    win_d = _arc_windows(dark, arc)
    is_b = win_b.any(axis=0)
    is_d = win_d.any(axis=0)
    corner = is_b | is_d

    ys, xs = np.nonzero(corner)
    score = np.zeros((h, w))
    if len(ys):
        # positions covered by some qualifying window form the arc
        wins = np.where(is_b[ys, xs][None, :], win_b[:, ys, xs], win_d[:, ys, xs])
        member = np.zeros_like(wins)
        for s in range(16):
            for t in range(arc):
                member[(s + t) % 16] |= wins[s]
        absdiff = np.abs(ring[:, ys, xs] - center[ys, xs][None, :])
        score[ys + b, xs + b] = (absdiff * member).sum(axis=0)

    full = np.zeros((h, w), dtype=bool)
    full[b:h - b, b:w - b] = corner
    return full, score


def detect_fast(gray: np.ndarray, threshold: float = 20 / 255, arc: int = 9,
                nonmax: bool = True) -> list[tuple[int, int, float]]:
    """FAST corners as ``(x, y, score)`` in raster order."""
    corner, score = fast_segment_test(gray, threshold, arc)
    if nonmax:
        peak = ndimage.maximum_filter(score, size=3, mode="constant", cval=0.0)
        corner &= score >= peak
    ys, xs = np.nonzero(corner)
    return [(int(x), int(y), float(score[y, x])) for y, x in zip(ys, xs)]


# ----------------------------------------------------------------- Harris

def _harris_many(gray: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                 block: int, k: float) -> np.ndarray:
    r = block // 2
    offs = np.arange(-r, r + 1)
    gx = xs[:, None, None] + offs[None, None, :]
    gy = ys[:, None, None] + offs[None, :, None]
    ix = (gray[gy, gx + 1] - gray[gy, gx - 1]) / 2.0
    iy = (gray[gy + 1, gx] - gray[gy - 1, gx]) / 2.0
    sxx = (ix * ix).sum(axis=(1, 2))
    syy = (iy * iy).sum(axis=(1, 2))
    sxy = (ix * iy).sum(axis=(1, 2))
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def harris_response(gray: np.ndarray, x: int, y: int, block: int = 7,
                    k: float = 0.04) -> float:
    """Harris measure det(M) - k tr(M)^2 of the block structure tensor at (x, y)."""
    h, w = gray.shape
    r = block // 2 + 1
    if x - r < 0 or y - r < 0 or x + r > w - 1 or y + r > h - 1:
        raise ValueError(f"Harris window at ({x}, {y}) out of bounds")
    return float(_harris_many(gray, np.array([x]), np.array([y]), block, k)[0])


# ------------------------------------------------------------ orientation

@lru_cache(maxsize=4)
def _disk_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(-radius, radius + 1)
    u, v = np.meshgrid(r, r)
    inside = u * u + v * v <= radius * radius
    return u[inside], v[inside]


def _orientations(gray: np.ndarray, xs: np.ndarray, ys: np.ndarray, radius: int) -> np.ndarray:
    u, v = _disk_offsets(radius)
    vals = gray[ys[:, None] + v[None, :], xs[:, None] + u[None, :]]
    m10 = (vals * u).sum(axis=1)
    m01 = (vals * v).sum(axis=1)
    ang = np.arctan2(m01, m10)
    ang = np.where(ang < 0, ang + 2 * np.pi, ang)
    # atan2 can round up to exactly 2*pi for tiny negative angles
    return np.where(ang >= 2 * np.pi, 0.0, ang)


def orientation(gray: np.ndarray, x: float, y: float, radius: int = PATCH_RADIUS) -> float:
    """Intensity-centroid angle in ``[0, 2*pi)``."""
    h, w = gray.shape
    xi, yi = int(round(x)), int(round(y))
    if xi - radius < 0 or yi - radius < 0 or xi + radius > w - 1 or yi + radius > h - 1:
        raise ValueError(f"orientation disk at ({x}, {y}) out of bounds")
    return float(_orientations(gray, np.array([xi]), np.array([yi]), radius)[0])


# ------------------------------------------------------------- descriptor

def _descriptors(gray: np.ndarray, xs: np.ndarray, ys: np.ndarray, angles: np.ndarray,
                 pattern: SamplingPattern) -> np.ndarray:
    p = pattern.pairs.astype(np.float64)
    c = np.cos(angles)[:, None]
    s = np.sin(angles)[:, None]
    x = xs.astype(np.float64)[:, None]
    y = ys.astype(np.float64)[:, None]

    def sample(dx, dy):
        px = np.floor(x + c * dx - s * dy + 0.5).astype(np.intp)
        py = np.floor(y + s * dx + c * dy + 0.5).astype(np.intp)
        return gray[py, px]

    bits = sample(p[:, 0], p[:, 1]) < sample(p[:, 2], p[:, 3])
    return np.packbits(bits, axis=1, bitorder="little")


def compute_descriptor(gray: np.ndarray, kp: Keypoint,
                       pattern: SamplingPattern | None = None) -> np.ndarray:
    """32-byte steered descriptor for ``kp``.

    ``gray`` is the keypoint's own pyramid level and ``kp.x, kp.y`` are
    coordinates in that level.
    """
    pattern = pattern or make_pattern()
    h, w = gray.shape
    xi, yi = int(round(kp.x)), int(round(kp.y))
    m = DESCRIPTOR_MARGIN
    if xi < m or yi < m or xi > w - 1 - m or yi > h - 1 - m:
        raise ValueError(f"insufficient descriptor margin at ({kp.x}, {kp.y})")
    return _descriptors(gray, np.array([xi]), np.array([yi]), np.array([kp.angle]), pattern)[0]


# ------------------------------------------------------------------ driver

def detect_and_compute(gray: np.ndarray, max_features: int = 500, n_levels: int = 8,
                       scale_factor: float = 1.2, fast_threshold: float = 20 / 255,
                       pattern: SamplingPattern | None = None
                       ) -> tuple[list[Keypoint], np.ndarray]:
    """Detect up to ``max_features`` oriented keypoints and their descriptors.

    Keypoint coordinates are reported in the frame of ``gray``.
    """
    h, w = gray.shape
    if min(h, w) < 64:
        raise ValueError(f"image too small for feature extraction: {w}x{h}")
    pattern = pattern or make_pattern()
    levels = build_pyramid(gray, n_levels, scale_factor)
    areas = np.array([lv.shape[0] * lv.shape[1] for lv, _ in levels], dtype=np.float64)
    budgets = np.ceil(max_features * areas / areas.sum()).astype(int)

    m = DESCRIPTOR_MARGIN
    cand = []  # (octave, level xs, level ys, responses)
    for octave, (level, scale) in enumerate(levels):
        lh, lw = level.shape
        pts = detect_fast(level, fast_threshold)
        if not pts:
            continue
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        keep = (xs >= m) & (ys >= m) & (xs <= lw - 1 - m) & (ys <= lh - 1 - m)
        xs, ys = xs[keep], ys[keep]
        if len(xs) == 0:
            continue
        resp = _harris_many(level, xs, ys, 7, 0.04)
        pos = resp > 0
        xs, ys, resp = xs[pos], ys[pos], resp[pos]
        order = np.lexsort((xs, ys, -resp))[:budgets[octave]]
        cand.append((octave, xs[order], ys[order], resp[order]))

    if not cand:
        return [], np.zeros((0, DESCRIPTOR_BYTES), dtype=np.uint8)

    octs = np.concatenate([np.full(len(c[1]), c[0]) for c in cand])
    lx = np.concatenate([c[1] for c in cand])
    ly = np.concatenate([c[2] for c in cand])
    resp = np.concatenate([c[3] for c in cand])
    scales = np.array([levels[o][1] for o in octs])
    gx = lx * scales
    gy = ly * scales
    order = np.lexsort((octs, gx, gy, -resp))[:max_features]

    keypoints: list[Keypoint | None] = [None] * len(order)
    descs = np.zeros((len(order), DESCRIPTOR_BYTES), dtype=np.uint8)
    for octave in np.unique(octs[order]):
        rows = np.nonzero(octs[order] == octave)[0]
        idx = order[rows]
        level = levels[octave][0]
        ang = _orientations(level, lx[idx], ly[idx], PATCH_RADIUS)
        descs[rows] = _descriptors(level, lx[idx], ly[idx], ang, pattern)
        for r, i, a in zip(rows, idx, ang):
            keypoints[r] = Keypoint(float(gx[i]), float(gy[i]), int(octave), float(resp[i]), float(a))
    return keypoints, descs


def keypoint_coords(keypoints: list[Keypoint]) -> np.ndarray:
    if not keypoints:
        return np.zeros((0, 2))
    return np.array([(k.x, k.y) for k in keypoints], dtype=np.float64)
