"""Homography chaining, tier rescaling, canvas layout and inverse warping."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..graph import MatchGraph
from ..image import sample_bilinear_many

MIN_W = 1e-9


class WarpOutOfRangeError(RuntimeError):
    pass


@dataclass
class WarpedLayer:
    """A warped raster positioned at ``origin`` (x, y) on the canvas."""

    image: np.ndarray
    mask: np.ndarray
    origin: tuple[int, int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def canvas_slices(self) -> tuple[slice, slice]:
        x, y = self.origin
        h, w = self.mask.shape
        return slice(y, y + h), slice(x, x + w)


@dataclass
class CanvasLayout:
    """Canvas geometry for one resolution tier.

    ``homographies[k]`` maps pixels of image ``k`` (at this tier) to canvas
    pixels.  ``offset`` is the reference-frame position of canvas pixel (0, 0).
    """

    size: tuple[int, int]
    offset: tuple[int, int]
    origins: list[tuple[int, int]]
    sizes: list[tuple[int, int]]
    homographies: list[np.ndarray]


def translation(tx: float, ty: float) -> np.ndarray:
    return np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def _normalize(H: np.ndarray) -> np.ndarray:
    return H / H[2, 2]


def chain_to_reference(graph: MatchGraph, subset: list[int], reference: int) -> dict[int, np.ndarray]:
    """Homography from every subset image into the reference frame.

    Walks a maximum-confidence spanning tree grown from ``reference`` with
    Prim's algorithm (ties broken by the lower index pair).
    """
    members = set(subset)
    if reference not in members:
        raise ValueError("reference must belong to the subset")
    to_ref = {reference: np.eye(3)}
    heap: list[tuple[float, int, int, int]] = []

    def push(src):
        for dst in sorted(members - to_ref.keys()):
            res = graph.pair(src, dst)
            if res.H is not None:
                a, b = min(src, dst), max(src, dst)
                heapq.heappush(heap, (-res.confidence, a, b, dst))

    push(reference)
    while heap and len(to_ref) < len(members):
        _, a, b, child = heapq.heappop(heap)
        if child in to_ref:
            continue
        parent = a if child == b else b
        H = graph.pair(a, b).H
        # stored H maps b-frame points into the a frame
        child_to_parent = H if child == b else np.linalg.inv(H)
        to_ref[child] = _normalize(to_ref[parent] @ child_to_parent)
        push(child)
    if len(to_ref) < len(members):
        missing = sorted(members - to_ref.keys())
        raise ValueError(f"images {missing} are not connected to the reference by homographies")
    return to_ref


def rescale_homography(H: np.ndarray, r_src: float, r_dst: float) -> np.ndarray:
    """Re-express ``H`` after its source image is scaled by ``r_src`` and its
    destination frame by ``r_dst``."""
    D = np.diag([r_dst, r_dst, 1.0])
    S_inv = np.diag([1.0 / r_src, 1.0 / r_src, 1.0])
    return _normalize(D @ H @ S_inv)


def scale_homography(H: np.ndarray, s_src: float, s_dst: float) -> np.ndarray:
    """Convert ``H`` between images scaled by ``s_src`` into one between the
    same images scaled by ``s_dst``."""
    if s_src <= 0 or s_dst <= 0:
        raise ValueError("scales must be positive")
    r = s_dst / s_src
    return rescale_homography(H, r, r)


def _corners(w: int, h: int) -> np.ndarray:
    return np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)


def _map_corners(H: np.ndarray, w: int, h: int) -> np.ndarray:
    c = _corners(w, h)
    q = c @ H[:, :2].T + H[:, 2]
    if np.any(q[:, 2] <= MIN_W):
        raise WarpOutOfRangeError("warp out of range")
    return q[:, :2] / q[:, 2:]


def compute_canvas(homographies: list[np.ndarray], dims: list[tuple[int, int]],
                   max_pixels: float | None = None) -> CanvasLayout:
    """Bounding canvas of all warped images.

    ``homographies`` map each image (dims given as ``(w, h)``) into a common
    frame.  The canvas is translated so its top-left pixel is (0, 0).
    """
    lo, hi = [], []
    for H, (w, h) in zip(homographies, dims):
        pts = _map_corners(H, w, h)
        lo.append(np.floor(pts.min(axis=0)).astype(np.int64))
        hi.append(np.ceil(pts.max(axis=0)).astype(np.int64))
    gmin = np.min(lo, axis=0)
    gmax = np.max(hi, axis=0)
    size = (int(gmax[0] - gmin[0] + 1), int(gmax[1] - gmin[1] + 1))
    if max_pixels is not None and size[0] * size[1] > max_pixels:
        raise WarpOutOfRangeError(f"warp out of range: canvas {size[0]}x{size[1]} too large")
    T = translation(-gmin[0], -gmin[1])
    origins = [(int(a[0] - gmin[0]), int(a[1] - gmin[1])) for a in lo]
    sizes = [(int(b[0] - a[0] + 1), int(b[1] - a[1] + 1)) for a, b in zip(lo, hi)]
    hs = [T @ H for H in homographies]
    return CanvasLayout(size, (int(gmin[0]), int(gmin[1])), origins, sizes, hs)


def warp_image(image: np.ndarray, H: np.ndarray, origin: tuple[int, int],
               size: tuple[int, int]) -> WarpedLayer:
    """Inverse-map ``image`` into a ``size`` (w, h) layer placed at ``origin``.

    ``H`` maps source pixels to canvas pixels.  uint8 inputs come back as
    rounded uint8; float inputs stay float.
    """
    w, h = size
    Hinv = np.linalg.inv(H)
    X, Y = np.meshgrid(np.arange(w, dtype=np.float64) + origin[0],
                       np.arange(h, dtype=np.float64) + origin[1])
    q0 = Hinv[0, 0] * X + Hinv[0, 1] * Y + Hinv[0, 2]
    q1 = Hinv[1, 0] * X + Hinv[1, 1] * Y + Hinv[1, 2]
    q2 = Hinv[2, 0] * X + Hinv[2, 1] * Y + Hinv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.where(q2 > MIN_W, q0 / q2, -1.0)
        ys = np.where(q2 > MIN_W, q1 / q2, -1.0)
    # snap float noise so exact integer mappings land on the grid
    xs = np.where(np.abs(xs - np.rint(xs)) < 1e-9, np.rint(xs), xs)
    ys = np.where(np.abs(ys - np.rint(ys)) < 1e-9, np.rint(ys), ys)
    vals, valid = sample_bilinear_many(image, xs, ys)
    if image.dtype == np.uint8:
        vals = np.clip(np.floor(vals + 0.5), 0, 255).astype(np.uint8)
    return WarpedLayer(vals, valid, (int(origin[0]), int(origin[1])))


def warp_all(images: list[np.ndarray], layout: CanvasLayout) -> list[WarpedLayer]:
    return [warp_image(img, H, o, s) for img, H, o, s in
            zip(images, layout.homographies, layout.origins, layout.sizes)]


def canvas_masks(layers: list[WarpedLayer], size: tuple[int, int]) -> np.ndarray:
    """Stack of per-layer warp masks on the full canvas, shape ``(n, h, w)``."""
    out = np.zeros((len(layers), size[1], size[0]), dtype=bool)
    for k, layer in enumerate(layers):
        out[k][layer.canvas_slices()] = layer.mask
    return out


def canvas_size_of(layers: list[WarpedLayer]) -> tuple[int, int]:
    w = max(l.origin[0] + l.mask.shape[1] for l in layers)
    h = max(l.origin[1] + l.mask.shape[0] for l in layers)
    return int(w), int(h)


def corner_error(H: np.ndarray, H_true: np.ndarray, w: int, h: int) -> float:
    """Largest distance between the images of the four corners under two homographies."""
    a = _map_corners(H, w, h)
    b = _map_corners(H_true, w, h)
    return float(math.sqrt(((a - b) ** 2).sum(axis=1).max()))
