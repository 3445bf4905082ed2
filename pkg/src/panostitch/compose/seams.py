"""Voronoi-style seam assignment from border distance transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .warp import CanvasLayout, WarpedLayer, canvas_masks, canvas_size_of


class EmptyCoverageError(ValueError):
    pass


@dataclass
class SeamMasks:
    """Ownership map of the canvas: ``owner[y, x]`` is a layer index or -1."""

    owner: np.ndarray

    def canvas_mask(self, k: int) -> np.ndarray:
        return self.owner == k

    def layer_mask(self, k: int, layer: WarpedLayer) -> np.ndarray:
        """Seam mask of layer ``k`` cropped to the layer's bounds."""
        return self.owner[layer.canvas_slices()] == k

    @property
    def count(self) -> int:
        return int(self.owner.max()) + 1 if self.owner.size else 0


def chessboard_distance(mask: np.ndarray, pad: bool = True) -> np.ndarray:
    """Chessboard distance from each ``mask`` pixel to the nearest pixel outside it.

    With ``pad`` the area beyond the array edge counts as outside.
    """
    if pad:
        padded = np.pad(mask, 1, constant_values=False)
        return ndimage.distance_transform_cdt(padded, metric="chessboard")[1:-1, 1:-1]
    if mask.all():
        return np.full(mask.shape, np.iinfo(np.int32).max, dtype=np.int32)
    return ndimage.distance_transform_cdt(mask, metric="chessboard")


def find_seams(layers: list[WarpedLayer], size: tuple[int, int] | None = None) -> SeamMasks:
    """Give every covered canvas pixel to the layer it lies deepest inside.

    Depth is the chessboard distance to the layer's mask border; ties go to
    the lower layer index.
    """
    if not layers:
        raise EmptyCoverageError("no layers")
    size = size or canvas_size_of(layers)
    masks = canvas_masks(layers, size)
    covered = masks.any(axis=0)
    if not covered.any():
        raise EmptyCoverageError("layers cover no canvas pixel")
    depth = np.stack([chessboard_distance(m) for m in masks])
    owner = np.argmax(depth, axis=0).astype(np.int32)
    owner[~covered] = -1
    return SeamMasks(owner)


def upscale_seams(low: SeamMasks, low_layout: CanvasLayout, low_scale: float,
                  final_layers: list[WarpedLayer], final_layout: CanvasLayout,
                  final_scale: float) -> SeamMasks:
    """Carry low-tier seams to the final tier by nearest-neighbour lookup.

    Scales are the reference image's tier scales.  Final-tier pixels whose
    looked-up owner does not cover them are re-assigned to the covering layer
    with the nearest assigned pixel (ties: lower index).
    """
    fw, fh = final_layout.size
    masks = canvas_masks(final_layers, final_layout.size)
    covered = masks.any(axis=0)

    ratio = low_scale / final_scale
    X = (np.arange(fw) + final_layout.offset[0]) * ratio - low_layout.offset[0]
    Y = (np.arange(fh) + final_layout.offset[1]) * ratio - low_layout.offset[1]
    lx = np.floor(X + 0.5).astype(np.int64)
    ly = np.floor(Y + 0.5).astype(np.int64)
    lh, lw = low.owner.shape
    okx = (lx >= 0) & (lx < lw)
    oky = (ly >= 0) & (ly < lh)
    owner = np.full((fh, fw), -1, dtype=np.int32)
    sub = low.owner[np.ix_(np.clip(ly, 0, lh - 1), np.clip(lx, 0, lw - 1))]
    inside = oky[:, None] & okx[None, :]
    owner[inside] = sub[inside]

    # keep an owner only where its own final-tier warp covers the pixel
    n = len(final_layers)
    valid = owner >= 0
    own_cov = np.zeros_like(valid)
    own_cov[valid] = masks[owner[valid], np.nonzero(valid)[0], np.nonzero(valid)[1]]
    owner[~own_cov] = -1

    todo = covered & (owner < 0)
    if todo.any():
        big_far, big_none = 1e9, 2e9
        cost = np.empty((n, fh, fw))
        for k in range(n):
            assigned = owner == k
            if assigned.any():
                d = ndimage.distance_transform_cdt(~assigned, metric="chessboard").astype(np.float64)
            else:
                d = np.full((fh, fw), big_far)
            cost[k] = np.where(masks[k], d, big_none)
        pick = np.argmin(cost, axis=0).astype(np.int32)
        owner[todo] = pick[todo]
    return SeamMasks(owner)


def check_partition(seams: SeamMasks, layers: list[WarpedLayer],
                    size: tuple[int, int] | None = None) -> bool:
    """True iff seam masks are disjoint, inside their warp masks and tile the coverage."""
    size = size or (seams.owner.shape[1], seams.owner.shape[0])
    masks = canvas_masks(layers, size)
    covered = masks.any(axis=0)
    owner = seams.owner
    if owner.shape != covered.shape:
        return False
    if not np.array_equal(owner >= 0, covered):
        return False
    ys, xs = np.nonzero(owner >= 0)
    if not masks[owner[ys, xs], ys, xs].all():
        return False
    per_layer = [seams.canvas_mask(k) for k in range(len(layers))]
    total = np.sum(per_layer, axis=0)
    return bool(np.all(total[covered] == 1) and np.all(total[~covered] == 0))
