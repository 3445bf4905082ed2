"""Feather blending and the seam-line / weight-map overlays."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..image import Image
from .seams import SeamMasks
from .warp import WarpedLayer, canvas_masks

PALETTE = np.array([
    (255, 0, 0), (0, 255, 0), (0, 0, 255),
    (255, 255, 0), (255, 0, 255), (0, 255, 255),
], dtype=np.float64)

_FAR = 1e9


def _distance_to(region: np.ndarray) -> np.ndarray:
    """Chessboard distance from every pixel to the nearest ``region`` pixel."""
    if not region.any():
        return np.full(region.shape, _FAR)
    return ndimage.distance_transform_cdt(~region, metric="chessboard").astype(np.float64)


def feather_weights(layers: list[WarpedLayer], seams: SeamMasks,
                    feather_radius: float = 15) -> np.ndarray:
    """Per-layer canvas weights, shape ``(n, h, w)``.

    Weights ramp linearly with the signed chessboard distance to the seam:
    0.5 on either side of the seam line, 1 at ``feather_radius`` inside the
    layer's own region and 0 at ``feather_radius`` outside it.  Weights are
    zero wherever the layer has no valid pixel.
    """
    owner = seams.owner
    h, w = owner.shape
    masks = canvas_masks(layers, (w, h))
    R = float(max(feather_radius, 1e-9))
    out = np.zeros((len(layers), h, w))
    for k in range(len(layers)):
        own = owner == k
        other = (owner >= 0) & ~own
        d_in = _distance_to(other)
        d_out = _distance_to(own)
        signed = np.where(own, d_in - 0.5, 0.5 - d_out)
        out[k] = np.clip((R + signed) / (2 * R), 0.0, 1.0) * masks[k]
    return out


def _round_u8(x: np.ndarray) -> np.ndarray:
    # values are non-negative, so half-up equals half-away-from-zero
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def _canvas_colors(layers: list[WarpedLayer], size: tuple[int, int]) -> np.ndarray:
    w, h = size
    # gray layers broadcast when mixed with color ones
    c = max(layer.image.shape[2] if layer.image.ndim == 3 else 1 for layer in layers)
    out = np.zeros((len(layers), h, w, c))
    for k, layer in enumerate(layers):
        img = layer.image if layer.image.ndim == 3 else layer.image[:, :, None]
        out[k][layer.canvas_slices()] = img
    return out


def blend_feather(layers: list[WarpedLayer], seams: SeamMasks,
                  feather_radius: float = 15) -> Image:
    """Weighted average of the layers under :func:`feather_weights`."""
    h, w = seams.owner.shape
    weights = feather_weights(layers, seams, feather_radius)
    colors = _canvas_colors(layers, (w, h))
    total = weights.sum(axis=0)
    acc = np.einsum("khw,khwc->hwc", weights, colors)
    covered = seams.owner >= 0
    result = np.zeros_like(acc)
    pos = total > 0
    result[pos] = acc[pos] / total[pos][:, None]
    # coverage without weight falls back to the seam owner's value
    fallback = covered & ~pos
    if fallback.any():
        ys, xs = np.nonzero(fallback)
        result[ys, xs] = colors[seams.owner[ys, xs], ys, xs]
    result[~covered] = 0
    return Image(_round_u8(result))


def seam_boundary(owner: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbour owned by a different layer."""
    edge = np.zeros(owner.shape, dtype=bool)
    a, b = owner[:, :-1], owner[:, 1:]
    hit = (a >= 0) & (b >= 0) & (a != b)
    edge[:, :-1] |= hit
    edge[:, 1:] |= hit
    a, b = owner[:-1, :], owner[1:, :]
    hit = (a >= 0) & (b >= 0) & (a != b)
    edge[:-1, :] |= hit
    edge[1:, :] |= hit
    return edge


def render_seam_lines(panorama: Image, seams: SeamMasks) -> Image:
    if panorama.pixels.shape[:2] != seams.owner.shape:
        raise ValueError("panorama and seam map sizes differ")
    px = panorama.pixels
    if px.shape[2] == 1:
        px = np.repeat(px, 3, axis=2)
    out = px.copy()
    out[seam_boundary(seams.owner)] = (255, 0, 0)
    return Image(out)


def render_weight_overlay(layers: list[WarpedLayer], seams: SeamMasks,
                          feather_radius: float = 15,
                          panorama: Image | None = None) -> Image:
    """Palette-coded normalized weights at 50% opacity over the blend."""
    if panorama is None:
        panorama = blend_feather(layers, seams, feather_radius)
    weights = feather_weights(layers, seams, feather_radius)
    total = weights.sum(axis=0)
    covered = seams.owner >= 0
    norm = np.zeros_like(weights)
    pos = total > 0
    norm[:, pos] = weights[:, pos] / total[pos]
    # mirror blend_feather's fallback: the owner takes the whole weight
    fallback = covered & ~pos
    if fallback.any():
        ys, xs = np.nonzero(fallback)
        norm[seams.owner[ys, xs], ys, xs] = 1.0
    colors = PALETTE[np.arange(len(layers)) % len(PALETTE)]
    tint = np.einsum("khw,kc->hwc", norm, colors)
    base = panorama.pixels.astype(np.float64)
    if base.shape[2] == 1:
        base = np.repeat(base, 3, axis=2)
    out = base.copy()
    out[covered] = 0.5 * base[covered] + 0.5 * tint[covered]
    return Image(_round_u8(out))
