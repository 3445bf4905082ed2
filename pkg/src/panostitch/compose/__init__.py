"""Warping, seams, exposure compensation and blending onto a common canvas."""

from .blend import (PALETTE, blend_feather, feather_weights, render_seam_lines,
                    render_weight_overlay, seam_boundary)
from .exposure import apply_gains, estimate_gains
from .seams import SeamMasks, check_partition, find_seams, upscale_seams
from .warp import (CanvasLayout, WarpedLayer, WarpOutOfRangeError, chain_to_reference,
                   compute_canvas, corner_error, rescale_homography, scale_homography,
                   translation, warp_all, warp_image)

__all__ = [
    "PALETTE", "blend_feather", "feather_weights", "render_seam_lines",
    "render_weight_overlay", "seam_boundary", "apply_gains", "estimate_gains",
    "SeamMasks", "check_partition", "find_seams", "upscale_seams", "CanvasLayout",
    "WarpedLayer", "WarpOutOfRangeError", "chain_to_reference", "compute_canvas",
    "corner_error", "rescale_homography", "scale_homography", "translation",
    "warp_all", "warp_image",
]
