"""End-to-end stitching: resize, features, match, subset, warp, seam, gain, blend."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .compose import (CanvasLayout, SeamMasks, WarpedLayer, apply_gains, blend_feather,
                      chain_to_reference, compute_canvas, estimate_gains, find_seams,
                      render_seam_lines, render_weight_overlay, rescale_homography,
                      upscale_seams, warp_all, warp_image)
from .features import detect_and_compute
from .graph import MatchGraph, Subset, export_dot, select_subset, build_match_graph
from .image import Image, resize_to_megapix, to_gray
from .matching import MatchParams

log = logging.getLogger("panostitch")

DRAW_MODES = ("none", "lines", "weights")
# refuse canvases far larger than the inputs could plausibly cover
CANVAS_AREA_LIMIT = 25.0


@dataclass
class StitchConfig:
    inputs: list[str] = field(default_factory=list)
    output: str = ""
    final_megapix: float = -1.0
    medium_megapix: float = 0.6
    low_megapix: float = 0.1
    conf_thresh: float = 1.0
    ransac_thresh: float = 3.0
    ransac_iters: int = 2000
    seed: int = 0
    max_features: int = 500
    feather_radius: int = 15
    draw: str = "none"
    dot_out: str | None = None
    jobs: int = 0
    verbose: bool = False

    def __post_init__(self):
        if self.medium_megapix > 0 and self.low_megapix > 0 and self.medium_megapix < self.low_megapix:
            raise ValueError("medium_megapix must be >= low_megapix")
        if self.conf_thresh < 0:
            raise ValueError("conf_thresh must be >= 0")
        if self.ransac_thresh <= 0:
            raise ValueError("ransac_thresh must be > 0")
        if self.ransac_iters < 1:
            raise ValueError("ransac_iters must be >= 1")
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.feather_radius < 1:
            raise ValueError("feather_radius must be >= 1")
        if self.draw not in DRAW_MODES:
            raise ValueError(f"draw must be one of {', '.join(DRAW_MODES)}")

    @property
    def workers(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)


@dataclass
class StitchResult:
    panorama: Image
    output: Image
    graph: MatchGraph
    subset: Subset
    homographies: dict[int, np.ndarray]
    medium_scales: list[float]
    low_scales: list[float]
    final_scales: list[float]
    low_layout: CanvasLayout
    final_layout: CanvasLayout
    final_layers: list[WarpedLayer]
    seams: SeamMasks
    gains: np.ndarray


@contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    yield
    dt = time.perf_counter() - t0
    timings[name] = dt
    log.info("stage %-8s %.3fs", name, dt)


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _tier_layout(kept, to_ref, reference, feat_scales, tier_scales, tier_images):
    r_ref = tier_scales[reference] / feat_scales[reference]
    hs, dims = [], []
    for k in kept:
        r_k = tier_scales[k] / feat_scales[k]
        hs.append(rescale_homography(to_ref[k], r_k, r_ref))
        dims.append((tier_images[k].width, tier_images[k].height))
    limit = CANVAS_AREA_LIMIT * sum(w * h for w, h in dims)
    return compute_canvas(hs, dims, max_pixels=limit)


def stitch(images: list[Image], config: StitchConfig,
           names: list[str] | None = None) -> StitchResult:
    """Stitch ``images`` into a panorama.

    Raises :class:`~panostitch.graph.NothingToStitchError` when no two images
    match with confidence ``>= config.conf_thresh``.  The DOT file, when
    configured, is written before that check.
    """
    if len(images) < 2:
        raise ValueError("need at least 2 input images")
    names = names or [f"{k}" for k in range(len(images))]
    workers = config.workers
    timings: dict[str, float] = {}

    with _stage("resize", timings):
        medium = [resize_to_megapix(im, config.medium_megapix) for im in images]
        low = [resize_to_megapix(im, config.low_megapix) for im in images]
        final = [resize_to_megapix(im, config.final_megapix) for im in images]
        m_scales = [s for _, s in medium]
        l_scales = [s for _, s in low]
        f_scales = [s for _, s in final]
        for n, (im, s) in zip(names, medium):
            log.debug("%s: medium %dx%d (scale %.4f)", n, im.width, im.height, s)

    with _stage("features", timings):
        def extract(im):
            gray = to_gray(im)
            if min(gray.shape) < 64:
                return [], np.zeros((0, 32), dtype=np.uint8)
            return detect_and_compute(gray, config.max_features)
        features = _map(extract, [im for im, _ in medium], workers)
        for n, (kps, _) in zip(names, features):
            log.debug("%s: %d keypoints", n, len(kps))

    with _stage("match", timings):
        params = MatchParams(config.ransac_thresh, config.ransac_iters, config.seed)
        graph = build_match_graph(features, params, names, workers)
        for (i, j), res in sorted(graph.pairs.items()):
            log.debug("pair %d-%d: matches=%d inliers=%d conf=%.4f",
                      i, j, len(res.matches), res.num_inliers, res.confidence)

    with _stage("subset", timings):
        if config.dot_out:
            export_dot(graph, config.conf_thresh, config.dot_out)
        subset = select_subset(graph, config.conf_thresh)
        kept, ref = subset.kept, subset.reference
        log.debug("kept %s, reference %d", kept, ref)

    with _stage("warp", timings):
        to_ref = chain_to_reference(graph, kept, ref)
        low_imgs = [im for im, _ in low]
        final_imgs = [im for im, _ in final]
        low_layout = _tier_layout(kept, to_ref, ref, m_scales, l_scales, low_imgs)
        final_layout = _tier_layout(kept, to_ref, ref, m_scales, f_scales, final_imgs)
        low_layers = warp_all([low_imgs[k].pixels for k in kept], low_layout)
        final_layers = _map(
            lambda n: warp_image(final_imgs[kept[n]].pixels, final_layout.homographies[n],
                                 final_layout.origins[n], final_layout.sizes[n]),
            list(range(len(kept))), workers)
        log.debug("canvas low %s final %s", low_layout.size, final_layout.size)

    with _stage("seam", timings):
        low_seams = find_seams(low_layers, low_layout.size)
        seams = upscale_seams(low_seams, low_layout, l_scales[ref], final_layers,
                              final_layout, f_scales[ref])

    with _stage("gain", timings):
        gains = estimate_gains(low_layers)
        final_layers = [apply_gains(layer, g) for layer, g in zip(final_layers, gains)]
        log.debug("gains %s", np.array2string(gains, precision=4))

    with _stage("blend", timings):
        panorama = blend_feather(final_layers, seams, config.feather_radius)
        if config.draw == "lines":
            output = render_seam_lines(panorama, seams)
        elif config.draw == "weights":
            output = render_weight_overlay(final_layers, seams, config.feather_radius, panorama)
        else:
            output = panorama

    return StitchResult(panorama, output, graph, subset, to_ref, m_scales, l_scales,
                        f_scales, low_layout, final_layout, final_layers, seams, gains)
