"""Per-image multiplicative exposure gains."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .warp import WarpedLayer, canvas_size_of


def _luminance(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3 and img.shape[2] == 3:
        return (img.astype(np.float64) @ np.array([0.299, 0.587, 0.114])) / 255.0
    if img.ndim == 3:
        img = img[:, :, 0]
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    return img.astype(np.float64)


def estimate_gains(layers: list[WarpedLayer]) -> np.ndarray:
    """Solve for gains that equalize mean luminance over pairwise overlaps.

    Layers may hold uint8 color or float luminance.  Minimizes
    ``sum N_ij (g_i m_ij - g_j m_ji)^2 + sum (N_i / var) (g_i - 1)^2`` with
    ``var = 100 * mean(N_ij)``.
    """
    n = len(layers)
    if n == 0:
        raise ValueError("need at least one layer")
    if n == 1:
        return np.ones(1)

    W, H = canvas_size_of(layers)
    lum = []
    for layer in layers:
        canvas = np.zeros((H, W))
        canvas[layer.canvas_slices()] = _luminance(layer.image)
        lum.append(canvas)

    stats = []
    for i, j in combinations(range(n), 2):
        (yi, xi), (yj, xj) = layers[i].canvas_slices(), layers[j].canvas_slices()
        y0, y1 = max(yi.start, yj.start), min(yi.stop, yj.stop)
        x0, x1 = max(xi.start, xj.start), min(xi.stop, xj.stop)
        if y0 >= y1 or x0 >= x1:
            continue
        mi = np.zeros((H, W), dtype=bool)
        mj = np.zeros((H, W), dtype=bool)
        mi[yi, xi] = layers[i].mask
        mj[yj, xj] = layers[j].mask
        ov = (mi & mj)[y0:y1, x0:x1]
        count = int(ov.sum())
        if count == 0:
            continue
        mu_ij = lum[i][y0:y1, x0:x1][ov].mean()
        mu_ji = lum[j][y0:y1, x0:x1][ov].mean()
        stats.append((i, j, count, mu_ij, mu_ji))

    if not stats:
        return np.ones(n)

    var = 100.0 * np.mean([s[2] for s in stats])
    A = np.zeros((n, n))
    b = np.zeros(n)
    n_i = np.zeros(n)
    for i, j, count, mu_ij, mu_ji in stats:
        A[i, i] += count * mu_ij * mu_ij
        A[j, j] += count * mu_ji * mu_ji
        A[i, j] -= count * mu_ij * mu_ji
        A[j, i] -= count * mu_ij * mu_ji
        n_i[i] += count
        n_i[j] += count
    reg = n_i / var
    # an image without overlaps has no data term; pin it to unit gain
    reg[n_i == 0] = 1.0
    A[np.diag_indices(n)] += reg
    b += reg
    return np.linalg.solve(A, b)


def apply_gains(layer: WarpedLayer, g: float) -> WarpedLayer:
    if not g > 0:
        raise ValueError("gain must be positive")
    img = np.clip(np.floor(layer.image.astype(np.float64) * g + 0.5), 0, 255).astype(np.uint8)
    return WarpedLayer(img, layer.mask, layer.origin)
