"""Brute-force Hamming matching and robust homography estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import Keypoint, keypoint_coords

RANSAC_CONFIDENCE = 0.999
COLLINEAR_AREA = 1e-6
REFINE_ROUNDS = 10


class EstimationError(RuntimeError):
    """Raised when no usable homography can be estimated."""


class DegenerateConfigurationError(EstimationError):
    pass


class InsufficientMatchesError(EstimationError):
    pass


@dataclass(frozen=True)
class Match:
    query_idx: int
    train_idx: int
    distance: int


@dataclass(frozen=True)
class MatchParams:
    ransac_thresh: float = 3.0
    ransac_iters: int = 2000
    seed: int = 0
    cross_check: bool = True


@dataclass
class PairMatchResult:
    """Matches of image ``i`` (query) against image ``j`` (train), ``i < j``.

    ``H`` maps points of image ``j`` into the frame of image ``i``.
    """

    i: int
    j: int
    matches: list[Match]
    inlier_mask: np.ndarray
    H: np.ndarray | None
    num_inliers: int
    confidence: float


# ---------------------------------------------------------------- Hamming

def hamming(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(np.bitwise_xor(np.asarray(a, np.uint8), np.asarray(b, np.uint8))).sum())


def hamming_matrix(desc_a: np.ndarray, desc_b: np.ndarray) -> np.ndarray:
    """All pairwise Hamming distances, shape ``(len(desc_a), len(desc_b))``."""
    a = np.asarray(desc_a, np.uint8)
    b = np.asarray(desc_b, np.uint8)
    out = np.empty((len(a), len(b)), dtype=np.int32)
    for start in range(0, len(a), 256):
        x = a[start:start + 256, None, :] ^ b[None, :, :]
        out[start:start + 256] = np.bitwise_count(x).sum(axis=2, dtype=np.int32)
    return out


def match_brute_force(desc_a: np.ndarray, desc_b: np.ndarray,
                      cross_check: bool = True) -> list[Match]:
    """Nearest neighbour of every descriptor of A among B.

    Ties go to the lowest index.  With ``cross_check`` only mutual nearest
    neighbours survive.
    """
    if len(desc_a) == 0 or len(desc_b) == 0:
        return []
    dist = hamming_matrix(desc_a, desc_b)
    best_b = dist.argmin(axis=1)
    if cross_check:
        best_a = dist.argmin(axis=0)
        keep = best_a[best_b] == np.arange(len(desc_a))
    else:
        keep = np.ones(len(desc_a), dtype=bool)
    return [Match(int(q), int(best_b[q]), int(dist[q, best_b[q]]))
            for q in np.nonzero(keep)[0]]


# -------------------------------------------------------------------- DLT

def _hartley(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = pts.mean(axis=0)
    d = np.hypot(*(pts - c).T).mean()
    s = math.sqrt(2) / d if d > 0 else 1.0
    T = np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])
    return (pts - c) * s, T


def _min_triangle_area(pts: np.ndarray) -> float:
    areas = []
    for a, b, c in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        u = pts[b] - pts[a]
        v = pts[c] - pts[a]
        areas.append(0.5 * abs(u[0] * v[1] - u[1] * v[0]))
    return min(areas)


def estimate_homography_dlt(src, dst) -> np.ndarray:
    """Normalized DLT homography with ``dst ~ H @ src``, scaled so ``H[2,2] == 1``."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    n = len(src)
    if n != len(dst) or n < 4:
        raise ValueError("need the same number (>= 4) of src and dst points")
    ns, Ts = _hartley(src)
    nd, Td = _hartley(dst)
    if n == 4 and min(_min_triangle_area(ns), _min_triangle_area(nd)) < COLLINEAR_AREA:
        raise DegenerateConfigurationError("three or more collinear points in minimal sample")

    x, y = ns[:, 0], ns[:, 1]
    u, v = nd[:, 0], nd[:, 1]
    zero, one = np.zeros(n), np.ones(n)
    A = np.empty((2 * n, 9))
    A[0::2] = np.column_stack([x, y, one, zero, zero, zero, -u * x, -u * y, -u])
    A[1::2] = np.column_stack([zero, zero, zero, x, y, one, -v * x, -v * y, -v])
    _, sv, vt = np.linalg.svd(A)
    # the solution is unique only if the system has rank 8
    if sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfigurationError("degenerate point configuration (rank < 8)")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.solve(Td, Hn @ Ts)
    if abs(H[2, 2]) < 1e-12:
        raise DegenerateConfigurationError("homography has vanishing h22")
    H = H / H[2, 2]
    if abs(np.linalg.det(H)) <= 1e-12:
        raise DegenerateConfigurationError("singular homography")
    return H


def project(H: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``H`` to ``(n, 2)`` points; returns ``(mapped, w)``."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    q = pts @ H[:, :2].T + H[:, 2]
    w = q[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        mapped = q[:, :2] / w[:, None]
    return mapped, w


def _reprojection_errors(H: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    mapped, w = project(H, src)
    err = np.hypot(*(mapped - dst).T)
    return np.where((w == 0) | ~np.isfinite(err), np.inf, err)


def reprojection_error(H: np.ndarray, src, dst) -> float:
    """Distance between dehomogenized ``H @ src`` and ``dst`` (inf when w == 0)."""
    return float(_reprojection_errors(np.asarray(H, float), np.asarray(src, float), np.asarray(dst, float))[0])


# ----------------------------------------------------------------- RANSAC

def _required_iterations(inlier_ratio: float, sample_size: int = 4) -> float:
    good = inlier_ratio ** sample_size
    if good <= 0:
        return math.inf
    if good >= 1:
        return 0
    return math.log(1 - RANSAC_CONFIDENCE) / math.log(1 - good)


def ransac_points(src: np.ndarray, dst: np.ndarray, thresh: float = 3.0,
                  max_iters: int = 2000, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Robust homography mapping ``src`` onto ``dst``; returns ``(H, inlier_mask)``."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    n = len(src)
    if n < 4:
        raise InsufficientMatchesError(f"insufficient matches: {n} < 4")

    ns, _ = _hartley(src)
    nd, _ = _hartley(dst)
    rng = np.random.default_rng(seed)
    best_count = 0
    best_mask = None
    it = 0
    while it < max_iters:
        it += 1
        idx = rng.choice(n, 4, replace=False)
        if min(_min_triangle_area(ns[idx]), _min_triangle_area(nd[idx])) < COLLINEAR_AREA:
            continue
        try:
            H = estimate_homography_dlt(src[idx], dst[idx])
        except EstimationError:
            continue
        mask = _reprojection_errors(H, src, dst) < thresh
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
        if it >= _required_iterations(best_count / n):
            break

    if best_count < 4:
        raise EstimationError("no model with at least 4 inliers")
    # refit on the consensus set until it stops changing, so H and mask agree
    fit_on = best_mask
    for _ in range(REFINE_ROUNDS):
        H = estimate_homography_dlt(src[fit_on], dst[fit_on])
        mask = _reprojection_errors(H, src, dst) < thresh
        if mask.sum() < 4:
            raise EstimationError("refined model keeps fewer than 4 inliers")
        if np.array_equal(mask, fit_on):
            break
        fit_on = mask
    return H, mask


def ransac_homography(matches: list[Match], kps_a, kps_b, thresh: float = 3.0,
                      max_iters: int = 2000, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """RANSAC homography mapping image B keypoints onto their image A matches."""
    if len(matches) < 4:
        raise InsufficientMatchesError(f"insufficient matches: {len(matches)} < 4")
    pa = _coords(kps_a)
    pb = _coords(kps_b)
    q = np.array([m.query_idx for m in matches])
    t = np.array([m.train_idx for m in matches])
    return ransac_points(pb[t], pa[q], thresh, max_iters, seed)


def _coords(kps) -> np.ndarray:
    if isinstance(kps, np.ndarray):
        return kps.reshape(-1, 2).astype(np.float64)
    if len(kps) and isinstance(kps[0], Keypoint):
        return keypoint_coords(kps)
    return np.asarray(kps, dtype=np.float64).reshape(-1, 2)


# ------------------------------------------------------------- confidence

def pair_confidence(num_inliers: int, num_matches: int) -> float:
    return num_inliers / (8 + 0.3 * num_matches)


def pair_seed(global_seed: int, i: int, j: int) -> int:
    return global_seed ^ (i * 10007 + j)


def match_pair(feat_a, feat_b, params: MatchParams = MatchParams(),
               i: int = 0, j: int = 1) -> PairMatchResult:
    """Match features of image ``i`` against image ``j`` and score the pair.

    ``feat_a``/``feat_b`` are ``(keypoints, descriptors)`` tuples.  A failed
    homography estimate is not an error: the pair just gets zero inliers.
    """
    kps_a, desc_a = feat_a
    kps_b, desc_b = feat_b
    matches = match_brute_force(desc_a, desc_b, params.cross_check)
    H = None
    mask = np.zeros(len(matches), dtype=bool)
    if len(matches) >= 4:
        try:
            H, mask = ransac_homography(matches, kps_a, kps_b, params.ransac_thresh,
                                        params.ransac_iters, params.seed)
        except EstimationError:
            H = None
    num_inliers = int(mask.sum())
    return PairMatchResult(i, j, matches, mask, H, num_inliers,
                           pair_confidence(num_inliers, len(matches)))
