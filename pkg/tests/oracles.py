"""Independent brute-force oracles used across the test suite.

Everything here is implemented the slow, obvious way on purpose: these
routines must not share code paths with the implementations they check.
"""

import numpy as np


def chebyshev_band(gel_mask: np.ndarray, width: int) -> np.ndarray:
    """Band membership by scanning all voxel pairs for Chebyshev distance."""
    gel_idx = np.argwhere(gel_mask)
    band = np.zeros_like(gel_mask, dtype=bool)
    for idx in np.ndindex(gel_mask.shape):
        if gel_mask[idx]:
            continue
        d = np.abs(gel_idx - np.array(idx)).max(axis=1).min()
        if d <= width:
            band[idx] = True
    return band


def ray_pixel_distance(angle: float, offset: float, px: float,
                       py: float) -> tuple[float, float]:
    """Perpendicular distance of a pixel center from the (angle, offset)
    ray, together with the support radius of the bilinear footprint (an
    open unit-L-inf square) in the detector direction.

    distance <  support  is necessary for the ray to carry weight;
    distance <= 0.9      is sufficient (the chord through the footprint is
    then at least one unit-step sample long at every angle).
    """
    c, s = np.cos(angle), np.sin(angle)
    dist = abs(px * c + py * s - offset)
    support = abs(c) + abs(s)
    return float(dist), float(support)


def direct_correlate(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Nested-loop correlation with zero padding (any rank)."""
    out = np.zeros_like(image, dtype=float)
    centers = [k // 2 for k in kernel.shape]
    for idx in np.ndindex(image.shape):
        acc = 0.0
        for kidx in np.ndindex(kernel.shape):
            w = kernel[kidx]
            if w == 0.0:
                continue
            src = tuple(i + k - c for i, k, c in zip(idx, kidx, centers))
            if all(0 <= s < n for s, n in zip(src, image.shape)):
                acc += w * image[src]
        out[idx] = acc
    return out


def materialize(apply_fn, n_in: int, n_out: int) -> np.ndarray:
    """Dense matrix of a linear map by probing unit vectors."""
    M = np.zeros((n_out, n_in))
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = 1.0
        M[:, j] = apply_fn(e)
    return M


def power_norm_dense(M: np.ndarray, iters: int = 500, seed: int = 1) -> float:
    """Largest singular value by plain power iteration on M^T M."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return float(np.linalg.norm(M @ v))


def grid_scan_min(fn, lo: float, hi: float, n: int):
    """Brute-force 1-D minimizer on a uniform grid; returns (x, fx, step)."""
    xs = np.linspace(lo, hi, n)
    vals = np.array([fn(x) for x in xs])
    k = int(np.argmin(vals))
    return float(xs[k]), float(vals[k]), float(xs[1] - xs[0])
