"""Matrix-free tomographic operators.

``forward_project``/``back_project`` implement the parallel-beam projector
pair P/P^T (ray-driven, bilinear interpolation, unit sampling step, exact
algebraic transpose).  ``PsfKernel`` adds the object-space blur K, and
``TomoOperator`` composes the dose-deposition operator and its adjoint:

    apply_forward(sinogram) = K (P^T g)        # dose from projections
    apply_adjoint(field)    = P (K^T f)        # its exact adjoint

On 3D grids the projector acts independently per z-slice while the blur is
a full 3D convolution coupling slices.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _projkernels as _pk
from .domain import ObjectGrid, ProjectionGeometry
from .errors import CorruptHeader, KernelTooLarge, ShapeMismatch

__all__ = [
    "PsfKernel", "identity_kernel", "gaussian_kernel", "load_kernel",
    "save_kernel", "TomoOperator", "forward_project", "back_project",
    "apply_psf", "estimate_operator_norm", "power_iteration_norm",
]


def _thread_count() -> int:
    try:
        n = int(os.environ.get("SIPO_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _ray_sampling(grid: ObjectGrid):
    """Symmetric unit-step sample offsets covering the grid diagonal."""
    half = np.hypot(grid.nx, grid.ny) / 2.0 + 1.0
    n_t = 2 * int(np.ceil(half)) + 1
    t0 = -(n_t - 1) / 2.0
    return t0, n_t


def _beam_offsets(n_beams: int) -> np.ndarray:
    return np.arange(n_beams, dtype=float) - (n_beams - 1) / 2.0


def _run_angle_blocks(kernel, args, n_angles):
    threads = _thread_count()
    if threads == 1 or n_angles == 1:
        kernel(*args, 0, n_angles)
        return
    bounds = np.linspace(0, n_angles, min(threads, n_angles) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=len(bounds) - 1) as pool:
        futs = [pool.submit(kernel, *args, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for f in futs:
            f.result()


def forward_project(image: np.ndarray, grid: ObjectGrid,
                    geometry: ProjectionGeometry) -> np.ndarray:
    """Line integrals of ``image`` along every (angle, beamlet[, slice]) ray."""
    image = np.ascontiguousarray(image, dtype=float)
    if image.shape != grid.shape:
        raise ShapeMismatch(f"image shape {image.shape} != grid {grid.shape}")
    cos_a = np.cos(geometry.angles)
    sin_a = np.sin(geometry.angles)
    offsets = _beam_offsets(geometry.n_beams)
    t0, n_t = _ray_sampling(grid)
    out = np.zeros(geometry.sinogram_shape(grid))
    if grid.is_3d:
        args = (image, cos_a, sin_a, offsets, t0, n_t, out)
        _run_angle_blocks(_pk.forward_3d, args, geometry.n_angles)
    else:
        args = (image, cos_a, sin_a, offsets, t0, n_t, out)
        _run_angle_blocks(_pk.forward_2d, args, geometry.n_angles)
    return out


def back_project(sino: np.ndarray, grid: ObjectGrid,
                 geometry: ProjectionGeometry) -> np.ndarray:
    """Transpose of :func:`forward_project` (same interpolation weights)."""
    sino = np.ascontiguousarray(sino, dtype=float)
    if sino.shape != geometry.sinogram_shape(grid):
        raise ShapeMismatch(
            f"sinogram shape {sino.shape} != {geometry.sinogram_shape(grid)}")
    cos_a = np.cos(geometry.angles)
    sin_a = np.sin(geometry.angles)
    offsets = _beam_offsets(geometry.n_beams)
    t0, n_t = _ray_sampling(grid)
    threads = _thread_count()
    kernel = _pk.adjoint_3d if grid.is_3d else _pk.adjoint_2d
    n_ang = geometry.n_angles
    if threads == 1 or n_ang == 1:
        out = np.zeros(grid.shape)
        kernel(sino, cos_a, sin_a, offsets, t0, n_t, out, 0, n_ang)
        return out
    # Per-block accumulators summed in block order keep the result
    # independent of thread scheduling.
    bounds = np.linspace(0, n_ang, min(threads, n_ang) + 1).astype(int)
    blocks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])
              if hi > lo]
    partials = [np.zeros(grid.shape) for _ in blocks]
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        futs = [pool.submit(kernel, sino, cos_a, sin_a, offsets, t0, n_t,
                            part, lo, hi)
                for part, (lo, hi) in zip(partials, blocks)]
        for f in futs:
            f.result()
    out = partials[0]
    for part in partials[1:]:
        out += part
    return out


@dataclass(frozen=True)
class PsfKernel:
    """Dense blur kernel with odd extents; weights are finite, sum > 0."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim not in (2, 3):
            raise ValueError("kernel must be 2D or 3D")
        if any(e % 2 == 0 for e in w.shape):
            raise ValueError(f"kernel extents must be odd, got {w.shape}")
        if not np.isfinite(w).all():
            raise ValueError("kernel weights must be finite")
        if w.sum() <= 0:
            raise ValueError("kernel weights must have positive sum")

    @property
    def extent(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def is_identity(self) -> bool:
        center = tuple(e // 2 for e in self.extent)
        return (np.count_nonzero(self.weights) == 1
                and self.weights[center] == 1.0)

    def support_trimmed(self) -> np.ndarray:
        """Smallest centered odd sub-kernel containing all nonzeros.

        Outer all-zero shells contribute nothing under zero padding, so
        correlating with the trimmed kernel is exactly equivalent.
        """
        w = self.weights
        nz = np.nonzero(w)
        radius = []
        for axis, idx in enumerate(nz):
            c = w.shape[axis] // 2
            radius.append(int(max(np.max(np.abs(idx - c)), 0)))
        slices = tuple(slice(w.shape[ax] // 2 - r, w.shape[ax] // 2 + r + 1)
                       for ax, r in enumerate(radius))
        return w[slices]

    def flipped(self) -> "PsfKernel":
        return PsfKernel(self.weights[tuple(slice(None, None, -1)
                                            for _ in self.extent)])


def identity_kernel(ndim: int = 2) -> PsfKernel:
    w = np.zeros((1,) * ndim)
    w[(0,) * ndim] = 1.0
    return PsfKernel(w)


def gaussian_kernel(extent, populated, sigma: float, ndim: int = 2) -> PsfKernel:
    """Isotropic Gaussian on a ``populated``-wide center box, embedded in a
    zero kernel of the full ``extent``, normalized to unit sum."""
    if np.isscalar(extent):
        extent = (int(extent),) * ndim
    if np.isscalar(populated):
        populated = (int(populated),) * len(extent)
    extent = tuple(int(e) for e in extent)
    populated = tuple(int(p) for p in populated)
    if len(populated) != len(extent):
        raise ValueError("populated sub-extent rank must match extent")
    if any(p > e for p, e in zip(populated, extent)):
        raise ValueError("populated sub-extent exceeds kernel extent")
    if any(p % 2 == 0 for p in populated):
        raise ValueError("populated sub-extent must be odd")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    grids = np.meshgrid(*[np.arange(p) - p // 2 for p in populated],
                        indexing="ij")
    r2 = sum(g.astype(float) ** 2 for g in grids)
    core = np.exp(-r2 / (2.0 * sigma ** 2))
    w = np.zeros(extent)
    slices = tuple(slice(e // 2 - p // 2, e // 2 + p // 2 + 1)
                   for e, p in zip(extent, populated))
    w[slices] = core / core.sum()
    return PsfKernel(w)


def load_kernel(path) -> PsfKernel:
    """Plain-text kernel file: first line extents, then whitespace weights."""
    with open(path) as fh:
        header = fh.readline().split()
        try:
            extent = tuple(int(tok) for tok in header)
        except ValueError as exc:
            raise CorruptHeader(f"bad kernel header in {path}: {header}") from exc
        if not extent or len(extent) > 3:
            raise CorruptHeader(f"kernel rank must be 1..3, got {extent}")
        values = np.loadtxt(fh).ravel()
    expected = int(np.prod(extent))
    if values.size != expected:
        raise CorruptHeader(
            f"kernel payload has {values.size} weights, header implies {expected}")
    return PsfKernel(values.reshape(extent))


def save_kernel(kernel: PsfKernel, path) -> None:
    with open(path, "w") as fh:
        fh.write(" ".join(str(e) for e in kernel.extent) + "\n")
        np.savetxt(fh, kernel.weights.reshape(-1, kernel.extent[-1]),
                   fmt="%.17g")


def apply_psf(image: np.ndarray, kernel: PsfKernel) -> np.ndarray:
    """Correlation with zero-padded boundary (dose leaks outward)."""
    image = np.asarray(image, dtype=float)
    if kernel.weights.ndim != image.ndim:
        raise ShapeMismatch(
            f"kernel rank {kernel.weights.ndim} != image rank {image.ndim}")
    if any(ke > ie for ke, ie in zip(kernel.extent, image.shape)):
        raise KernelTooLarge(
            f"kernel extent {kernel.extent} exceeds grid {image.shape}")
    if kernel.is_identity:
        return image.copy()
    return ndimage.correlate(image, kernel.support_trimmed(),
                             mode="constant", cval=0.0)


class TomoOperator:
    """Composite dose-deposition operator over a fixed grid and geometry.

    Immutable after construction apart from a lazily cached operator-norm
    estimate; safe to share across threads.
    """

    def __init__(self, grid: ObjectGrid, geometry: ProjectionGeometry,
                 kernel: PsfKernel | None = None):
        self.grid = grid
        self.geometry = geometry
        self.kernel = kernel if kernel is not None else identity_kernel(
            3 if grid.is_3d else 2)
        if self.kernel.weights.ndim != (3 if grid.is_3d else 2):
            raise ShapeMismatch("kernel rank does not match grid rank")
        if any(ke > ie for ke, ie in zip(self.kernel.extent, grid.shape)):
            raise KernelTooLarge(
                f"kernel extent {self.kernel.extent} exceeds grid {grid.shape}")
        self._kernel_flipped = self.kernel.flipped()
        self._norm_estimate: float | None = None

    @property
    def sinogram_shape(self) -> tuple[int, ...]:
        return self.geometry.sinogram_shape(self.grid)

    @property
    def n_rays(self) -> int:
        return self.geometry.n_rays(self.grid)

    def apply_forward(self, sino: np.ndarray) -> np.ndarray:
        """Accumulated dose field from a sinogram: blur of the backprojection."""
        field = back_project(sino, self.grid, self.geometry)
        return apply_psf(field, self.kernel)

    def apply_adjoint(self, field: np.ndarray) -> np.ndarray:
        """Exact adjoint: forward projection of the flipped-kernel blur."""
        field = np.asarray(field, dtype=float)
        if field.shape != self.grid.shape:
            raise ShapeMismatch(
                f"field shape {field.shape} != grid {self.grid.shape}")
        blurred = apply_psf(field, self._kernel_flipped)
        return forward_project(blurred, self.grid, self.geometry)

    def norm_estimate(self, iters: int = 50, seed: int = 0) -> float:
        if self._norm_estimate is None:
            self._norm_estimate = estimate_operator_norm(self, iters, seed)
        return self._norm_estimate


def power_iteration_norm(apply_fwd, apply_adj, domain_shape, iters: int,
                         seed: int = 0) -> float:
    """Largest singular value of a linear operator pair by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(domain_shape)
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    v /= nv
    sigma = 0.0
    for _ in range(iters):
        w = apply_fwd(v)
        sigma = np.linalg.norm(w)
        if sigma == 0:
            return 0.0
        v = apply_adj(w)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v /= nv
    return float(np.linalg.norm(apply_fwd(v)))


def estimate_operator_norm(op: TomoOperator, iters: int = 50,
                           seed: int = 0) -> float:
    """Power-iteration estimate of the composite operator norm.

    Deterministic for a fixed seed; a lower bound on the true norm.
    """
    if iters < 10:
        raise ValueError("iters must be >= 10")
    return power_iteration_norm(op.apply_forward, op.apply_adjoint,
                                op.sinogram_shape, iters, seed)
