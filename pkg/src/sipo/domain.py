"""Object/projection grids and their partition into gel, band, exterior and
active/masked beamlet sets.

The object space is a uniform voxel grid (pitch 1).  The projection space is
the set of (angle, beamlet[, slice]) parallel-beam rays.  All downstream
formulations consume the partition produced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import AllZeroTarget, BandWidthNegative, ShapeMismatch

# Sentinel: treat every non-gel voxel as band (no exterior region).
BAND_FREE = None


@dataclass(frozen=True)
class ObjectGrid:
    """Uniform voxel grid; ``nz == 1`` means a 2D slice."""

    nx: int
    ny: int
    nz: int = 1
    voxel_pitch: float = 1.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError(f"grid extents must be >= 1, got {self.shape}")
        if self.voxel_pitch <= 0:
            raise ValueError("voxel_pitch must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        if self.nz == 1:
            return (self.nx, self.ny)
        return (self.nx, self.ny, self.nz)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def is_3d(self) -> bool:
        return self.nz > 1


def default_beam_count(grid: ObjectGrid) -> int:
    """Smallest detector width covering the grid diagonal from any angle."""
    return int(np.ceil(np.hypot(grid.nx, grid.ny))) + 1


@dataclass(frozen=True)
class ProjectionGeometry:
    """Parallel-beam view set: ``n_angles`` views, ``n_beams`` beamlets each.

    Beamlet spacing is one voxel pitch and the detector is centered on the
    grid.  Angles must be strictly increasing within [0, 2*pi).
    """

    angles: np.ndarray
    n_beams: int

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        object.__setattr__(self, "angles", angles)
        if angles.ndim != 1 or angles.size < 1:
            raise ValueError("angles must be a nonempty 1D array")
        if np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        if angles[0] < 0 or angles[-1] >= 2 * np.pi:
            raise ValueError("angles must lie in [0, 2*pi)")
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")

    @property
    def n_angles(self) -> int:
        return int(self.angles.size)

    def n_rays(self, grid: ObjectGrid) -> int:
        """Total beamlet count, including the per-slice factor in 3D."""
        return self.n_angles * self.n_beams * grid.nz

    def sinogram_shape(self, grid: ObjectGrid) -> tuple[int, ...]:
        if grid.nz == 1:
            return (self.n_angles, self.n_beams)
        return (self.n_angles, self.n_beams, grid.nz)


def uniform_geometry(n_angles: int, n_beams: int, span_deg: float = 360.0,
                     start_deg: float = 0.0) -> ProjectionGeometry:
    """Uniformly spaced views over ``[start, start + span)`` degrees."""
    if n_angles < 1:
        raise ValueError("n_angles must be >= 1")
    angles = np.deg2rad(start_deg + span_deg * np.arange(n_angles) / n_angles)
    return ProjectionGeometry(angles=angles, n_beams=n_beams)


@dataclass(frozen=True)
class DomainPartition:
    """Mutually exclusive index sets over the object and projection domains.

    Object-side sets (``gel``, ``band``, ``ext``) are flat indices into the
    row-major voxel vector; projection-side sets (``active``, ``mask``) are
    flat indices into the row-major sinogram vector.  The projection side is
    empty-with-full-mask until :func:`partition_projection_domain` runs.
    """

    n_voxels: int
    n_rays: int
    gel: np.ndarray
    band: np.ndarray
    ext: np.ndarray
    active: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    mask: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        for name in ("gel", "band", "ext", "active", "mask"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, np.sort(idx))
        if self.gel.size == 0:
            raise AllZeroTarget("gel region is empty")
        obj = np.concatenate([self.gel, self.band, self.ext])
        if obj.size != self.n_voxels or np.unique(obj).size != obj.size:
            raise ValueError("gel/band/ext must partition the object domain")
        proj = np.concatenate([self.active, self.mask])
        if proj.size and (proj.size != self.n_rays
                          or np.unique(proj).size != proj.size):
            raise ValueError("active/mask must partition the projection domain")

    @property
    def has_projection_part(self) -> bool:
        return self.active.size + self.mask.size > 0


def partition_object_domain(target_dose: np.ndarray,
                            band_width: int | None) -> DomainPartition:
    """Split voxels into gel (positive target), a band of Chebyshev radius
    ``band_width`` around it, and the remaining exterior.

    ``band_width=BAND_FREE`` assigns every non-gel voxel to the band.
    """
    target_dose = np.asarray(target_dose, dtype=float)
    if np.any(target_dose < 0):
        raise ValueError("target dose must be nonnegative")
    gel_mask = target_dose > 0
    if not gel_mask.any():
        raise AllZeroTarget("target dose has no positive entry")

    if band_width is BAND_FREE:
        band_mask = ~gel_mask
    else:
        band_width = int(band_width)
        if band_width < 0:
            raise BandWidthNegative(f"band_width={band_width}")
        if band_width == 0:
            band_mask = np.zeros_like(gel_mask)
        else:
            # Chessboard distance transform == Chebyshev dilation radius.
            dist = ndimage.distance_transform_cdt(~gel_mask, metric="chessboard")
            band_mask = (dist >= 1) & (dist <= band_width)

    ext_mask = ~gel_mask & ~band_mask
    flat = lambda m: np.flatnonzero(m.ravel(order="C"))
    return DomainPartition(
        n_voxels=target_dose.size,
        n_rays=0,
        gel=flat(gel_mask),
        band=flat(band_mask),
        ext=flat(ext_mask),
    )


def partition_projection_domain(op, target_dose: np.ndarray,
                                support_tol: float = 0.0, *,
                                base: DomainPartition) -> DomainPartition:
    """Complete ``base`` with the active/mask beamlet sets.

    Active beamlets are those whose plain forward projection of the target
    dose exceeds ``support_tol`` times the sinogram maximum; the rest are
    masked out of the optimization.
    """
    from .operators import forward_project

    target_dose = np.asarray(target_dose, dtype=float)
    if target_dose.shape != op.grid.shape:
        raise ShapeMismatch(
            f"target shape {target_dose.shape} != grid {op.grid.shape}")
    if support_tol < 0:
        raise ValueError("support_tol must be nonnegative")

    sino = forward_project(target_dose, op.grid, op.geometry)
    flat = sino.ravel(order="C")
    peak = flat.max()
    if peak <= 0:
        raise AllZeroTarget("forward projection of the target is all zero")
    active_mask = flat > support_tol * peak
    return DomainPartition(
        n_voxels=base.n_voxels,
        n_rays=flat.size,
        gel=base.gel,
        band=base.band,
        ext=base.ext,
        active=np.flatnonzero(active_mask),
        mask=np.flatnonzero(~active_mask),
    )
