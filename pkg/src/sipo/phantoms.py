"""Deterministic desk-scale target generators.

Stand-ins for proprietary print targets: a binary disk, an annulus, a row
of multi-level grayscale blocks, and a 3D sphere with an internal cavity.
All generators are pure functions of their spec; fields are response
values, zero outside the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryOutOfBounds

DEFAULT_LEVELS = (0.7, 0.6, 0.5)


@dataclass(frozen=True)
class PhantomSpec:
    kind: str                      # disk | annulus | blocks | sphere3d
    shape: tuple[int, ...]
    radius: float = 0.0            # disk/annulus/sphere3d outer radius
    inner_radius: float = 0.0      # annulus hole / sphere cavity radius
    n_blocks: int = 3
    block_gap: int = 4
    levels: tuple[float, ...] = field(default_factory=lambda: (0.5,))

    def __post_init__(self):
        if self.kind not in ("disk", "annulus", "blocks", "sphere3d"):
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        if len(self.shape) not in (2, 3):
            raise ValueError("phantom shape must be 2D or 3D")
        if not self.levels:
            raise ValueError("need at least one response level")


def _centered_radii(shape):
    axes = [np.arange(n) - (n - 1) / 2.0 for n in shape]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(g ** 2 for g in grids))


def generate_phantom(spec: PhantomSpec) -> np.ndarray:
    """Response field for ``spec``; raises if geometry exceeds the grid."""
    if spec.kind == "disk":
        return _disk(spec)
    if spec.kind == "annulus":
        return _annulus(spec)
    if spec.kind == "blocks":
        return _blocks(spec)
    return _sphere3d(spec)


def _check_fits(radius, shape):
    if radius <= 0:
        return  # degenerate: produces an all-zero target downstream
    if 2 * radius >= min(shape[:2]):
        raise GeometryOutOfBounds(
            f"radius {radius} does not fit grid {shape}")


def _disk(spec: PhantomSpec) -> np.ndarray:
    if len(spec.shape) != 2:
        raise ValueError("disk phantom is 2D")
    _check_fits(spec.radius, spec.shape)
    rr = _centered_radii(spec.shape)
    out = np.zeros(spec.shape)
    out[rr <= spec.radius] = spec.levels[0]
    return out


def _annulus(spec: PhantomSpec) -> np.ndarray:
    if len(spec.shape) != 2:
        raise ValueError("annulus phantom is 2D")
    _check_fits(spec.radius, spec.shape)
    if spec.inner_radius >= spec.radius:
        raise GeometryOutOfBounds("inner radius must be below the outer radius")
    rr = _centered_radii(spec.shape)
    out = np.zeros(spec.shape)
    out[(rr <= spec.radius) & (rr > spec.inner_radius)] = spec.levels[0]
    return out


def _blocks(spec: PhantomSpec) -> np.ndarray:
    """Row of square blocks, levels assigned cyclically left to right."""
    if len(spec.shape) != 2:
        raise ValueError("blocks phantom is 2D")
    nx, ny = spec.shape
    n = spec.n_blocks
    gap = spec.block_gap
    if n < 1:
        raise GeometryOutOfBounds("need at least one block")
    side = (ny - (n + 1) * gap) // n
    if side < 1:
        raise GeometryOutOfBounds(
            f"{n} blocks with gap {gap} do not fit width {ny}")
    x0 = (nx - side) // 2
    out = np.zeros(spec.shape)
    for b in range(n):
        y0 = gap + b * (side + gap)
        out[x0:x0 + side, y0:y0 + side] = spec.levels[b % len(spec.levels)]
    return out


def _sphere3d(spec: PhantomSpec) -> np.ndarray:
    if len(spec.shape) != 3:
        raise ValueError("sphere3d phantom is 3D")
    _check_fits(spec.radius, spec.shape)
    if spec.inner_radius >= spec.radius and spec.inner_radius > 0:
        raise GeometryOutOfBounds("cavity must be smaller than the sphere")
    rr = _centered_radii(spec.shape)
    out = np.zeros(spec.shape)
    solid = rr <= spec.radius
    if spec.inner_radius > 0:
        solid &= rr > spec.inner_radius
    out[solid] = spec.levels[0]
    return out
