"""Compiled inner loops for the ray-driven projector.

Forward and adjoint share one interpolation rule: bilinear sampling at unit
steps along each ray.  The adjoint scatters with exactly the weights the
forward gathers, which is what makes the pair algebraically transposed.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def forward_2d(image, cos_a, sin_a, offsets, t0, n_t, out, a_lo, a_hi):
    nx, ny = image.shape
    cx = (nx - 1) / 2.0
    cy = (ny - 1) / 2.0
    n_beams = offsets.shape[0]
    for a in range(a_lo, a_hi):
        c = cos_a[a]
        s = sin_a[a]
        for k in range(n_beams):
            u = offsets[k]
            px0 = cx + u * c
            py0 = cy + u * s
            acc = 0.0
            for m in range(n_t):
                t = t0 + m
                x = px0 - t * s
                y = py0 + t * c
                ix = int(np.floor(x))
                iy = int(np.floor(y))
                fx = x - ix
                fy = y - iy
                if 0 <= ix < nx:
                    if 0 <= iy < ny:
                        acc += (1.0 - fx) * (1.0 - fy) * image[ix, iy]
                    if 0 <= iy + 1 < ny:
                        acc += (1.0 - fx) * fy * image[ix, iy + 1]
                if 0 <= ix + 1 < nx:
                    if 0 <= iy < ny:
                        acc += fx * (1.0 - fy) * image[ix + 1, iy]
                    if 0 <= iy + 1 < ny:
                        acc += fx * fy * image[ix + 1, iy + 1]
            out[a, k] = acc


@njit(cache=True, nogil=True)
def adjoint_2d(sino, cos_a, sin_a, offsets, t0, n_t, out, a_lo, a_hi):
    nx, ny = out.shape
    cx = (nx - 1) / 2.0
    cy = (ny - 1) / 2.0
    n_beams = offsets.shape[0]
    for a in range(a_lo, a_hi):
        c = cos_a[a]
        s = sin_a[a]
        for k in range(n_beams):
            v = sino[a, k]
            if v == 0.0:
                continue
            u = offsets[k]
            px0 = cx + u * c
            py0 = cy + u * s
            for m in range(n_t):
                t = t0 + m
                x = px0 - t * s
                y = py0 + t * c
                ix = int(np.floor(x))
                iy = int(np.floor(y))
                fx = x - ix
                fy = y - iy
                if 0 <= ix < nx:
                    if 0 <= iy < ny:
                        out[ix, iy] += (1.0 - fx) * (1.0 - fy) * v
                    if 0 <= iy + 1 < ny:
                        out[ix, iy + 1] += (1.0 - fx) * fy * v
                if 0 <= ix + 1 < nx:
                    if 0 <= iy < ny:
                        out[ix + 1, iy] += fx * (1.0 - fy) * v
                    if 0 <= iy + 1 < ny:
                        out[ix + 1, iy + 1] += fx * fy * v


@njit(cache=True, nogil=True)
def forward_3d(image, cos_a, sin_a, offsets, t0, n_t, out, a_lo, a_hi):
    # Slice-wise 2D geometry; z is the contiguous inner axis.
    nx, ny, nz = image.shape
    cx = (nx - 1) / 2.0
    cy = (ny - 1) / 2.0
    n_beams = offsets.shape[0]
    for a in range(a_lo, a_hi):
        c = cos_a[a]
        s = sin_a[a]
        for k in range(n_beams):
            u = offsets[k]
            px0 = cx + u * c
            py0 = cy + u * s
            for m in range(n_t):
                t = t0 + m
                x = px0 - t * s
                y = py0 + t * c
                ix = int(np.floor(x))
                iy = int(np.floor(y))
                fx = x - ix
                fy = y - iy
                if 0 <= ix < nx:
                    if 0 <= iy < ny:
                        w = (1.0 - fx) * (1.0 - fy)
                        for z in range(nz):
                            out[a, k, z] += w * image[ix, iy, z]
                    if 0 <= iy + 1 < ny:
                        w = (1.0 - fx) * fy
                        for z in range(nz):
                            out[a, k, z] += w * image[ix, iy + 1, z]
                if 0 <= ix + 1 < nx:
                    if 0 <= iy < ny:
                        w = fx * (1.0 - fy)
                        for z in range(nz):
                            out[a, k, z] += w * image[ix + 1, iy, z]
                    if 0 <= iy + 1 < ny:
                        w = fx * fy
                        for z in range(nz):
                            out[a, k, z] += w * image[ix + 1, iy + 1, z]


@njit(cache=True, nogil=True)
def adjoint_3d(sino, cos_a, sin_a, offsets, t0, n_t, out, a_lo, a_hi):
    nx, ny, nz = out.shape
    cx = (nx - 1) / 2.0
    cy = (ny - 1) / 2.0
    n_beams = offsets.shape[0]
    for a in range(a_lo, a_hi):
        c = cos_a[a]
        s = sin_a[a]
        for k in range(n_beams):
            u = offsets[k]
            px0 = cx + u * c
            py0 = cy + u * s
            for m in range(n_t):
                t = t0 + m
                x = px0 - t * s
                y = py0 + t * c
                ix = int(np.floor(x))
                iy = int(np.floor(y))
                fx = x - ix
                fy = y - iy
                if 0 <= ix < nx:
                    if 0 <= iy < ny:
                        w = (1.0 - fx) * (1.0 - fy)
                        for z in range(nz):
                            out[ix, iy, z] += w * sino[a, k, z]
                    if 0 <= iy + 1 < ny:
                        w = (1.0 - fx) * fy
                        for z in range(nz):
                            out[ix, iy + 1, z] += w * sino[a, k, z]
                if 0 <= ix + 1 < nx:
                    if 0 <= iy < ny:
                        w = fx * (1.0 - fy)
                        for z in range(nz):
                            out[ix + 1, iy, z] += w * sino[a, k, z]
                    if 0 <= iy + 1 < ny:
                        w = fx * fy
                        for z in range(nz):
                            out[ix + 1, iy + 1, z] += w * sino[a, k, z]
