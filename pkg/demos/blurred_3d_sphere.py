"""Slice-wise projection with a 3D blur kernel: the process window shrinks.

The projector acts per z-slice while the blur couples slices, so the
composite operator is genuinely 3D.  Solving the weighted form with and
without the blur shows the gel/void separation collapsing toward 1 when
diffusion-like spreading is part of the physics.
"""

import time

import numpy as np

from sipo import (ObjectGrid, PdhgOptions, PhantomSpec, RichardsParams,
                  TomoOperator, build_general_lp, gaussian_kernel,
                  generate_phantom, partition_object_domain,
                  partition_projection_domain, response_to_dose,
                  richards_forward, solve_pdhg, uniform_geometry)

p = RichardsParams()
m_target = generate_phantom(PhantomSpec(kind="sphere3d", shape=(24, 24, 26),
                                        radius=5.0, inner_radius=1.5,
                                        levels=(0.5,)))
grid = ObjectGrid(24, 24, 26)
geometry = uniform_geometry(12, 16, span_deg=180.0)
obj_part = partition_object_domain(np.where(m_target > 0, 1.0, 0.0), 2)
f_target = response_to_dose(m_target, obj_part.gel, p)
print(f"sphere-with-cavity: {obj_part.gel.size} gel voxels, "
      f"{obj_part.band.size} band voxels")

for name, kernel in (("identity", None),
                     ("gaussian blur", gaussian_kernel(11, 5, 1.0, ndim=3))):
    op = TomoOperator(grid, geometry, kernel)
    part = partition_projection_domain(op, f_target, base=obj_part)
    prob = build_general_lp(op, part, f_target, 1.0, 1.0)
    t0 = time.perf_counter()
    rep = solve_pdhg(prob, PdhgOptions(max_iters=80_000, tol_kkt=1e-6))
    dose = prob.critical_dose * prob.dose_from_active(rep.x[:prob.n_active])
    m_gel_min = float(richards_forward(dose[part.gel].min(), p))
    m_band_max = float(richards_forward(dose[part.band].max(), p))
    print(f"{name:<14} {rep.status.value:<10} iters={rep.iters:<7} "
          f"gel min m*={m_gel_min:.3f}  band max m*={m_band_max:.3f}  "
          f"PSR_m={m_gel_min / m_band_max:.3f}  "
          f"({time.perf_counter() - t0:.0f}s)")

print("\nblur pulls the band response up toward the gel floor: the same "
      "geometry prints with a much thinner dose margin.")
