"""Scale-invariant projection optimization for tomographic volumetric
additive manufacturing.

The package splits a projection-design problem into: domain partitioning
(:mod:`sipo.domain`), matrix-free tomographic operators
(:mod:`sipo.operators`), the dose/response material map
(:mod:`sipo.material`), LP assembly (:mod:`sipo.formulations`), solvers
(:mod:`sipo.solvers`), physical post-scaling (:mod:`sipo.postscale`),
evaluation metrics (:mod:`sipo.metrics`), built-in targets
(:mod:`sipo.phantoms`) and a config-driven pipeline (:mod:`sipo.pipeline`).
"""

from .domain import (BAND_FREE, DomainPartition, ObjectGrid,
                     ProjectionGeometry, default_beam_count,
                     partition_object_domain, partition_projection_domain,
                     uniform_geometry)
from .formulations import (LfProblem, LpProblem, ObjectiveKind, build_case1_lp,
                           build_case2_lp, build_general_lp, build_lfp)
from .material import (RichardsParams, response_to_dose, richards_derivative,
                       richards_forward, richards_inverse)
from .metrics import MetricsReport, compute_metrics, dsr, dtvr, psr
from .operators import (PsfKernel, TomoOperator, apply_psf, back_project,
                        estimate_operator_norm, forward_project,
                        gaussian_kernel, identity_kernel)
from .phantoms import PhantomSpec, generate_phantom
from .postscale import (ScalingDomain, ScalingResult, anchored_scaling,
                        apply_scaling, scale_dose_domain,
                        scale_response_domain)
from .solvers import (DualState, FeasibilityResult, PdhgOptions, SolveReport,
                      SolveStatus, check_feasibility_phase1, kkt_residuals,
                      solve_dense_reference, solve_dinkelbach, solve_pdhg)

__version__ = "0.1.0"
