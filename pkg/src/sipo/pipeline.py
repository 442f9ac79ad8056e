"""Batch orchestration: target -> partition -> formulate -> solve ->
post-scale -> metrics, with every result written to the output directory.

Artifact files per run (plus ``.json`` sidecars for raw fields):

    projection.f32        physical projection pattern
    dose_norm.f32         normalized dose shape from the LP
    dose.f32              physical dose field
    response.f32          material response of the physical dose
    deviation.f32         signed response deviation on the gel
    histograms.csv        per-region dose histograms
    metrics.csv           conformity/separation report
    solve.csv             solver status, objective, KKT residuals
    manifest.cfg          resolved configuration echo

Exit codes: 0 Optimal, 1 config/input error, 2 Infeasible, 3 IterLimit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .domain import (BAND_FREE, ObjectGrid, default_beam_count,
                     partition_object_domain, partition_projection_domain,
                     uniform_geometry)
from .errors import ConfigError, SipoError
from .fieldio import export_field, ingest_target
from .formulations import (LpProblem, ObjectiveKind, build_case1_lp,
                           build_case2_lp, build_general_lp)
from .material import (RichardsParams, response_to_dose, richards_forward,
                       richards_inverse)
from .metrics import compute_metrics, write_histograms_csv, write_metrics_csv
from .operators import (TomoOperator, gaussian_kernel, identity_kernel,
                        load_kernel)
from .phantoms import PhantomSpec, generate_phantom
from .postscale import (ScalingDomain, anchored_scaling, apply_scaling,
                        scale_dose_domain, scale_response_domain)
from .solvers import (PdhgOptions, SolveStatus, check_feasibility_phase1,
                      solve_pdhg)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_ITER_LIMIT = 3


def material_from_config(cfg: RunConfig) -> RichardsParams:
    try:
        return RichardsParams(alpha=cfg["material.alpha"], k=cfg["material.k"],
                              beta=cfg["material.beta"],
                              gamma=cfg["material.gamma"], f0=cfg["material.f0"])
    except ValueError as exc:
        raise ConfigError(f"material parameters invalid: {exc}",
                          key="material.k") from exc


def target_from_config(cfg: RunConfig, p: RichardsParams) -> np.ndarray:
    path = cfg["io.target_path"]
    kind = cfg["phantom.kind"]
    if bool(path) == bool(kind):
        raise ConfigError(
            "exactly one target source required: set io.target_path or "
            "phantom.kind, not both", key="io.target_path")
    if path:
        return ingest_target(path, p)
    nz = cfg["phantom.nz"]
    shape = (cfg["phantom.nx"], cfg["phantom.ny"]) if nz <= 1 else \
        (cfg["phantom.nx"], cfg["phantom.ny"], nz)
    spec = PhantomSpec(kind=kind, shape=shape, radius=cfg["phantom.radius"],
                       inner_radius=cfg["phantom.inner_radius"],
                       n_blocks=cfg["phantom.n_blocks"],
                       block_gap=cfg["phantom.block_gap"],
                       levels=tuple(cfg["phantom.levels"]))
    return generate_phantom(spec)


def operator_from_config(cfg: RunConfig, grid: ObjectGrid) -> TomoOperator:
    n_beams = cfg["geometry.n_beams"] or default_beam_count(grid)
    geometry = uniform_geometry(cfg["geometry.n_angles"], n_beams,
                                span_deg=cfg["geometry.angle_span"],
                                start_deg=cfg["geometry.angle_start"])
    kind = cfg["psf.kind"]
    ndim = 3 if grid.is_3d else 2
    if kind == "identity":
        kernel = identity_kernel(ndim)
    elif kind == "gaussian":
        kernel = gaussian_kernel(cfg["psf.extent"], cfg["psf.populated"],
                                 cfg["psf.sigma"], ndim=ndim)
    elif kind == "file":
        if not cfg["psf.path"]:
            raise ConfigError("psf.kind = file requires psf.path",
                              key="psf.path")
        kernel = load_kernel(cfg["psf.path"])
    else:
        raise ConfigError(f"psf.kind {kind!r} not one of identity|gaussian|file",
                          key="psf.kind")
    return TomoOperator(grid, geometry, kernel)


def solver_options_from_config(cfg: RunConfig,
                               tol_override: float | None = None) -> PdhgOptions:
    return PdhgOptions(
        max_iters=cfg["solver.max_iters"],
        tol_kkt=tol_override if tol_override is not None else cfg["solver.tol_kkt"],
        tau=cfg["solver.tau"] or None,
        sigma=cfg["solver.sigma"] or None,
        theta=cfg["solver.theta"],
        check_every=cfg["solver.check_every"],
        seed=cfg["solver.seed"],
        restart_period=cfg["solver.restart_period"],
        trace_path=cfg["solver.trace_path"] or None,
    )


def problem_from_config(cfg: RunConfig, op: TomoOperator, partition,
                        m_target: np.ndarray, f_target: np.ndarray,
                        p: RichardsParams) -> LpProblem:
    kind = cfg["problem.kind"]
    if kind == "general":
        return build_general_lp(op, partition, f_target,
                                cfg["problem.w1"], cfg["problem.w2"])
    if kind == "case1":
        return build_case1_lp(op, partition, m_target,
                              cfg["problem.eps_l"], cfg["problem.eps_u"], p)
    if kind == "case2":
        f_crit = float(richards_inverse(cfg["problem.m_crit"], p))
        return build_case2_lp(op, partition, f_target, f_crit)
    raise ConfigError(f"problem.kind {kind!r} not one of general|case1|case2",
                      key="problem.kind")


@dataclass
class PipelineResult:
    exit_code: int
    out_dir: str
    report: object = None
    metrics: object = None


def _choose_scaling(cfg: RunConfig, prob: LpProblem, norm_dose, f_target,
                    m_target, p: RichardsParams):
    """Post-scaling factor per config; 'default' follows the formulation rule:
    weighted form calibrates in the response domain, the hard-window form is
    anchored, the hard-cap form calibrates in the dose domain."""
    mode = cfg["postscale.domain"]
    if mode == "default":
        mode = {ObjectiveKind.GENERAL: "response",
                ObjectiveKind.CASE1: "anchored",
                ObjectiveKind.CASE2: "dose"}[prob.kind]
    gel = prob.partition.gel
    if cfg["postscale.weights"] == "proportional-to-target":
        weights = np.ravel(f_target)[gel].copy()
    elif cfg["postscale.weights"] == "uniform":
        weights = None
    else:
        raise ConfigError("postscale.weights must be uniform or "
                          "proportional-to-target", key="postscale.weights")
    if mode == "anchored":
        return anchored_scaling(prob.critical_dose, gel.size)
    if mode == "dose":
        return scale_dose_domain(norm_dose, f_target, gel, weights)
    if mode == "response":
        return scale_response_domain(norm_dose, m_target, gel, p, weights)
    raise ConfigError(f"postscale.domain {mode!r} invalid",
                      key="postscale.domain")


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    """Execute one configured run; returns the exit code and reports."""
    out_dir = cfg["io.out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    art = lambda name: os.path.join(out_dir, name)
    cfg.write_manifest(art("manifest.cfg"))

    p = material_from_config(cfg)
    m_target = target_from_config(cfg, p)
    if m_target.ndim == 2:
        grid = ObjectGrid(m_target.shape[0], m_target.shape[1])
    else:
        grid = ObjectGrid(*m_target.shape)
    op = operator_from_config(cfg, grid)

    band_width = BAND_FREE if cfg["domain.band_free"] else cfg["domain.band_width"]
    gel_mask = (m_target > p.alpha).astype(float)
    obj_part = partition_object_domain(gel_mask, band_width)
    f_target = response_to_dose(m_target, obj_part.gel, p)
    if np.any(np.ravel(f_target)[obj_part.gel] <= 0):
        raise ConfigError(
            "target response maps to nonpositive dose; raise the response "
            "levels or adjust material.f0/material.beta", key="material.f0")
    partition = partition_projection_domain(op, f_target,
                                            cfg["domain.support_tol"],
                                            base=obj_part)

    prob = problem_from_config(cfg, op, partition, m_target, f_target, p)
    opts = solver_options_from_config(cfg)

    if not cfg["solver.skip_phase1"] and prob.kind is ObjectiveKind.CASE1:
        feas = check_feasibility_phase1(prob, opts)
        if not feas.feasible:
            with open(art("solve.csv"), "w", newline="") as fh:
                fh.write("field,value\n")
                fh.write(f"status,{SolveStatus.INFEASIBLE.value}\n")
                fh.write(f"phase1_violation,{feas.worst_violation:.17g}\n")
            return PipelineResult(EXIT_INFEASIBLE, out_dir)

    report = solve_pdhg(prob, opts)
    report.write_csv(art("solve.csv"))
    if report.status is not SolveStatus.OPTIMAL:
        return PipelineResult(EXIT_ITER_LIMIT, out_dir, report=report)

    norm_dose = prob.dose_from_active(
        report.x[:prob.n_active]).reshape(grid.shape)
    scaling = _choose_scaling(cfg, prob, norm_dose, f_target, m_target, p)
    projection, dose = apply_scaling(
        report.beam_values.reshape(op.sinogram_shape), norm_dose,
        scaling.alpha_star)
    response = richards_forward(dose, p)
    deviation = np.zeros(grid.shape)
    gel_unravel = np.unravel_index(partition.gel, grid.shape)
    deviation[gel_unravel] = response[gel_unravel] - m_target[gel_unravel]

    export_field(projection, art("projection.f32"), units="projection")
    export_field(norm_dose, art("dose_norm.f32"), units="normalized-dose")
    export_field(dose, art("dose.f32"), units="dose")
    export_field(response, art("response.f32"), units="response")
    export_field(deviation, art("deviation.f32"), units="response-deviation")

    metrics = compute_metrics(dose, f_target, m_target, prob.critical_dose,
                              partition.gel, partition.band, p)
    write_metrics_csv(metrics, art("metrics.csv"))
    write_histograms_csv(dose, partition.gel, partition.band, partition.ext,
                         art("histograms.csv"), n_bins=cfg["metrics.bins"])
    return PipelineResult(EXIT_OK, out_dir, report=report, metrics=metrics)
