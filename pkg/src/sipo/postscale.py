"""Scalar calibration from the normalized LP solution to physical units.

The LP fixes only the dose *shape*; a single positive factor maps it back
to physical scale.  Three routes: a closed-form weighted least squares in
the dose domain, a 1-D search in the response domain, and the deterministic
anchor (factor = critical dose) used by the hard-constrained formulations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BracketInvalid, DegenerateDenominator, NonPositiveAlpha
from .material import RichardsParams, richards_forward


class ScalingDomain(enum.Enum):
    DOSE = "dose"
    RESPONSE = "response"
    ANCHORED = "anchored"


@dataclass(frozen=True)
class ScalingResult:
    alpha_star: float
    domain: ScalingDomain
    objective_value: float
    weights: np.ndarray

    def __post_init__(self):
        if self.alpha_star <= 0:
            raise NonPositiveAlpha(f"alpha_star={self.alpha_star}")


def _gel_weights(weights, gel_size):
    if weights is None:
        return np.ones(gel_size)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (gel_size,):
        raise ValueError("weights must be one value per gel voxel")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    return weights


def scale_dose_domain(norm_dose: np.ndarray, target_dose: np.ndarray,
                      gel: np.ndarray, weights=None) -> ScalingResult:
    """Closed-form weighted least-squares factor in the dose domain."""
    nd = np.ravel(norm_dose)[gel]
    td = np.ravel(target_dose)[gel]
    w = _gel_weights(weights, gel.size)
    denom = float(np.sum(w * nd * nd))
    if denom <= 0:
        raise DegenerateDenominator("weighted norm of the normalized dose is 0")
    alpha = float(np.sum(w * nd * td)) / denom
    resid = alpha * nd - td
    return ScalingResult(alpha_star=alpha, domain=ScalingDomain.DOSE,
                         objective_value=float(np.sum(w * resid * resid)),
                         weights=w)


def _response_objective(alpha, nd, mt, w, p):
    resid = richards_forward(alpha * nd, p) - mt
    return float(np.sum(w * resid * resid))


def scale_response_domain(norm_dose: np.ndarray, target_response: np.ndarray,
                          gel: np.ndarray, p: RichardsParams, weights=None,
                          bracket: tuple[float, float] | None = None,
                          rel_tol: float = 1e-10) -> ScalingResult:
    """Golden-section minimization of the response-domain misfit.

    The default bracket spans three decades either side of the dose-domain
    closed form; the misfit is smooth but not provably unimodal, so tests
    guard this search against a brute-force grid scan.
    """
    nd = np.ravel(norm_dose)[gel]
    mt = np.ravel(target_response)[gel]
    w = _gel_weights(weights, gel.size)
    if bracket is None:
        # Seed with the dose-domain closed form against the dose
        # equivalent of the target response.
        from .material import richards_inverse
        td = richards_inverse(mt, p)
        denom = float(np.sum(w * nd * nd))
        if denom <= 0:
            raise DegenerateDenominator("weighted norm of the normalized dose is 0")
        seed = float(np.sum(w * nd * td)) / denom
        if seed <= 0:
            seed = 1.0
        bracket = (1e-3 * seed, 1e3 * seed)
    lo, hi = bracket
    if not (0 < lo < hi):
        raise BracketInvalid(f"bracket ({lo}, {hi}) must satisfy 0 < lo < hi")

    # Coarse log-spaced localization first: the misfit saturates into flat
    # plateaus near the response asymptotes, where a bare golden section
    # on a wide bracket can walk away from the basin.
    coarse = np.geomspace(lo, hi, 128)
    vals = [_response_objective(a, nd, mt, w, p) for a in coarse]
    k = int(np.argmin(vals))
    a = coarse[max(k - 1, 0)]
    b = coarse[min(k + 1, coarse.size - 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _response_objective(c, nd, mt, w, p)
    fd = _response_objective(d, nd, mt, w, p)
    while (b - a) > rel_tol * max(abs(a), abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _response_objective(c, nd, mt, w, p)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _response_objective(d, nd, mt, w, p)
    alpha = (a + b) / 2.0
    return ScalingResult(alpha_star=float(alpha), domain=ScalingDomain.RESPONSE,
                         objective_value=_response_objective(alpha, nd, mt, w, p),
                         weights=w)


def anchored_scaling(critical_dose: float, gel_size: int) -> ScalingResult:
    """Deterministic anchor: factor equals the critical dose exactly."""
    return ScalingResult(alpha_star=float(critical_dose),
                         domain=ScalingDomain.ANCHORED,
                         objective_value=0.0,
                         weights=np.ones(gel_size))


def apply_scaling(projection: np.ndarray, norm_dose: np.ndarray,
                  alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Physical projection and dose: elementwise scaling by ``alpha``."""
    if alpha <= 0:
        raise NonPositiveAlpha(f"alpha={alpha}")
    return alpha * np.asarray(projection, dtype=float), \
        alpha * np.asarray(norm_dose, dtype=float)
