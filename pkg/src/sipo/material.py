"""Generalized-logistic (Richards) material response and its inverse.

The response curve maps accumulated dose to material conversion.  Both
directions are applied elementwise; the inverse exists strictly between the
two asymptotes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfInvertibleRange

# Relative margin keeping inverse arguments away from the asymptotes.
_INVERT_MARGIN = 1e-12


@dataclass(frozen=True)
class RichardsParams:
    """Five-parameter generalized logistic response curve.

    alpha/k are the lower/upper asymptotes, beta the growth rate per unit
    dose, gamma the shape exponent and f0 the location of the transition.
    """

    alpha: float = 0.0
    k: float = 1.0
    beta: float = 4.0
    gamma: float = 1.0
    f0: float = 1.0

    def __post_init__(self):
        if self.k <= self.alpha:
            raise ValueError("upper asymptote k must exceed alpha")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def span(self) -> float:
        return self.k - self.alpha


def richards_forward(f, p: RichardsParams):
    """Response m(f); strictly increasing, saturating at the asymptotes."""
    f = np.asarray(f, dtype=float)
    z = -p.beta * (f - p.f0)
    # log1p(exp(z)) via logaddexp avoids overflow deep in the tails.
    log_denom = np.logaddexp(0.0, z) / p.gamma
    return p.alpha + p.span * np.exp(-log_denom)


def richards_inverse(m, p: RichardsParams):
    """Dose f(m) for responses strictly inside (alpha, k).

    Raises :class:`OutOfInvertibleRange` listing the offending flat indices.
    """
    m = np.asarray(m, dtype=float)
    margin = _INVERT_MARGIN * p.span
    bad = ~np.isfinite(m) | (m <= p.alpha + margin) | (m >= p.k - margin)
    if bad.any():
        idx = np.flatnonzero(bad.ravel())
        raise OutOfInvertibleRange(
            f"{idx.size} response value(s) outside the invertible range "
            f"({p.alpha}, {p.k})", indices=idx)
    # ((k-a)/(m-a))^gamma - 1, computed as expm1 for accuracy near m ~ k.
    core = np.expm1(p.gamma * np.log(p.span / (m - p.alpha)))
    return p.f0 - np.log(core) / p.beta


def richards_derivative(f, p: RichardsParams):
    """Analytic dm/df, used by response-domain calibration."""
    f = np.asarray(f, dtype=float)
    z = -p.beta * (f - p.f0)
    log_denom = np.logaddexp(0.0, z)
    return (p.span * p.beta / p.gamma) * np.exp(z - (1.0 / p.gamma + 1.0) * log_denom)


def response_to_dose(m_target: np.ndarray, gel: np.ndarray,
                     p: RichardsParams) -> np.ndarray:
    """Target dose field: inverse response on the gel, zero elsewhere.

    ``m_target`` is a full field (any shape); ``gel`` holds flat indices.
    """
    m_target = np.asarray(m_target, dtype=float)
    flat = m_target.ravel(order="C")
    f_target = np.zeros_like(flat)
    f_target[gel] = richards_inverse(flat[gel], p)
    return f_target.reshape(m_target.shape)
