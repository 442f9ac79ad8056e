"""Matrix-free assembly of the three projection-shape linear programs.

All three share one constraint skeleton over the decision vector
``x = (beamlet values on the active set, [spill bound], [overshoot bound])``:

* band rows      : dose_i - spill                 <= 0   (or dose_i <= 1)
* gel upper rows : dose_i - overshoot * target_i  <= 0   (or dose_i <= upper_i)
* gel lower rows : lower_i - dose_i               <= 0

where ``dose = A^T(expand(y))`` and the targets/bounds are normalized by the
critical dose so the gel minimum sits at 1.  Rows are kept as index-set
views over the shared operator plus scalar coefficients; the explicit
matrix exists only on tiny grids for the dense reference path.

The ``weighted`` form minimizes ``w1*spill + w2*overshoot``; the
``min-spillage`` form (hard dose window on the gel) minimizes spill alone;
the ``max-conformity`` form (hard unit cap on the band) minimizes overshoot
alone.  ``LfProblem`` keeps the pre-transform fractional instance used by
the cross-validating ratio solver.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domain import DomainPartition
from .errors import (InvalidWeights, NonPositiveThreshold, ShapeMismatch,
                     SizeLimitExceeded)
from .material import RichardsParams, richards_inverse
from .operators import TomoOperator

DENSE_ENTRY_LIMIT = 200_000


class ObjectiveKind(enum.Enum):
    GENERAL = "general"
    CASE1 = "case1"
    CASE2 = "case2"


@dataclass(frozen=True)
class LpProblem:
    """Normalized LP instance in matrix-free form.

    ``scaled_target`` (and for the hard-window form ``scaled_lower`` /
    ``scaled_upper``) live on the gel index set only.  ``critical_dose``
    is the physical anchor the normalization divided out.
    """

    operator: TomoOperator
    partition: DomainPartition
    kind: ObjectiveKind
    critical_dose: float
    scaled_target: np.ndarray          # gel-length; lower bound vector
    scaled_upper: np.ndarray | None    # gel-length; CASE1 only
    w1: float
    w2: float
    has_spill: bool
    has_overshoot: bool
    band_cap: float                    # h on band rows (0, or 1 for CASE2)
    degenerate_window: bool = False

    # ----- layout -----

    @property
    def n_active(self) -> int:
        return int(self.partition.active.size)

    @property
    def n_vars(self) -> int:
        return self.n_active + int(self.has_spill) + int(self.has_overshoot)

    @property
    def n_band(self) -> int:
        return int(self.partition.band.size)

    @property
    def n_gel(self) -> int:
        return int(self.partition.gel.size)

    @property
    def n_rows(self) -> int:
        return self.n_band + 2 * self.n_gel

    @property
    def spill_index(self) -> int | None:
        return self.n_active if self.has_spill else None

    @property
    def overshoot_index(self) -> int | None:
        if not self.has_overshoot:
            return None
        return self.n_active + int(self.has_spill)

    @property
    def nonneg_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vars, dtype=bool)
        mask[:self.n_active] = True
        return mask

    @property
    def cost(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        if self.has_spill:
            c[self.spill_index] = self.w1
        if self.has_overshoot:
            c[self.overshoot_index] = self.w2
        return c

    @property
    def h(self) -> np.ndarray:
        """Right-hand sides, rows ordered band / gel-upper / gel-lower."""
        band_h = np.full(self.n_band, self.band_cap)
        if self.kind is ObjectiveKind.CASE1:
            gel_u_h = self.scaled_upper.copy()
        else:
            gel_u_h = np.zeros(self.n_gel)
        gel_l_h = -self.scaled_target
        return np.concatenate([band_h, gel_u_h, gel_l_h])

    def hard_row_mask(self) -> np.ndarray:
        """Rows without a free scalar column (the feasibility-relevant ones)."""
        mask = np.zeros(self.n_rows, dtype=bool)
        mask[:self.n_band] = not self.has_spill
        mask[self.n_band:self.n_band + self.n_gel] = not self.has_overshoot
        mask[self.n_band + self.n_gel:] = True
        return mask

    # ----- matrix-free constraint operator -----

    def expand_beam_values(self, y: np.ndarray) -> np.ndarray:
        """Zero-expand active beamlet values to the full sinogram."""
        full = np.zeros(self.operator.n_rays)
        full[self.partition.active] = y
        return full.reshape(self.operator.sinogram_shape)

    def dose_from_active(self, y: np.ndarray) -> np.ndarray:
        """Flat dose field from active beamlet values (one A^T application)."""
        return self.operator.apply_forward(self.expand_beam_values(y)).ravel()

    def split(self, x: np.ndarray):
        y = x[:self.n_active]
        spill = x[self.spill_index] if self.has_spill else None
        overshoot = x[self.overshoot_index] if self.has_overshoot else None
        return y, spill, overshoot

    def residual(self, x: np.ndarray) -> np.ndarray:
        """All inequality rows G x - h (feasible iff every entry <= 0)."""
        if x.shape != (self.n_vars,):
            raise ShapeMismatch(f"x must have shape ({self.n_vars},)")
        y, spill, overshoot = self.split(x)
        field = self.dose_from_active(y)
        band = field[self.partition.band] - self.band_cap
        if self.has_spill:
            band = band - spill
        gel_dose = field[self.partition.gel]
        if self.kind is ObjectiveKind.CASE1:
            gel_u = gel_dose - self.scaled_upper
        else:
            gel_u = gel_dose - overshoot * self.scaled_target
        gel_l = self.scaled_target - gel_dose
        return np.concatenate([band, gel_u, gel_l])

    def adjoint_rows(self, lam: np.ndarray) -> np.ndarray:
        """G^T lam via one application of the adjoint operator."""
        if lam.shape != (self.n_rows,):
            raise ShapeMismatch(f"lam must have shape ({self.n_rows},)")
        lam_band = lam[:self.n_band]
        lam_gel_u = lam[self.n_band:self.n_band + self.n_gel]
        lam_gel_l = lam[self.n_band + self.n_gel:]
        z = np.zeros(self.partition.n_voxels)
        z[self.partition.band] = lam_band
        z[self.partition.gel] = lam_gel_u - lam_gel_l
        sino = self.operator.apply_adjoint(z.reshape(self.operator.grid.shape))
        out = np.empty(self.n_vars)
        out[:self.n_active] = sino.ravel()[self.partition.active]
        if self.has_spill:
            out[self.spill_index] = -lam_band.sum()
        if self.has_overshoot:
            out[self.overshoot_index] = -(lam_gel_u * self.scaled_target).sum()
        return out

    # ----- dense path (tiny instances only) -----

    def materialize_constraints(self,
                                limit: int = DENSE_ENTRY_LIMIT):
        """Explicit (G, h); guarded by the dense entry limit."""
        entries = self.n_rows * self.n_vars
        if entries > limit:
            raise SizeLimitExceeded(
                f"{self.n_rows} x {self.n_vars} = {entries} entries > {limit}")
        cols = np.zeros((self.partition.n_voxels, self.n_active))
        for j in range(self.n_active):
            e = np.zeros(self.n_active)
            e[j] = 1.0
            cols[:, j] = self.dose_from_active(e)
        band_block = cols[self.partition.band, :]
        gel_block = cols[self.partition.gel, :]
        G = np.zeros((self.n_rows, self.n_vars))
        G[:self.n_band, :self.n_active] = band_block
        G[self.n_band:self.n_band + self.n_gel, :self.n_active] = gel_block
        G[self.n_band + self.n_gel:, :self.n_active] = -gel_block
        if self.has_spill:
            G[:self.n_band, self.spill_index] = -1.0
        if self.has_overshoot and self.kind is not ObjectiveKind.CASE1:
            G[self.n_band:self.n_band + self.n_gel,
              self.overshoot_index] = -self.scaled_target
        return G, self.h


def apply_constraint_operator(prob: LpProblem, x: np.ndarray) -> np.ndarray:
    """Row values G x - h of the active formulation."""
    return prob.residual(np.asarray(x, dtype=float))


def apply_constraint_adjoint(prob: LpProblem, lam: np.ndarray) -> np.ndarray:
    """Adjoint scatter of dual row values back to variable space."""
    return prob.adjoint_rows(np.asarray(lam, dtype=float))


def _validated_gel_target(partition: DomainPartition,
                          target_dose: np.ndarray) -> np.ndarray:
    flat = np.ravel(np.asarray(target_dose, dtype=float))
    if flat.size != partition.n_voxels:
        raise ShapeMismatch("target dose length does not match the grid")
    gel_target = flat[partition.gel]
    if np.any(gel_target <= 0):
        raise NonPositiveThreshold("target dose must be positive on the gel")
    return gel_target


def build_general_lp(op: TomoOperator, partition: DomainPartition,
                     target_dose: np.ndarray, w1: float = 1.0,
                     w2: float = 1.0) -> LpProblem:
    """Weighted form: soft band spill + soft gel overshoot over the shared
    gel-minimum gauge.  The spill variable is dropped when the band is empty.
    """
    if w1 < 0 or w2 < 0 or (w1 == 0 and w2 == 0):
        raise InvalidWeights(f"w1={w1}, w2={w2}")
    gel_target = _validated_gel_target(partition, target_dose)
    critical = float(gel_target.min())
    scaled = gel_target / critical
    has_spill = partition.band.size > 0
    return LpProblem(
        operator=op, partition=partition, kind=ObjectiveKind.GENERAL,
        critical_dose=critical, scaled_target=scaled, scaled_upper=None,
        w1=float(w1), w2=float(w2), has_spill=has_spill, has_overshoot=True,
        band_cap=0.0)


def build_case1_lp(op: TomoOperator, partition: DomainPartition,
                   target_response: np.ndarray, eps_lower: float,
                   eps_upper: float, p: RichardsParams) -> LpProblem:
    """Hard response window on the gel; minimize the band spill bound.

    Tolerances are relative in the response domain; the window maps to
    absolute dose bounds through the inverse response, anchored at the
    weakest admissible gel dose.
    """
    if not 0 <= eps_lower < 1:
        raise ValueError("eps_lower must lie in [0, 1)")
    if eps_upper < 0:
        raise ValueError("eps_upper must be nonnegative")
    m_flat = np.ravel(np.asarray(target_response, dtype=float))
    if m_flat.size != partition.n_voxels:
        raise ShapeMismatch("target response length does not match the grid")
    m_gel = m_flat[partition.gel]
    f_lower = richards_inverse((1.0 - eps_lower) * m_gel, p)
    f_upper = richards_inverse((1.0 + eps_upper) * m_gel, p)
    critical = float(f_lower.min())
    if critical <= 0:
        raise NonPositiveThreshold(
            "lower response tolerance maps to a nonpositive dose")
    scaled_lower = f_lower / critical
    scaled_upper = f_upper / critical
    has_spill = partition.band.size > 0
    return LpProblem(
        operator=op, partition=partition, kind=ObjectiveKind.CASE1,
        critical_dose=critical, scaled_target=scaled_lower,
        scaled_upper=scaled_upper, w1=1.0, w2=0.0, has_spill=has_spill,
        has_overshoot=False, band_cap=0.0,
        degenerate_window=bool(np.all(scaled_lower == scaled_upper)))


def build_case2_lp(op: TomoOperator, partition: DomainPartition,
                   target_dose: np.ndarray,
                   critical_dose: float) -> LpProblem:
    """Hard unit cap on the band; minimize the gel overshoot bound.

    ``critical_dose`` is the inhibition threshold the band dose must not
    exceed; it doubles as the normalization anchor.
    """
    if critical_dose <= 0:
        raise NonPositiveThreshold(f"critical_dose={critical_dose}")
    gel_target = _validated_gel_target(partition, target_dose)
    scaled = gel_target / float(critical_dose)
    return LpProblem(
        operator=op, partition=partition, kind=ObjectiveKind.CASE2,
        critical_dose=float(critical_dose), scaled_target=scaled,
        scaled_upper=None, w1=0.0, w2=1.0, has_spill=False,
        has_overshoot=True, band_cap=1.0)


@dataclass(frozen=True)
class LfProblem:
    """Pre-transform fractional instance: minimize
    ``(w1*spill + w2*overshoot) / floor`` over the homogeneous feasible cone
    with the floor variable capped at 1 (scale-free, so the cap is lossless).

    Variables in dense order: (beamlets on active set, spill, overshoot,
    floor), all nonnegative; the ratio requires floor > 0.
    """

    operator: TomoOperator
    partition: DomainPartition
    scaled_target: np.ndarray
    critical_dose: float
    w1: float
    w2: float

    @property
    def n_active(self) -> int:
        return int(self.partition.active.size)

    @property
    def n_vars(self) -> int:
        return self.n_active + 3

    def numerator(self, x: np.ndarray) -> float:
        return float(self.w1 * x[-3] + self.w2 * x[-2])

    def denominator(self, x: np.ndarray) -> float:
        return float(x[-1])

    def _dose_from_active(self, g: np.ndarray) -> np.ndarray:
        full = np.zeros(self.operator.n_rays)
        full[self.partition.active] = g
        return self.operator.apply_forward(
            full.reshape(self.operator.sinogram_shape)).ravel()

    def constraint_rows(self, x: np.ndarray) -> np.ndarray:
        """All rows of the cone plus the floor cap, as values <= 0."""
        g = x[:self.n_active]
        spill, overshoot, floor = x[-3], x[-2], x[-1]
        field = self._dose_from_active(g)
        band = field[self.partition.band] - spill
        gel = field[self.partition.gel]
        gel_u = gel - overshoot * self.scaled_target
        gel_l = floor * self.scaled_target - gel
        cap = np.array([floor - 1.0])
        return np.concatenate([band, gel_u, gel_l, cap])

    def is_feasible(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        """Cone membership with a strictly positive floor (ratio domain)."""
        x = np.asarray(x, dtype=float)
        if x[-1] <= 0 or np.any(x[:self.n_active] < -tol):
            return False
        return bool(np.all(self.constraint_rows(x) <= tol))

    def ratio(self, x: np.ndarray) -> float:
        return self.numerator(x) / self.denominator(x)

    def to_lp_point(self, x: np.ndarray) -> np.ndarray:
        """Scale-gauge image of a fractional-feasible point: divide by the
        floor so the transformed floor equals one."""
        x = np.asarray(x, dtype=float)
        if x[-1] <= 0:
            raise ValueError("floor must be positive to map into the LP gauge")
        t = 1.0 / x[-1]
        y = t * x[:self.n_active]
        return np.concatenate([y, [t * x[-3], t * x[-2]]])

    def materialize_constraints(self, limit: int = DENSE_ENTRY_LIMIT):
        """Dense cone rows over (beamlets, spill, overshoot, floor)."""
        n_band = self.partition.band.size
        n_gel = self.partition.gel.size
        n_rows = n_band + 2 * n_gel + 1
        entries = n_rows * self.n_vars
        if entries > limit:
            raise SizeLimitExceeded(f"{entries} entries > {limit}")
        cols = np.zeros((self.partition.n_voxels, self.n_active))
        for j in range(self.n_active):
            e = np.zeros(self.n_active)
            e[j] = 1.0
            cols[:, j] = self._dose_from_active(e)
        G = np.zeros((n_rows, self.n_vars))
        h = np.zeros(n_rows)
        G[:n_band, :self.n_active] = cols[self.partition.band, :]
        G[:n_band, -3] = -1.0
        G[n_band:n_band + n_gel, :self.n_active] = cols[self.partition.gel, :]
        G[n_band:n_band + n_gel, -2] = -self.scaled_target
        G[n_band + n_gel:-1, :self.n_active] = -cols[self.partition.gel, :]
        G[n_band + n_gel:-1, -1] = self.scaled_target
        G[-1, -1] = 1.0
        h[-1] = 1.0
        return G, h


def build_lfp(op: TomoOperator, partition: DomainPartition,
              target_dose: np.ndarray, w1: float = 1.0,
              w2: float = 1.0) -> LfProblem:
    """Fractional counterpart of the weighted form (oracle use only)."""
    if w1 < 0 or w2 < 0 or (w1 == 0 and w2 == 0):
        raise InvalidWeights(f"w1={w1}, w2={w2}")
    gel_target = _validated_gel_target(partition, target_dose)
    critical = float(gel_target.min())
    return LfProblem(operator=op, partition=partition,
                     scaled_target=gel_target / critical,
                     critical_dose=critical, w1=float(w1), w2=float(w2))
