"""Scale-invariant evaluation of a dose field against its target.

DTVR: max/min of the target-normalized dose over the gel (1 = perfect
conformity).  DSR: worst band dose over the minimum gel relative dose,
using the target normalized by the critical dose.  PSR: min gel over max
band, in the dose and the response domain.  DTVR/DSR are invariant under
positive scaling of the projection vector; PSR_f is, PSR_m is not.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import EmptyBand, EmptyGel, NonPositiveDose
from .material import RichardsParams, richards_forward


def _gel_relative_min(dose_flat, target_flat, gel):
    if gel.size == 0:
        raise EmptyGel("metrics need a nonempty gel region")
    d = dose_flat[gel]
    t = target_flat[gel]
    if np.any(t <= 0):
        raise NonPositiveDose("target dose must be positive on the gel")
    if np.any(d <= 0):
        raise NonPositiveDose("dose must be positive on the gel")
    r = d / t
    return r.min(), r.max()


def dtvr(dose: np.ndarray, target_dose: np.ndarray, gel: np.ndarray) -> float:
    """Dose-to-target value ratio over the gel region."""
    lo, hi = _gel_relative_min(np.ravel(dose), np.ravel(target_dose), gel)
    return float(hi / lo)


def dsr(dose: np.ndarray, scaled_target: np.ndarray, gel: np.ndarray,
        band: np.ndarray) -> float:
    """Dose spillage ratio; ``scaled_target`` is target/critical dose."""
    if band.size == 0:
        raise EmptyBand("DSR is undefined without a band region")
    dose_flat = np.ravel(dose)
    lo, _ = _gel_relative_min(dose_flat, np.ravel(scaled_target), gel)
    return float(dose_flat[band].max() / lo)


def psr(dose: np.ndarray, gel: np.ndarray, band: np.ndarray,
        p: RichardsParams) -> tuple[float, float]:
    """Process separation ratios (dose domain, response domain).

    Values above 1 mean a single global threshold separates gel from band.
    A zero band maximum yields +inf.
    """
    if band.size == 0:
        raise EmptyBand("PSR is undefined without a band region")
    dose_flat = np.ravel(dose)
    gel_min = dose_flat[gel].min()
    band_max = dose_flat[band].max()
    psr_f = math.inf if band_max == 0 else float(gel_min / band_max)
    m_gel_min = float(richards_forward(gel_min, p))
    m_band_max = float(richards_forward(band_max, p))
    psr_m = math.inf if m_band_max == 0 else m_gel_min / m_band_max
    return psr_f, psr_m


@dataclass(frozen=True)
class MetricsReport:
    """One row of conformity/separation numbers for a solved field.

    ``gel_ratio_*`` are the realized response ratios m/m_T over the gel;
    band metrics are NaN when the band region is empty (serialized as
    "undefined", never as 0).
    """

    dtvr_f: float
    dtvr_m: float
    dsr: float
    psr_f: float
    psr_m: float
    gel_ratio_min: float
    gel_ratio_max: float
    band_max_f: float
    band_max_m: float

    def to_csv_row(self) -> dict[str, str]:
        row = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and math.isnan(v):
                row[f.name] = "undefined"
            else:
                row[f.name] = format(v, ".17g")
        return row


def compute_metrics(dose: np.ndarray, target_dose: np.ndarray,
                    target_response: np.ndarray, critical_dose: float,
                    gel: np.ndarray, band: np.ndarray,
                    p: RichardsParams) -> MetricsReport:
    """Assemble the full report for a physical dose field."""
    dose_flat = np.ravel(np.asarray(dose, dtype=float))
    target_flat = np.ravel(np.asarray(target_dose, dtype=float))
    response = richards_forward(dose_flat, p)
    m_target_flat = np.ravel(np.asarray(target_response, dtype=float))

    lo, hi = _gel_relative_min(dose_flat, target_flat, gel)
    ratios_m = response[gel] / m_target_flat[gel]

    if band.size:
        scaled_target = target_flat / critical_dose
        dsr_val = dsr(dose_flat, scaled_target, gel, band)
        psr_f, psr_m = psr(dose_flat, gel, band, p)
        band_max_f = float(dose_flat[band].max())
        band_max_m = float(richards_forward(band_max_f, p))
    else:
        dsr_val = psr_f = psr_m = band_max_f = band_max_m = math.nan

    return MetricsReport(
        dtvr_f=float(hi / lo),
        dtvr_m=float(ratios_m.max() / ratios_m.min()),
        dsr=dsr_val,
        psr_f=psr_f,
        psr_m=psr_m,
        gel_ratio_min=float(ratios_m.min()),
        gel_ratio_max=float(ratios_m.max()),
        band_max_f=band_max_f,
        band_max_m=band_max_m,
    )


def write_metrics_csv(report: MetricsReport, path) -> None:
    row = report.to_csv_row()
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)


def region_histograms(dose: np.ndarray, gel: np.ndarray, band: np.ndarray,
                      ext: np.ndarray, n_bins: int = 64):
    """Per-region dose histograms on shared bin edges.

    Returns (edges, {region: counts}); regions with no voxels get all-zero
    counts.
    """
    dose_flat = np.ravel(np.asarray(dose, dtype=float))
    hi = float(dose_flat.max())
    if hi <= 0:
        hi = 1.0
    edges = np.linspace(0.0, hi, n_bins + 1)
    out = {}
    for name, idx in (("gel", gel), ("band", band), ("ext", ext)):
        if idx.size:
            counts, _ = np.histogram(dose_flat[idx], bins=edges)
        else:
            counts = np.zeros(n_bins, dtype=int)
        out[name] = counts
    return edges, out


def write_histograms_csv(dose, gel, band, ext, path, n_bins: int = 64) -> None:
    edges, hists = region_histograms(dose, gel, band, ext, n_bins)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "bin_left", "count"])
        for region, counts in hists.items():
            for left, cnt in zip(edges[:-1], counts):
                writer.writerow([region, format(left, ".17g"), int(cnt)])
