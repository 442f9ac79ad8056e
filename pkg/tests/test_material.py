import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sipo.errors import OutOfInvertibleRange
from sipo.material import (RichardsParams, response_to_dose,
                           richards_derivative, richards_forward,
                           richards_inverse)


def test_logistic_midpoint():
    for beta in (0.5, 1.0, 4.0):
        p = RichardsParams(alpha=0.0, k=1.0, beta=beta, gamma=1.0, f0=2.0)
        assert richards_forward(2.0, p) == pytest.approx(0.5, abs=1e-15)


def test_asymptotes():
    p = RichardsParams(alpha=0.2, k=0.9, beta=2.0, gamma=1.5, f0=0.0)
    assert richards_forward(1e6, p) == pytest.approx(0.9, abs=1e-12)
    assert richards_forward(-1e6, p) == pytest.approx(0.2, abs=1e-12)
    # No overflow deep in the tails.
    assert np.isfinite(richards_forward(np.array([-1e9, 1e9]), p)).all()


def test_shape_exponent_midpoint_value():
    p = RichardsParams(alpha=0.0, k=1.0, beta=1.0, gamma=2.0, f0=0.7)
    assert richards_forward(0.7, p) == pytest.approx(0.5 ** 0.5, abs=1e-14)


def test_inverse_midpoint():
    p = RichardsParams(alpha=0.0, k=1.0, beta=3.0, gamma=1.0, f0=1.25)
    assert richards_inverse(0.5, p) == pytest.approx(1.25, abs=1e-12)


def test_inverse_at_case2_threshold():
    p = RichardsParams(alpha=0.0, k=1.0, beta=1.0, gamma=1.0, f0=0.0)
    expected = -np.log(1.0 / 0.23 - 1.0)   # ~ -1.20831
    assert richards_inverse(0.23, p) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-1.20831, abs=5e-6)


def test_round_trip_identity():
    p = RichardsParams(alpha=0.1, k=2.0, beta=4.0, gamma=0.8, f0=1.0)
    f = np.linspace(p.f0 - 5 / p.beta, p.f0 + 5 / p.beta, 101)
    back = richards_inverse(richards_forward(f, p), p)
    assert np.abs(back - f).max() < 1e-9
    m = np.linspace(0.2, 1.9, 57)
    forward = richards_forward(richards_inverse(m, p), p)
    assert np.abs(forward - m).max() < 1e-9


def test_inverse_domain_guard_reports_indices():
    p = RichardsParams()
    m = np.array([0.5, 1.0, -0.2, 0.7])
    with pytest.raises(OutOfInvertibleRange) as excinfo:
        richards_inverse(m, p)
    assert excinfo.value.indices.tolist() == [1, 2]


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_strict_monotonicity(f1, f2):
    p = RichardsParams(alpha=0.0, k=1.0, beta=2.5, gamma=1.3, f0=0.4)
    if abs(f1 - f2) < 1e-9:   # below this the response difference underflows
        return
    lo, hi = sorted((f1, f2))
    assert richards_forward(lo, p) < richards_forward(hi, p)
    m_lo, m_hi = richards_forward(lo, p), richards_forward(hi, p)
    assert richards_inverse(m_lo, p) < richards_inverse(m_hi, p)


def test_derivative_matches_central_differences():
    p = RichardsParams(alpha=0.05, k=1.4, beta=3.0, gamma=0.7, f0=0.6)
    f = np.linspace(p.f0 - 4 / p.beta, p.f0 + 4 / p.beta, 41)
    h = 1e-6
    numeric = (richards_forward(f + h, p) - richards_forward(f - h, p)) / (2 * h)
    analytic = richards_derivative(f, p)
    rel = np.abs(analytic - numeric) / np.abs(numeric)
    assert rel.max() < 1e-6


def test_binary_target_maps_to_constant_dose():
    p = RichardsParams()  # alpha 0, k 1, gamma 1, beta 4, f0 1
    m = np.zeros((6, 6))
    m[2:4, 2:4] = 0.5
    gel = np.flatnonzero(m.ravel() > 0)
    f = response_to_dose(m, gel, p)
    assert np.allclose(f.ravel()[gel], p.f0)
    off_gel = np.setdiff1d(np.arange(36), gel)
    assert np.all(f.ravel()[off_gel] == 0.0)


def test_grayscale_levels_map_to_decreasing_doses():
    p = RichardsParams()
    m = np.zeros(3 + 1)
    m[:3] = [0.7, 0.6, 0.5]
    gel = np.array([0, 1, 2])
    f = response_to_dose(m, gel, p).ravel()
    assert f[0] > f[1] > f[2] > 0
