import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isaclab.specfun import (ChiSqTail, ConvergenceError, chi2_tail, chi2_tail_inv, clamp_prob, gauss_q,
                             gauss_q_inv, log_chi2_tail)

from oracles import grid_scan_inverse, ncx2_sf, sample_ncx2_tail

# 30-digit Poisson-mixture evaluations (mpmath, independent summation)
FROZEN_TAIL = [
    (2048, 40.0, 2100.0, 0.42308910446757245),
    (20, 3.0, 25.0, 0.35481300335645769),
    (200, 50.0, 300.0, 0.025380718096341981),
]
FROZEN_INV_64_5_025 = 76.773112273557717
FROZEN_Q1 = 0.15865525393145705


def test_central_two_dof_median():
    assert chi2_tail(2, 0.0, 2 * math.log(2)) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("dof,nc", [(2, 0.0), (64, 5.0), (2048, 1e4)])
def test_tail_at_zero_is_one(dof, nc):
    assert chi2_tail(dof, nc, 0.0) == 1.0


@pytest.mark.parametrize("dof,nc,x,expected", FROZEN_TAIL)
def test_tail_matches_high_precision_values(dof, nc, x, expected):
    assert chi2_tail(dof, nc, x) == pytest.approx(expected, rel=1e-11)


def test_tail_matches_sampling_estimate():
    rng = np.random.default_rng(7)
    p_hat, se = sample_ncx2_tail(2048, 40.0, 2100.0, 10**6, rng)
    assert abs(chi2_tail(2048, 40.0, 2100.0) - p_hat) <= 3 * se


@pytest.mark.parametrize("dof,nc,x", [(2, 1.0, 3.0), (16, 0.5, 30.0), (64, 5.0, 70.0), (512, 200.0, 800.0),
                                      (2048, 1e3, 3400.0), (8, 0.0, 2.0)])
def test_tail_agrees_with_scipy(dof, nc, x):
    assert chi2_tail(dof, nc, x) == pytest.approx(ncx2_sf(dof, nc, x), rel=1e-9, abs=1e-300)


def test_large_noncentrality_stays_finite():
    lam = 1e12
    mean, sd = 2048 + lam, math.sqrt(4096 + 4 * lam)
    p = chi2_tail(2048, lam, mean + sd)
    # Gaussian limit: Q(1) up to skewness O(1/sqrt(lam))
    assert p == pytest.approx(FROZEN_Q1, abs=1e-4)


def test_deep_tail_log_space():
    lt = log_chi2_tail(64, 5.0, 2000.0)
    assert np.isfinite(lt) and lt < -700


# explicit 40-digit sums, far below double-precision underflow
@pytest.mark.parametrize("dof,nc,x,expected", [(2, 0.0, 3000.0, -1500.0),
                                               (64, 0.0, 3000.0, -1351.3615226879805),
                                               (64, 5.0, 3000.0, -1288.0596552169967)])
def test_log_tail_beyond_underflow(dof, nc, x, expected):
    assert log_chi2_tail(dof, nc, x) == pytest.approx(expected, rel=1e-13)


def test_inverse_basic_exponential():
    assert chi2_tail_inv(2, 0.0, math.exp(-1)) == pytest.approx(2.0, rel=1e-12)


def test_inverse_matches_frozen_and_grid_scan():
    x = chi2_tail_inv(64, 5.0, 0.25)
    assert x == pytest.approx(FROZEN_INV_64_5_025, rel=1e-12)
    scan = grid_scan_inverse(lambda t: ncx2_sf(64, 5.0, t), 0.25, 60.0, 95.0, n=35001)
    assert x == pytest.approx(scan, abs=1e-6)


@pytest.mark.parametrize("p", [1e-6, 1e-3, 0.25, 0.5, 0.9, 1 - 1e-6])
@pytest.mark.parametrize("dof,nc", [(2, 0.0), (128, 10.0), (2048, 4e3), (8192, 1e8)])
def test_inverse_roundtrip(dof, nc, p):
    x = chi2_tail_inv(dof, nc, p)
    assert chi2_tail(dof, nc, x) == pytest.approx(p, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 512), st.floats(0.0, 1e4), st.floats(1e-6, 1 - 1e-6))
def test_inverse_roundtrip_property(half_dof, nc, p):
    x = chi2_tail_inv(2 * half_dof, nc, p)
    assert chi2_tail(2 * half_dof, nc, x) == pytest.approx(p, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 256), st.floats(0.0, 500.0), st.floats(0.0, 3000.0), st.floats(0.0, 50.0))
def test_tail_monotone_in_x_and_nc(half_dof, nc, x, dx):
    dof = 2 * half_dof
    assert chi2_tail(dof, nc, x + dx) <= chi2_tail(dof, nc, x) + 1e-15
    assert chi2_tail(dof, nc + dx, x) >= chi2_tail(dof, nc, x) - 1e-15


def test_inverse_strictly_decreasing_in_p():
    xs = [chi2_tail_inv(64, 5.0, p) for p in np.linspace(0.01, 0.99, 30)]
    assert np.all(np.diff(xs) < 0)


def test_tail_vanishes_far_right():
    assert chi2_tail(16, 1.0, 1e6) == 0.0


def test_vectorized_tail():
    xs = np.array([0.0, 10.0, 20.0])
    out = chi2_tail(16, 1.0, xs)
    assert out.shape == (3,)
    assert out[0] == 1.0 and out[1] > out[2]


@pytest.mark.parametrize("args", [(3, 0.0, 1.0), (0, 0.0, 1.0), (4, -1.0, 1.0), (4, 1.0, -0.5)])
def test_domain_errors(args):
    with pytest.raises(ValueError):
        chi2_tail(*args)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 2.0])
def test_inverse_domain_errors(p):
    with pytest.raises(ValueError):
        chi2_tail_inv(4, 1.0, p)


def test_convergence_error_is_runtime_error():
    assert issubclass(ConvergenceError, RuntimeError)


def test_gauss_q_values():
    assert gauss_q(0.0) == 0.5
    assert gauss_q(1.0) == pytest.approx(FROZEN_Q1, rel=1e-14)
    assert gauss_q_inv(0.5) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-5.0, 37.0))
def test_gauss_q_inverse_roundtrip(x):
    assert gauss_q_inv(gauss_q(x)) == pytest.approx(x, abs=1e-9)


def test_gauss_q_strictly_decreasing():
    assert np.all(np.diff(gauss_q(np.linspace(-5, 8, 1001))) < 0)


def test_gauss_q_inv_rejects_bounds():
    for p in (0.0, 1.0):
        with pytest.raises(ValueError):
            gauss_q_inv(p)


def test_clamp_prob():
    assert clamp_prob(0.0) == 1e-300
    assert clamp_prob(1.0) <= 1.0
    assert clamp_prob(-3.0) == 1e-300


def test_law_object():
    law = ChiSqTail(64, 5.0)
    assert law.mean == 69.0 and law.var == 148.0
    assert law.sf(law.isf(0.3)) == pytest.approx(0.3, rel=1e-10)
    with pytest.raises(ValueError):
        ChiSqTail(5, 0.0)
    with pytest.raises(ValueError):
        ChiSqTail(4, float("nan"))


@pytest.mark.parametrize("nc", [5e-324, 2.2e-311, 1e-200, 1e-20])
def test_subnormal_noncentrality_matches_central(nc):
    for x in (0.5, 1.0, 30.0):
        assert chi2_tail(2, nc, x) == pytest.approx(chi2_tail(2, 0.0, x), rel=1e-12)
