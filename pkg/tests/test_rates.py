import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qvgauss.errors import ParamOutOfRange, SeriesNotConverged
from qvgauss.estimators import v_n
from qvgauss.ou_covariance import make_ou, ou_gram, stationary_fou_acf
from qvgauss.rates import (
    RateLabel,
    SeriesConfig,
    log_case_variance,
    phi,
    psi,
    sfou_tv_branch,
    sfou_tv_rate,
    sigma2_bifou,
    sigma2_sfou,
    tv_branch,
    tv_envelope,
    wasserstein_bound,
)


def test_phi_psi():
    assert phi(0.3, 100) == pytest.approx(0.01)
    assert phi(0.5, 100) == pytest.approx(0.01)
    assert phi(0.75, 16) == pytest.approx(0.25)
    assert psi(0.4, 50) == pytest.approx(0.02)
    assert psi(0.6, 10) == pytest.approx(10**-0.6)
    assert psi(0.5, 77) == pytest.approx(1 / 77)
    with pytest.raises(ParamOutOfRange):
        psi(0.75, 10)
    with pytest.raises(ParamOutOfRange):
        phi(0.3, 1)


@given(st.floats(0.01, 0.7499), st.integers(2, 10**7))
def test_psi_dominates_inverse_n(alpha, n):
    assert psi(alpha, n) >= (1.0 / n) * (1 - 1e-12)


def test_tv_envelope_branches():
    assert tv_envelope(0.5, 12345) == 1.0
    assert tv_envelope(0.7, 10000) == pytest.approx(0.01)
    assert tv_envelope(0.6, 1000) == pytest.approx(1000**-0.3)
    assert tv_envelope(2 / 3, 100) == pytest.approx(100**-0.5 * math.log(100) ** 2)
    assert tv_branch(2 / 3 - 1e-6).label is RateLabel.POLYNOMIAL
    assert tv_branch(2 / 3 + 1e-6).label is RateLabel.BERRY_ESSEEN
    assert tv_branch(0.5 + 1e-9).label is RateLabel.POLYNOMIAL
    with pytest.raises(ParamOutOfRange):
        tv_envelope(0.4, 10)


def test_wasserstein_bound():
    assert wasserstein_bound(0, 1, 0.7, 100) == pytest.approx(0.1)
    assert wasserstein_bound(0.01, 1, 0.7, 100) == pytest.approx(0.2)
    assert wasserstein_bound(0, 4, 0.7, 100) == pytest.approx(0.0125)
    assert wasserstein_bound(0, 0.25, 0.7, 100) == pytest.approx(0.1 / 0.25**2)
    with pytest.raises(ParamOutOfRange):
        wasserstein_bound(0, 0, 0.7, 100)


def test_sfou_tv_rate():
    assert sfou_tv_rate(0.5, 400) == pytest.approx(0.05)
    assert sfou_tv_rate(0.7, 1000) == pytest.approx(1000**-0.3)
    assert sfou_tv_rate(0.75, math.exp(4)) == pytest.approx(0.125)
    assert sfou_tv_branch(2 / 3).label is RateLabel.LOG_TWO_THIRDS
    with pytest.raises(ParamOutOfRange):
        sfou_tv_rate(0.8, 100)


def test_log_case_variance():
    assert log_case_variance(1.0) == 0.5625
    assert log_case_variance(2.0) == pytest.approx(9 / 256)
    vals = [log_case_variance(t) for t in (1, 2, 4, 8, 100)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_sigma2_brownian_closed_form(theta):
    # rho(k) = exp(-theta k) / (2 theta): 2 sum_Z rho^2 = coth(theta) / (2 theta^2)
    assert sigma2_sfou(theta, 0.5) == pytest.approx(1 / math.tanh(theta) / (2 * theta**2), abs=1e-12)


def test_sigma2_against_direct_sum():
    # plain summation of 20000 exact lags plus an integral tail estimate
    a, th = 0.6, 1.0
    r = np.array([stationary_fou_acf(a, th, k) for k in range(20000)])
    c = 0.5 * 2 * a * (2 * a - 1) / th**2
    tail = c**2 * 20000 ** (4 * a - 3) / (3 - 4 * a)
    direct = 2 * (r[0] ** 2 + 2 * np.sum(r[1:] ** 2) + 2 * tail)
    assert sigma2_sfou(th, a) == pytest.approx(direct, abs=1e-8)


def test_sigma2_properties():
    for H in (0.2, 0.6, 0.7):
        assert sigma2_sfou(1.0, H) >= stationary_fou_acf(H, 1.0, 0) ** 2
    a = sigma2_sfou(1.0, 0.7)
    b = sigma2_sfou(1.0, 0.7, SeriesConfig(tail_tol=5e-9))
    assert abs(a - b) < 1e-6
    with pytest.raises(ParamOutOfRange):
        sigma2_sfou(1.0, 0.75)
    with pytest.raises(SeriesNotConverged):
        sigma2_sfou(1e-3, 0.6, SeriesConfig(max_terms=1000))


def test_sigma2_bifou():
    assert sigma2_bifou(1.3, 0.6, 1.0) == pytest.approx(sigma2_sfou(1.3, 0.6), rel=1e-15)
    v = sigma2_bifou(1.0, 0.6, 0.8)
    assert v > 0
    assert abs(v - sigma2_bifou(1.0, 0.6, 0.8, SeriesConfig(tail_tol=5e-9))) < 1e-6


def test_sigma2_is_limit_of_v_n():
    sp = make_ou("sfbm", 0.6, 1.0)
    s2 = sigma2_sfou(1.0, 0.6)
    ratios = [abs(v_n(ou_gram(sp, range(1, n + 1))) - s2) / psi(0.6, n) for n in (125, 250, 500, 1000)]
    assert max(ratios) / min(ratios) < 1.5
