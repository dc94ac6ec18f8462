import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvgauss.errors import DegenerateCovariance, EmptyInput, NonpositiveInput
from qvgauss.estimators import (
    a_n,
    cumulant_report,
    f_hat,
    invert_to_theta,
    kappa3,
    kappa4,
    tv_bound,
    v_n,
)
from qvgauss.kernels import make_kernel
from qvgauss.ou_covariance import limit_variance, make_ou, ou_gram
from qvgauss.simulate import map_blocks
from qvgauss.estimators import f_hat_batch


def random_psd(rng, n):
    a = rng.standard_normal((n, n + 2))
    return a @ a.T


def test_f_hat():
    assert f_hat([0, 0, 0]) == 0
    assert f_hat([1, -1, 2]) == 2
    with pytest.raises(EmptyInput):
        f_hat([])


def test_a_n_and_v_n():
    assert a_n(np.eye(3)) == 1
    assert a_n(np.diag([1.0, 2.0, 3.0])) == 2
    assert v_n(np.eye(7)) == 2
    assert v_n([[1.5]]) == pytest.approx(2 * 1.5**2)


def test_cumulants_closed_forms():
    for c in (0.3, 1.0, 7.0):
        assert kappa3([[c]]) == pytest.approx(2 * math.sqrt(2), rel=1e-14)
        assert kappa4([[c]]) == pytest.approx(12.0, rel=1e-14)
    for n in (5, 40):
        assert kappa3(np.eye(n)) == pytest.approx(2 * math.sqrt(2) / math.sqrt(n), rel=1e-14)
        assert kappa4(np.eye(n)) == pytest.approx(12 / n, rel=1e-14)
    with pytest.raises(DegenerateCovariance):
        kappa3(np.zeros((3, 3)))


def test_chi_square_moments_by_brute_force():
    # one coordinate: F = (X^2 - c) / sqrt(2 c^2), exact Gaussian moments of X
    c = 2.3
    m2, m4, m6, m8 = c, 3 * c**2, 15 * c**3, 105 * c**4
    mu3 = m6 - 3 * c * m4 + 3 * c**2 * m2 - c**3
    mu4 = m8 - 4 * c * m6 + 6 * c**2 * m4 - 4 * c**3 * m2 + c**4
    var = 2 * c**2
    assert kappa3([[c]]) == pytest.approx(mu3 / var**1.5, rel=1e-13)
    assert kappa4([[c]]) == pytest.approx(mu4 / var**2 - 3, rel=1e-13)


def test_tv_bound():
    assert tv_bound(2 * math.sqrt(2), 12) == 12
    assert tv_bound(0, 0) == 0
    for n in (18, 50, 400):
        rep = cumulant_report(np.eye(n))
        assert rep.tv_bound == pytest.approx(2 * math.sqrt(2) / math.sqrt(n))


def test_trace_forms_match_index_sums():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.standard_normal((5, 5))
        c = 0.5 * (a + a.T)
        n = 5
        v = v_n(c)
        tri = sum(c[i, k] * c[i, j] * c[j, k] for i, j, k in itertools.product(range(n), repeat=3))
        quad = sum(
            c[a1, a2] * c[a2, a3] * c[a3, a4] * c[a4, a1] for a1, a2, a3, a4 in itertools.product(range(n), repeat=4)
        )
        assert kappa3(c) == pytest.approx(8 * tri / (n * v) ** 1.5, abs=1e-12)
        assert kappa4(c) == pytest.approx(48 * quad / (n * v) ** 2, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_scale_invariance_and_positivity(n, lam, seed):
    c = random_psd(np.random.default_rng(seed), n)
    r1, r2 = cumulant_report(c), cumulant_report(lam * c)
    assert r2.kappa3 == pytest.approx(r1.kappa3, abs=1e-12, rel=1e-12)
    assert r2.kappa4 == pytest.approx(r1.kappa4, abs=1e-12, rel=1e-12)
    assert r1.kappa4 >= 0 and r1.v_n > 0


def test_report_consistency():
    c = ou_gram(make_ou("sfbm", 0.6, 1.0), range(1, 31))
    rep = cumulant_report(c)
    assert (rep.v_n, rep.kappa3, rep.kappa4) == pytest.approx((v_n(c), kappa3(c), kappa4(c)), rel=1e-13)
    assert rep.n == 30


def test_a_n_bias_shrinks():
    sp = make_ou("sfbm", 0.6, 1.0)
    f = limit_variance(sp)
    vals = [math.sqrt(n) * abs(a_n(ou_gram(sp, range(1, n + 1))) - f) for n in (100, 200, 400, 800, 1600)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_invert_to_theta():
    assert invert_to_theta(0.25, make_kernel("sfbm", 0.5)) == pytest.approx(2.0, abs=1e-14)
    f = limit_variance(make_ou("sfbm", 0.6, 1.7))
    assert invert_to_theta(f, make_kernel("sfbm", 0.6)) == pytest.approx(1.7, abs=1e-12)
    f = limit_variance(make_ou("bifbm", 0.7, 0.8, 0.9))
    assert invert_to_theta(f, make_kernel("bifbm", 0.7, 0.9)) == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(NonpositiveInput):
        invert_to_theta(0.0, make_kernel("fbm", 0.4))


def test_monte_carlo_mean_of_estimator():
    sp = make_ou("sfbm", 0.6, 1.0)
    cov = ou_gram(sp, range(1, 1001))
    fh, _ = map_blocks(cov, 100_000, 11, f_hat_batch)
    se = fh.std(ddof=1) / math.sqrt(fh.size)
    f = limit_variance(sp)
    # E f_hat = A_n exactly; the gap to f is the deterministic bias
    assert abs(fh.mean() - a_n(cov)) <= 3 * se
    assert abs(fh.mean() - f) <= 3 * se + abs(a_n(cov) - f)
