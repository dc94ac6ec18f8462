"""Quadratic-variation estimator and the exact second-chaos functionals.

With ``C`` the covariance matrix of ``(X_1, ..., X_n)`` and
``F_n = (sum X_i^2 - E sum X_i^2) / sqrt(n v_n)``:

* ``v_n = (2/n) tr(C^2)``
* ``kappa3(F_n) = 8 tr(C^3) / (n v_n)^{3/2}``
* ``kappa4(F_n) = 48 tr(C^4) / (n v_n)^2``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DegenerateCovariance, EmptyInput, NonpositiveInput
from .kernels import Family, KernelSpec


@dataclass(frozen=True)
class EstimateResult:
    n: int
    f_hat: float
    a_n: float | None = None
    centered_scaled: float | None = None


@dataclass(frozen=True)
class CumulantReport:
    n: int
    v_n: float
    kappa3: float
    kappa4: float
    tv_bound: float


def _matrix(cov) -> np.ndarray:
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    if c.size == 0:
        raise EmptyInput("empty covariance matrix")
    if c.shape[0] != c.shape[1]:
        raise EmptyInput(f"covariance must be square, got {c.shape}")
    return c


def f_hat(observations) -> float:
    """``(1/n) sum X_i^2``."""
    x = np.asarray(observations, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("no observations")
    return float(np.dot(x, x) / x.size)


def f_hat_batch(values) -> np.ndarray:
    """Row-wise :func:`f_hat` for an ``m x n`` array of replications."""
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if v.shape[1] == 0:
        raise EmptyInput("no observations")
    return np.einsum("ij,ij->i", v, v) / v.shape[1]


def a_n(cov) -> float:
    """Mean of the diagonal, i.e. ``E f_hat``."""
    return float(np.mean(np.diag(_matrix(cov))))


def _traces(c: np.ndarray) -> tuple[float, float, float]:
    c2 = c @ c
    return float(np.trace(c2)), float(np.sum(c2 * c)), float(np.sum(c2 * c2))


def v_n(cov) -> float:
    c = _matrix(cov)
    return float(2.0 * np.sum(c * c) / c.shape[0])


def _require_variance(tr2: float) -> None:
    if not tr2 > 0:
        raise DegenerateCovariance("v_n = 0: the quadratic variation is degenerate")


def kappa3(cov) -> float:
    c = _matrix(cov)
    tr2, tr3, _ = _traces(c)
    _require_variance(tr2)
    return 8.0 * tr3 / (2.0 * tr2) ** 1.5


def kappa4(cov) -> float:
    c = _matrix(cov)
    tr2, _, tr4 = _traces(c)
    _require_variance(tr2)
    return 48.0 * tr4 / (2.0 * tr2) ** 2


def tv_bound(k3: float, k4: float) -> float:
    """``max(kappa4, |kappa3|)``, the fourth-moment distance bound without its constant."""
    return max(float(k4), abs(float(k3)))


def cumulant_report(cov) -> CumulantReport:
    """All cumulant functionals from one pair of matrix products."""
    c = _matrix(cov)
    n = c.shape[0]
    tr2, tr3, tr4 = _traces(c)
    _require_variance(tr2)
    k3 = 8.0 * tr3 / (2.0 * tr2) ** 1.5
    k4 = 48.0 * tr4 / (2.0 * tr2) ** 2
    return CumulantReport(n, 2.0 * tr2 / n, k3, k4, tv_bound(k3, k4))


def estimate(observations, cov=None, f_ref: float | None = None) -> EstimateResult:
    x = np.asarray(observations, dtype=float).ravel()
    fh = f_hat(x)
    an = a_n(cov) if cov is not None else None
    cs = math.sqrt(x.size) * (fh - f_ref) if f_ref is not None else None
    return EstimateResult(x.size, fh, an, cs)


def invert_to_theta(f_value: float, spec: KernelSpec) -> float:
    """Solve ``limit_variance(theta) = f_value`` in closed form."""
    f_value = float(f_value)
    if not f_value > 0:
        raise NonpositiveInput(f"f_value={f_value} must be positive")
    if spec.family is Family.BIFBM:
        a = spec.H * spec.K
        c = 2.0 ** (1.0 - spec.K) * a * gamma_fn(2 * a)
    else:
        a = spec.H
        c = a * gamma_fn(2 * a)
    return float((c / f_value) ** (1.0 / (2.0 * a)))
