"""Rate functions, bound envelopes and the limiting variance of the
quadratic variation.

Every envelope is a rate shape known only up to a multiplicative constant;
comparisons are meaningful across ``n``, not in absolute value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .errors import ParamOutOfRange, SeriesNotConverged
from .ou_covariance import fou_acf_expansion, stationary_fou_acf, ASYMPTOTIC_ACF_THRESHOLD
from .quadrature import DEFAULT_QUAD, QuadConfig

_EXACT_BRANCH_ATOL = 1e-12


class RateLabel(str, enum.Enum):
    BOUNDARY_HALF = "boundary_half"
    POLYNOMIAL = "polynomial"
    LOG_TWO_THIRDS = "log_two_thirds"
    BERRY_ESSEEN = "berry_esseen"
    LOG_THREE_QUARTERS = "log_three_quarters"


@dataclass(frozen=True)
class RateBranch:
    """``n^exponent * log(n)^log_power`` tagged with the case it comes from."""

    label: RateLabel
    exponent: float
    log_power: float

    def __call__(self, n) -> float:
        n = float(n)
        return n**self.exponent * math.log(n) ** self.log_power


@dataclass(frozen=True)
class SeriesConfig:
    tail_tol: float = 1e-8
    max_terms: int = 10**6

    def __post_init__(self):
        if not self.tail_tol > 0 or self.max_terms < 1:
            raise ParamOutOfRange("tail_tol and max_terms must be positive")


DEFAULT_SERIES = SeriesConfig()


def _check_n(n, minimum=2):
    if n < minimum:
        raise ParamOutOfRange(f"n={n} must be at least {minimum}")


def _is(x, y):
    return math.isclose(x, y, rel_tol=0.0, abs_tol=_EXACT_BRANCH_ATOL)


def phi(alpha: float, n) -> float:
    """``n^-1`` for ``alpha < 1/2``, else ``n^(2 alpha - 2)``."""
    if not 0 < alpha < 1:
        raise ParamOutOfRange(f"alpha={alpha} must lie in (0, 1)")
    _check_n(n)
    return float(n) ** -1.0 if alpha < 0.5 else float(n) ** (2 * alpha - 2)


def psi(alpha: float, n) -> float:
    """``n^-1`` for ``alpha < 1/2``, else ``n^(4 alpha - 3)`` (``alpha < 3/4``)."""
    if not 0 < alpha < 0.75:
        raise ParamOutOfRange(f"alpha={alpha} must lie in (0, 3/4)")
    _check_n(n)
    return float(n) ** -1.0 if alpha < 0.5 else float(n) ** (4 * alpha - 3)


def tv_branch(beta: float) -> RateBranch:
    """Case of the fourth-moment envelope for covariance decay ``|t|^-beta``."""
    if beta < 0.5 and not _is(beta, 0.5):
        raise ParamOutOfRange(f"beta={beta} must be at least 1/2")
    if _is(beta, 0.5):
        return RateBranch(RateLabel.BOUNDARY_HALF, 0.0, 0.0)
    if _is(beta, 2.0 / 3.0):
        return RateBranch(RateLabel.LOG_TWO_THIRDS, -0.5, 2.0)
    if beta < 2.0 / 3.0:
        return RateBranch(RateLabel.POLYNOMIAL, 1.5 - 3 * beta, 0.0)
    return RateBranch(RateLabel.BERRY_ESSEEN, -0.5, 0.0)


def tv_envelope(beta: float, n) -> float:
    _check_n(n)
    return tv_branch(beta)(n)


def wasserstein_bound(bias: float, v_n: float, beta: float, n) -> float:
    """``sqrt(n / v_n) * bias + tv_envelope(beta, n) / min(v_n^2, v_n^1.5)``."""
    if not (bias >= 0 and math.isfinite(bias)):
        raise ParamOutOfRange(f"bias={bias} must be finite and nonnegative")
    if not (v_n > 0 and math.isfinite(v_n)):
        raise ParamOutOfRange(f"v_n={v_n} must be finite and positive")
    return math.sqrt(n / v_n) * bias + tv_envelope(beta, n) / min(v_n**2, v_n**1.5)


def sfou_tv_branch(H: float) -> RateBranch:
    if not 0 < H <= 0.75 + _EXACT_BRANCH_ATOL:
        raise ParamOutOfRange(f"H={H} must lie in (0, 3/4]")
    if _is(H, 0.75):
        return RateBranch(RateLabel.LOG_THREE_QUARTERS, 0.0, -1.5)
    if _is(H, 2.0 / 3.0):
        return RateBranch(RateLabel.LOG_TWO_THIRDS, -0.5, 2.0)
    if H < 2.0 / 3.0:
        return RateBranch(RateLabel.BERRY_ESSEEN, -0.5, 0.0)
    return RateBranch(RateLabel.POLYNOMIAL, 6 * H - 4.5, 0.0)


def sfou_tv_rate(H: float, n) -> float:
    """Total-variation rate of the standardized quadratic variation for sfOU."""
    _check_n(n, 3)
    return sfou_tv_branch(H)(n)


def log_case_variance(theta: float, K: float = 1.0) -> float:
    """Limit of ``v_n / log n`` when the memory index equals 3/4.

    ``9 / (16 theta^4)``; the bifractional driver (``K < 1``) carries the
    extra factor ``2^(2 - 2K)`` of its stationary part.
    """
    if not theta > 0:
        raise ParamOutOfRange(f"theta={theta} must be positive")
    if not 0 < K <= 1:
        raise ParamOutOfRange(f"K={K} must lie in (0, 1]")
    return 2.0 ** (2.0 - 2.0 * K) * 9.0 / (16.0 * theta**4)


# ---------------------------------------------------------------------------
# limiting variance of the quadratic variation
# ---------------------------------------------------------------------------

_TAIL_ORDERS = 10


def _tail_sum_squares(alpha: float, theta: float, start: int, orders: int = _TAIL_ORDERS):
    """``sum_{i >= start} rho(i)^2`` from the large-lag expansion of ``rho``.

    Returns the sum and the magnitude of the last order kept (error proxy).
    """
    coef = fou_acf_expansion(alpha, theta, orders)
    total = 0.0
    last = 0.0
    # group by total order m + m' so the last group measures the truncation
    for order in range(2, orders + 1):
        grp = 0.0
        for m in range(1, order):
            mm = order - m
            c = coef[m - 1] * coef[mm - 1]
            if c == 0.0:
                continue
            grp += c * zeta(2.0 * order - 4.0 * alpha, start)
        total += grp
        last = abs(grp)
    return total, last


def stationary_sum_squares(
    alpha: float, theta: float, cfg: SeriesConfig = DEFAULT_SERIES, q: QuadConfig = DEFAULT_QUAD
) -> float:
    """``sum_{i in Z} rho_alpha(i)^2`` for ``alpha < 3/4``.

    Lags below ``N`` are summed exactly; beyond ``N`` (where
    ``theta N >= 40``) the square of the large-lag expansion is summed in
    closed form with Hurwitz zeta functions. ``N`` doubles until the
    truncation proxy is below ``cfg.tail_tol``.
    """
    if not 0 < alpha < 0.75:
        raise ParamOutOfRange(f"memory index {alpha} must lie in (0, 3/4)")
    if not theta > 0:
        raise ParamOutOfRange(f"theta={theta} must be positive")
    start = max(64, math.ceil(ASYMPTOTIC_ACF_THRESHOLD / theta))
    rho = []
    while True:
        if start > cfg.max_terms:
            raise SeriesNotConverged(
                f"needs more than max_terms={cfg.max_terms} exact lags (theta={theta})"
            )
        rho.extend(stationary_fou_acf(alpha, theta, k, q) for k in range(len(rho), start))
        tail, err = _tail_sum_squares(alpha, theta, start)
        if err <= cfg.tail_tol:
            break
        start *= 2
    r = np.asarray(rho)
    head = r[0] ** 2 + 2.0 * math.fsum(r[1:] ** 2)
    return float(head + 2.0 * tail)


def sigma2_sfou(
    theta: float, H: float, cfg: SeriesConfig = DEFAULT_SERIES, q: QuadConfig = DEFAULT_QUAD
) -> float:
    """``lim v_n = 2 sum_{i in Z} rho_H(i)^2`` for the sub-fractional (or
    fractional) OU sequence, ``0 < H < 3/4``."""
    return 2.0 * stationary_sum_squares(H, theta, cfg, q)


def sigma2_bifou(
    theta: float,
    H: float,
    K: float,
    cfg: SeriesConfig = DEFAULT_SERIES,
    q: QuadConfig = DEFAULT_QUAD,
) -> float:
    """``lim v_n`` for the bifractional OU sequence, ``HK < 3/4``.

    Lag covariances tend to ``2^(1-K) rho_HK(i)``, hence the factor
    ``2^(2-2K)`` in front of the fractional value with index ``HK``.
    """
    if not 0 < K <= 1:
        raise ParamOutOfRange(f"K={K} must lie in (0, 1]")
    if not 0 < H < 1:
        raise ParamOutOfRange(f"H={H} must lie in (0, 1)")
    return 2.0 ** (2.0 - 2.0 * K) * sigma2_sfou(theta, H * K, cfg, q)


def memory_beta(alpha: float) -> float:
    """Covariance decay exponent ``2 - 2 alpha`` of the stationary part."""
    return 2.0 - 2.0 * alpha
