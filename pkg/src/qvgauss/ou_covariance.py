"""Covariance of the Ornstein-Uhlenbeck transform of a driving process.

``X_t = int_0^t exp(-theta (t - u)) dG_u`` with ``X_0 = 0``. Integrating by
parts, ``X_t = int mu_t(du) G_u`` for the signed measure
``mu_t = delta_t - theta exp(-theta (t - u)) du`` on ``[0, t]``, so

    E[X_s X_t] = R(s,t) - theta int_0^t e^{-theta(t-v)} R(s,v) dv
                 - theta int_0^s e^{-theta(s-u)} R(u,t) du
                 + theta^2 int_0^s int_0^t e^{-theta(s-u)} e^{-theta(t-v)} R(u,v) du dv

Only ``R`` appears, never its derivatives. ``R`` is split into primitives
(see :func:`qvgauss.kernels.kernel_terms`); terms in ``u - v`` or ``u + v``
collapse the double integral to one dimension along the diagonal direction,
which is also where their kink sits.

On a uniform grid ``h, 2h, ..., nh`` the Gram matrix is assembled from the
one-step recursion ``X_k = e^{-theta h} X_{k-1} + xi_k`` where ``xi_k`` only
involves increments of ``G`` on one cell; the cell covariance is Toeplitz for
``u - v`` terms and Hankel for ``u + v`` terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import ParamOutOfRange, QuadratureNotConverged
from .kernels import (
    PSD_TOL,
    Family,
    KernelSpec,
    KernelTerm,
    as_grid,
    check_psd,
    kernel_terms,
    make_kernel,
)
from .quadrature import DEFAULT_QUAD, QuadConfig, gauss_legendre, graded_rule, rule

# exp(-_DECAY_CUTOFF) is far below double precision relative to the integrands.
_DECAY_CUTOFF = 50.0
# theta * lag above which the acf uses its large-lag expansion.
ASYMPTOTIC_ACF_THRESHOLD = 40.0
_MAX_REFINEMENTS = 3


@dataclass(frozen=True)
class OUSpec:
    """OU drift ``theta`` together with the driving kernel."""

    kernel: KernelSpec
    theta: float

    def __post_init__(self):
        if not (self.theta > 0) or not math.isfinite(self.theta):
            raise ParamOutOfRange(f"theta={self.theta} must be positive")


def make_ou(family, H: float, theta: float, K: float | None = None) -> OUSpec:
    return OUSpec(make_kernel(family, H, K), float(theta))


def limit_variance(spec: OUSpec) -> float:
    """``lim E[X_t^2]``: ``H Gamma(2H) / theta^2H``, times ``2^(1-K)`` with
    ``H -> HK`` for the bifractional driver."""
    ker = spec.kernel
    if ker.family is Family.BIFBM:
        a = ker.H * ker.K
        return 2.0 ** (1.0 - ker.K) * a * gamma_fn(2 * a) / spec.theta ** (2 * a)
    a = ker.H
    return a * gamma_fn(2 * a) / spec.theta ** (2 * a)


# ---------------------------------------------------------------------------
# pairwise covariance
# ---------------------------------------------------------------------------


def _pair_sep(term: KernelTerm, theta, s, t, q, L):
    def a_part(x):
        hi = min(x, L)
        nodes, w = graded_rule(0.0, hi, q, singular=(x,))
        return term.g(x) - theta * np.dot(w, np.exp(-theta * nodes) * term.g(x - nodes))

    return term.coef * (math.exp(-theta * t) * a_part(s) + math.exp(-theta * s) * a_part(t))


def _pair_diff(term: KernelTerm, theta, s, t, q, L):
    d = t - s
    g = term.g
    b, wb = graded_rule(0.0, min(t, L), q, singular=(d,))
    i_b = theta * np.dot(wb, np.exp(-theta * b) * g(b - d))
    a, wa = graded_rule(0.0, min(s, L), q, singular=(0.0,) if d == 0 else ())
    i_a = theta * np.dot(wa, np.exp(-theta * a) * g(d + a))
    c, wc = graded_rule(max(-s, -L), min(t, L + d), q, singular=(d,), kinks=(0.0,))
    lo = np.maximum(0.0, -c)
    hi = np.minimum(s, t - c)
    weight = 0.5 * theta * (np.exp(-theta * (c + 2 * lo)) - np.exp(-theta * (c + 2 * hi)))
    i_c = np.dot(wc, weight * g(c - d))
    return term.coef * (g(d) - i_b - i_a + i_c)


def _pair_sum(term: KernelTerm, theta, s, t, q, L):
    g = term.g
    tot = s + t
    b, wb = graded_rule(0.0, min(t, L), q)
    i_b = theta * np.dot(wb, np.exp(-theta * b) * g(tot - b))
    a, wa = graded_rule(0.0, min(s, L), q)
    i_a = theta * np.dot(wa, np.exp(-theta * a) * g(tot - a))
    c_hi = min(tot, L + 10.0 / theta)
    c, wc = graded_rule(0.0, c_hi, q, singular=(tot,), kinks=(s, t))
    length = np.minimum(s, c) - np.maximum(0.0, c - t)
    weight = theta**2 * np.exp(-theta * c) * np.maximum(length, 0.0)
    i_c = np.dot(wc, weight * g(tot - c))
    return term.coef * (g(tot) - i_b - i_a + i_c)


def _pair_gen(term: KernelTerm, theta, s, t, q, L):
    a, wa = graded_rule(0.0, min(s, L), q, singular=(s,))
    b, wb = graded_rule(0.0, min(t, L), q, singular=(t,))
    ea = wa * np.exp(-theta * a)
    eb = wb * np.exp(-theta * b)
    p0 = term(s, t)
    i_b = theta * np.dot(eb, term(s, t - b))
    i_a = theta * np.dot(ea, term(s - a, t))
    i_ab = 0.0
    chunk = max(1, 2_000_000 // max(b.size, 1))
    for k in range(0, a.size, chunk):
        blk = term((s - a[k : k + chunk])[:, None], (t - b)[None, :])
        i_ab += ea[k : k + chunk] @ blk @ eb
    return p0 - i_b - i_a + theta**2 * i_ab


_PAIR = {"sep": _pair_sep, "diff": _pair_diff, "sum": _pair_sum, "gen": _pair_gen}


def _pair_value(spec: OUSpec, s: float, t: float, q: QuadConfig) -> float:
    theta = spec.theta
    L = _DECAY_CUTOFF / theta
    return float(sum(_PAIR[term.kind](term, theta, s, t, q, L) for term in kernel_terms(spec.kernel)))


def ou_cov_pair(spec: OUSpec, s: float, t: float, q: QuadConfig = DEFAULT_QUAD) -> float:
    """``E[X_s X_t]`` by quadrature of the integrated-by-parts representation.

    The result is accepted once a refined rule (panel density doubled, eight
    more nodes per panel) agrees to ``q.abs_tol``.

    Raises
    ------
    QuadratureNotConverged
        If the refinement budget is exhausted.
    """
    s, t = float(s), float(t)
    if s < 0 or t < 0:
        raise ParamOutOfRange("times must be nonnegative")
    if s > t:
        s, t = t, s
    if s == 0.0:
        return 0.0
    cur = _pair_value(spec, s, t, q)
    cfg = q
    for _ in range(_MAX_REFINEMENTS):
        cfg = QuadConfig(cfg.panels_per_unit * 2, cfg.nodes_per_panel + 8, cfg.abs_tol)
        nxt = _pair_value(spec, s, t, cfg)
        if abs(nxt - cur) <= q.abs_tol:
            return nxt
        cur = nxt
    raise QuadratureNotConverged(
        f"E[X_s X_t] at s={s}, t={t} not converged to {q.abs_tol:g} (last change {abs(nxt - cur):.2e})"
    )


# ---------------------------------------------------------------------------
# uniform-grid Gram matrix
# ---------------------------------------------------------------------------


def _z_rule(h, q, singular):
    return graded_rule(0.0, h, q, singular=singular)


def _cell_diff(term: KernelTerm, theta, h, n, q):
    """Toeplitz profile ``E[xi_j xi_k]`` for a ``|u - v|^p`` primitive."""
    g = term.g
    m0 = math.exp(-theta * h)
    out = np.empty(n)

    def value(delta, zr, cr):
        z, wz = zr
        c, wc = cr
        ez = theta * wz * np.exp(-theta * z)
        wd = 0.5 * theta * (np.exp(-theta * np.abs(c)) - np.exp(-theta * (2 * h - np.abs(c))))
        d = np.asarray(delta)[..., None]
        i2 = g(d[..., 0]) - (g(d + z) @ ez) - (g(d - z) @ ez) + g(d + c) @ (wc * wd)
        i1x = g(d[..., 0] + h) - g(d + h - z) @ ez
        i1y = g(d[..., 0] - h) - g(d - h + z) @ ez
        return i2 - m0 * (i1x + i1y) + m0 * m0 * g(d[..., 0])

    sing_z = (0.0, h)
    for lag in range(min(2, n)):
        out[lag] = value(lag * h, _z_rule(h, q, sing_z), graded_rule(-h, h, q, singular=(-h, 0.0, h)))
    if n > 2:
        lags = h * np.arange(2, n)
        out[2:] = value(lags, _z_rule(h, q, ()), graded_rule(-h, h, q, kinks=(0.0,)))
    return term.coef * out


def _cell_sum(term: KernelTerm, theta, h, n, q):
    """Hankel profile, indexed by ``j + k - 2``, for a ``(u + v)^p`` primitive."""
    g = term.g
    m0 = math.exp(-theta * h)
    out = np.empty(2 * n - 1)

    def value(sigma, zr, cr):
        z, wz = zr
        c, wc = cr
        ez = theta * wz * np.exp(-theta * z)
        ws = theta**2 * np.exp(-theta * (2 * h - c)) * (h - np.abs(c - h))
        sg = np.asarray(sigma)[..., None]
        s0 = sg[..., 0]
        i2 = g(s0 + 2 * h) - 2.0 * (g(sg + 2 * h - z) @ ez) + g(sg + c) @ (wc * ws)
        i1 = g(s0 + h) - g(sg + h - z) @ ez
        return i2 - 2.0 * m0 * i1 + m0 * m0 * g(s0)

    out[0] = value(0.0, _z_rule(h, q, (0.0, h)), graded_rule(0.0, 2 * h, q, singular=(0.0,), kinks=(h,)))
    if n > 1:
        sig = h * np.arange(1, 2 * n - 1)
        out[1:] = value(sig, _z_rule(h, q, ()), graded_rule(0.0, 2 * h, q, kinks=(h,)))
    return term.coef * out


def _mu_rule(theta, h, q, graded):
    """Nodes/weights of ``mu = delta_h - theta e^{-theta(h-x)} dx`` on [0, h]."""
    if graded:
        z, wz = graded_rule(0.0, h, q, singular=(0.0,))
    else:
        z, wz = graded_rule(0.0, h, q)
    nodes = np.concatenate([z, [h]])
    weights = np.concatenate([-theta * wz * np.exp(-theta * (h - z)), [1.0]])
    return nodes, weights


def _cell_gen(term: KernelTerm, theta, h, n, q):
    """Full matrix ``E[xi_j xi_k]`` for a non-separable primitive."""
    m0 = math.exp(-theta * h)
    alpha = h * np.arange(n)
    xr, wr = _mu_rule(theta, h, q, graded=False)
    xg, wgr = _mu_rule(theta, h, q, graded=True)
    p, qq = term.p, term.q

    def P(u, v):
        return _powq(_pw(u, p) + _pw(v, p), qq)

    out = np.empty((n, n))
    # first cell touches the origin: graded rule in that coordinate
    U1 = alpha[0] + xg
    UK = alpha[:, None] + xr[None, :]
    cross = P(U1[:, None, None], UK[None, :, :])  # (g, n, r)
    a1 = P(U1[:, None], alpha[None, :])  # (g, n)
    b1 = P(alpha[0], UK)  # (n, r)
    row = (
        np.einsum("i,ikl,l->k", wgr, cross, wr)
        - m0 * (wgr @ a1)
        - m0 * (b1 @ wr)
        + m0 * m0 * P(alpha[0], alpha)
    )
    # (1, 1) cell: graded in both coordinates
    c11 = P(U1[:, None], U1[None, :])
    a11 = P(U1, alpha[0])
    row[0] = wgr @ c11 @ wgr - 2.0 * m0 * (wgr @ a11) + m0 * m0 * P(alpha[0], alpha[0])
    out[0, :] = row
    out[:, 0] = row
    if n > 1:
        idx = np.arange(1, n)
        U = (alpha[idx, None] + xr[None, :]).ravel()  # (n-1) * r
        r = xr.size
        upw = _pw(U, p)
        apw = _pw(alpha[idx], p)
        W = wr
        # sum_i w_i P(U_ji, alpha_k)
        edge = np.empty((n - 1, n - 1))
        for j in range(n - 1):
            blk = _powq(upw[j * r : (j + 1) * r, None] + apw[None, :], qq)
            edge[j] = W @ blk
        base = _powq(apw[:, None] + apw[None, :], qq)
        inner = np.empty((n - 1, n - 1))
        rows_per = max(1, 4_000_000 // (r * r * (n - 1)))
        for j0 in range(0, n - 1, rows_per):
            j1 = min(n - 1, j0 + rows_per)
            blk = _powq(upw[j0 * r : j1 * r, None] + upw[None, :], qq)
            blk = blk.reshape(j1 - j0, r, n - 1, r)
            inner[j0:j1] = np.einsum("i,jikl,l->jk", W, blk, W)
        sub = inner - m0 * edge - m0 * edge.T + m0 * m0 * base
        out[1:, 1:] = 0.5 * (sub + sub.T)
    return term.coef * out


def _pw(x, p):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(p * np.log(np.abs(x)))
    return np.where(x == 0.0, 0.0, out)


def _powq(x, qq):
    return _pw(x, qq)


def innovation_cov(spec: OUSpec, n: int, h: float = 1.0, q: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """Covariance of the one-step innovations ``xi_k`` on the grid ``h, ..., nh``."""
    theta = spec.theta
    sig = np.zeros((n, n))
    j = np.arange(n)
    for term in kernel_terms(spec.kernel):
        if term.kind == "sep":
            continue  # separable terms have no mixed increments
        if term.kind == "diff":
            prof = _cell_diff(term, theta, h, n, q)
            sig += prof[np.abs(j[:, None] - j[None, :])]
        elif term.kind == "sum":
            prof = _cell_sum(term, theta, h, n, q)
            sig += prof[j[:, None] + j[None, :]]
        else:
            sig += _cell_gen(term, theta, h, n, q)
    return sig


def _propagate(sig: np.ndarray, decay: float) -> np.ndarray:
    """``L sig L^T`` with ``L[k, j] = decay^(k - j)`` for ``j <= k``."""
    n = sig.shape[0]
    m = np.empty_like(sig)
    m[0] = sig[0]
    for k in range(1, n):
        m[k] = decay * m[k - 1] + sig[k]
    c = np.empty_like(sig)
    c[:, 0] = m[:, 0]
    for k in range(1, n):
        c[:, k] = decay * c[:, k - 1] + m[:, k]
    return 0.5 * (c + c.T)


def ou_gram(
    spec: OUSpec,
    grid,
    q: QuadConfig = DEFAULT_QUAD,
    method: str = "auto",
    psd_tol: float = PSD_TOL,
) -> np.ndarray:
    """Covariance matrix of ``(X_{t_1}, ..., X_{t_n})``.

    ``method="cells"`` (chosen automatically for grids ``h, 2h, ..., nh``)
    uses the innovation recursion; ``"pairwise"`` calls :func:`ou_cov_pair`
    for every entry.
    """
    grid = as_grid(grid)
    h = grid.uniform_step()
    if method == "auto":
        method = "cells" if h is not None else "pairwise"
    if method == "cells":
        if h is None:
            raise ParamOutOfRange("cell method needs a grid of the form h, 2h, ..., nh")
        out = _propagate(innovation_cov(spec, len(grid), h, q), math.exp(-spec.theta * h))
    elif method == "pairwise":
        t = grid.points
        n = t.size
        out = np.empty((n, n))
        for i in range(n):
            for k in range(i, n):
                out[i, k] = out[k, i] = ou_cov_pair(spec, t[i], t[k], q)
    else:
        raise ParamOutOfRange(f"unknown method {method!r}")
    return check_psd(out, psd_tol)


# ---------------------------------------------------------------------------
# stationary fOU autocovariance
# ---------------------------------------------------------------------------


def _falling(x: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= x - i
    return out


def fou_acf_expansion(alpha: float, theta: float, max_order: int = 60) -> np.ndarray:
    """Coefficients ``a_m`` with ``rho(t) ~ sum_m a_m t^(2 alpha - 2m)``, m >= 1."""
    return np.array(
        [0.5 * _falling(2 * alpha, 2 * m) / theta ** (2 * m) for m in range(1, max_order + 1)]
    )


def fou_acf_asymptotic(alpha: float, theta: float, lag) -> np.ndarray:
    """Large-lag expansion of the stationary fOU autocovariance.

    Terms are summed up to the smallest one; the remainder is of order
    ``exp(-theta * lag)``.
    """
    lag = np.atleast_1d(np.asarray(lag, dtype=float))
    coef = fou_acf_expansion(alpha, theta)
    out = np.zeros_like(lag)
    for i, t in enumerate(lag):
        total, prev = 0.0, math.inf
        for m, a in enumerate(coef, start=1):
            term = a * t ** (2 * alpha - 2 * m)
            if abs(term) > prev:
                break
            total += term
            if abs(term) <= 1e-18 * abs(total):
                break
            prev = abs(term) if term != 0 else prev
        out[i] = total
    return out


def _spectral_head(alpha, omega, q):
    """``int_0^1 cos(omega y) y^(1-2a) / (1+y^2) dy`` after ``y = r^(1/(2-2a))``."""
    beta = 1.0 - 2.0 * alpha
    e = 1.0 / (beta + 1.0)
    r, w = graded_rule(0.0, 1.0, q, singular=(0.0,), max_width=0.125)
    y = r**e
    return e * np.dot(w, np.cos(omega * y) / (1.0 + y * y))


def _spectral_zero(alpha, q):
    """``int_0^inf y^(1-2a) / (1+y^2) dy`` folded onto [0, 1]."""
    total = _spectral_head(alpha, 0.0, q)
    beta = 2.0 * alpha - 1.0
    e = 1.0 / (beta + 1.0)
    r, w = graded_rule(0.0, 1.0, q, singular=(0.0,), max_width=0.125)
    y = r**e
    return total + e * np.dot(w, 1.0 / (1.0 + y * y))


def _euler_tail(partial: np.ndarray, depth: int) -> float:
    """Repeated averaging of the last ``depth + 1`` partial sums."""
    s = partial[-(depth + 1) :].copy()
    for _ in range(depth):
        s = 0.5 * (s[1:] + s[:-1])
    return float(s[0])


def _spectral_integral(alpha, omega, q, tol):
    """``int_0^inf cos(omega y) y^(1-2a) / (1+y^2) dy`` for ``omega > 0``."""

    def f(y):
        return np.cos(omega * y) * y ** (1.0 - 2.0 * alpha) / (1.0 + y * y)

    head = _spectral_head(alpha, omega, q)
    period = math.pi / omega
    k0 = math.ceil(1.0 / period - 0.5)
    z0 = (k0 + 0.5) * period
    if z0 <= 1.0:
        z0 += period
    if z0 > 1.0:
        nb = max(1, math.ceil((z0 - 1.0) / 0.5))
        x, w = rule(np.linspace(1.0, z0, nb + 1), q.nodes_per_panel)
        head += np.dot(w, f(x))
    gl_x, gl_w = gauss_legendre(q.nodes_per_panel)

    def segments(k_start, k_stop):
        left = z0 + period * np.arange(k_start, k_stop)
        # sub-panels no wider than half the distance from the origin
        nsub = int(min(64, max(1, math.ceil(period / (0.5 * left[0])))))
        edges = left[:, None] + period * np.linspace(0.0, 1.0, nsub + 1)[None, :]
        a, b = edges[:, :-1], edges[:, 1:]
        half = 0.5 * (b - a)
        xx = 0.5 * (a + b)[..., None] + half[..., None] * gl_x
        return np.einsum("kpn,kpn->k", f(xx), np.broadcast_to(half[..., None] * gl_w, xx.shape))

    depth = 12
    count = 64
    terms = segments(0, count)
    est = head + _euler_tail(np.cumsum(terms), depth)
    while True:
        more = segments(count, 2 * count)
        terms = np.concatenate([terms, more])
        count *= 2
        new = head + _euler_tail(np.cumsum(terms), depth)
        if abs(new - est) <= tol:
            return new
        if count > 2**17:
            raise QuadratureNotConverged(f"spectral acf integral at omega={omega} did not converge")
        est = new


def stationary_fou_acf(alpha: float, theta: float, lag, q: QuadConfig = DEFAULT_QUAD) -> float:
    """``rho_alpha(k) = E[Z_k Z_0]`` for the stationary OU driven by fBm(alpha).

    Moderate lags use the spectral form
    ``Gamma(2a+1) sin(pi a) / pi * int_0^inf cos(k x) x^(1-2a) / (theta^2 + x^2) dx``
    (oscillatory segments between cosine zeros, tail accelerated by repeated
    averaging). For ``theta * k >= 40`` the large-lag expansion is used.
    """
    if not (0.0 < alpha < 1.0):
        raise ParamOutOfRange(f"alpha={alpha} must lie in (0, 1)")
    if not theta > 0:
        raise ParamOutOfRange(f"theta={theta} must be positive")
    lag = abs(float(lag))
    omega = theta * lag
    if omega >= ASYMPTOTIC_ACF_THRESHOLD:
        return float(fou_acf_asymptotic(alpha, theta, lag)[0])
    pref = gamma_fn(2 * alpha + 1) * math.sin(math.pi * alpha) / math.pi / theta ** (2 * alpha)
    tol = 0.1 * q.abs_tol / max(pref, 1e-300)
    if omega == 0.0:
        return float(pref * _spectral_zero(alpha, q))
    return float(pref * _spectral_integral(alpha, omega, q, tol))


def stationary_fou_acf_table(alpha: float, theta: float, max_lag: int, q: QuadConfig = DEFAULT_QUAD) -> np.ndarray:
    """``rho_alpha(k)`` for ``k = 0, ..., max_lag``."""
    return np.array([stationary_fou_acf(alpha, theta, k, q) for k in range(int(max_lag) + 1)])
