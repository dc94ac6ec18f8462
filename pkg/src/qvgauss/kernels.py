"""Covariance kernels of the driving Gaussian processes.

Three families are supported:

* ``fbm``   fractional Brownian motion, ``R(s,t) = (s^2H + t^2H - |t-s|^2H) / 2``
* ``sfbm``  sub-fractional Brownian motion,
  ``R(s,t) = s^2H + t^2H - ((s+t)^2H + |t-s|^2H) / 2``
* ``bifbm`` bifractional Brownian motion,
  ``R(s,t) = 2^-K ((s^2H + t^2H)^K - |t-s|^2HK)``

Every kernel is also exposed as a short list of :class:`KernelTerm` primitives
(functions of ``u`` alone, of ``u - v``, of ``u + v`` or a general
two-argument term). The OU covariance code integrates each primitive with a
rule suited to where its kinks sit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotPSD, ParamOutOfRange, ParamUnsupported

PSD_TOL = 1e-9


class Family(str, enum.Enum):
    FBM = "fbm"
    SFBM = "sfbm"
    BIFBM = "bifbm"


@dataclass(frozen=True)
class KernelSpec:
    """Driving process family with its Hurst-type parameters.

    ``K`` is only meaningful for ``bifbm``; it is stored as 1 for the other
    families so that ``bifbm`` with ``K = 1`` and ``fbm`` share one code path.
    """

    family: Family
    H: float
    K: float = 1.0

    @property
    def memory_index(self) -> float:
        """Effective Hurst index of the stationary part (``H`` or ``HK``)."""
        return self.H * self.K if self.family is Family.BIFBM else self.H

    def as_dict(self) -> dict:
        return {"family": self.family.value, "hurst": self.H, "k": self.K}


def make_kernel(family, H: float, K: float | None = None) -> KernelSpec:
    """Validate parameters and build a :class:`KernelSpec`.

    Raises
    ------
    ParamOutOfRange
        If ``H`` is not in (0, 1) or ``K`` is not in (0, 1].
    ParamUnsupported
        If ``K`` is supplied for a family other than ``bifbm``.
    """
    try:
        fam = Family(str(family).lower() if not isinstance(family, Family) else family)
    except ValueError:
        raise ParamUnsupported(f"unknown kernel family {family!r}") from None
    H = float(H)
    if not (0.0 < H < 1.0) or not np.isfinite(H):
        raise ParamOutOfRange(f"hurst parameter H={H} must lie in (0, 1)")
    if fam is Family.BIFBM:
        K = 1.0 if K is None else float(K)
        if not (0.0 < K <= 1.0):
            raise ParamOutOfRange(f"bifbm parameter K={K} must lie in (0, 1]")
    elif K is not None:
        raise ParamUnsupported(f"parameter K is only defined for bifbm, not {fam.value}")
    else:
        K = 1.0
    return KernelSpec(fam, H, K)


def _pow(x, gamma: float):
    """``|x|**gamma`` with an exact zero at the origin."""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        out = np.exp(gamma * np.log(x))
    return np.where(x == 0.0, 0.0, out)


@dataclass(frozen=True)
class KernelTerm:
    """One additive primitive of a covariance kernel.

    ``kind`` is one of

    * ``"sep"``:  ``coef * (|u|^p + |v|^p)``
    * ``"diff"``: ``coef * |u - v|^p``
    * ``"sum"``:  ``coef * (u + v)^p``
    * ``"gen"``:  ``coef * (u^p + v^p)^q``
    """

    kind: str
    coef: float
    p: float
    q: float = 1.0

    def g(self, x):
        """Scalar profile for the one-argument kinds."""
        return _pow(x, self.p)

    def __call__(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "sep":
            return self.coef * (_pow(u, self.p) + _pow(v, self.p))
        if self.kind == "diff":
            return self.coef * _pow(u - v, self.p)
        if self.kind == "sum":
            return self.coef * _pow(u + v, self.p)
        if self.kind == "gen":
            return self.coef * _pow(_pow(u, self.p) + _pow(v, self.p), self.q)
        raise ValueError(self.kind)


def kernel_terms(spec: KernelSpec) -> list[KernelTerm]:
    """Decompose ``R_G`` into primitives (their sum reproduces :func:`cov`)."""
    h2 = 2.0 * spec.H
    if spec.family is Family.FBM or (spec.family is Family.BIFBM and spec.K == 1.0):
        return [KernelTerm("sep", 0.5, h2), KernelTerm("diff", -0.5, h2)]
    if spec.family is Family.SFBM:
        return [
            KernelTerm("sep", 1.0, h2),
            KernelTerm("sum", -0.5, h2),
            KernelTerm("diff", -0.5, h2),
        ]
    c = 2.0 ** (-spec.K)
    return [KernelTerm("gen", c, h2, spec.K), KernelTerm("diff", -c, h2 * spec.K)]


def cov(spec: KernelSpec, s, t):
    """Covariance ``E[G_s G_t]`` of the driving process (vectorised)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ParamOutOfRange("times must be nonnegative")
    h2 = 2.0 * spec.H
    if spec.family is Family.SFBM:
        out = _pow(s, h2) + _pow(t, h2) - 0.5 * (_pow(s + t, h2) + _pow(t - s, h2))
    elif spec.family is Family.FBM:
        out = 0.5 * (_pow(s, h2) + _pow(t, h2) - _pow(t - s, h2))
    else:
        K = spec.K
        out = 2.0 ** (-K) * (_pow(_pow(s, h2) + _pow(t, h2), K) - _pow(t - s, h2 * K))
        out = np.where((s == 0) | (t == 0), 0.0, out)
    return out if out.ndim else float(out)


def increment_variance_bound(spec: KernelSpec, s, t):
    """Upper bound on ``E(G_t - G_s)^2``.

    For sfBm the constant ``2 - 2^(2H-1)`` bounds from above only when
    ``H <= 1/2``; for ``H > 1/2`` it is the lower constant and the upper one is 1.
    """
    d = np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float))
    if spec.family is Family.SFBM:
        return max(1.0, 2.0 - 2.0 ** (2 * spec.H - 1)) * d ** (2 * spec.H)
    if spec.family is Family.FBM:
        return d ** (2 * spec.H)
    return 2.0 ** (1 - spec.K) * d ** (2 * spec.H * spec.K)


class TimeGrid:
    """Strictly increasing, nonnegative observation times."""

    def __init__(self, points: Iterable[float]):
        pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ParamOutOfRange("time grid must be a nonempty 1-d sequence")
        if np.any(pts < 0) or not np.all(np.isfinite(pts)):
            raise ParamOutOfRange("time grid points must be finite and nonnegative")
        if np.any(np.diff(pts) <= 0):
            raise ParamOutOfRange("time grid must be strictly increasing")
        self.points = pts
        self.points.setflags(write=False)

    @classmethod
    def uniform(cls, n: int, step: float = 1.0) -> "TimeGrid":
        """The grid ``step, 2 step, ..., n step``."""
        return cls(step * np.arange(1, int(n) + 1, dtype=float))

    def uniform_step(self) -> float | None:
        """Return ``h`` if the grid is exactly ``h, 2h, ..., nh``; else None."""
        h = self.points[0]
        if h <= 0:
            return None
        ref = h * np.arange(1, len(self) + 1)
        if np.allclose(self.points, ref, rtol=1e-13, atol=0.0):
            return float(h)
        return None

    def __len__(self) -> int:
        return self.points.size

    def __repr__(self) -> str:
        return f"TimeGrid(n={len(self)}, first={self.points[0]:g}, last={self.points[-1]:g})"


def as_grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def check_psd(mat: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Raise :class:`NotPSD` unless ``min eig >= -tol * max eig``."""
    if mat.shape[0] == 0:
        return mat
    eig = np.linalg.eigvalsh(mat)
    top = max(eig[-1], 0.0)
    if eig[0] < -tol * top:
        raise NotPSD(f"smallest eigenvalue {eig[0]:.3e} below -{tol:g} x {top:.3e}")
    return mat


def gram(spec: KernelSpec, grid: TimeGrid | Sequence[float], psd_tol: float = PSD_TOL) -> np.ndarray:
    """Gram matrix ``M[i, j] = cov(spec, t_i, t_j)``."""
    t = as_grid(grid).points
    out = cov(spec, t[:, None], t[None, :])
    out = np.atleast_2d(out)
    out = 0.5 * (out + out.T)
    return check_psd(out, psd_tol)
