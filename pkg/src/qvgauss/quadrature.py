"""Composite Gauss-Legendre rules on graded panel meshes.

Integrands here are smooth except at a few known points (kinks of ``|x|^p``
and endpoint power singularities). Panels are split at those points and
refined geometrically toward the singular ones, so fixed-order Gauss-Legendre
on each panel converges quickly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParamOutOfRange


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature controls.

    panels_per_unit
        Refinement density. Away from singular points panels are
        ``8 / panels_per_unit`` wide (one unit at the default); near a
        singular point panel width equals the distance to it.
    nodes_per_panel
        Gauss-Legendre order on each panel.
    abs_tol
        Absolute error target used by the refinement check.
    """

    panels_per_unit: int = 8
    nodes_per_panel: int = 16
    abs_tol: float = 1e-9

    def __post_init__(self):
        if self.panels_per_unit < 1 or self.nodes_per_panel < 1:
            raise ParamOutOfRange("panel counts must be positive")
        if not self.abs_tol > 0:
            raise ParamOutOfRange("abs_tol must be positive")

    @property
    def max_width(self) -> float:
        return 8.0 / self.panels_per_unit

    def refined(self, factor: int = 2) -> "QuadConfig":
        return QuadConfig(self.panels_per_unit * factor, self.nodes_per_panel, self.abs_tol)


DEFAULT_QUAD = QuadConfig()

# Smallest panel next to a singular point, relative to the panel scale.
_MIN_REL_WIDTH = 1e-10


@lru_cache(maxsize=64)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _graded_half(a: float, b: float, toward_a: bool, max_width: float) -> list[float]:
    """Breakpoints on [a, b] refined geometrically toward one end."""
    length = b - a
    w0 = _MIN_REL_WIDTH * max(1.0, min(length, max_width))
    if w0 >= length:
        return [a, b]
    dist = [0.0, w0]
    while True:
        d = dist[-1]
        step = min(d, max_width)
        if d + step >= length * (1 - 1e-12):
            dist.append(length)
            break
        dist.append(d + step)
    if toward_a:
        return [a + d for d in dist[:-1]] + [b]
    return [a] + [b - d for d in reversed(dist[:-1])]


def _uniform(a: float, b: float, max_width: float) -> list[float]:
    k = max(1, int(np.ceil((b - a) / max_width - 1e-12)))
    return list(np.linspace(a, b, k + 1))


def breakpoints(lo: float, hi: float, singular=(), kinks=(), max_width: float = 1.0) -> np.ndarray:
    """Panel breakpoints on ``[lo, hi]``.

    ``singular`` points get geometric refinement on both sides; ``kinks`` are
    only used as panel boundaries.
    """
    if hi <= lo:
        return np.array([lo, hi]) if hi == lo else np.array([])
    eps = 1e-13 * max(1.0, abs(lo), abs(hi))
    sing = sorted({float(p) for p in singular if lo - eps <= p <= hi + eps})
    inner = {lo, hi}
    for p in list(sing) + [float(k) for k in kinks]:
        if lo + eps < p < hi - eps:
            inner.add(p)
    pts = sorted(inner)

    def is_sing(x):
        return any(abs(x - p) <= eps for p in sing)

    out: list[float] = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        sa, sb = is_sing(a), is_sing(b)
        if sa and sb:
            m = 0.5 * (a + b)
            seg = _graded_half(a, m, True, max_width)[:-1] + _graded_half(m, b, False, max_width)
        elif sa:
            seg = _graded_half(a, b, True, max_width)
        elif sb:
            seg = _graded_half(a, b, False, max_width)
        else:
            seg = _uniform(a, b, max_width)
        out.extend(seg[1:])
    return np.asarray(out)


def rule(breaks: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on the given panels."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.size < 2:
        return np.zeros(0), np.zeros(0)
    x, w = gauss_legendre(m)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def graded_rule(lo, hi, q: QuadConfig, singular=(), kinks=(), max_width=None):
    """Convenience wrapper: breakpoints followed by :func:`rule`."""
    mw = q.max_width if max_width is None else max_width
    return rule(breakpoints(lo, hi, singular, kinks, mw), q.nodes_per_panel)
