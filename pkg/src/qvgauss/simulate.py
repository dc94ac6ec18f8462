"""Gaussian sampling of the observed sequence and a path-integration oracle.

Random numbers come from Philox streams keyed by ``(seed, stream, block)``
where a block holds :data:`BLOCK_SIZE` consecutive replications. Replication ``r`` is
row ``r % BLOCK_SIZE`` of its block, so its values depend only on
``(seed, stream, r, n)``: not on ``m``, on the number of worker threads, or on the
order blocks are processed in.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigInvalid, FineGridTooCoarse, NotPSD, ParamOutOfRange
from .kernels import TimeGrid, gram
from .ou_covariance import OUSpec

BLOCK_SIZE = 1024
GENERATOR_ID = f"numpy-philox4x64/seedsequence/block{BLOCK_SIZE}/ziggurat-normal"
JITTER_LEVELS = (0.0, 1e-12, 1e-10, 1e-8)
THREADS_ENV = "QVGAUSS_THREADS"
# driver paths of the path oracle never share normals with the exact sampler
ORACLE_STREAM = 1 << 20


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower factor with ``L L^T = cov + eps I``."""

    L: np.ndarray
    eps: float


@dataclass
class SampleBatch:
    n: int
    m: int
    values: np.ndarray
    seed: int
    generator_id: str = GENERATOR_ID
    jitter: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.m, self.n):
            raise ParamOutOfRange(f"values shape {self.values.shape} != ({self.m}, {self.n})")


@dataclass(frozen=True)
class PathConfig:
    fine_step: float = 0.01
    horizon: int = 20

    def __post_init__(self):
        if not self.fine_step > 0:
            raise ConfigInvalid("fine_step must be positive")
        if self.fine_step > 0.1:
            raise FineGridTooCoarse(f"fine_step={self.fine_step} exceeds 0.1")
        if abs(1.0 / self.fine_step - round(1.0 / self.fine_step)) > 1e-9:
            raise ConfigInvalid(f"fine_step={self.fine_step} must divide 1")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigInvalid(f"horizon={self.horizon} must be a positive integer")

    @property
    def steps_per_unit(self) -> int:
        return int(round(1.0 / self.fine_step))


def chol(cov, jitter_levels=JITTER_LEVELS) -> CholeskyFactor:
    """Cholesky factor with the smallest jitter (relative to the largest
    diagonal entry) that succeeds."""
    c = np.asarray(cov, dtype=float)
    c = 0.5 * (c + c.T)
    d = float(np.max(np.diag(c))) if c.size else 0.0
    eye = np.eye(c.shape[0])
    for level in jitter_levels:
        eps = level * d
        try:
            return CholeskyFactor(np.linalg.cholesky(c + eps * eye), eps)
        except np.linalg.LinAlgError:
            continue
    raise NotPSD(f"Cholesky failed at every jitter level up to {jitter_levels[-1]:g} x {d:.3e}")


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def _block_normals(seed: int, stream: int, block: int, rows: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss)).standard_normal((rows, n))


def iter_blocks(
    factor: CholeskyFactor, m: int, seed: int, threads: int | None = None, stream: int = 0
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_replication, values)`` block by block, in order.

    ``stream`` separates independent experiments sharing one seed.
    """
    n = factor.L.shape[0]
    nblocks = -(-m // BLOCK_SIZE)
    LT = factor.L.T

    def make(b):
        rows = min(BLOCK_SIZE, m - b * BLOCK_SIZE)
        return _block_normals(seed, stream, b, rows, n) @ LT

    workers = _threads(threads)
    if workers == 1:
        for b in range(nblocks):
            yield b * BLOCK_SIZE, make(b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, nblocks, workers):
            batch = range(start, min(nblocks, start + workers))
            for b, vals in zip(batch, pool.map(make, batch)):
                yield b * BLOCK_SIZE, vals


def sample(
    cov,
    m: int,
    seed: int = 0,
    threads: int | None = None,
    factor: CholeskyFactor | None = None,
    stream: int = 0,
) -> SampleBatch:
    """``m`` independent draws of ``N(0, cov)``."""
    if m < 1:
        raise ParamOutOfRange("m must be positive")
    factor = chol(cov) if factor is None else factor
    n = factor.L.shape[0]
    out = np.empty((m, n))
    for start, vals in iter_blocks(factor, m, seed, threads, stream):
        out[start : start + vals.shape[0]] = vals
    return SampleBatch(n, m, out, int(seed), GENERATOR_ID, factor.eps)


def map_blocks(
    cov,
    m: int,
    seed: int,
    fn: Callable[[np.ndarray], np.ndarray],
    threads: int | None = None,
    stream: int = 0,
) -> tuple[np.ndarray, float]:
    """Apply a row-wise reduction ``fn`` to every block without keeping all draws."""
    factor = chol(cov)
    parts = [fn(vals) for _, vals in iter_blocks(factor, m, seed, threads, stream)]
    return np.concatenate(parts), factor.eps


# ---------------------------------------------------------------------------
# path oracle
# ---------------------------------------------------------------------------


def oracle_from_driver(driver_paths, theta: float, fine_step: float) -> np.ndarray:
    """OU values at integer times from driver values on the fine grid.

    ``driver_paths[r, j]`` is ``G`` at ``(j + 1) * fine_step`` (``G_0 = 0``).
    Each step applies ``X <- e^{-theta delta} (X + dG)``, the left-point
    Riemann-Stieltjes sum of ``int e^{-theta (t - u)} dG_u``.
    """
    g = np.atleast_2d(np.asarray(driver_paths, dtype=float))
    spu = int(round(1.0 / fine_step))
    if g.shape[1] % spu:
        raise ConfigInvalid("driver length must cover whole time units")
    dg = np.diff(g, axis=1, prepend=0.0)
    decay = math.exp(-theta * fine_step)
    x = np.zeros(g.shape[0])
    out = np.empty((g.shape[0], g.shape[1] // spu))
    for j in range(g.shape[1]):
        x = decay * (x + dg[:, j])
        if (j + 1) % spu == 0:
            out[:, (j + 1) // spu - 1] = x
    return out


def _fine_grid(cfg: PathConfig) -> TimeGrid:
    spu = cfg.steps_per_unit
    return TimeGrid(np.arange(1, int(cfg.horizon) * spu + 1) / spu)


def simulate_path_oracle(spec: OUSpec, cfg: PathConfig, seed: int = 0, reps: int = 1, threads: int | None = None) -> np.ndarray:
    """``reps x horizon`` array of ``X_1, ..., X_n`` from simulated driver paths."""
    cg = gram(spec.kernel, _fine_grid(cfg))
    vals, _ = map_blocks(
        cg, reps, seed, lambda g: oracle_from_driver(g, spec.theta, cfg.fine_step), threads, ORACLE_STREAM
    )
    return vals


def path_oracle_cov(spec: OUSpec, cfg: PathConfig) -> np.ndarray:
    """Exact covariance of the left-point scheme at integer times.

    The gap between this and the continuous-time covariance is the
    discretization bias of the oracle.
    """
    cg = gram(spec.kernel, _fine_grid(cfg))
    spu = cfg.steps_per_unit
    N = cg.shape[0]
    n = int(cfg.horizon)
    j = np.arange(1, N + 1)
    K = spu * np.arange(1, n + 1)
    lag = K[:, None] - j[None, :] + 1
    W = np.where(lag >= 1, np.exp(-spec.theta * cfg.fine_step * np.maximum(lag, 0)), 0.0)
    # X = W dG, dG = D G with D the first-difference matrix
    A = W - np.concatenate([W[:, 1:], np.zeros((n, 1))], axis=1)
    out = A @ cg @ A.T
    return 0.5 * (out + out.T)
