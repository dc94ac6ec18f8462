"""Monte-Carlo harness: consistency runs, CLT distances and rate fits.

A report is persisted as a CSV table plus a JSON sidecar (``<csv>.json``)
holding the configuration, environment and per-row extras. Wall time goes
to a third file (``<csv>.timing.json``) so the first two are byte-identical
across reruns.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import norm

from . import __version__
from .errors import ConfigInvalid, DegenerateFit, FormatError, TooFewSamples
from .estimators import a_n, cumulant_report, f_hat_batch, v_n
from .kernels import Family
from .ou_covariance import OUSpec, limit_variance, make_ou, ou_gram
from .rates import (
    log_case_variance,
    memory_beta,
    phi,
    sfou_tv_rate,
    sigma2_bifou,
    sigma2_sfou,
    wasserstein_bound,
)
from .simulate import GENERATOR_ID, map_blocks

MIN_REPS = 100
MIN_SAMPLES = 100
CSV_HEADER = ("n", "distance", "envelope", "bias_term", "v_n", "sigma2", "slope")


class Normalization(str, enum.Enum):
    SERIES_SIGMA = "series_sigma"
    EXACT_VN = "exact_vn"
    LOG_SIGMA = "log_sigma"


class Distance(str, enum.Enum):
    WASSERSTEIN1 = "wasserstein1"
    KOLMOGOROV = "kolmogorov"


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def _sorted_samples(samples) -> np.ndarray:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    return x


def normal_quantile_grid(m: int) -> np.ndarray:
    return norm.ppf((np.arange(1, m + 1) - 0.5) / m)


def empirical_wasserstein_to_normal(samples) -> float:
    """Quantile-coupling estimate ``(1/m) sum |x_(i) - Phi^-1((i - 1/2)/m)|``."""
    x = _sorted_samples(samples)
    return float(np.mean(np.abs(x - normal_quantile_grid(x.size))))


def empirical_ks_to_normal(samples) -> float:
    """``sup_x |F_m(x) - Phi(x)|``."""
    x = _sorted_samples(samples)
    m = x.size
    cdf = norm.cdf(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


_DISTANCES = {
    Distance.WASSERSTEIN1: empirical_wasserstein_to_normal,
    Distance.KOLMOGOROV: empirical_ks_to_normal,
}


def rate_fit(n_list, distances) -> float:
    """Least-squares slope of ``log distance`` against ``log n``."""
    n = np.asarray(n_list, dtype=float)
    d = np.asarray(distances, dtype=float)
    if n.size != d.size or n.size < 3:
        raise DegenerateFit("need at least three (n, distance) pairs")
    if np.any(d <= 0) or np.any(n <= 0) or not np.all(np.isfinite(d)):
        raise DegenerateFit("distances and n must be positive and finite")
    x = np.log(n)
    if np.ptp(x) == 0:
        raise DegenerateFit("all n are equal")
    y = np.log(d)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {"family", "hurst", "k", "theta", "n_list", "reps", "seed", "normalization", "distance", "output"}
_REQUIRED_KEYS = {"family", "hurst", "theta", "n_list"}


@dataclass(frozen=True)
class ExperimentConfig:
    process: OUSpec
    n_list: tuple[int, ...]
    reps: int = 2000
    seed: int = 0
    normalization: Normalization = Normalization.SERIES_SIGMA
    distance: Distance = Distance.WASSERSTEIN1
    output_path: str | None = None

    def __post_init__(self):
        if len(self.n_list) == 0:
            raise ConfigInvalid("n_list must be nonempty")
        if any(int(n) != n or n < 1 for n in self.n_list):
            raise ConfigInvalid("n_list entries must be positive integers")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigInvalid("n_list must be strictly ascending")
        if int(self.reps) != self.reps or self.reps < MIN_REPS:
            raise ConfigInvalid(f"reps={self.reps} below the minimum {MIN_REPS}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigInvalid("seed must be a nonnegative integer")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigInvalid("config must be a JSON object")
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        missing = _REQUIRED_KEYS - set(d)
        if missing:
            raise ConfigInvalid(f"missing config keys: {sorted(missing)}")
        try:
            norm_ = Normalization(d.get("normalization", Normalization.SERIES_SIGMA.value))
            dist = Distance(d.get("distance", Distance.WASSERSTEIN1.value))
            n_list = tuple(int(v) if float(v) == int(v) else v for v in d["n_list"])
        except (ValueError, TypeError) as exc:
            raise ConfigInvalid(str(exc)) from None
        process = make_ou(d["family"], d["hurst"], d["theta"], d.get("k"))
        return cls(
            process=process,
            n_list=n_list,
            reps=d.get("reps", 2000),
            seed=d.get("seed", 0),
            normalization=norm_,
            distance=dist,
            output_path=d.get("output"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from None
        return cls.from_dict(data)

    def as_dict(self) -> dict:
        ker = self.process.kernel
        return {
            "family": ker.family.value,
            "hurst": ker.H,
            "k": ker.K if ker.family is Family.BIFBM else None,
            "theta": self.process.theta,
            "n_list": list(self.n_list),
            "reps": int(self.reps),
            "seed": int(self.seed),
            "normalization": self.normalization.value,
            "distance": self.distance.value,
            "output": self.output_path,
        }


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    n: int
    distance: float
    envelope: float
    bias_term: float
    v_n: float
    sigma2: float | None


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    rows: list[ReportRow]
    slope: float | None
    extras: list[dict] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def environment() -> dict:
    """Provenance fields that do not vary between reruns on one installation."""
    return {
        "qvgauss": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "generator": GENERATOR_ID,
    }


def _memory_index(spec: OUSpec) -> float:
    return spec.kernel.memory_index


def _sigma2(spec: OUSpec) -> float:
    ker = spec.kernel
    if ker.family is Family.BIFBM:
        return sigma2_bifou(spec.theta, ker.H, ker.K)
    return sigma2_sfou(spec.theta, ker.H)


def _is_log_case(alpha: float) -> bool:
    return math.isclose(alpha, 0.75, rel_tol=0.0, abs_tol=1e-12)


def _fit_or_none(n_list, values) -> float | None:
    if len(n_list) < 3:
        return None
    return rate_fit(n_list, values)


def _moments(cov: np.ndarray, reps: int, seed: int, n: int, threads):
    fh, eps = map_blocks(cov, reps, seed, f_hat_batch, threads, stream=n)
    return fh, eps


def run_clt(config: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Distance of the normalized estimator to ``N(0, 1)`` for each ``n``."""
    spec = config.process
    alpha = _memory_index(spec)
    mode = config.normalization
    if mode is Normalization.LOG_SIGMA and not _is_log_case(alpha):
        raise ConfigInvalid("log_sigma normalization needs memory index 3/4")
    if mode is Normalization.SERIES_SIGMA and not alpha < 0.75:
        raise ConfigInvalid("series_sigma normalization needs memory index below 3/4")
    if mode is Normalization.EXACT_VN and not alpha < 0.75 and not _is_log_case(alpha):
        raise ConfigInvalid("no Gaussian limit at sqrt(n) scale for memory index above 3/4")
    f = limit_variance(spec)
    if _is_log_case(alpha):
        sigma2 = log_case_variance(spec.theta, spec.kernel.K)
    else:
        sigma2 = _sigma2(spec) if alpha < 0.75 else None
    measure = _DISTANCES[config.distance]
    rows, extras = [], []
    for n in config.n_list:
        cov = ou_gram(spec, range(1, n + 1))
        an, vn = a_n(cov), v_n(cov)
        fh, eps = _moments(cov, config.reps, config.seed, n, threads)
        if mode is Normalization.SERIES_SIGMA:
            scale = math.sqrt(sigma2)
        elif mode is Normalization.EXACT_VN:
            scale = math.sqrt(vn)
        else:
            scale = math.sqrt(sigma2 * math.log(n))
        stat = math.sqrt(n) * (fh - f) / scale
        bias = abs(an - f)
        if _is_log_case(alpha):
            envelope = sfou_tv_rate(0.75, n) + math.sqrt(n / (sigma2 * math.log(n))) * bias
        else:
            envelope = wasserstein_bound(bias, vn, memory_beta(alpha), n)
        cum = cumulant_report(cov)
        rows.append(ReportRow(n, measure(stat), float(envelope), float(math.sqrt(n) * bias), vn, sigma2))
        extras.append(
            {
                "a_n": an,
                "f_limit": float(f),
                "f_hat_mean": float(np.mean(fh)),
                "f_hat_sd": float(np.std(fh, ddof=1)),
                "kappa3": cum.kappa3,
                "kappa4": cum.kappa4,
                "tv_bound": cum.tv_bound,
                "jitter": eps,
            }
        )
    slope = _fit_or_none(config.n_list, [r.distance for r in rows])
    return ExperimentReport("clt", config.as_dict(), rows, slope, extras, environment())


def run_consistency(config: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Monte-Carlo mean of the estimator against its limit.

    Columns: ``distance = |mean f_hat - f|``, ``bias_term = |A_n - f|``,
    ``envelope = phi(alpha, n)`` (bias rate shape).
    """
    spec = config.process
    alpha = _memory_index(spec)
    f = limit_variance(spec)
    sigma2 = _sigma2(spec) if alpha < 0.75 else None
    rows, extras = [], []
    for n in config.n_list:
        cov = ou_gram(spec, range(1, n + 1))
        an, vn = a_n(cov), v_n(cov)
        fh, eps = _moments(cov, config.reps, config.seed, n, threads)
        mean = float(np.mean(fh))
        sd = float(np.std(fh, ddof=1))
        env = phi(alpha, n) if n >= 2 else 1.0
        rows.append(ReportRow(n, abs(mean - f), float(env), float(abs(an - f)), vn, sigma2))
        extras.append(
            {
                "a_n": an,
                "f_limit": float(f),
                "f_hat_mean": mean,
                "f_hat_sd": sd,
                "mc_error": sd / math.sqrt(config.reps),
                "jitter": eps,
            }
        )
    slope = _fit_or_none(config.n_list, [max(r.distance, 1e-300) for r in rows])
    return ExperimentReport("consistency", config.as_dict(), rows, slope, extras, environment())


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def timing_path(path) -> Path:
    return Path(str(path) + ".timing.json")


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([r.n, _fmt(r.distance), _fmt(r.envelope), _fmt(r.bias_term), _fmt(r.v_n), _fmt(r.sigma2), _fmt(report.slope)])
    return buf.getvalue()


def write_report(report: ExperimentReport, path, wall_time: float | None = None) -> None:
    """Write ``path`` (CSV) and its JSON sidecar; optionally a timing file.

    Raises OSError if the directory does not exist.
    """
    path = Path(path)
    side = {
        "kind": report.kind,
        "config": report.config,
        "environment": report.environment,
        "extras": report.extras,
    }
    text = report_csv(report)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    with open(sidecar_path(path), "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if wall_time is not None:
        with open(timing_path(path), "w") as fh:
            json.dump({"wall_time_s": wall_time}, fh)
            fh.write("\n")


def _opt_float(s: str):
    return None if s == "" else float(s)


def read_report(path) -> ExperimentReport:
    path = Path(path)
    with open(path, newline="") as fh:
        lines = list(csv.reader(fh))
    if not lines or tuple(lines[0]) != CSV_HEADER:
        raise FormatError(f"{path}: header must be {','.join(CSV_HEADER)}")
    rows, slopes = [], set()
    try:
        for rec in lines[1:]:
            if len(rec) != len(CSV_HEADER):
                raise FormatError(f"{path}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
            rows.append(
                ReportRow(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3]), float(rec[4]), _opt_float(rec[5]))
            )
            slopes.add(rec[6])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if len(slopes) > 1:
        raise FormatError(f"{path}: inconsistent slope column")
    slope = _opt_float(slopes.pop()) if slopes else None
    try:
        with open(sidecar_path(path)) as fh:
            side = json.load(fh)
        return ExperimentReport(side["kind"], side["config"], rows, slope, side["extras"], side["environment"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{sidecar_path(path)}: {exc}") from None


def run_from_config(config: ExperimentConfig, kind: str = "clt", threads: int | None = None) -> ExperimentReport:
    if kind == "clt":
        return run_clt(config, threads)
    if kind == "consistency":
        return run_consistency(config, threads)
    raise ConfigInvalid(f"unknown experiment kind {kind!r}")
