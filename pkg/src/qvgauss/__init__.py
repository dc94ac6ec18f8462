"""Quadratic-variation estimation of the asymptotic variance of Gaussian
Ornstein-Uhlenbeck sequences driven by fractional-type processes."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .kernels import Family, KernelSpec, TimeGrid, cov, gram, make_kernel  # noqa: E402
from .quadrature import QuadConfig  # noqa: E402
from .ou_covariance import (  # noqa: E402
    OUSpec,
    limit_variance,
    make_ou,
    ou_cov_pair,
    ou_gram,
    stationary_fou_acf,
)
from .estimators import (  # noqa: E402
    CumulantReport,
    EstimateResult,
    a_n,
    cumulant_report,
    f_hat,
    invert_to_theta,
    kappa3,
    kappa4,
    tv_bound,
    v_n,
)
from .rates import (  # noqa: E402
    RateBranch,
    SeriesConfig,
    log_case_variance,
    phi,
    psi,
    sfou_tv_rate,
    sigma2_bifou,
    sigma2_sfou,
    tv_envelope,
    wasserstein_bound,
)
from .simulate import PathConfig, SampleBatch, chol, sample, simulate_path_oracle  # noqa: E402
from .experiments import (  # noqa: E402
    ExperimentConfig,
    ExperimentReport,
    empirical_ks_to_normal,
    empirical_wasserstein_to_normal,
    rate_fit,
    read_report,
    run_clt,
    run_consistency,
    write_report,
)
