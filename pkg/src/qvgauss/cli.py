"""Command-line entry point: ``qvgauss <subcommand> [flags]``.

Exit codes: 0 success, 2 usage or parameter error, 1 computation error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from .errors import EmptyInput, FormatError, ParameterError, QVError
from .estimators import cumulant_report, f_hat, invert_to_theta
from .experiments import ExperimentConfig, report_csv, run_from_config, write_report
from .kernels import cov, make_kernel
from .ou_covariance import make_ou, ou_cov_pair, ou_gram, stationary_fou_acf
from .rates import phi, psi, sigma2_bifou, sigma2_sfou, tv_envelope
from .simulate import PathConfig, sample, simulate_path_oracle

FMT = "%.15g"


def _num(x) -> str:
    return FMT % x


def _n_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _add_kernel(p: argparse.ArgumentParser, theta: bool = False) -> None:
    p.add_argument("--family", required=True, choices=["fbm", "sfbm", "bifbm"])
    p.add_argument("--hurst", required=True, type=float)
    p.add_argument("--k", type=float, default=None)
    if theta:
        p.add_argument("--theta", required=True, type=float)


def _out(rows, header=None) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    if header:
        w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, float) else v for v in r])


def cmd_kernel(a):
    spec = make_kernel(a.family, a.hurst, a.k)
    print(_num(cov(spec, a.s, a.t)))


def cmd_ou_cov(a):
    spec = make_ou(a.family, a.hurst, a.theta, a.k)
    print(_num(ou_cov_pair(spec, a.s, a.t)))


def cmd_acf(a):
    if a.max_lag < 0:
        raise ParameterError("--max-lag must be nonnegative")
    rows = [(k, stationary_fou_acf(a.alpha, a.theta, k)) for k in range(a.max_lag + 1)]
    _out(rows, ("lag", "value"))


def _read_samples(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip().lower().startswith("x"):
        rows = rows[1:]
    if not rows:
        raise EmptyInput(f"{path}: no replications")
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return data


def cmd_estimate(a):
    spec = make_kernel(a.family, a.hurst, a.k)
    data = _read_samples(a.input)
    rows = []
    for i, row in enumerate(data, start=1):
        fh = f_hat(row)
        th = invert_to_theta(fh, spec) if fh > 0 else float("nan")
        rows.append((i, row.size, fh, th))
    _out(rows, ("replication", "n", "f_hat", "theta_hat"))


def cmd_cumulants(a):
    if a.n < 1:
        raise ParameterError("--n must be positive")
    spec = make_ou(a.family, a.hurst, a.theta, a.k)
    rep = cumulant_report(ou_gram(spec, range(1, a.n + 1)))
    _out([(rep.n, rep.v_n, rep.kappa3, rep.kappa4, rep.tv_bound)], ("n", "v_n", "kappa3", "kappa4", "tv_bound"))


def cmd_rates(a):
    header = ["n", "tv_envelope"]
    if a.alpha is not None:
        header += ["phi", "psi"]
    rows = []
    for n in a.n_list:
        row = [n, float(tv_envelope(a.beta, n))]
        if a.alpha is not None:
            row += [phi(a.alpha, n), psi(a.alpha, n) if a.alpha < 0.75 else float("nan")]
        rows.append(row)
    _out(rows, header)


def cmd_sigma2(a):
    spec = make_kernel(a.family, a.hurst, a.k)
    if spec.family.value == "bifbm":
        val = sigma2_bifou(a.theta, spec.H, spec.K)
    else:
        val = sigma2_sfou(a.theta, spec.H)
    print(_num(val))


def cmd_simulate(a):
    if a.n < 1 or a.reps < 1:
        raise ParameterError("--n and --reps must be positive")
    spec = make_ou(a.family, a.hurst, a.theta, a.k)
    if a.oracle:
        values = simulate_path_oracle(spec, PathConfig(a.fine_step, a.n), a.seed, a.reps)
    else:
        values = sample(ou_gram(spec, range(1, a.n + 1)), a.reps, a.seed).values
    fh = open(a.out, "w", newline="") if a.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(1, a.n + 1)])
        for row in values:
            w.writerow([_num(v) for v in row])
    finally:
        if a.out:
            fh.close()


def cmd_experiment(a):
    config = ExperimentConfig.from_json(a.config)
    t0 = time.perf_counter()
    report = run_from_config(config, a.kind)
    wall = time.perf_counter() - t0
    out = a.out or config.output_path
    if out:
        write_report(report, out, wall_time=wall)
    sys.stdout.write(report_csv(report))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qvgauss", description="Quadratic-variation estimation for Gaussian OU sequences.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("kernel", help="driving covariance R(s, t)")
    _add_kernel(s)
    s.add_argument("--s", required=True, type=float)
    s.add_argument("--t", required=True, type=float)
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("ou-cov", help="OU covariance E[X_s X_t]")
    _add_kernel(s, theta=True)
    s.add_argument("--s", required=True, type=float)
    s.add_argument("--t", required=True, type=float)
    s.set_defaults(func=cmd_ou_cov)

    s = sub.add_parser("acf", help="stationary fOU autocovariance table")
    s.add_argument("--alpha", required=True, type=float)
    s.add_argument("--theta", required=True, type=float)
    s.add_argument("--max-lag", required=True, type=int)
    s.set_defaults(func=cmd_acf)

    s = sub.add_parser("estimate", help="f_hat and theta_hat for each replication in a CSV file")
    s.add_argument("--input", required=True)
    _add_kernel(s)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("cumulants", help="v_n, kappa3, kappa4 of the exact covariance")
    _add_kernel(s, theta=True)
    s.add_argument("--n", required=True, type=int)
    s.set_defaults(func=cmd_cumulants)

    s = sub.add_parser("rates", help="rate envelopes")
    s.add_argument("--beta", required=True, type=float)
    s.add_argument("--n-list", required=True, type=_n_list)
    s.add_argument("--alpha", type=float, default=None)
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("sigma2", help="limiting variance of the quadratic variation")
    _add_kernel(s, theta=True)
    s.set_defaults(func=cmd_sigma2)

    s = sub.add_parser("simulate", help="draw replications of X_1..X_n")
    _add_kernel(s, theta=True)
    s.add_argument("--n", required=True, type=int)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.add_argument("--oracle", action="store_true", help="use the path-integration oracle")
    s.add_argument("--fine-step", type=float, default=0.01)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("experiment", help="run a Monte-Carlo experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--kind", choices=["clt", "consistency"], default="clt")
    s.add_argument("--out", default=None, help="CSV path (overrides the config's output)")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        args.func(args)
    except ParameterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (QVError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
