"""Command-line entry point: ``msnar <subcommand> ...``.

Exit status: 0 on success, 1 on domain errors (invalid model, failed fit,
bad data), 2 on usage errors.  Diagnostics go to stderr; data goes to files
or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from ._core import BACKEND
from .errors import ModelValidationError, MSNARError


def _load_model(path):
    from .model import load_spec, validate_model

    spec = load_spec(path)
    report = validate_model(spec)
    if not report.ok:
        raise ModelValidationError(report)
    return spec


def _load_series(path):
    from .simulate import read_path_csv

    return read_path_csv(path).y


def _dump(obj, dest):
    text = json.dumps(obj, indent=2, default=_default) + "\n"
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    from .simulate import simulate_path, write_path_csv

    spec = _load_model(args.model)
    y0 = args.y0 if args.y0 is not None else "stationary"
    path = simulate_path(spec, args.n, y0, args.seed, args.burn_in)
    write_path_csv(path, args.out, include_regimes=not args.hide_regimes)


def cmd_check_stability(args):
    from .stability import check_stability

    spec = _load_model(args.model)
    _dump(check_stability(spec, args.moment).to_dict(), args.out)


def cmd_loglik(args):
    from .filter import log_likelihood

    spec = _load_model(args.model)
    y = _load_series(args.data)
    ll = log_likelihood(spec, y)
    _dump({"loglik": ll, "n": int(y.shape[0] - 1), "per_observation": ll / (y.shape[0] - 1)}, args.out)


def cmd_forgetting(args):
    from .filter import windowed_step_terms

    spec = _load_model(args.model)
    y = _load_series(args.data)
    n = y.shape[0] - 1
    if args.k is not None and args.l is not None:
        pairs = [(args.k, args.l)]
    elif args.k is not None:
        pairs = [(args.k, l) for l in range(max(0, args.k - args.max_lag), args.k)]
    elif args.l is not None:
        pairs = [(k, args.l) for k in range(args.l + 1, min(n, args.l + args.max_lag) + 1)]
    else:
        pairs = [(k, l) for k in range(1, n + 1) for l in range(max(0, k - args.max_lag), k)]
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w")
    try:
        for k, l in pairs:
            out.write(json.dumps(windowed_step_terms(spec, y, k, l).to_dict()) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_fit(args):
    from .estimate import em_fit, fit_mle

    y = _load_series(args.data)
    init = None
    if args.init is not None:
        init = _load_model(args.init)
    if args.method == "em":
        if init is None and args.starts > 0:
            # seed EM from the best simplex multistart point
            init = fit_mle(y, "multistart", args.m, slopes=args.slopes, starts=args.starts, seed=args.seed,
                           information=False).spec
        res = em_fit(y, init, args.m, slopes=args.slopes)
    else:
        if init is None and args.starts > 0:
            init = "multistart"
        res = fit_mle(y, init, args.m, slopes=args.slopes, method=args.method, starts=args.starts,
                      seed=args.seed)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _dump(res.to_dict(), args.out)


def cmd_lrt(args):
    from .estimate import likelihood_ratio_test

    y = _load_series(args.data)
    res = likelihood_ratio_test(y, args.m, slopes=args.slopes, method=args.method)
    _dump(res.to_dict(), args.out)


def cmd_montecarlo(args):
    from .asymptotics import ExperimentConfig, run_experiment

    with open(args.config) as fh:
        doc = json.load(fh)
    cfg = ExperimentConfig.from_dict(doc)
    if args.threads is not None:
        cfg.options["threads"] = args.threads
    report = run_experiment(cfg)
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msnar", description="Markov-switching autoregression toolkit")
    p.add_argument("--version", action="version", version=f"msnar {__version__} (kernels: {BACKEND})")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("simulate", help="simulate a path to CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--y0", type=float, default=None, help="fixed start value (default: stationary draw)")
    s.add_argument("--hide-regimes", action="store_true", help="leave the x column empty")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check-stability", help="stability report as JSON")
    s.add_argument("--model", required=True)
    s.add_argument("--moment", type=float, default=1.0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_check_stability)

    s = sub.add_parser("loglik", help="exact log-likelihood of a path")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_loglik)

    s = sub.add_parser("forgetting", help="windowed filter gaps as JSON lines")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--l", type=int, default=None)
    s.add_argument("--max-lag", type=int, default=20)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_forgetting)

    s = sub.add_parser("fit", help="maximum-likelihood fit")
    s.add_argument("--data", required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--method", choices=["simplex", "bfgs", "em"], default="simplex")
    s.add_argument("--slopes", choices=["free", "shared", "zero"], default="free")
    s.add_argument("--starts", type=int, default=0, help="random starts in addition to the data-driven one")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", default=None, help="starting model JSON")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("lrt", help="likelihood-ratio test of zero slopes")
    s.add_argument("--data", required=True)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--slopes", choices=["free", "shared"], default="shared")
    s.add_argument("--method", choices=["simplex", "bfgs"], default="simplex")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lrt)

    s = sub.add_parser("montecarlo", help="run a Monte Carlo experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_montecarlo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except ModelValidationError as exc:
        print(exc.report, file=sys.stderr)
        return 1
    except (MSNARError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
