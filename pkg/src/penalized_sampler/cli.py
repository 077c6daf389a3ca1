"""``penalized-sampler`` command-line entry point."""

import argparse
import json
import sys

import numpy as np

from . import experiments
from .diagnostics import tv_histogram, violation_stats, w2_1d
from .errors import DivergenceError, PenalizedSamplerError, SchemaError
from .geometry import body_from_dict
from .theory import ALGORITHMS, penalized_constants, schedule_for

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_run_flags(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--jobs", type=_positive_int, help="concurrent runs")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="penalized-sampler",
                                     description="Penalized Langevin / HMC samplers for constrained targets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run the sampler described by a config file")
    _add_run_flags(p)

    p = sub.add_parser("experiment", help="run a bundled experiment")
    p.add_argument("tag", choices=[t for t in experiments.TAGS if t != "custom"])
    p.add_argument("--alg", type=str.upper, choices=ALGORITHMS, help="sampler (default per experiment)")
    p.add_argument("--n-runs", type=_positive_int)
    _add_run_flags(p)

    theory = sub.add_parser("theory", help="evaluate constants and parameter schedules")
    tsub = theory.add_subparsers(dest="theory_command", required=True)
    p = tsub.add_parser("constants", help="constants of the penalized potential as JSON")
    p.add_argument("--L", type=float, required=True, help="smoothness constant of f")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--d", type=_positive_int, default=1)
    p.add_argument("--grad-f0", type=float, default=0.0, help="|grad f(0)|")
    p.add_argument("--f0", type=float, default=0.0, help="f(0)")
    p.add_argument("--ell", type=float, default=4.0)
    p.add_argument("--m-s", type=float, default=1.0)
    p.add_argument("--b-s", type=float, default=1.0)
    p.add_argument("--kappa0", type=float)

    p = tsub.add_parser("schedule", help="step size, iteration count and delta for a target accuracy")
    p.add_argument("--alg", type=str.upper, choices=ALGORITHMS, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--d", type=_positive_int, default=1)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--ell", type=float, default=4.0)
    p.add_argument("--nonconvex", action="store_true", help="use the nonconvex stochastic rates")
    p.add_argument("--h-strongly-convex", action="store_true")
    p.add_argument("--batch-size", type=float)
    p.add_argument("--lambda-star", type=float, default=1.0)
    p.add_argument("--mu-star", type=float)
    for name in ("K", "K_hat", "eta", "b"):
        p.add_argument(f"--mult-{name.replace('_', '-')}", dest=f"mult_{name}", type=float,
                       default=1.0, help=f"multiplier for {name}")

    diag = sub.add_parser("diag", help="diagnostics on sample files")
    dsub = diag.add_subparsers(dest="diag_command", required=True)
    for name, helptext in (("w2", "1-D empirical 2-Wasserstein distance"),
                           ("tv", "histogram total-variation estimate")):
        p = dsub.add_parser(name, help=helptext)
        p.add_argument("--a", required=True, help="CSV sample file")
        p.add_argument("--b", required=True, help="CSV sample file")
        p.add_argument("--coord", type=int, default=0)
        if name == "w2":
            p.add_argument("--allow-unequal", action="store_true")
        else:
            p.add_argument("--bins", type=_positive_int)
    p = dsub.add_parser("violations", help="constraint violation statistics")
    p.add_argument("--samples", required=True, help="CSV sample file")
    p.add_argument("--body", required=True, help="body as JSON text or a path to a JSON file")
    return parser


def read_columns(path):
    """Header and float matrix of a CSV file, keeping only ``x*`` columns if present."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if values.size == 0:
        values = values.reshape(0, len(header))
    coords = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if coords:
        return [header[i] for i in coords], values[:, coords]
    return header, values


def _column(path, coord, parser):
    header, values = read_columns(path)
    if not 0 <= coord < values.shape[1]:
        parser.error(f"--coord {coord} out of range for {path} ({values.shape[1]} columns)")
    return values[:, coord]


def _load_body(text):
    text = text.strip()
    if not text.startswith("{"):
        with open(text) as fh:
            text = fh.read()
    return body_from_dict(json.loads(text))


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _experiment_config(args):
    if args.command == "sample":
        if not args.config:
            raise SchemaError("sample needs --config", path="--config")
        return experiments.load_config(args.config)
    if args.config:
        cfg = experiments.load_config(args.config)
        if cfg.get("experiment") != args.tag:
            raise SchemaError(f"config is for {cfg.get('experiment')!r}, not {args.tag!r}",
                              path="experiment")
    else:
        cfg = experiments.default_config(args.tag, args.alg)
    if args.n_runs:
        cfg["n_runs"] = args.n_runs
    return cfg


def _dispatch(args, parser):
    if args.command in ("sample", "experiment"):
        cfg = _experiment_config(args)
        summary = experiments.run_experiment(cfg, output_dir=args.out, seed=args.seed, jobs=args.jobs)
        out = args.out or summary["config"].get("output_dir", "results")
        print(f"wrote {out}/samples.csv, {out}/summary.json and {len(summary['plotdata'])} plot files")
        return EXIT_OK
    if args.command == "theory":
        if args.theory_command == "constants":
            c = penalized_constants(args.L, args.grad_f0, args.f0, args.ell, args.m_s, args.b_s,
                                    args.delta, args.gamma, args.d, args.kappa0)
            _print_json(c.to_dict())
        else:
            if args.nonconvex and args.alg == "PSGHMC" and args.mu_star is None:
                parser.error("--nonconvex PSGHMC needs --mu-star")
            mult = {k: getattr(args, f"mult_{k}") for k in ("K", "K_hat", "eta", "b")}
            plan = schedule_for(args.alg, args.eps, d=args.d, L=args.L, mu=args.mu, multipliers=mult,
                                ell=args.ell, convex=not args.nonconvex,
                                h_strongly_convex=args.h_strongly_convex, batch_size=args.batch_size,
                                lambda_star=args.lambda_star, mu_star=args.mu_star)
            _print_json(plan.to_dict())
        return EXIT_OK
    if args.diag_command == "w2":
        a, b = _column(args.a, args.coord, parser), _column(args.b, args.coord, parser)
        if a.size != b.size and not args.allow_unequal:
            parser.error("sample sizes differ; pass --allow-unequal for quantile matching")
        print(format(w2_1d(a, b, allow_unequal=args.allow_unequal), ".17g"))
    elif args.diag_command == "tv":
        a, b = _column(args.a, args.coord, parser), _column(args.b, args.coord, parser)
        print(format(tv_histogram(a, b, n_bins=args.bins), ".17g"))
    else:
        body = _load_body(args.body)
        _, values = read_columns(args.samples)
        frac, mean_d, max_d = violation_stats(body, values)
        _print_json({"fraction_outside": frac, "mean_distance": mean_d, "max_distance": max_d})
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args, parser)
    except SchemaError as exc:
        print(f"schema error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"sampler diverged at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PenalizedSamplerError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
