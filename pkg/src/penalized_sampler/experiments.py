"""Config-driven experiment runner writing samples, summaries and plot data."""

import copy
import functools
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import data as data_mod
from .diagnostics import (mse_series, projected_gradient_map, smoothed, tv_histogram, violation_stats,
                          w2_1d)
from .errors import InvalidArgument, SchemaError
from .geometry import (DistanceSquared, Functional, LpBall, RegularizedFunctional, Simplex,
                       body_from_dict)
from .potentials import (dirichlet_mean, gaussian_potential, make_dirichlet_potential,
                         make_least_squares, zero_potential)
from .samplers import HmcConfig, LangevinConfig, StepSchedule, run

SCHEMA_VERSION = 1
SEED_ENV = "PENALIZED_SAMPLER_SEED"
TAGS = ("dirichlet", "linreg-synthetic", "linreg-csv", "custom")
MSE_SMOOTHING_WINDOW = 500
MONOTONE_TOL = 0.01


def load_schema(name):
    text = resources.files("penalized_sampler").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _key_path(error):
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        # name the offending key itself
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        parts += extra[:1]
    elif error.validator == "required":
        missing = [k for k in error.validator_value if k not in error.instance]
        parts += missing[:1]
    return ".".join(parts) or "<root>"


def validate_config(config):
    """Raise ``SchemaError`` (with the offending key path) unless ``config`` is valid."""
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, path=_key_path(err))
    return config


def validate_summary(summary):
    try:
        jsonschema.validate(summary, load_schema("summary"))
    except jsonschema.ValidationError as err:
        raise SchemaError(err.message, path=_key_path(err)) from None
    return summary


# -- defaults ------------------------------------------------------------------

_DEFAULT_SAMPLERS = {
    ("dirichlet", "PLD"): dict(delta=0.005, eta0=1e-4, decay_factor=0.75, decay_period=1000,
                               steps=10_000, record_every=1000),
    ("dirichlet", "PHMC"): dict(delta=0.01, gamma=0.6, eta0=0.0012, decay_factor=0.9,
                                decay_period=200, steps=4000, record_every=200),
    ("linreg-synthetic", "PSGLD"): dict(delta=1e-3, eta0=1e-5, decay_factor=0.85, decay_period=5000,
                                        steps=50_000, batch_size=50, burn_in=10_000, record_every=10),
    ("linreg-synthetic", "PSGHMC"): dict(delta=1e-3, gamma=0.1, eta0=1e-4, decay_factor=0.85,
                                         decay_period=5000, steps=50_000, batch_size=50,
                                         burn_in=10_000, record_every=10),
    ("linreg-csv", "PSGHMC"): dict(delta=0.05, gamma=0.6, eta_scale=1e-5, steps=20_000,
                                   batch_size=50, record_every=1),
    ("linreg-csv", "PSGLD"): dict(delta=0.05, eta_scale=1e-5, steps=20_000, batch_size=50,
                                  record_every=1),
}

_DEFAULT_ALGORITHM = {"dirichlet": "PLD", "linreg-synthetic": "PSGLD", "linreg-csv": "PSGHMC"}


def default_config(tag, algorithm=None):
    """Reference configuration for one of the bundled experiments."""
    if tag not in TAGS or tag == "custom":
        raise InvalidArgument(f"no defaults for experiment {tag!r}")
    algorithm = (algorithm or _DEFAULT_ALGORITHM[tag]).upper()
    key = (tag, algorithm)
    if key not in _DEFAULT_SAMPLERS:
        raise InvalidArgument(f"experiment {tag!r} has no defaults for {algorithm}")
    cfg = {
        "schema_version": SCHEMA_VERSION,
        "experiment": tag,
        "sampler": {"algorithm": algorithm, **_DEFAULT_SAMPLERS[key]},
        "penalty": {"type": "distance_squared"},
        "n_runs": 50,
        "seed": 0,
    }
    if tag == "dirichlet":
        cfg["potential"] = {"type": "dirichlet", "alpha": [1.0, 2.0, 2.0]}
        cfg["body"] = {"type": "simplex", "dim": 2}
        cfg["n_samples"] = 1000
    elif tag == "linreg-synthetic":
        cfg["potential"] = {"type": "least_squares"}
        cfg["body"] = {"type": "l1_ball", "radius": 1.0, "dim": 2}
        cfg["data"] = {"source": "synthetic", "n": 10_000, "x_star": [1.0, 1.0], "noise_var": 0.25}
        cfg["n_samples"] = 1
    else:
        cfg["potential"] = {"type": "least_squares"}
        cfg["data"] = {"source": "fixture", "n": 442, "dim": 10, "standardize": True,
                       "scaling": "unit_norm"}
        cfg["shrinkage"] = [0.2, 0.4, 0.6, 0.8, 1.0]
        cfg["n_runs"] = 10
        cfg["n_samples"] = 1
    return cfg


def resolve_config(config, seed=None, jobs=None, output_dir=None):
    """Validate, then apply the seed override (env var, then explicit) and CLI overrides."""
    cfg = copy.deepcopy(config)
    validate_config(cfg)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError:
            raise SchemaError(f"{SEED_ENV} must be an unsigned integer", path="seed") from None
    if seed is not None:
        cfg["seed"] = int(seed)
    if jobs is not None:
        cfg["jobs"] = int(jobs)
    if output_dir is not None:
        cfg["output_dir"] = str(output_dir)
    validate_config(cfg)
    return cfg


# -- building blocks -----------------------------------------------------------


def _require(section, key, where):
    if key not in section:
        raise SchemaError(f"'{key}' is required here", path=f"{where}.{key}")
    return section[key]


def _build_dataset(cfg):
    spec = cfg.get("data")
    if spec is None:
        raise SchemaError("a data section is required for least-squares potentials", path="data")
    seed = spec.get("seed", cfg.get("seed", 0))
    src = spec["source"]
    if src == "synthetic":
        ds = data_mod.gen_linear(spec.get("n", 10_000), spec.get("x_star", [1.0, 1.0]),
                                 spec.get("noise_var", 0.25), seed)
    elif src == "fixture":
        ds = data_mod.gen_regression_fixture(spec.get("n", 442), spec.get("dim", 10), seed)
    else:
        ds = data_mod.load_csv(_require(spec, "path", "data"))
    if spec.get("standardize", False):
        ds = data_mod.standardize(ds, scaling=spec.get("scaling", "unit_variance"))
    return ds


def _build_potential(cfg, dataset):
    spec = cfg.get("potential") or {"type": "zero"}
    kind = spec["type"]
    if kind == "dirichlet":
        alpha = _require(spec, "alpha", "potential")
        if "floor" in spec:
            return make_dirichlet_potential(alpha, spec["floor"])
        return make_dirichlet_potential(alpha)
    if kind == "least_squares":
        return make_least_squares(dataset)
    dim = spec.get("dim") or (cfg.get("body") or {}).get("dim")
    if dim is None:
        raise SchemaError("potential dimension is unknown", path="potential.dim")
    if kind == "gaussian":
        return gaussian_potential(dim, spec.get("mean", 0.0), spec.get("precision", 1.0))
    return zero_potential(dim)


def _build_body(spec, dim):
    spec = dict(spec)
    if spec["type"] != "polytope":
        spec.setdefault("dim", dim)
    for key in {"l2_ball": ["radius"], "linf_ball": ["radius"], "l1_ball": ["radius"],
                "lp_ball": ["radius", "p"], "polytope": ["normals", "offsets", "interior_point"]
                }.get(spec["type"], []):
        _require(spec, key, "body")
    return body_from_dict(spec)


def _build_penalty(cfg, body):
    spec = cfg.get("penalty") or {"type": "distance_squared"}
    kind = spec["type"]
    if kind == "distance_squared":
        return DistanceSquared(body)
    constraints = body.constraints()
    if kind == "functional":
        return Functional(constraints, dim=body.dim)
    return RegularizedFunctional(constraints, _require(spec, "alpha", "penalty"), dim=body.dim)


def _sampler_config(spec, seed, eta0=None, burn_in=None, record_every=None):
    alg = spec["algorithm"]
    eta0 = spec["eta0"] if eta0 is None else eta0
    sched = StepSchedule(eta0, spec.get("decay_factor", 1.0), spec.get("decay_period", 1))
    common = dict(
        delta=_require(spec, "delta", "sampler"),
        schedule=sched,
        steps=_require(spec, "steps", "sampler"),
        seed=seed,
        batch_size=spec.get("batch_size") if alg in ("PSGLD", "PSGHMC") else None,
        record_every=spec.get("record_every", 1) if record_every is None else record_every,
        burn_in=spec.get("burn_in", 0) if burn_in is None else burn_in,
    )
    if alg in ("PSGLD", "PSGHMC") and common["batch_size"] is None:
        raise SchemaError("stochastic-gradient samplers need a batch size", path="sampler.batch_size")
    if alg in ("PLD", "PSGLD"):
        return LangevinConfig(**common)
    return HmcConfig(gamma=_require(spec, "gamma", "sampler"),
                     velocity_variance=spec.get("velocity_variance", 1.0), **common)


@functools.lru_cache(maxsize=8)
def _setup(canonical):
    """Dataset, potential and (for the fixed-body experiments) body and penalty."""
    cfg = json.loads(canonical)
    tag = cfg["experiment"]
    dataset = None
    if (cfg.get("potential") or {}).get("type") == "least_squares" or tag.startswith("linreg"):
        dataset = _build_dataset(cfg)
    potential = _build_potential(cfg, dataset)
    body = penalty = None
    if tag != "linreg-csv":
        body = _build_body(_require(cfg, "body", "<root>"), potential.dim)
        if body.dim != potential.dim:
            raise SchemaError("body and potential dimensions differ", path="body.dim")
        penalty = _build_penalty(cfg, body)
    return dataset, potential, body, penalty


def _canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _run_streams(seed, run_index):
    """Per-run sampler seed and auxiliary generator (initial points, oracle draws)."""
    sampler_ss, aux_ss = np.random.SeedSequence(seed, spawn_key=(run_index,)).spawn(2)
    return sampler_ss, np.random.default_rng(aux_ss)


def shrinkage_grid(cfg):
    """``(run_index, s, replicate)`` triples of the shrinkage experiment."""
    out = []
    for i, s in enumerate(cfg["shrinkage"]):
        for r in range(cfg.get("n_runs", 10)):
            out.append((i * cfg.get("n_runs", 10) + r, s, r))
    return out


# -- single runs ---------------------------------------------------------------


def _run_dirichlet(cfg, run_index):
    _, potential, body, penalty = _setup(_canonical(cfg))
    sampler_ss, aux = _run_streams(cfg["seed"], run_index)
    n = cfg.get("n_samples", 1000)
    x0 = data_mod.uniform_simplex(potential.dim, n, aux)
    reference = data_mod.dirichlet_oracle(cfg["potential"]["alpha"], n,
                                          seed=int(aux.integers(2**63)))
    batch = run(potential, penalty, _sampler_config(cfg["sampler"], sampler_ss, burn_in=0), x0)
    return {"final": batch.final_position, "trace": batch.trace, "steps": batch.steps,
            "reference": reference}


def _run_linreg(cfg, run_index):
    dataset, potential, body, penalty = _setup(_canonical(cfg))
    sampler_ss, _ = _run_streams(cfg["seed"], run_index)
    n = cfg.get("n_samples", 1)
    x0 = np.broadcast_to(np.asarray(cfg.get("x0", np.zeros(potential.dim)), dtype=float),
                         (n, potential.dim))
    batch = run(potential, penalty, _sampler_config(cfg["sampler"], sampler_ss), x0)
    mse = mse_series(batch.trace.mean(axis=1), dataset.features, dataset.responses) \
        if batch.trace.shape[0] else np.empty(0)
    return {"final": batch.final_position, "trace": batch.trace, "steps": batch.steps, "mse": mse}


def _run_shrinkage(cfg, run_index):
    dataset, potential, _, _ = _setup(_canonical(cfg))
    grid = shrinkage_grid(cfg)
    _, s, _ = grid[run_index]
    x_ols = dataset.ols()
    body = LpBall(1, s * np.abs(x_ols).sum(), potential.dim)
    penalty = _build_penalty(cfg, body)
    spec = cfg["sampler"]
    eta0 = spec.get("eta_scale", 1e-5) * s * np.linalg.norm(x_ols) if "eta0" not in spec else spec["eta0"]
    sampler_ss, _ = _run_streams(cfg["seed"], run_index)
    x0 = np.asarray(cfg.get("x0", np.zeros(potential.dim)), dtype=float)
    batch = run(potential, penalty, _sampler_config(spec, sampler_ss, eta0=eta0, burn_in=0), x0[None, :])
    mse = mse_series(batch.trace[:, 0, :], dataset.features, dataset.responses)
    final = batch.final_position[0]
    return {"final": batch.final_position, "steps": batch.steps, "mse": mse, "s": s,
            "ratio": float(np.abs(final).sum() / np.abs(x_ols).sum())}


def _run_custom(cfg, run_index):
    _, potential, body, penalty = _setup(_canonical(cfg))
    sampler_ss, _ = _run_streams(cfg["seed"], run_index)
    n = cfg.get("n_samples", 1)
    x0 = cfg.get("x0")
    x0 = body.interior_point if x0 is None else np.asarray(x0, dtype=float)
    x0 = np.broadcast_to(x0, (n, potential.dim))
    batch = run(potential, penalty, _sampler_config(cfg["sampler"], sampler_ss), x0)
    return {"final": batch.final_position, "trace": batch.trace, "steps": batch.steps}


_RUNNERS = {"dirichlet": _run_dirichlet, "linreg-synthetic": _run_linreg,
            "linreg-csv": _run_shrinkage, "custom": _run_custom}


def run_single(cfg, run_index):
    """One independent run; picklable entry point for worker processes."""
    return _RUNNERS[cfg["experiment"]](cfg, run_index)


def _execute(cfg, n_total):
    jobs = cfg.get("jobs", 1)
    if jobs <= 1 or n_total <= 1:
        return [run_single(cfg, i) for i in range(n_total)]
    with ProcessPoolExecutor(max_workers=min(jobs, n_total)) as pool:
        return list(pool.map(run_single, [cfg] * n_total, range(n_total)))


# -- output ----------------------------------------------------------------------


def _fmt(v):
    return format(float(v), ".17g")


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer)) else _fmt(v) for v in row) + "\n")


def _sample_rows(results, use_trace):
    for r, res in enumerate(results):
        if use_trace:
            for step, block in zip(res["steps"], res["trace"]):
                for x in block:
                    yield (r, int(step), *x)
        else:
            final = np.atleast_2d(res["final"])
            step = int(res["steps"][-1]) if len(res["steps"]) else 0
            for x in final:
                yield (r, step, *x)


def monotone_within(series, tol=MONOTONE_TOL):
    """True if every value is at most ``(1 + tol)`` times the running minimum before it."""
    series = np.asarray(series, dtype=float)
    if series.size < 2:
        return True
    running = np.minimum.accumulate(series)[:-1]
    return bool(np.all(series[1:] <= running * (1 + tol) + 1e-300))


def _summarize_dirichlet(cfg, results, plot):
    alpha = np.asarray(cfg["potential"]["alpha"], dtype=float)
    d = alpha.size - 1

    def full(x):
        return np.concatenate([x, 1.0 - x.sum(axis=-1, keepdims=True)], axis=-1)

    samples = np.concatenate([full(np.atleast_2d(r["final"])) for r in results])
    w2 = np.array([[w2_1d(full(np.atleast_2d(r["final"]))[:, i], r["reference"][:, i])
                    for i in range(d + 1)] for r in results])
    tv = np.array([[tv_histogram(full(np.atleast_2d(r["final"]))[:, i], r["reference"][:, i],
                                 n_bins=20, value_range=(0.0, 1.0)) for i in range(d + 1)]
                   for r in results])
    checkpoints = results[0]["steps"]
    w2_curve = np.array([[np.mean([w2_1d(full(r["trace"][k])[:, i], r["reference"][:, i])
                                   for r in results]) for i in range(d + 1)]
                         for k in range(len(checkpoints))])
    plot["w2_vs_step.csv"] = (["step"] + [f"w2_coord{i}" for i in range(d + 1)],
                              [(int(s), *row) for s, row in zip(checkpoints, w2_curve)])
    plot["w2_by_run.csv"] = (["run"] + [f"w2_coord{i}" for i in range(d + 1)],
                             [(r, *row) for r, row in enumerate(w2)])
    reference = np.concatenate([r["reference"] for r in results])
    edges = np.linspace(0.0, 1.0, 41)
    for i in range(d + 1):
        p, _ = np.histogram(samples[:, i], bins=edges, density=True)
        q, _ = np.histogram(reference[:, i], bins=edges, density=True)
        centers = 0.5 * (edges[1:] + edges[:-1])
        plot[f"marginal_coord{i}.csv"] = (["bin_center", "sampler_density", "oracle_density"],
                                          list(zip(centers, p, q)))
    body = Simplex(d)
    frac, mean_d, max_d = violation_stats(body, samples[:, :d])
    target = dirichlet_mean(alpha)
    mean = samples.mean(axis=0)
    return {
        "mean": mean.tolist(),
        "violations": {"fraction_outside": frac, "mean_distance": mean_d, "max_distance": max_d},
        "diagnostics": {
            "target_mean": target.tolist(),
            "mean_abs_error": np.abs(mean - target).tolist(),
            "w2_per_coord_mean": w2.mean(axis=0).tolist(),
            "w2_per_coord_max": w2.max(axis=0).tolist(),
            "tv_per_coord_mean": tv.mean(axis=0).tolist(),
            "reference_draws_per_run": int(results[0]["reference"].shape[0]),
        },
    }


def _summarize_linreg(cfg, results, plot, dataset, potential, body):
    traces = [r["trace"].reshape(-1, potential.dim) for r in results]
    samples = np.concatenate(traces) if traces else np.empty((0, potential.dim))
    steps = results[0]["steps"]
    mse = np.array([r["mse"] for r in results])
    mse_mean = mse.mean(axis=0) if mse.size else np.empty(0)
    l1 = np.array([np.abs(r["trace"]).sum(axis=-1).mean(axis=-1) for r in results])
    plot["mse_vs_step.csv"] = (["step", "mse"], list(zip(map(int, steps), mse_mean)))
    plot["l1norm_vs_step.csv"] = (["step", "l1_norm"], list(zip(map(int, steps), l1.mean(axis=0))))
    L = potential.L if potential.L else 1.0
    x_map = projected_gradient_map(potential.grad, body, np.zeros(potential.dim), 1.0 / L)
    frac, mean_d, max_d = violation_stats(body, samples)
    norms = np.abs(samples).sum(axis=-1)
    mean = samples.mean(axis=0)
    return {
        "mean": mean.tolist(),
        "violations": {"fraction_outside": frac, "mean_distance": mean_d, "max_distance": max_d},
        "diagnostics": {
            "constrained_map": x_map.tolist(),
            "mean_minus_map_norm": float(np.linalg.norm(mean - x_map)),
            "fraction_l1_at_most_1.05R": float(np.mean(norms <= 1.05 * body.radius)),
            "x_ols": dataset.ols().tolist(),
            "mse_final": float(mse_mean[-1]) if mse_mean.size else None,
            "n_post_burn_in_draws": int(samples.shape[0]),
        },
    }


def _summarize_shrinkage(cfg, results, plot, dataset):
    grid = shrinkage_grid(cfg)
    x_ols = dataset.ols()
    per_s = {}
    runs = []
    for (idx, s, rep), res in zip(grid, results):
        runs.append({"run": idx, "s": s, "replicate": rep, "ratio": res["ratio"]})
        per_s.setdefault(s, []).append(res)
    plot["ratio_by_run.csv"] = (["run", "s", "ratio"], [(r["run"], r["s"], r["ratio"]) for r in runs])
    diag = {"x_ols": x_ols.tolist(), "x_ols_l1": float(np.abs(x_ols).sum()),
            "smoothing_window": MSE_SMOOTHING_WINDOW, "monotone_tolerance": MONOTONE_TOL, "levels": []}
    for j, (s, group) in enumerate(per_s.items()):
        mse = np.mean([g["mse"] for g in group], axis=0)
        steps = group[0]["steps"]
        sm = smoothed(mse, MSE_SMOOTHING_WINDOW)
        plot[f"mse_vs_step_s{j}.csv"] = (["step", "mse", "mse_smoothed"],
                                         [(int(st), m, sm[k - MSE_SMOOTHING_WINDOW + 1]
                                           if k >= MSE_SMOOTHING_WINDOW - 1 else float("nan"))
                                          for k, (st, m) in enumerate(zip(steps, mse))])
        ratios = [g["ratio"] for g in group]
        diag["levels"].append({
            "s": s,
            "max_ratio": float(max(ratios)),
            "all_ratios_at_most_s": bool(max(ratios) <= s),
            "mse_final": float(mse[-1]),
            "mse_smoothed_monotone": monotone_within(sm),
            "mse_monotone_per_run": [monotone_within(smoothed(g["mse"], MSE_SMOOTHING_WINDOW))
                                     for g in group],
        })
    return {"runs": runs, "diagnostics": diag}


def _summarize_custom(cfg, results, plot, potential, body):
    samples = np.concatenate([r["trace"].reshape(-1, potential.dim) for r in results])
    steps = results[0]["steps"]
    curve = np.mean([r["trace"].mean(axis=1) for r in results], axis=0)
    plot["mean_vs_step.csv"] = (["step"] + [f"x{i}" for i in range(potential.dim)],
                                [(int(s), *row) for s, row in zip(steps, curve)])
    frac, mean_d, max_d = violation_stats(body, samples) if samples.size else (0.0, 0.0, 0.0)
    return {
        "mean": samples.mean(axis=0).tolist() if samples.size else [],
        "violations": {"fraction_outside": frac, "mean_distance": mean_d, "max_distance": max_d},
        "diagnostics": {"n_draws": int(samples.shape[0])},
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_experiment(config, output_dir=None, seed=None, jobs=None):
    """Execute every run of ``config`` and write the artifact files.

    Returns the summary dict. Files: ``samples.csv``, ``summary.json`` and
    ``plotdata/*.csv`` under the output directory. Everything except the
    ``wall_time_s`` field is a deterministic function of the config and seed.
    """
    cfg = resolve_config(config, seed=seed, jobs=jobs, output_dir=output_dir)
    cfg.setdefault("seed", 0)
    out = Path(cfg.get("output_dir", "results"))
    tag = cfg["experiment"]
    if tag == "custom":
        for key in ("potential", "body", "sampler"):
            _require(cfg, key, "<root>")
    _require(cfg, "sampler", "<root>")
    if tag == "linreg-csv":
        _require(cfg, "shrinkage", "<root>")
    _setup.cache_clear()
    dataset, potential, body, _ = _setup(_canonical(cfg))

    start = time.perf_counter()
    n_total = len(shrinkage_grid(cfg)) if tag == "linreg-csv" else cfg.get("n_runs", 50)
    results = _execute(cfg, n_total)
    wall = time.perf_counter() - start

    plot = {}
    if tag == "dirichlet":
        summary = _summarize_dirichlet(cfg, results, plot)
    elif tag == "linreg-synthetic":
        summary = _summarize_linreg(cfg, results, plot, dataset, potential, body)
    elif tag == "linreg-csv":
        summary = _summarize_shrinkage(cfg, results, plot, dataset)
    else:
        summary = _summarize_custom(cfg, results, plot, potential, body)

    out.mkdir(parents=True, exist_ok=True)
    (out / "plotdata").mkdir(exist_ok=True)
    dim = potential.dim
    samples_path = out / "samples.csv"
    write_rows(samples_path, ["run", "step"] + [f"x{i}" for i in range(dim)],
               _sample_rows(results, use_trace=tag in ("linreg-synthetic", "custom")))
    # where the files go and how many workers ran them does not change the content
    digest = hashlib.sha256()
    digest.update(_canonical({k: v for k, v in cfg.items() if k not in ("output_dir", "jobs")}).encode())
    digest.update(samples_path.read_bytes())
    for name in sorted(plot):
        header, rows = plot[name]
        write_rows(out / "plotdata" / name, header, rows)
        digest.update((out / "plotdata" / name).read_bytes())

    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": tag,
        "algorithm": cfg["sampler"]["algorithm"],
        "n_runs": n_total,
        "dim": dim,
        "wall_time_s": wall,
        "content_hash": digest.hexdigest(),
        "config": cfg,
        **({"data_provenance": dataset.provenance} if dataset is not None else {}),
        **summary,
        "plotdata": [f"plotdata/{name}" for name in sorted(plot)],
    }
    summary = _jsonable(summary)
    validate_summary(summary)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg} at line {exc.lineno})", path="<root>") from None
