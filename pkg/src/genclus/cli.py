"""Command-line harness: generate data, fit models, evaluate, run benchmarks.

Subcommands: generate | fit | evaluate | bench-quality | bench-time. All
experiment settings live in a JSON config whose keys are documented in the
README; every omitted key falls back to the defaults below, and every run is
reproducible from (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .evaluation import CLUSTERERS, SCHEMES, EvalOptions, evaluate
from .graphs import (
    DEFAULT_TELEPORT,
    NormalizedTensor,
    directed_normalize,
    load_coo_tensor,
    save_coo_tensor,
    symmetric_normalize,
)
from .richcom import RichcomModel, build_partition_matrix, richcom_fit
from .solver import ConstraintMode, GenClusModel, fit
from .synth import (
    DENSITY_GRID,
    GeneratorSpec,
    default_benchmark_spec,
    generate,
    scaled_benchmark_spec,
)

logger = logging.getLogger(__name__)

METHODS = ("genclus", "richcom_sym")
VARIANTS = ("original", "enhanced")
CONSTRAINT_CHOICES = ("all_ones", "unconstrained", "non_negative")

# sparsity levels for the baseline: six equally spaced values from 0 to 0.2
RHO_GRID = (0.0, 0.04, 0.08, 0.12, 0.16, 0.2)

CONFIG_DEFAULTS = {
    "methods": [{"method": "genclus", "mode": "original"}],
    "rank_range": [6, 7, 8, 9, 10],
    "num_view_clusters": 3,
    "tolerances": [1e-3, 1e-6, 1e-9],
    "max_iters": 1000,
    "samples": 11,
    "base_seed": 0,
    "densities": list(DENSITY_GRID),
    "flip_fraction": 0.01,
    "directed": True,
    "teleport": DEFAULT_TELEPORT,
    "rho_grid": list(RHO_GRID),
    "threshold": 0.5,
    "kmeans_restarts": 10,
    "enhanced_preprocessing": ["normalized", "raw"],
    "time_samples": 5,
    "time_tolerance": 1e-6,
    "time_max_iters": 1000,
    "time_density": 0.15,
    "time_grids": {
        "num_nodes": [60, 120, 240],
        "num_views": [32, 64, 128, 256],
    },
}

# held-fixed parameters for each swept timing dimension
TIME_FIXED = {
    "num_nodes": {"num_views": 9, "rank": 3, "num_view_clusters": 3},
    "num_views": {"num_nodes": 60, "rank": 3, "num_view_clusters": 3},
    "rank": {"num_nodes": 240, "num_views": 9, "num_view_clusters": 3},
    "num_view_clusters": {"num_nodes": 120, "num_views": 9, "rank": 96},
}

QUALITY_COLUMNS = ("gamma", "trial", "method", "mode", "view_ami", "node_ami", "error")
TIME_COLUMNS = ("dimension", "value", "method", "trial", "seconds")


def load_config(path=None, overrides=None):
    """Defaults, optionally updated from a JSON file and CLI overrides."""
    config = json.loads(json.dumps(CONFIG_DEFAULTS))  # deep copy
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        unknown = set(user) - set(CONFIG_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config.update(user)
    if overrides:
        config.update(overrides)
    for entry in config["methods"]:
        if entry.get("method") not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {entry}")
        if entry.get("mode") not in VARIANTS:
            raise ValueError(f"mode must be one of {VARIANTS}, got {entry}")
    return config


def _normalized_tensor(graph, teleport):
    if graph.symmetric:
        return symmetric_normalize(graph)
    return directed_normalize(graph, teleport)


def _raw_tensor(graph):
    """Symmetrized raw stack, usable by the eigen-based solver."""
    stack = graph.dense_stack()
    return NormalizedTensor((stack + stack.transpose(0, 2, 1)) / 2.0, kind="raw")


def _truth_cluster_counts(graph):
    labels = graph.node_labels_per_structure
    return [np.unique(labels[key]).size for key in sorted(labels)]


def _seed_for(*parts):
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def _pinned_richcom_options(config, seed):
    """Pipeline used by the baseline's own extraction: reconstruction
    thresholding, equivalent to sqrt-scaled embeddings plus inner-product
    components."""
    return EvalOptions(
        schemes=("sqrt_weighted",),
        unit_normalize=(False,),
        clusterers=("threshold",),
        threshold=config["threshold"],
        kmeans_restarts=config["kmeans_restarts"],
        seed=seed,
    )


def _full_options(config, seed):
    return EvalOptions(
        schemes=SCHEMES,
        unit_normalize=(False, True),
        clusterers=CLUSTERERS,
        threshold=config["threshold"],
        kmeans_restarts=config["kmeans_restarts"],
        seed=seed,
    )


def _best_result(candidates):
    """Highest node score, then view score; earlier candidate wins ties."""
    best = None
    for result in candidates:
        if best is None:
            best = result
            continue
        key = (result.scores["node_ami"], result.scores["view_ami"])
        best_key = (best.scores["node_ami"], best.scores["view_ami"])
        if key > best_key:
            best = result
    return best


def _fit_and_score_genclus(graph, config, variant, fit_base, eval_seed):
    tensors = [("normalized", _normalized_tensor(graph, config["teleport"]))]
    if variant == "enhanced":
        tensors += [("raw", _raw_tensor(graph))]
        modes = [
            ConstraintMode(views=a, columns=b)
            for a in CONSTRAINT_CHOICES
            for b in CONSTRAINT_CHOICES
        ]
    else:
        modes = [ConstraintMode(views="non_negative", columns="non_negative")]
    options = _full_options(config, eval_seed)

    candidates = []
    combo = 0
    for _, tensor in tensors:
        for mode in modes:
            for rank in config["rank_range"]:
                for tol in config["tolerances"]:
                    model, _ = fit(
                        tensor,
                        rank,
                        config["num_view_clusters"],
                        mode,
                        tol=tol,
                        max_iters=config["max_iters"],
                        seed=_seed_for(fit_base, combo),
                    )
                    candidates.append(evaluate(model, graph, options))
                    combo += 1
    return _best_result(candidates)


def _fit_and_score_richcom(graph, config, variant, fit_base, eval_seed):
    counts = _truth_cluster_counts(graph)
    rank = sum(counts)
    partition = build_partition_matrix(
        counts, config["num_view_clusters"], rank, seed=_seed_for(fit_base, 10_000)
    )
    if variant == "enhanced":
        tensors = []
        if "raw" in config["enhanced_preprocessing"]:
            tensors.append(("raw", graph.dense_stack()))
        if "normalized" in config["enhanced_preprocessing"]:
            tensors.append(("normalized", _normalized_tensor(graph, config["teleport"]).slices))
        options = _full_options(config, eval_seed)
    else:
        tensors = [("raw", graph.dense_stack())]
        options = _pinned_richcom_options(config, eval_seed)

    candidates = []
    combo = 0
    for _, data in tensors:
        for rho in config["rho_grid"]:
            for tol in config["tolerances"]:
                model, _ = richcom_fit(
                    data,
                    partition,
                    sparsity=rho,
                    tol=tol,
                    max_iters=config["max_iters"],
                    seed=_seed_for(fit_base, combo),
                )
                candidates.append(evaluate(model, graph, options))
                combo += 1
    return _best_result(candidates)


def _run_quality_task(payload):
    """One (density, trial, method) cell; returns a CSV row dict."""
    config, gamma_index, trial, method_index = payload
    gamma = config["densities"][gamma_index]
    entry = config["methods"][method_index]
    row = {
        "gamma": gamma,
        "trial": trial,
        "method": entry["method"],
        "mode": entry["mode"],
        "view_ami": "",
        "node_ami": "",
        "error": "",
    }
    try:
        master = np.random.SeedSequence(
            (config["base_seed"], gamma_index, trial, method_index)
        )
        graph_seed, eval_seed, fit_base = (int(s) for s in master.generate_state(3))
        graph = generate(
            default_benchmark_spec(
                density=gamma,
                flip_fraction=config["flip_fraction"],
                directed=config["directed"],
                seed=graph_seed,
            )
        )
        if entry["method"] == "genclus":
            result = _fit_and_score_genclus(
                graph, config, entry["mode"], fit_base, eval_seed
            )
        else:
            result = _fit_and_score_richcom(
                graph, config, entry["mode"], fit_base, eval_seed
            )
        row["view_ami"] = result.scores["view_ami"]
        row["node_ami"] = result.scores["node_ami"]
    except Exception as exc:  # noqa: BLE001 - failures become CSV rows
        logger.exception("quality trial failed")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_bench_quality(config, jobs=1):
    """All quality trials plus q25/q50/q75 summary rows, deterministic order."""
    tasks = [
        (config, gi, trial, mi)
        for gi in range(len(config["densities"]))
        for trial in range(config["samples"])
        for mi in range(len(config["methods"]))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_quality_task, tasks))
    else:
        rows = [_run_quality_task(t) for t in tasks]

    summaries = []
    for gi, gamma in enumerate(config["densities"]):
        for entry in config["methods"]:
            cell = [
                r
                for r in rows
                if r["gamma"] == gamma
                and r["method"] == entry["method"]
                and r["mode"] == entry["mode"]
                and not r["error"]
            ]
            for q, name in ((25, "q25"), (50, "q50"), (75, "q75")):
                summary = {
                    "gamma": gamma,
                    "trial": name,
                    "method": entry["method"],
                    "mode": entry["mode"],
                    "view_ami": "",
                    "node_ami": "",
                    "error": "",
                }
                if cell:
                    summary["view_ami"] = float(
                        np.percentile([r["view_ami"] for r in cell], q)
                    )
                    summary["node_ami"] = float(
                        np.percentile([r["node_ami"] for r in cell], q)
                    )
                summaries.append(summary)
    return rows, summaries


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        writer.writerows(rows)


def _write_quality_plot_data(out_prefix, config, summaries):
    for entry in config["methods"]:
        rows = []
        for gamma in config["densities"]:
            cell = {
                r["trial"]: r
                for r in summaries
                if r["gamma"] == gamma
                and r["method"] == entry["method"]
                and r["mode"] == entry["mode"]
            }
            if not cell or cell["q50"]["node_ami"] == "":
                continue
            rows.append(
                {
                    "x": gamma,
                    "median": cell["q50"]["node_ami"],
                    "q25": cell["q25"]["node_ami"],
                    "q75": cell["q75"]["node_ami"],
                }
            )
        path = f"{out_prefix}_plot_{entry['method']}_{entry['mode']}.csv"
        _write_csv(path, ("x", "median", "q25", "q75"), rows)


def _timed_fit(method, graph, params, config, seed):
    """Fit once and return the wall time of the fitting call alone."""
    if method == "genclus":
        tensor = _normalized_tensor(graph, config["teleport"])
        start = time.perf_counter()
        fit(
            tensor,
            params["rank"],
            params["num_view_clusters"],
            ConstraintMode(views="non_negative", columns="non_negative"),
            tol=config["time_tolerance"],
            max_iters=config["time_max_iters"],
            seed=seed,
        )
        return time.perf_counter() - start
    counts = _truth_cluster_counts(graph)
    partition = build_partition_matrix(
        counts, params["num_view_clusters"], params["rank"], seed=seed
    )
    data = graph.dense_stack()
    start = time.perf_counter()
    richcom_fit(
        data,
        partition,
        sparsity=0.0,
        tol=config["time_tolerance"],
        max_iters=config["time_max_iters"],
        seed=seed,
    )
    return time.perf_counter() - start


def run_bench_time(config):
    """Wall-clock scaling sweep; always serial. Returns trial, median and
    log-log slope rows."""
    rows = []
    medians = []
    methods = [entry["method"] for entry in config["methods"]]
    for dim_index, (dimension, grid) in enumerate(sorted(config["time_grids"].items())):
        if dimension not in TIME_FIXED:
            raise ValueError(
                f"unknown timing dimension {dimension!r}; pick from {sorted(TIME_FIXED)}"
            )
        for value_index, value in enumerate(grid):
            params = dict(TIME_FIXED[dimension])
            params[dimension] = int(value)
            for mi, method in enumerate(methods):
                samples = []
                for trial in range(config["time_samples"]):
                    seed = _seed_for(
                        config["base_seed"], 7, dim_index, value_index, mi, trial
                    )
                    graph = generate(
                        scaled_benchmark_spec(
                            num_nodes=params["num_nodes"],
                            num_views=params["num_views"],
                            density=config["time_density"],
                            flip_fraction=config["flip_fraction"],
                            directed=config["directed"],
                            seed=seed,
                        )
                    )
                    seconds = _timed_fit(
                        method, graph, params, config, _seed_for(seed, 1)
                    )
                    samples.append(seconds)
                    rows.append(
                        {
                            "dimension": dimension,
                            "value": value,
                            "method": method,
                            "trial": trial,
                            "seconds": seconds,
                        }
                    )
                medians.append(
                    {
                        "dimension": dimension,
                        "value": value,
                        "method": method,
                        "trial": "median",
                        "seconds": float(np.median(samples)),
                    }
                )
    slopes = []
    for dimension in sorted(config["time_grids"]):
        for method in methods:
            points = [
                (m["value"], m["seconds"])
                for m in medians
                if m["dimension"] == dimension and m["method"] == method
            ]
            if len(points) < 2:
                continue
            xs = np.log([p[0] for p in points])
            ys = np.log([max(p[1], 1e-12) for p in points])
            slope = float(np.polyfit(xs, ys, 1)[0])
            slopes.append(
                {
                    "dimension": dimension,
                    "value": "",
                    "method": method,
                    "trial": "slope",
                    "seconds": slope,
                }
            )
    return rows, medians, slopes


def _write_time_plot_data(out_prefix, config, rows):
    methods = sorted({r["method"] for r in rows})
    for dimension in sorted(config["time_grids"]):
        for method in methods:
            out = []
            for value in config["time_grids"][dimension]:
                cell = [
                    r["seconds"]
                    for r in rows
                    if r["dimension"] == dimension
                    and r["method"] == method
                    and r["value"] == value
                ]
                if not cell:
                    continue
                out.append(
                    {
                        "x": value,
                        "median": float(np.percentile(cell, 50)),
                        "q25": float(np.percentile(cell, 25)),
                        "q75": float(np.percentile(cell, 75)),
                    }
                )
            path = f"{out_prefix}_plot_{method}_{dimension}.csv"
            _write_csv(path, ("x", "median", "q25", "q75"), out)


# ---------------------------------------------------------------------------
# subcommand entry points

def _save_labels(graph, path):
    payload = {
        "view_labels": [int(v) for v in graph.view_labels],
        "node_labels_per_structure": {
            str(k): [int(x) for x in v]
            for k, v in graph.node_labels_per_structure.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def _load_labels(graph, path):
    with open(path) as fh:
        payload = json.load(fh)
    graph.view_labels = np.array(payload["view_labels"])
    graph.node_labels_per_structure = {
        int(k): np.array(v) for k, v in payload["node_labels_per_structure"].items()
    }
    return graph


def cmd_generate(args):
    if args.spec is not None:
        with open(args.spec) as fh:
            raw = json.load(fh)
        raw["structures"] = tuple(
            (int(vc), tuple(int(s) for s in sizes)) for vc, sizes in raw["structures"]
        )
        spec = GeneratorSpec(**raw, seed=args.seed) if "seed" not in raw else GeneratorSpec(**raw)
    else:
        spec = default_benchmark_spec(density=args.gamma, seed=args.seed)
    graph = generate(spec)
    save_coo_tensor(graph, args.out)
    labels_path = args.labels_out or f"{args.out}.labels.json"
    _save_labels(graph, labels_path)
    print(f"wrote {graph.num_views} views over {graph.num_nodes} nodes to {args.out}")
    print(f"wrote ground-truth labels to {labels_path}")


def cmd_fit(args):
    config = load_config(args.config)
    graph = load_coo_tensor(args.tensor)
    if args.labels:
        _load_labels(graph, args.labels)
    if args.method == "genclus":
        tensor = (
            _raw_tensor(graph)
            if args.preprocessing == "raw"
            else _normalized_tensor(graph, config["teleport"])
        )
        mode = ConstraintMode(views=args.view_constraint, columns=args.column_constraint)
        model, report = fit(
            tensor,
            args.rank,
            config["num_view_clusters"],
            mode,
            tol=args.tol,
            max_iters=config["max_iters"],
            seed=args.seed,
        )
    else:
        if graph.node_labels_per_structure is None:
            raise SystemExit("richcom_sym needs --labels to shape its partition matrix")
        counts = _truth_cluster_counts(graph)
        partition = build_partition_matrix(
            counts, config["num_view_clusters"], args.rank or sum(counts), seed=args.seed
        )
        data = (
            _normalized_tensor(graph, config["teleport"]).slices
            if args.preprocessing == "normalized"
            else graph.dense_stack()
        )
        model, report = richcom_fit(
            data,
            partition,
            sparsity=args.rho,
            tol=args.tol,
            max_iters=config["max_iters"],
            seed=args.seed,
        )
    with open(args.out, "w") as fh:
        json.dump(model.to_dict(), fh)
    report_path = args.report_out or f"{args.out}.report.json"
    with open(report_path, "w") as fh:
        json.dump(report.to_dict(), fh)
    trace = report.objective_trace
    print(
        f"fit finished: iterations={report.iterations} converged={report.converged} "
        f"objective {trace[0]:.6g} -> {trace[-1]:.6g}"
    )
    print(f"wrote model to {args.out} and report to {report_path}")


def _load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    if "partition" in payload:
        return RichcomModel.from_dict(payload)
    return GenClusModel.from_dict(payload)


def cmd_evaluate(args):
    config = load_config(args.config)
    graph = load_coo_tensor(args.tensor)
    _load_labels(graph, args.labels)
    model = _load_model(args.model)
    if args.pinned:
        options = _pinned_richcom_options(config, args.seed)
    else:
        options = _full_options(config, args.seed)
    result = evaluate(model, graph, options)
    with open(args.out, "w") as fh:
        json.dump(result.to_dict(), fh)
    print(
        f"view AMI {result.scores['view_ami']:.4f}, "
        f"node AMI {result.scores['node_ami']:.4f} "
        f"(pipeline {result.pipeline})"
    )
    print(f"wrote evaluation to {args.out}")


def cmd_bench_quality(args):
    config = load_config(args.config, overrides={"base_seed": args.seed} if args.seed is not None else None)
    rows, summaries = run_bench_quality(config, jobs=args.jobs)
    _write_csv(args.out, QUALITY_COLUMNS, rows + summaries)
    prefix = str(Path(args.out).with_suffix(""))
    _write_quality_plot_data(prefix, config, summaries)
    medians = [r for r in summaries if r["trial"] == "q50"]
    for row in medians:
        print(
            f"gamma={row['gamma']} {row['method']}/{row['mode']}: "
            f"median node AMI = {row['node_ami']}"
        )
    print(f"wrote {len(rows)} trial rows (+{len(summaries)} summaries) to {args.out}")


def cmd_bench_time(args):
    config = load_config(args.config, overrides={"base_seed": args.seed} if args.seed is not None else None)
    rows, medians, slopes = run_bench_time(config)
    _write_csv(args.out, TIME_COLUMNS, rows + medians + slopes)
    prefix = str(Path(args.out).with_suffix(""))
    _write_time_plot_data(prefix, config, rows)
    for row in slopes:
        print(
            f"{row['method']} vs {row['dimension']}: log-log slope = {row['seconds']:.3f}"
        )
    print(f"wrote {len(rows)} timing rows to {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="genclus",
        description="Multi-view graph clustering: data generation, fitting, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a synthetic multi-view graph")
    p.add_argument("--spec", help="JSON file with generator fields", default=None)
    p.add_argument("--gamma", type=float, default=0.15, help="intra-block edge density")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output tensor path (.gz supported)")
    p.add_argument("--labels-out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit one model to a tensor file")
    p.add_argument("tensor")
    p.add_argument("--config", default=None)
    p.add_argument("--method", choices=METHODS, default="genclus")
    p.add_argument("--preprocessing", choices=("normalized", "raw"), default="normalized")
    p.add_argument("--view-constraint", choices=CONSTRAINT_CHOICES, default="non_negative")
    p.add_argument("--column-constraint", choices=CONSTRAINT_CHOICES, default="non_negative")
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--rho", type=float, default=0.0, help="baseline sparsity penalty")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels", default=None, help="ground-truth sidecar JSON")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report-out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="score a fitted model against ground truth")
    p.add_argument("model")
    p.add_argument("tensor")
    p.add_argument("--labels", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--pinned", action="store_true", help="use the baseline's fixed pipeline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench-quality", help="clustering quality sweep over densities")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the config base seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_bench_quality)

    p = sub.add_parser("bench-time", help="wall-clock scaling sweep (always serial)")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the config base seed")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_bench_time)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
