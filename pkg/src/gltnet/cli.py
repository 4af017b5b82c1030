"""Command-line interface.

Subcommands: generate, simulate, fit, infer, diagnose, im, spread,
experiment.  Primary outputs are JSON / JSONL / CSV files written
atomically; every command is a pure function of its inputs and the root
seed, so reruns are byte-identical.  Failures print a machine-readable
error object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .diagnostics import check_identifiability, check_submodularity_exact
from .estimation import FitOptions, fit_all, fit_node, fit_with_threshold_grid
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .graph import SeedDistribution, generate_cws, sample_seed, sample_weights_simplex
from .inference import node_covariance, weight_intervals
from .influence import estimate_spread_mc, exact_spread_via, greedy_im
from .likelihood import build_node_data, build_pseudo_node_data
from .model import GltModel, simulate_trace
from .rng import substream
from .serialize import (
    SchemaError,
    atomic_write_text,
    dump_json,
    fit_results_to_dict,
    graph_from_dict,
    graph_to_dict,
    load_json,
    model_from_dict,
    model_to_dict,
    read_pseudo_jsonl,
    read_traces_jsonl,
    write_traces_jsonl,
)
from .thresholds import spec_from_dict

__all__ = ["main"]


def _parse_family(text: str) -> dict:
    if text in ("uniform", "exponential"):
        return {"family": text}
    if text.startswith("beta:"):
        try:
            alpha, beta = (float(x) for x in text[len("beta:") :].split(","))
        except ValueError as exc:
            raise SchemaError(
                f"expected beta:ALPHA,BETA, got {text!r}"
            ) from exc
        return {"family": "beta", "alpha": alpha, "beta": beta}
    raise SchemaError(
        f"unknown family {text!r}; use uniform, exponential, or beta:A,B"
    )


def _parse_grid(text: str) -> tuple:
    """Grid entries "a:b,a:b,..." of beta parameters (or bare betas)."""
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" in token:
            a, b = token.split(":")
            out.append((float(a), float(b)))
        else:
            out.append((1.0, float(token)))
    if not out:
        raise SchemaError(f"empty grid {text!r}")
    return tuple(out)


def _load_graph_or_model(args):
    if getattr(args, "model", None):
        model = model_from_dict(load_json(args.model), where=args.model)
        return model.graph, model
    if getattr(args, "graph", None):
        return graph_from_dict(load_json(args.graph), where=args.graph), None
    raise SchemaError("supply --graph or --model")


def _fit_options(args) -> FitOptions:
    kwargs = {}
    if getattr(args, "epsilon", None) is not None:
        kwargs["epsilon"] = args.epsilon
    if getattr(args, "gamma", None) is not None:
        kwargs["gamma"] = args.gamma
    return FitOptions(**kwargs)


def _run_fits(args):
    graph, model = _load_graph_or_model(args)
    options = _fit_options(args)
    family = _parse_family(args.family)
    if args.pseudo:
        pseudo = read_pseudo_jsonl(args.pseudo)
        by_node = {}
        for pt in pseudo:
            by_node.setdefault(pt.node, []).append(pt)
        datasets = {
            v: build_pseudo_node_data(pts, v, graph) for v, pts in sorted(by_node.items())
        }
        traces = None
    else:
        if not args.traces:
            raise SchemaError("supply --traces or --pseudo")
        traces = read_traces_jsonl(args.traces)
        datasets = None

    spec = spec_from_dict(family)
    grid = _parse_grid(args.grid) if args.grid else None
    if grid and family["family"] != "beta":
        raise SchemaError("--grid applies to beta thresholds; set --family beta:A,B")

    results = {}
    if datasets is not None:
        for v, data in datasets.items():
            if grid:
                results[v] = fit_with_threshold_grid(data, "beta", grid, options)
            else:
                results[v] = fit_node(data, spec, options)
    elif grid:
        for v in graph.child_nodes():
            data = build_node_data(traces, graph, v)
            if data.n_informative_rows == 0:
                continue
            results[v] = fit_with_threshold_grid(data, "beta", grid, options)
    else:
        results = fit_all(traces, graph, spec, options, threads=args.threads)
    return graph, spec, results, traces, datasets


def _fitted_model(graph, spec, results):
    weights = np.zeros(graph.edge_count())
    specs = []
    for v in range(graph.n):
        r = results.get(v)
        if r is not None and r.estimated:
            weights[graph.child_slice(v)] = r.weights
        specs.append(r.spec if r is not None else spec)
    return GltModel(graph, weights, specs)


def cmd_generate(args):
    graph = generate_cws(args.n, args.k, args.p, substream(args.seed, "graph"))
    weights = sample_weights_simplex(graph, args.d_max, substream(args.seed, "weights"))
    spec = spec_from_dict(_parse_family(args.family))
    model = GltModel(graph, weights, spec)
    dump_json(model_to_dict(model), args.out)
    if args.graph_out:
        dump_json(graph_to_dict(graph), args.graph_out)
    return {"out": args.out, "edges": graph.edge_count()}


def cmd_simulate(args):
    model = model_from_dict(load_json(args.model), where=args.model)
    dist = SeedDistribution.uniform_by_size(args.s_max)
    traces = []
    for i in range(args.count):
        seed_set = sample_seed(dist, model.graph, substream(args.seed, "seed", i))
        traces.append(simulate_trace(model, seed_set, substream(args.seed, "sim", i)))
    write_traces_jsonl(traces, args.out)
    return {"out": args.out, "traces": len(traces)}


def cmd_fit(args):
    graph, spec, results, traces, datasets = _run_fits(args)
    dump_json(fit_results_to_dict(results), args.out)
    if args.model_out:
        dump_json(model_to_dict(_fitted_model(graph, spec, results)), args.model_out)
    estimated = sum(1 for r in results.values() if r.estimated)
    return {"out": args.out, "nodes_estimated": estimated}


def cmd_infer(args):
    graph, spec, results, traces, datasets = _run_fits(args)
    intervals = {}
    for v, fit in results.items():
        if not fit.estimated:
            continue
        if datasets is not None:
            data = datasets[v]
        else:
            data = build_node_data(traces, graph, v, validate=False)
        cov = node_covariance(data, fit.weights, fit.spec)
        ints = weight_intervals(fit, cov, args.level) if cov.valid else []
        intervals[v] = (cov, ints)
    dump_json(fit_results_to_dict(results, intervals), args.out)
    return {"out": args.out, "nodes": len(results)}


def cmd_diagnose(args):
    graph, model = _load_graph_or_model(args)
    if args.seeds:
        raw = load_json(args.seeds)
        dist = SeedDistribution.explicit(
            [(frozenset(int(v) for v in entry[0]), float(entry[1])) for entry in raw]
        )
    else:
        dist = SeedDistribution.uniform_by_size(args.s_max)
    report = check_identifiability(graph, dist, state_cap=args.state_cap)
    doc = {"identifiability": {}}
    for v, node_report in sorted(report.nodes.items()):
        entry = {
            "verdict": node_report.verdict,
            "parents": list(node_report.parents),
            "achievable_subsets": [sorted(s) for s in node_report.achievable],
        }
        if node_report.rank is not None:
            entry["rank"] = node_report.rank
            entry["rank_deficiency"] = node_report.rank_deficiency
        if node_report.witnesses is not None:
            entry["witnesses"] = [sorted(s) for s in node_report.witnesses]
            entry["matrix"] = [list(row) for row in node_report.matrix]
            entry["determinant"] = node_report.determinant
        doc["identifiability"][str(v)] = entry
    if model is not None:
        violations = check_submodularity_exact(
            model, max_budget=args.max_budget, node_cap=args.node_cap
        )
        doc["submodularity"] = {
            "violations": [
                {
                    "node": viol.node,
                    "subset": sorted(viol.subset),
                    "superset": sorted(viol.superset),
                    "gain_at_subset": viol.gain_at_subset,
                    "gain_at_superset": viol.gain_at_superset,
                }
                for viol in violations
            ],
            "concave_cdfs": all(
                model.spec(v).concave_cdf for v in model.graph.child_nodes()
            ),
        }
    dump_json(doc, args.out)
    return {"out": args.out}


def cmd_im(args):
    model = model_from_dict(load_json(args.model), where=args.model)
    solution = greedy_im(
        model,
        args.k,
        args.evaluator,
        args.seed,
        replicates=args.replicates,
        node_cap=args.node_cap,
    )
    doc = {
        "seeds": list(solution.seeds),
        "gains": list(solution.gains),
        "spread": solution.spread.mean,
        "se": solution.spread.std_error,
        "evaluator": args.evaluator,
        "replicates": solution.spread.replicates,
    }
    dump_json(doc, args.out)
    return doc


def cmd_spread(args):
    model = model_from_dict(load_json(args.model), where=args.model)
    seed_set = {int(v) for v in args.seed_set.split(",") if v != ""}
    if args.evaluator == "mc":
        est = estimate_spread_mc(
            model, seed_set, args.replicates, substream(args.seed, "spread")
        )
        doc = {"mean": est.mean, "se": est.std_error, "replicates": est.replicates}
    else:
        value = exact_spread_via(model, seed_set, args.evaluator, args.node_cap)
        doc = {"mean": value, "se": 0.0, "replicates": 0}
    dump_json(doc, args.out)
    return doc


def _write_csv(rows, path):
    if not rows:
        atomic_write_text(path, "")
        return
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _write_svg(summary, path):
    """Minimal polyline chart of the first numeric x column vs the mean."""
    numeric_keys = [
        k
        for k in summary[0]
        if k not in ("mean", "median", "two_se", "count")
        and isinstance(summary[0][k], (int, float))
    ]
    if not numeric_keys:
        return False
    x_key = numeric_keys[-1]
    series_keys = [k for k in summary[0] if k not in (x_key, "mean", "median", "two_se", "count")]
    series = {}
    for row in summary:
        label = ",".join(f"{k}={row[k]}" for k in series_keys) or "all"
        series.setdefault(label, []).append((row[x_key], row["mean"]))
    width, height, pad = 480, 320, 45
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span_x = (x1 - x0) or 1.0
    span_y = (y1 - y0) or 1.0

    def sx(x):
        return pad + (x - x0) / span_x * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / span_y * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 8}" font-size="11" text-anchor="middle">{x_key}</text>',
        f'<text x="12" y="{height // 2}" font-size="11" transform="rotate(-90 12 {height // 2})" text-anchor="middle">mean</text>',
    ]
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for i, (label, pts) in enumerate(sorted(series.items())):
        pts = sorted(pts)
        colour = palette[i % len(palette)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * i}" font-size="10" fill="{colour}">{label}</text>'
        )
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
    return True


def cmd_experiment(args):
    config_kwargs = {"seed": args.seed, "threads": args.threads}
    if args.config:
        raw = load_json(args.config)
        valid = {f.name for f in fields(ExperimentConfig)}
        for key, value in raw.items():
            if key not in valid:
                raise SchemaError(f"unknown config key {key!r}", where=args.config)
            config_kwargs[key] = tuple(value) if isinstance(value, list) else value
    config = ExperimentConfig(**config_kwargs)
    os.makedirs(args.out_dir, exist_ok=True)
    rows, summary = run_experiment(args.experiment, config)
    rows_path = os.path.join(args.out_dir, f"{args.experiment}_rows.csv")
    summary_path = os.path.join(args.out_dir, f"{args.experiment}_summary.csv")
    _write_csv(rows, rows_path)
    _write_csv(summary, summary_path)
    doc = {"rows": rows_path, "summary": summary_path, "n_rows": len(rows)}
    if args.plot and summary:
        svg_path = os.path.join(args.out_dir, f"{args.experiment}.svg")
        if _write_svg(summary, svg_path):
            doc["plot"] = svg_path
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gltnet",
        description="General linear threshold diffusion: simulate, fit, infer, maximize",
    )
    parser.add_argument("--version", action="version", version=f"gltnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a synthetic model (CWS graph + simplex weights)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, default=0.2)
    p.add_argument("--d-max", type=float, default=1.0)
    p.add_argument("--family", default="uniform")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--graph-out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="sample propagation traces from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--s-max", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    for name in ("fit", "infer"):
        p = sub.add_parser(
            name,
            help=(
                "maximum-likelihood weight fit"
                if name == "fit"
                else "fit plus observed-information intervals"
            ),
        )
        p.add_argument("--graph")
        p.add_argument("--model")
        p.add_argument("--traces")
        p.add_argument("--pseudo")
        p.add_argument("--family", default="uniform")
        p.add_argument("--grid", help="beta grid, e.g. 1:1,1:2,1:3 or 1,2,3")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", required=True)
        if name == "fit":
            p.add_argument("--model-out", help="also write the fitted model JSON")
            p.set_defaults(func=cmd_fit)
        else:
            p.add_argument("--level", type=float, default=0.95)
            p.set_defaults(func=cmd_infer)

    p = sub.add_parser("diagnose", help="identifiability (and submodularity) report")
    p.add_argument("--graph")
    p.add_argument("--model")
    p.add_argument("--seeds", help="JSON file of [[nodes...], probability] pairs")
    p.add_argument("--s-max", type=int, default=1)
    p.add_argument("--state-cap", type=int, default=100_000)
    p.add_argument("--max-budget", type=int, default=None)
    p.add_argument("--node-cap", type=int, default=10**6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("im", help="greedy influence maximization")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--evaluator", choices=["mc", "exact", "bipartite"], default="mc")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--node-cap", type=int, default=10**6)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_im)

    p = sub.add_parser("spread", help="spread of a given seed set")
    p.add_argument("--model", required=True)
    p.add_argument("--seed-set", required=True, help="comma-separated node ids")
    p.add_argument("--evaluator", choices=["mc", "exact", "bipartite"], default="mc")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--node-cap", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spread)

    p = sub.add_parser("experiment", help="run a named synthetic study")
    p.add_argument("--experiment", required=True, choices=sorted(EXPERIMENTS))
    p.add_argument("--config", help="JSON file of ExperimentConfig overrides")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        summary = args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error), file=sys.stderr)
        return 1
    if summary is not None:
        print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
