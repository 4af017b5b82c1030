"""Synthetic-study harness: trace generation, fitting, and comparisons.

Each experiment emits per-replication raw rows plus aggregate summaries
(mean with a two-standard-error half-width), both as lists of plain dicts
so the command-line layer can write CSV.  All randomness is derived from
the config's root seed through named substreams; rerunning a config
reproduces every row bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimation import (
    FitOptions,
    baseline_ptp,
    baseline_wc,
    fit_all,
    fit_with_threshold_grid,
)
from .graph import SeedDistribution, generate_cws, sample_seed, sample_weights_simplex
from .inference import (
    activation_probability_interval,
    node_covariance,
    weight_intervals,
)
from .likelihood import build_node_data
from .metrics import rmae
from .model import ActivationHistory, GltModel, simulate_trace, transition_probability
from .influence import estimate_spread_mc, greedy_im
from .rng import substream
from .thresholds import (
    make_beta,
    make_exponential_unit,
    make_uniform,
    spec_from_dict,
)

__all__ = ["ExperimentConfig", "EXPERIMENTS", "run_experiment"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs for the synthetic studies; the root seed is mandatory."""

    seed: int
    n: int = 30
    k: int = 4
    p: float = 0.2
    d_max: float = 1.0
    s_max: int = 5
    family: dict = field(default_factory=lambda: {"family": "uniform"})
    replications: int = 10
    n_traces: int = 2000
    trace_counts: tuple = (250, 1000, 4000)
    d_max_grid: tuple = (0.2, 0.6, 1.0)
    size_grid: tuple = ((30, 4), (50, 6), (80, 8))
    budgets: tuple = (1, 4, 7, 10, 13)
    beta_grid: tuple = (1, 2, 3, 4, 5)
    mc_replicates: int = 400
    eval_replicates: int = 2000
    n_test: int = 200
    level: float = 0.95
    threads: int = 1

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a root seed is mandatory")
        for name in ("n", "k", "replications", "n_traces", "mc_replicates", "s_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _sample_model(config, rep, n=None, k=None, d_max=None, specs=None, tag=""):
    n = n or config.n
    k = k or config.k
    d_max = d_max if d_max is not None else config.d_max
    graph = generate_cws(n, k, config.p, substream(config.seed, "graph", tag, rep))
    weights = sample_weights_simplex(
        graph, d_max, substream(config.seed, "weights", tag, rep)
    )
    if specs is None:
        specs = spec_from_dict(config.family)
    return GltModel(graph, weights, specs)


def _simulate_traces(config, model, count, rep, tag=""):
    dist = SeedDistribution.uniform_by_size(config.s_max)
    out = []
    for i in range(count):
        seed_set = sample_seed(
            dist, model.graph, substream(config.seed, "seed", tag, rep, i)
        )
        out.append(
            simulate_trace(model, seed_set, substream(config.seed, "sim", tag, rep, i))
        )
    return out


def _fitted_weight_vector(graph, fits):
    weights = np.zeros(graph.edge_count())
    estimated = 0
    for v, r in fits.items():
        if r.estimated:
            weights[graph.child_slice(v)] = r.weights
            estimated += 1
    return weights, estimated


def _aggregate(rows, group_keys, value_key):
    groups = {}
    for row in rows:
        key = tuple(row[k] for k in group_keys)
        groups.setdefault(key, []).append(row[value_key])
    out = []
    for key in sorted(groups):
        values = np.asarray(groups[key], dtype=float)
        se = values.std(ddof=1) / math.sqrt(values.size) if values.size > 1 else 0.0
        entry = dict(zip(group_keys, key))
        entry.update(
            {
                "count": int(values.size),
                "mean": float(values.mean()),
                "median": float(np.median(values)),
                "two_se": float(2.0 * se),
            }
        )
        out.append(entry)
    return out


# -- estimation-error studies -------------------------------------------------


def run_rmae_vs_traces(config: ExperimentConfig):
    """Weight-estimation error versus trace count, across d_max values."""
    rows = []
    n_max = max(config.trace_counts)
    for rep in range(config.replications):
        for di, d_max in enumerate(config.d_max_grid):
            model = _sample_model(config, rep, d_max=d_max, tag=f"d{di}")
            traces = _simulate_traces(config, model, n_max, rep, tag=f"d{di}")
            for count in config.trace_counts:
                fits = fit_all(
                    traces[:count],
                    model.graph,
                    model.thresholds,
                    threads=config.threads,
                )
                est, n_est = _fitted_weight_vector(model.graph, fits)
                rows.append(
                    {
                        "rep": rep,
                        "d_max": d_max,
                        "n_traces": count,
                        "rmae": rmae(model.weights, est),
                        "nodes_estimated": n_est,
                    }
                )
    return rows, _aggregate(rows, ["d_max", "n_traces"], "rmae")


def run_rmae_vs_n(config: ExperimentConfig):
    """Weight-estimation error versus graph size at a fixed trace count."""
    rows = []
    for rep in range(config.replications):
        for gi, (n, k) in enumerate(config.size_grid):
            model = _sample_model(config, rep, n=n, k=k, tag=f"g{gi}")
            traces = _simulate_traces(config, model, config.n_traces, rep, tag=f"g{gi}")
            fits = fit_all(
                traces, model.graph, model.thresholds, threads=config.threads
            )
            est, n_est = _fitted_weight_vector(model.graph, fits)
            rows.append(
                {
                    "rep": rep,
                    "n": n,
                    "k": k,
                    "n_traces": config.n_traces,
                    "rmae": rmae(model.weights, est),
                    "nodes_estimated": n_est,
                }
            )
    return rows, _aggregate(rows, ["n", "k"], "rmae")


def run_ci_coverage(config: ExperimentConfig):
    """Pooled Wald-interval coverage of true weights at interior estimates."""
    rows = []
    for rep in range(config.replications):
        model = _sample_model(config, rep)
        traces = _simulate_traces(config, model, config.n_traces, rep)
        fits = fit_all(traces, model.graph, model.thresholds, threads=config.threads)
        for v, fit in sorted(fits.items()):
            if not fit.estimated:
                continue
            data = build_node_data(traces, model.graph, v, validate=False)
            cov = node_covariance(data, fit.weights, fit.spec)
            interior = not fit.at_boundary and cov.valid
            covered = total = 0
            if interior:
                intervals = weight_intervals(fit, cov, config.level)
                truth = model.theta(v)
                for b, interval in zip(truth, intervals):
                    total += 1
                    covered += int(interval.contains(b))
            rows.append(
                {
                    "rep": rep,
                    "node": v,
                    "interior": int(interior),
                    "weights_covered": covered,
                    "weights_total": total,
                }
            )
    interior_rows = [r for r in rows if r["interior"]]
    covered = sum(r["weights_covered"] for r in interior_rows)
    total = sum(r["weights_total"] for r in interior_rows)
    summary = [
        {
            "node_replications": len(interior_rows),
            "weights_total": total,
            "coverage": covered / total if total else float("nan"),
            "nominal": config.level,
        }
    ]
    return rows, summary


# -- activation-probability study ----------------------------------------------


def _candidate_specs():
    return {
        "beta-2-1": make_beta(2, 1),
        "beta-3-1": make_beta(3, 1),
        "uniform": make_uniform(),
        "exponential": make_exponential_unit(),
    }


def run_activation_prediction(config: ExperimentConfig):
    """Next-step activation probabilities under candidate threshold families.

    The ground truth is a beta(2, 1)-threshold model; each candidate family
    is fitted on training traces and evaluated on held-out traces by the
    error of its predicted transition probabilities and the coverage of
    their delta-method intervals.
    """
    rows = []
    for rep in range(config.replications):
        truth = _sample_model(config, rep, specs=make_beta(2, 1))
        train = _simulate_traces(config, truth, config.n_traces, rep, tag="train")
        test = _simulate_traces(config, truth, config.n_test, rep, tag="test")
        for name, spec in _candidate_specs().items():
            fits = fit_all(train, truth.graph, spec, threads=config.threads)
            covs = {}
            for v, fit in fits.items():
                # boundary fits are kept: losing coverage there is exactly how
                # a misspecified threshold family shows up
                if fit.estimated:
                    data = build_node_data(train, truth.graph, v, validate=False)
                    covs[v] = node_covariance(data, fit.weights, spec)
            true_p, pred_p, covered, lengths = [], [], 0, []
            for trace in test:
                hist = ActivationHistory(trace)
                active = trace.all_active()
                exposed = set()
                for t in range(len(trace.steps)):
                    for v in trace.steps[t]:
                        exposed.update(truth.graph.children(v))
                for v in sorted((active | exposed) - trace.steps[0]):
                    if truth.graph.in_degree(v) == 0:
                        continue
                    fit = fits.get(v)
                    if fit is None or not fit.estimated or v not in covs:
                        continue
                    if not covs[v].valid:
                        continue
                    t_last = _last_inactive(trace, v)
                    if t_last is None or t_last + 1 > trace.horizon + 1:
                        continue
                    prefix = ActivationHistory(trace.steps[: t_last + 1])
                    p_true = transition_probability(truth, prefix, v, t_last + 1)
                    point, interval = activation_probability_interval(
                        fit, covs[v], truth.graph, prefix, t_last + 1, config.level
                    )
                    true_p.append(p_true)
                    pred_p.append(point)
                    covered += int(interval.contains(p_true))
                    lengths.append(interval.width)
            total = len(true_p)
            rows.append(
                {
                    "rep": rep,
                    "candidate": name,
                    "n_predictions": total,
                    "rmae": rmae(true_p, pred_p) if total else float("nan"),
                    "coverage": covered / total if total else float("nan"),
                    "mean_ci_length": float(np.mean(lengths)) if total else float("nan"),
                }
            )
    return rows, _aggregate(rows, ["candidate"], "rmae") + _aggregate(
        rows, ["candidate"], "coverage"
    )


def _last_inactive(trace, v):
    """Last time v is not active, or None when v is seeded."""
    if v in trace.steps[0]:
        return None
    for t in range(1, len(trace.steps)):
        if v in trace.steps[t]:
            return t - 1
    return trace.horizon


# -- influence-maximization studies ---------------------------------------------


def _fit_candidates(config, truth, traces):
    """Fit the GLT grid model, LT, IC, and the two heuristics."""
    graph = truth.graph
    out = {}
    grid = tuple((1, b) for b in config.beta_grid)
    glt_fits = {}
    options = FitOptions()
    for v in graph.child_nodes():
        data = build_node_data(traces, graph, v, validate=False)
        if data.n_informative_rows == 0:
            continue
        try:
            glt_fits[v] = fit_with_threshold_grid(data, "beta", grid, options)
        except Exception:  # noqa: BLE001 - candidate fit may fail per node
            continue
    glt_weights, _ = _fitted_weight_vector(graph, glt_fits)
    glt_specs = []
    for v in range(graph.n):
        fit = glt_fits.get(v)
        glt_specs.append(fit.spec if fit is not None else make_uniform())
    out["glt"] = GltModel(graph, glt_weights, glt_specs)

    lt_fits = fit_all(traces, graph, make_uniform(), threads=config.threads)
    lt_weights, _ = _fitted_weight_vector(graph, lt_fits)
    out["lt"] = GltModel(graph, lt_weights, make_uniform())

    ic_fits = fit_all(traces, graph, make_exponential_unit(), threads=config.threads)
    ic_weights, _ = _fitted_weight_vector(graph, ic_fits)
    out["ic"] = GltModel(graph, ic_weights, make_exponential_unit())

    out["wc"] = GltModel(graph, baseline_wc(graph), make_uniform())
    out["ptp"] = GltModel(graph, baseline_ptp(traces, graph), make_uniform())
    return out


def run_im_comparison(config: ExperimentConfig):
    """Greedy-IM spread under fitted models, evaluated on the true model.

    Ground truth: beta(1, beta_v) thresholds with beta_v uniform on the
    configured grid.  Candidates: grid-fitted GLT, LT, IC, and the WC/PTP
    heuristics; the oracle runs greedy on the truth itself.
    """
    rows = []
    for rep in range(config.replications):
        beta_rng = substream(config.seed, "beta", rep)
        graph = generate_cws(
            config.n, config.k, config.p, substream(config.seed, "graph", "im", rep)
        )
        specs = [
            make_beta(1, int(beta_rng.choice(config.beta_grid)))
            for _ in range(graph.n)
        ]
        weights = sample_weights_simplex(
            graph, config.d_max, substream(config.seed, "weights", "im", rep)
        )
        truth = GltModel(graph, weights, specs)
        traces = _simulate_traces(config, truth, config.n_traces, rep, tag="im")
        candidates = _fit_candidates(config, truth, traces)
        candidates["oracle"] = truth
        for name in sorted(candidates):
            model = candidates[name]
            for k in config.budgets:
                root = int(
                    substream(config.seed, "im-root", rep, name, k).integers(
                        0, 2**63 - 1
                    )
                )
                solution = greedy_im(
                    model, k, "mc", root, replicates=config.mc_replicates
                )
                est = estimate_spread_mc(
                    truth,
                    solution.seed_set,
                    config.eval_replicates,
                    substream(config.seed, "im-eval", rep, k),
                )
                rows.append(
                    {
                        "rep": rep,
                        "model": name,
                        "k": k,
                        "spread": est.mean,
                        "spread_se": est.std_error,
                    }
                )
    return rows, _aggregate(rows, ["model", "k"], "spread")


def run_spread_comparison(config: ExperimentConfig):
    """Spread prediction from held-out seed sets under candidate thresholds.

    Ground truth: beta(2, 2) thresholds.  Candidates refit the weights
    under their own threshold assumption; predictions are compared to the
    true spreads by relative error.
    """
    candidates = {
        "beta-2-2": make_beta(2, 2),
        "beta-1-2": make_beta(1, 2),
        "beta-2-1": make_beta(2, 1),
        "uniform": make_uniform(),
    }
    rows = []
    for rep in range(config.replications):
        truth = _sample_model(config, rep, specs=make_beta(2, 2), tag="spread")
        train = _simulate_traces(config, truth, config.n_traces, rep, tag="spread")
        dist = SeedDistribution.uniform_by_size(config.s_max)
        test_seeds = [
            sample_seed(dist, truth.graph, substream(config.seed, "test-seed", rep, i))
            for i in range(config.n_test)
        ]
        true_spreads = [
            estimate_spread_mc(
                truth, s, config.eval_replicates, substream(config.seed, "ev", rep, i)
            ).mean
            for i, s in enumerate(test_seeds)
        ]
        for name, spec in candidates.items():
            fits = fit_all(train, truth.graph, spec, threads=config.threads)
            est_weights, _ = _fitted_weight_vector(truth.graph, fits)
            fitted = GltModel(truth.graph, est_weights, spec)
            predicted = [
                estimate_spread_mc(
                    fitted, s, config.eval_replicates, substream(config.seed, "ev", rep, i)
                ).mean
                for i, s in enumerate(test_seeds)
            ]
            rows.append(
                {
                    "rep": rep,
                    "candidate": name,
                    "rmae": rmae(true_spreads, predicted),
                    "mean_bias": float(
                        np.mean(np.asarray(predicted) - np.asarray(true_spreads))
                    ),
                    "n_test": len(test_seeds),
                }
            )
    return rows, _aggregate(rows, ["candidate"], "rmae")


EXPERIMENTS = {
    "rmae-vs-traces": run_rmae_vs_traces,
    "rmae-vs-n": run_rmae_vs_n,
    "ci-coverage": run_ci_coverage,
    "activation-prediction": run_activation_prediction,
    "im-comparison": run_im_comparison,
    "spread-comparison": run_spread_comparison,
}


def run_experiment(name: str, config: ExperimentConfig):
    if name not in EXPERIMENTS:
        raise ValueError(
            f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}"
        )
    return EXPERIMENTS[name](config)
