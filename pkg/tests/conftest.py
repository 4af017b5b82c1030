"""Shared graphs, model builders, and independent oracles for the tests."""

import numpy as np
import pytest

from gltnet import (
    GltModel,
    Graph,
    build_graph,
    children_of_set,
    make_beta,
    make_exponential_unit,
    make_uniform,
)


@pytest.fixture
def path3():
    """0 -> 1 -> 2."""
    return build_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def star2():
    """Parents 0, 1 -> child 2."""
    return build_graph(3, [(0, 2), (1, 2)])


@pytest.fixture
def star3():
    """Parents 0, 1, 2 -> child 3."""
    return build_graph(4, [(0, 3), (1, 3), (2, 3)])


@pytest.fixture
def diamond():
    """0 -> {1, 2} -> 3."""
    return build_graph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


def random_simple_digraph(n, edge_prob, rng):
    edges = []
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < edge_prob:
                edges.append((u, v))
    return build_graph(n, edges)


def random_weights_within(graph, rng, scale=0.9):
    """Random per-child weights with ||theta_v||_1 <= scale."""
    weights = np.zeros(graph.edge_count())
    for v in range(graph.n):
        m = graph.in_degree(v)
        if m:
            raw = rng.random(m)
            total = raw.sum()
            cap = scale * rng.uniform(0.3, 1.0)
            weights[graph.child_slice(v)] = raw / total * cap
    return weights


def ic_trace_probability(graph, edge_prob, trace):
    """Direct independent-cascade trace probability (product form).

    Independent of the package's threshold machinery: multiplies per-step
    activation probabilities 1 - prod(1 - p) over newly active parents and
    the complementary factors for exposed nodes that stay inactive.
    """
    p = {e: edge_prob[i] for i, e in enumerate(graph.edges)}
    steps = trace.steps
    active = set(steps[0])
    prob = 1.0
    for t in range(1, len(steps) + 1):
        frontier = steps[t - 1]
        newly = steps[t] if t < len(steps) else frozenset()
        for v in sorted(children_of_set(graph, frontier) - active):
            stay = 1.0
            for u in frontier & graph.parents(v):
                stay *= 1.0 - p[(u, v)]
            p_act = 1.0 - stay
            prob *= p_act if v in newly else 1.0 - p_act
        active |= newly
    return prob


def naive_loglik(z_prev, z_curr, outcome, theta, cdf):
    """Plain-loop node log-likelihood; oracle for the vectorized paths."""
    from gltnet.likelihood import ROW_ACTIVATED, ROW_TERMINAL

    total = 0.0
    for zp, zc, kind in zip(z_prev, z_curr, outcome):
        x = float(np.dot(zc, theta))
        y = float(np.dot(zp, theta))
        if kind == ROW_ACTIVATED:
            total += np.log(cdf(x) - cdf(y))
        elif kind == ROW_TERMINAL:
            total += np.log(1.0 - cdf(x))
    return total


def all_specs():
    return [make_uniform(), make_exponential_unit(), make_beta(2, 2)]


def grid_values(eps, gamma, step):
    vals = [eps]
    v = step
    while v <= gamma + 1e-12:
        vals.append(min(v, gamma))
        v += step
    return np.array(vals)


def dense_grid_argmax(node_data, spec, eps, gamma, step=0.005):
    """Exhaustive grid maximizer of the node log-likelihood.

    Independent of the fitting path: aggregates rows with a plain Counter
    and evaluates log(F(x) - F(y)) directly from the cdf.  Handles 1 to 3
    parents; the 3-parent case is evaluated one outer-coordinate slab at a
    time to bound memory.
    """
    from collections import Counter

    from gltnet.likelihood import ROW_ACTIVATED, ROW_TERMINAL

    m = len(node_data.parents)
    acts = Counter()
    terms = Counter()
    for zp, zc, kind in zip(node_data.z_prev, node_data.z_curr, node_data.outcome):
        if kind == ROW_ACTIVATED:
            acts[(tuple(zp), tuple(zc))] += 1
        elif kind == ROW_TERMINAL:
            terms[tuple(zc)] += 1
    uniq = sorted({z for pair in acts for z in pair} | set(terms))
    zindex = {z: i for i, z in enumerate(uniq)}
    zmat = np.array(uniq, dtype=float).T  # (m, U)
    vals = grid_values(eps, gamma, step)

    def evaluate(points):
        b = points @ zmat
        cdf = spec.cdf(b)
        ll = np.zeros(points.shape[0])
        for (zp, zc), c in acts.items():
            ll += c * np.log(
                np.maximum(cdf[:, zindex[zc]] - cdf[:, zindex[zp]], 1e-300)
            )
        for zc, c in terms.items():
            ll += c * np.log(np.maximum(1.0 - cdf[:, zindex[zc]], 1e-300))
        return ll

    best_val = -np.inf
    best_point = None
    if m == 1:
        points = vals[:, None]
        ll = evaluate(points)
        i = int(np.argmax(ll))
        return points[i]
    if m == 2:
        a, b = np.meshgrid(vals, vals, indexing="ij")
        points = np.column_stack([a.ravel(), b.ravel()])
        points = points[points.sum(axis=1) <= gamma + 1e-12]
        ll = evaluate(points)
        i = int(np.argmax(ll))
        return points[i]
    assert m == 3
    a, b = np.meshgrid(vals, vals, indexing="ij")
    tail = np.column_stack([a.ravel(), b.ravel()])
    for v0 in vals:
        points = np.column_stack([np.full(tail.shape[0], v0), tail])
        points = points[points.sum(axis=1) <= gamma + 1e-12]
        if not points.shape[0]:
            continue
        ll = evaluate(points)
        i = int(np.argmax(ll))
        if ll[i] > best_val:
            best_val = ll[i]
            best_point = points[i]
    return best_point


def staggered_fit_graph():
    """Four nodes with in-degrees 1, 2, 3; seeds over {0, 1, 2} give both
    simultaneous and staggered parent-arrival patterns at node 3."""
    return build_graph(4, [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)])


def parent_subset_seed_distribution():
    from itertools import combinations

    from gltnet import SeedDistribution

    subsets = [frozenset(c) for r in (1, 2, 3) for c in combinations(range(3), r)]
    return SeedDistribution.explicit([(s, 1.0 / len(subsets)) for s in subsets])
