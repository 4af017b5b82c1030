from collections import Counter

import numpy as np
import pytest

from gltnet import (
    ActivationHistory,
    EnumerationCapError,
    GltModel,
    ModelError,
    Trace,
    ZeroProbabilityError,
    build_graph,
    enumerate_feasible_traces,
    exact_spread,
    from_ic,
    from_lt,
    make_beta,
    make_exponential_unit,
    make_uniform,
    simulate_trace,
    simulate_trace_sequential,
    trace_log_probability,
    transition_probability,
    validate_trace,
)
from gltnet.rng import substream

from conftest import ic_trace_probability, random_simple_digraph, random_weights_within


def test_trace_validation():
    with pytest.raises(ModelError):
        Trace([])
    with pytest.raises(ModelError):
        Trace([set()])
    with pytest.raises(ModelError):
        Trace([{0}, {0}])
    with pytest.raises(ModelError):
        Trace([{0}, set(), {1}])
    g = build_graph(3, [(0, 1), (1, 2)])
    with pytest.raises(ModelError):
        validate_trace(g, Trace([{0}, {2}]))  # 2 has no parent in {0}
    validate_trace(g, Trace([{0}, {1}, {2}]))


def test_transition_probability_single_parent_uniform():
    g = build_graph(2, [(0, 1)])
    model = from_lt(g, [0.3])
    assert transition_probability(model, ActivationHistory([{0}]), 1, 1) == pytest.approx(0.3)


def test_transition_probability_ic_mapping():
    g = build_graph(2, [(0, 1)])
    model = from_ic(g, [0.5])
    assert model.weights[0] == pytest.approx(-np.log(0.5))
    assert transition_probability(model, ActivationHistory([{0}]), 1, 1) == pytest.approx(0.5)


def test_transition_probability_staggered_parents():
    # u1 active at t=0 (b=0.2), u2 at t=1 (b=0.3): P(v in D_2) = 0.3/0.8
    # (edge 0 -> 1 makes the staggered history feasible)
    g = build_graph(3, [(0, 1), (0, 2), (1, 2)])
    model = from_lt(g, [0.5, 0.2, 0.3])
    hist = ActivationHistory([{0}, {1}])
    assert transition_probability(model, hist, 2, 2) == pytest.approx(0.375)
    # the classic linear-threshold ratio form
    assert transition_probability(model, hist, 2, 2) == pytest.approx(0.3 / (1 - 0.2))


def test_transition_probability_errors_and_zero():
    g = build_graph(3, [(0, 1), (1, 2)])
    model = from_lt(g, [0.5, 0.5])
    with pytest.raises(ModelError):
        transition_probability(model, ActivationHistory([{0}]), 0, 1)  # already active
    # no newly active parent: probability 0 by the model rules
    assert transition_probability(model, ActivationHistory([{0}, {1}]), 2, 1) == 0.0


def test_simulate_all_zero_weights():
    g = build_graph(4, [(0, 1), (1, 2), (2, 3)])
    model = from_lt(g, [0.0, 0.0, 0.0])
    rng = substream(1, "zero")
    for _ in range(50):
        assert simulate_trace(model, {0}, rng).steps == (frozenset({0}),)


def test_simulate_certain_activation():
    g = build_graph(2, [(0, 1)])
    model = from_lt(g, [1.0])  # F(1) = 1
    rng = substream(2, "sure")
    for _ in range(200):
        assert len(simulate_trace(model, {0}, rng)) == 2


def test_simulated_traces_are_feasible_and_progressive():
    g = random_simple_digraph(8, 0.3, substream(3, "g"))
    w = random_weights_within(g, substream(3, "w"))
    model = GltModel(g, w, make_beta(1, 2))
    rng = substream(3, "sim")
    for _ in range(300):
        trace = simulate_trace(model, {0, 3}, rng)
        validate_trace(g, trace)


def test_empirical_activation_matches_transition_probability():
    # 10^5 sims of the first step vs the transition probability, 3 sigma
    g = build_graph(3, [(0, 2), (1, 2)])
    model = from_lt(g, [0.25, 0.4])
    p = transition_probability(model, ActivationHistory([{0, 1}]), 2, 1)
    rng = substream(4, "mc")
    n = 100_000
    hits = 0
    for _ in range(n):
        t = simulate_trace(model, {0, 1}, rng)
        if len(t) > 1 and 2 in t.steps[1]:
            hits += 1
    se = np.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 3 * se


def test_trace_log_probability_star_examples():
    g = build_graph(3, [(0, 2), (1, 2)])
    model = from_lt(g, [0.2, 0.3])
    activated = Trace([{0, 1}, {2}])
    assert trace_log_probability(model, activated) == pytest.approx(np.log(0.5))
    not_activated = Trace([{0, 1}])
    assert trace_log_probability(model, not_activated) == pytest.approx(np.log(0.5))
    # external seed term is just added through
    assert trace_log_probability(model, activated, seed_log_prob=np.log(0.25)) == pytest.approx(
        np.log(0.5) + np.log(0.25)
    )


def test_trace_log_probability_zero_factor_is_structured():
    g = build_graph(2, [(0, 1)])
    model = from_lt(g, [0.0])
    with pytest.raises(ZeroProbabilityError) as err:
        trace_log_probability(model, Trace([{0}, {1}]))
    assert err.value.node == 1
    assert err.value.time == 1


def test_enumerate_path_traces():
    g = build_graph(3, [(0, 1), (1, 2)])
    traces = enumerate_feasible_traces(g, {0})
    assert traces == [Trace([{0}]), Trace([{0}, {1}]), Trace([{0}, {1}, {2}])]


def test_enumerate_matches_discrete_time_resolutions():
    # three users acting at distinct times on a fully connected triple: every
    # order-consistent discrete-time resolution is feasible and enumerable
    g = build_graph(3, [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)])
    resolutions = [
        Trace([{0, 1, 2}]),
        Trace([{0, 1}, {2}]),
        Trace([{0}, {1, 2}]),
        Trace([{0}, {1}, {2}]),
    ]
    for r in resolutions:
        validate_trace(g, r)
        assert r in enumerate_feasible_traces(g, r.seed)
    # on the one-directional chain the simultaneous-tail resolution is not
    # feasible: node 2 would need a newly active parent in {0}
    chain = build_graph(3, [(0, 1), (1, 2)])
    with pytest.raises(ModelError):
        validate_trace(chain, Trace([{0}, {1, 2}]))


def test_enumeration_cap():
    g = random_simple_digraph(7, 0.5, substream(5, "g"))
    with pytest.raises(EnumerationCapError) as err:
        enumerate_feasible_traces(g, {0, 1}, node_cap=3)
    assert err.value.state_count > 3


@pytest.mark.parametrize("spec_maker", [make_uniform, make_exponential_unit, lambda: make_beta(2, 2)])
def test_normalization_over_enumeration(spec_maker):
    rng = substream(6, spec_maker().family)
    g = random_simple_digraph(5, 0.35, rng)
    w = random_weights_within(g, rng)
    model = GltModel(g, w, spec_maker())
    traces = enumerate_feasible_traces(g, {0, 2})
    total = sum(np.exp(trace_log_probability(model, t)) for t in traces)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_exact_spread_path_example():
    g = build_graph(3, [(0, 1), (1, 2)])
    model = from_lt(g, [0.5, 0.4])
    assert exact_spread(model, {0}) == pytest.approx(1.7, abs=1e-12)


def test_exact_spread_single_edge():
    g = build_graph(2, [(0, 1)])
    model = from_lt(g, [0.3])
    assert exact_spread(model, {0}) == pytest.approx(1.3, abs=1e-12)


def test_exact_spread_matches_direct_enumeration():
    rng = substream(7, "spread")
    for rep in range(5):
        g = random_simple_digraph(6, 0.3, substream(7, "g", rep))
        w = random_weights_within(g, substream(7, "w", rep))
        model = GltModel(g, w, make_uniform())
        traces = enumerate_feasible_traces(g, {0, 1})
        direct = sum(
            np.exp(trace_log_probability(model, t)) * len(t.all_active())
            for t in traces
        )
        assert exact_spread(model, {0, 1}) == pytest.approx(direct, abs=1e-9)


def test_exact_spread_monotone_and_bounded():
    g = random_simple_digraph(6, 0.35, substream(8, "g"))
    w = random_weights_within(g, substream(8, "w"))
    model = GltModel(g, w, make_exponential_unit())
    for seed in [{0}, {0, 1}, {0, 1, 4}]:
        assert exact_spread(model, seed) >= len(seed) - 1e-12
    assert exact_spread(model, {0, 1}) >= exact_spread(model, {0}) - 1e-9


def test_ic_glt_distribution_equality():
    rng = substream(9, "ic")
    g = random_simple_digraph(5, 0.4, rng)
    p = rng.uniform(0.1, 0.9, size=g.edge_count())
    model = from_ic(g, p)
    for trace in enumerate_feasible_traces(g, {0, 2}):
        glt = np.exp(trace_log_probability(model, trace))
        direct = ic_trace_probability(g, p, trace)
        assert abs(glt - direct) < 1e-10


def test_from_ic_validation():
    g = build_graph(2, [(0, 1)])
    assert from_ic(g, [0.0]).weights[0] == 0.0
    with pytest.raises(ModelError):
        from_ic(g, [1.0])
    with pytest.raises(ModelError):
        from_lt(g, [1.2])


def test_model_validation():
    g = build_graph(3, [(0, 2), (1, 2)])
    with pytest.raises(ModelError):
        GltModel(g, [0.6, 0.6], make_uniform())  # in-degree 1.2 > h = 1
    GltModel(g, [0.6, 0.6], make_exponential_unit())  # unbounded support is fine
    with pytest.raises(ModelError):
        GltModel(g, [-0.1, 0.5], make_uniform())
    with pytest.raises(ModelError):
        GltModel(g, [0.1], make_uniform())


def _trace_frequencies(model, seed, n, simulator, rng):
    counts = Counter()
    for _ in range(n):
        counts[simulator(model, seed, rng)] += 1
    return counts


def test_simulation_matches_exact_probabilities():
    # empirical trace frequencies over 1e5 sims within 4 binomial sigma
    g = build_graph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    model = from_lt(g, [0.55, 0.45, 0.5, 0.4])
    probs = {
        t: np.exp(trace_log_probability(model, t))
        for t in enumerate_feasible_traces(g, {0})
    }
    n = 100_000
    counts = _trace_frequencies(model, {0}, n, simulate_trace, substream(10, "freq"))
    assert sum(counts.values()) == n
    for trace, p in probs.items():
        se = np.sqrt(p * (1 - p) / n)
        assert abs(counts[trace] / n - p) < 4 * se + 1e-12


def test_threshold_persistence_equivalence():
    # per-trace draws and the sequential kernel induce the same distribution
    g = build_graph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    model = GltModel(g, [0.5, 0.45, 0.5, 0.4], make_beta(1, 2))
    probs = {
        t: np.exp(trace_log_probability(model, t))
        for t in enumerate_feasible_traces(g, {0})
    }
    n = 40_000
    for simulator, label in [
        (simulate_trace, "persistence"),
        (simulate_trace_sequential, "sequential"),
    ]:
        counts = _trace_frequencies(model, {0}, n, simulator, substream(11, label))
        for trace, p in probs.items():
            se = np.sqrt(p * (1 - p) / n)
            assert abs(counts[trace] / n - p) < 5 * se + 1e-12, (label, trace)


def test_simulation_seed_errors():
    g = build_graph(2, [(0, 1)])
    model = from_lt(g, [0.5])
    with pytest.raises(ModelError):
        simulate_trace(model, set(), substream(12, "x"))
