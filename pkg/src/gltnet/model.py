"""The general linear threshold model: kernel, simulation, exact distributions.

A model is a graph, a nonnegative weight per edge (canonical order), and a
threshold distribution per node.  A node activates at step t >= 1 once the
summed weight of its active parents reaches its random threshold; thresholds
are drawn once per node per realization (threshold persistence), which makes
the final active set a deterministic function of the threshold vector.

Exact quantities (per-trace probabilities, expected spread) are available by
exhaustive enumeration of feasible traces; the spread enumeration is
memoized on (active set, frontier) states, which computes the identical sum
while sharing work across seed sets.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .graph import Graph, children_of_set
from .rng import as_generator
from .thresholds import ThresholdSpec

__all__ = [
    "GltModel",
    "Trace",
    "ActivationHistory",
    "ModelError",
    "ZeroProbabilityError",
    "EnumerationCapError",
    "validate_trace",
    "transition_probability",
    "simulate_trace",
    "simulate_trace_sequential",
    "trace_log_probability",
    "enumerate_feasible_traces",
    "exact_spread",
    "ExactSpreadOracle",
    "from_ic",
    "from_lt",
]

DEFAULT_EPSILON = 1e-6
DEFAULT_GAMMA_UNBOUNDED = 10.0


class ModelError(ValueError):
    """Invalid model construction or argument."""


class ZeroProbabilityError(ValueError):
    """A trace factor is (numerically) zero: data and model are inconsistent."""

    def __init__(self, node, time, detail=""):
        self.node = node
        self.time = time
        msg = f"zero-probability factor at node {node}, time {time}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class EnumerationCapError(RuntimeError):
    """Exhaustive enumeration exceeded its state budget."""

    def __init__(self, state_count, cap):
        self.state_count = state_count
        self.cap = cap
        super().__init__(f"enumeration exceeded cap: {state_count} states > {cap}")


def default_gamma(spec: ThresholdSpec, epsilon: float = DEFAULT_EPSILON) -> float:
    """Truncation radius: h - epsilon for bounded supports, 10 otherwise."""
    h = spec.support_bound
    return h - epsilon if np.isfinite(h) else DEFAULT_GAMMA_UNBOUNDED


class Trace:
    """A propagation trace: ordered disjoint sets of newly activated nodes."""

    __slots__ = ("steps",)

    def __init__(self, steps):
        steps = tuple(frozenset(int(v) for v in s) for s in steps)
        if not steps or not steps[0]:
            raise ModelError("a trace must start with a nonempty seed set")
        seen = set()
        for t, d in enumerate(steps):
            if t > 0 and not d:
                raise ModelError(f"empty step at time {t}")
            if seen & d:
                raise ModelError(f"step {t} re-activates {sorted(seen & d)}")
            seen |= d
        self.steps = steps

    @property
    def seed(self) -> frozenset:
        return self.steps[0]

    @property
    def horizon(self) -> int:
        return len(self.steps) - 1

    def all_active(self) -> frozenset:
        return frozenset().union(*self.steps)

    def __len__(self):
        return len(self.steps)

    def __eq__(self, other):
        return isinstance(other, Trace) and self.steps == other.steps

    def __hash__(self):
        return hash(self.steps)

    def __repr__(self):
        body = ", ".join("{" + ",".join(map(str, sorted(s))) + "}" for s in self.steps)
        return f"Trace({body})"


class ActivationHistory:
    """A trace prefix (D_0, ..., D_{t-1}) with cumulative active sets."""

    __slots__ = ("steps", "_cumulative")

    def __init__(self, steps):
        if isinstance(steps, Trace):
            steps = steps.steps
        self.steps = tuple(frozenset(int(v) for v in s) for s in steps)
        cum = []
        acc = set()
        for d in self.steps:
            acc |= d
            cum.append(frozenset(acc))
        self._cumulative = tuple(cum)

    def newly_active(self, t: int) -> frozenset:
        return self.steps[t]

    def active(self, t: int) -> frozenset:
        """Cumulative active set A_t, with A_{-1} = the empty set."""
        if t < 0:
            return frozenset()
        return self._cumulative[t]

    def __len__(self):
        return len(self.steps)


def validate_trace(graph: Graph, trace) -> Trace:
    """Check Definition-1 feasibility of a trace on a graph."""
    if not isinstance(trace, Trace):
        trace = Trace(trace)
    active = set()
    for t, d in enumerate(trace.steps):
        for v in d:
            graph._check(v)
        if t > 0:
            prev = trace.steps[t - 1]
            for v in d:
                if v in active:
                    raise ModelError(f"node {v} re-activated at time {t}")
                if not (graph.parents(v) & prev):
                    raise ModelError(
                        f"node {v} activates at time {t} without a newly "
                        f"activated parent"
                    )
        active |= d
    return trace


class GltModel:
    """Graph + per-edge weights + per-node threshold specs.

    ``thresholds`` may be a single spec (shared by every node) or a sequence
    of length ``graph.n``.  Weights are aligned to the canonical edge order;
    for every child the weighted in-degree must not exceed the support bound
    of its threshold distribution.
    """

    __slots__ = ("graph", "weights", "thresholds", "epsilon", "gamma")

    def __init__(self, graph, weights, thresholds, epsilon=None, gamma=None):
        self.graph = graph
        w = np.asarray(weights, dtype=float)
        if w.shape != (graph.edge_count(),):
            raise ModelError(
                f"expected {graph.edge_count()} weights, got shape {w.shape}"
            )
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ModelError("edge weights must be finite and nonnegative")
        if isinstance(thresholds, ThresholdSpec):
            specs = (thresholds,) * graph.n
        else:
            specs = tuple(thresholds)
            if len(specs) != graph.n:
                raise ModelError(
                    f"expected {graph.n} threshold specs, got {len(specs)}"
                )
        for v in range(graph.n):
            total = w[graph.child_slice(v)].sum()
            if total > specs[v].support_bound:
                raise ModelError(
                    f"weighted in-degree {total} of node {v} exceeds the "
                    f"threshold support bound {specs[v].support_bound}"
                )
        self.graph = graph
        self.weights = w
        self.weights.flags.writeable = False
        self.thresholds = specs
        self.epsilon = epsilon
        self.gamma = gamma

    def spec(self, v: int) -> ThresholdSpec:
        return self.thresholds[v]

    def theta(self, v: int) -> np.ndarray:
        """Parent weights of v, ordered by ascending parent index."""
        return self.weights[self.graph.child_slice(v)]

    def influence(self, v: int, nodes) -> float:
        """Summed weight B_v(S) that v receives from the node set S."""
        theta = self.theta(v)
        total = 0.0
        for j, u in enumerate(self.graph.parent_list(v)):
            if u in nodes:
                total += theta[j]
        return total

    def is_truncated_feasible(self, epsilon=DEFAULT_EPSILON, gamma=None) -> bool:
        """Whether every child's weights lie in {theta >= eps, sum <= gamma}."""
        for v in self.graph.child_nodes():
            g = default_gamma(self.spec(v), epsilon) if gamma is None else gamma
            theta = self.theta(v)
            if np.any(theta < epsilon) or theta.sum() > g:
                return False
        return True

    def with_weights(self, weights) -> "GltModel":
        return GltModel(self.graph, weights, self.thresholds, self.epsilon, self.gamma)

    def __repr__(self):
        return f"GltModel(n={self.graph.n}, m={self.graph.edge_count()})"


def from_lt(graph: Graph, weights) -> GltModel:
    """Linear threshold model: uniform thresholds, in-degree sums at most 1."""
    from .thresholds import make_uniform

    w = np.asarray(weights, dtype=float)
    model = GltModel(graph, w, make_uniform())
    return model


def from_ic(graph: Graph, edge_probabilities) -> GltModel:
    """Independent cascade model embedded as unit-exponential thresholds.

    Maps each propagation probability p to the weight -log(1 - p); p = 1 is
    rejected (infinite weight).
    """
    from .thresholds import make_exponential_unit

    p = np.asarray(edge_probabilities, dtype=float)
    if p.shape != (graph.edge_count(),):
        raise ModelError(
            f"expected {graph.edge_count()} probabilities, got shape {p.shape}"
        )
    if np.any((p < 0) | (p >= 1)):
        raise ModelError("IC probabilities must lie in [0, 1)")
    return GltModel(graph, -np.log1p(-p), make_exponential_unit())


# -- transition kernel and simulation ---------------------------------------


def transition_probability(model: GltModel, history, v: int, t: int) -> float:
    """Probability that v newly activates at time t given the history.

    The history must cover steps 0..t-1.  Returns 0 when v has no newly
    activated parent at t-1 (the model forbids activation then).
    """
    if not isinstance(history, ActivationHistory):
        history = ActivationHistory(history)
    if t < 1 or t > len(history):
        raise ModelError(f"time {t} outside the history (length {len(history)})")
    validate_trace(model.graph, history.steps)
    a_prev = history.active(t - 1)
    if v in a_prev:
        raise ModelError(f"node {v} is already active at time {t - 1}")
    if not (model.graph.parents(v) & history.newly_active(t - 1)):
        return 0.0
    spec = model.spec(v)
    x = model.influence(v, a_prev)
    y = model.influence(v, history.active(t - 2))
    denom = spec.sf(y)
    if denom <= 0.0:
        raise ZeroProbabilityError(v, t, "conditioning event has probability 0")
    return min(1.0, spec.interval_prob(x, y) / denom)


def _uniform_draws(rng, n):
    # U(0, 1]: node v activates once F_v(B_v) >= V_v, so an exact-zero draw
    # cannot spuriously activate a node with F_v(B_v) = 0
    return 1.0 - rng.random(n)


def _closure_steps(model, seed, draws):
    """Deterministic propagation given per-node uniform draws; yields steps."""
    graph = model.graph
    active = set(seed)
    frontier = set(seed)
    yield frozenset(frontier)
    while frontier:
        newly = set()
        for v in sorted(children_of_set(graph, frontier) - active):
            b = model.influence(v, active)
            if model.spec(v).cdf(b) >= draws[v]:
                newly.add(v)
        if not newly:
            return
        active |= newly
        frontier = newly
        yield frozenset(newly)


def simulate_trace(model: GltModel, seed_set, rng) -> Trace:
    """Simulate one trace, drawing each node's threshold once (persistence)."""
    seed = {int(v) for v in seed_set}
    if not seed:
        raise ModelError("seed set must be nonempty")
    for v in seed:
        model.graph._check(v)
    rng = as_generator(rng)
    draws = _uniform_draws(rng, model.graph.n)
    return Trace(list(_closure_steps(model, seed, draws)))


def simulate_trace_sequential(model: GltModel, seed_set, rng) -> Trace:
    """Simulate by sampling the conditional kernel step by step.

    Distributionally identical to :func:`simulate_trace`; kept as an
    independent cross-check of the persistence mechanism.
    """
    seed = {int(v) for v in seed_set}
    if not seed:
        raise ModelError("seed set must be nonempty")
    rng = as_generator(rng)
    graph = model.graph
    steps = [frozenset(seed)]
    active = set(seed)
    prev_active = set()
    frontier = set(seed)
    while True:
        cand = sorted(children_of_set(graph, frontier) - active)
        if not cand:
            break
        u = rng.random(len(cand))
        newly = set()
        for i, v in enumerate(cand):
            spec = model.spec(v)
            x = model.influence(v, active)
            y = model.influence(v, prev_active)
            denom = spec.sf(y)
            p = 0.0 if denom <= 0.0 else min(1.0, spec.interval_prob(x, y) / denom)
            if u[i] < p:
                newly.add(v)
        if not newly:
            break
        steps.append(frozenset(newly))
        prev_active = set(active)
        active |= newly
        frontier = newly
    return Trace(steps)


def trace_log_probability(model: GltModel, trace, seed_log_prob: float = 0.0) -> float:
    """Log-probability of a feasible trace (seed term supplied externally).

    Raises :class:`ZeroProbabilityError` naming the offending node and time
    when a factor is (numerically) zero.
    """
    trace = validate_trace(model.graph, trace)
    hist = ActivationHistory(trace)
    T = trace.horizon
    total = float(seed_log_prob)
    a_final = hist.active(T)
    for v in sorted(children_of_set(model.graph, a_final)):
        spec = model.spec(v)
        s = spec.sf(model.influence(v, a_final))
        if s <= spec.interval_zero_tol():
            raise ZeroProbabilityError(v, T, "survival factor vanishes")
        total += spec.log_sf(model.influence(v, a_final))
    for t in range(1, T + 1):
        a_prev = hist.active(t - 1)
        a_prev2 = hist.active(t - 2)
        for v in sorted(trace.steps[t]):
            spec = model.spec(v)
            x = model.influence(v, a_prev)
            y = model.influence(v, a_prev2)
            if spec.interval_prob(x, y) <= spec.interval_zero_tol():
                raise ZeroProbabilityError(v, t, "activation factor vanishes")
            total += spec.log_interval_prob(x, y)
    return total


# -- exhaustive enumeration --------------------------------------------------


def enumerate_feasible_traces(graph: Graph, seed_set, node_cap: int = 10**6) -> list:
    """All feasible traces starting at the given seed, by recursive expansion.

    Every prefix counts toward the state budget; exceeding ``node_cap``
    raises :class:`EnumerationCapError` with the state count reached.
    """
    seed = frozenset(int(v) for v in seed_set)
    if not seed:
        raise ModelError("seed set must be nonempty")
    for v in seed:
        graph._check(v)
    out = []
    states = 0

    def expand(steps, active, frontier):
        nonlocal states
        states += 1
        if states > node_cap:
            raise EnumerationCapError(states, node_cap)
        out.append(Trace(steps))
        cand = sorted(children_of_set(graph, frontier) - active)
        for r in range(1, len(cand) + 1):
            for combo in combinations(cand, r):
                newly = frozenset(combo)
                expand(steps + [newly], active | newly, newly)

    expand([seed], set(seed), seed)
    return out


class ExactSpreadOracle:
    """Exact expected spread by enumeration, memoized on (active, frontier).

    The memoized recursion evaluates the same sum over feasible traces as
    direct enumeration, but shares continuation values across seed sets, so
    evaluating the spread for many seeds of one model costs little more than
    one full enumeration.  Node sets are represented as bitmasks; intended
    for graphs of up to ~20 reachable nodes.
    """

    def __init__(self, model: GltModel, node_cap: int = 10**6):
        self.model = model
        self.node_cap = node_cap
        graph = model.graph
        self._child_mask = [0] * graph.n
        self._parent_mask = [0] * graph.n
        self._parent_bits = []
        self._theta = []
        for v in range(graph.n):
            for u in graph.parent_list(v):
                self._parent_mask[v] |= 1 << u
            for c in graph.children(v):
                self._child_mask[v] |= 1 << c
            self._parent_bits.append(tuple(graph.parent_list(v)))
            self._theta.append(model.theta(v))
        self._cdf_cache = {}
        self._value = {}

    def _cdf(self, v, active_mask):
        sub = active_mask & self._parent_mask[v]
        key = (v, sub)
        got = self._cdf_cache.get(key)
        if got is None:
            b = 0.0
            theta = self._theta[v]
            for j, u in enumerate(self._parent_bits[v]):
                if sub >> u & 1:
                    b += theta[j]
            got = float(self.model.spec(v).cdf(b))
            self._cdf_cache[key] = got
        return got

    def spread(self, seed_set) -> float:
        mask = 0
        for v in seed_set:
            self.model.graph._check(int(v))
            mask |= 1 << int(v)
        if mask == 0:
            return 0.0
        return self._val(mask, mask)

    def _val(self, active, frontier):
        key = (active, frontier)
        got = self._value.get(key)
        if got is not None:
            return got
        if len(self._value) >= self.node_cap:
            raise EnumerationCapError(len(self._value) + 1, self.node_cap)
        cand_mask = 0
        v = frontier
        while v:
            low = v & -v
            cand_mask |= self._child_mask[low.bit_length() - 1]
            v ^= low
        cand_mask &= ~active
        certain = 0
        random_nodes = []
        prev_active = active & ~frontier
        c = cand_mask
        while c:
            low = c & -c
            node = low.bit_length() - 1
            c ^= low
            f_now = self._cdf(node, active)
            f_prev = self._cdf(node, prev_active)
            denom = 1.0 - f_prev
            if denom <= 0.0:
                p = 1.0  # conditioning event impossible; branch carries 0 mass
            else:
                p = min(1.0, max(0.0, (f_now - f_prev) / denom))
            if p >= 1.0:
                certain |= low
            elif p > 0.0:
                random_nodes.append((low, p))
        total = 0.0
        k = len(random_nodes)
        for sub in range(1 << k):
            prob = 1.0
            chosen = certain
            for i in range(k):
                bit, p = random_nodes[i]
                if sub >> i & 1:
                    prob *= p
                    chosen |= bit
                else:
                    prob *= 1.0 - p
            if prob == 0.0:
                continue
            if chosen == 0:
                total += prob * active.bit_count()
            else:
                total += prob * self._val(active | chosen, chosen)
        self._value[key] = total
        return total


def exact_spread(model: GltModel, seed_set, node_cap: int = 10**6) -> float:
    """Expected number of eventually active nodes, computed exactly."""
    return ExactSpreadOracle(model, node_cap=node_cap).spread(seed_set)
