"""Per-node sufficient data and log-likelihood evaluation.

For a child node v, every (trace, time) pair at which v gains a newly active
parent contributes a row: the cumulative 0/1 parent indicators before and
after the gain, plus an outcome.  Intermediate non-activation rows are kept
for bookkeeping (they determine the sample size N_v) but marked FOLDED: the
trace likelihood telescopes them away, so only the activation row (if any)
or the final-exposure row of each trace carries a likelihood term:

    activated-now row:         log[F(theta clast) - F(theta cprev)]
    not-activated-terminal:    log[1 - F(theta clast)]

Gradients and Hessians are analytic, using the threshold density and its
derivative.  Rows are aggregated by distinct indicator patterns before
evaluation, which makes the cost per likelihood call independent of the
number of traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .model import Trace, ZeroProbabilityError, validate_trace

__all__ = [
    "ROW_TERMINAL",
    "ROW_ACTIVATED",
    "ROW_FOLDED",
    "NodeData",
    "PseudoTrace",
    "build_node_data",
    "build_pseudo_node_data",
    "node_log_likelihood",
    "node_value_and_gradient",
    "node_gradient",
    "node_hessian",
]

ROW_TERMINAL = 0
ROW_ACTIVATED = 1
ROW_FOLDED = -1


@dataclass
class NodeData:
    """Observation rows for one child node.

    ``n_obs`` counts every row (including folded ones): it is the number of
    times the node acquired a newly active parent across all traces, the
    effective sample size of the node's fit.
    """

    node: int
    parents: tuple
    z_prev: np.ndarray  # (rows, m) uint8, cumulative parent indicator before
    z_curr: np.ndarray  # (rows, m) uint8, cumulative parent indicator after
    outcome: np.ndarray  # (rows,) int8
    trace_index: np.ndarray  # (rows,) int64
    _packed: dict = field(default_factory=dict, repr=False)

    @property
    def n_obs(self) -> int:
        return int(self.outcome.shape[0])

    @property
    def n_traces(self) -> int:
        return int(np.unique(self.trace_index).size) if self.n_obs else 0

    @property
    def n_informative_rows(self) -> int:
        return int(np.sum(self.outcome != ROW_FOLDED))

    def compressed(self):
        """Distinct (z_prev, z_curr) patterns with counts, per outcome kind."""
        if not self._packed:
            act = self.outcome == ROW_ACTIVATED
            term = self.outcome == ROW_TERMINAL

            def _group(mask, both):
                rows = np.hstack(
                    [self.z_prev[mask], self.z_curr[mask]]
                    if both
                    else [self.z_curr[mask]]
                )
                if rows.shape[0] == 0:
                    m = len(self.parents)
                    width = 2 * m if both else m
                    return np.zeros((0, width), dtype=np.uint8), np.zeros(0)
                uniq, counts = np.unique(rows, axis=0, return_counts=True)
                return uniq, counts.astype(float)

            uniq_a, w_a = _group(act, both=True)
            m = len(self.parents)
            uniq_t, w_t = _group(term, both=False)
            self._packed = {
                "zp_act": uniq_a[:, :m].astype(float),
                "zc_act": uniq_a[:, m:].astype(float),
                "w_act": w_a,
                "zc_term": uniq_t.astype(float),
                "w_term": w_t,
            }
        p = self._packed
        return p["zp_act"], p["zc_act"], p["w_act"], p["zc_term"], p["w_term"]


@dataclass(frozen=True)
class PseudoTrace:
    """A partial observation: did the active-parent set A_v activate v?"""

    node: int
    active_parents: frozenset
    y: int

    def __post_init__(self):
        object.__setattr__(
            self, "active_parents", frozenset(int(u) for u in self.active_parents)
        )
        if not self.active_parents:
            raise ValueError("a pseudo-trace with no active parents carries no information")
        if self.y not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {self.y}")


def build_node_data(traces, graph: Graph, v: int, validate: bool = True) -> NodeData:
    """Extract node v's rows from full traces.

    Seeded appearances contribute nothing; traces where v never has an
    active parent contribute nothing.  Rows stop at the last time v is
    inactive.
    """
    parents = graph.parent_list(v)
    if not parents:
        raise ValueError(f"node {v} has no parents")
    index = {u: j for j, u in enumerate(parents)}
    m = len(parents)
    zp_rows, zc_rows, outcomes, trace_ids = [], [], [], []
    for n, trace in enumerate(traces):
        if validate:
            trace = validate_trace(graph, trace)
        elif not isinstance(trace, Trace):
            trace = Trace(trace)
        if v in trace.steps[0]:
            continue
        activated_at = None
        for t in range(1, len(trace.steps)):
            if v in trace.steps[t]:
                activated_at = t
                break
        last_inactive = (activated_at - 1) if activated_at else trace.horizon
        cum = np.zeros(m, dtype=np.uint8)
        gains = []  # cumulative indicator after each gain time <= last_inactive
        for t in range(last_inactive + 1):
            hit = False
            for u in trace.steps[t]:
                j = index.get(u)
                if j is not None:
                    cum[j] = 1
                    hit = True
            if hit:
                gains.append(cum.copy())
        if not gains:
            continue
        prev = np.zeros(m, dtype=np.uint8)
        for i, z in enumerate(gains):
            last = i == len(gains) - 1
            if last:
                kind = ROW_ACTIVATED if activated_at else ROW_TERMINAL
            else:
                kind = ROW_FOLDED
            zp_rows.append(prev)
            zc_rows.append(z)
            outcomes.append(kind)
            trace_ids.append(n)
            prev = z
    return NodeData(
        node=v,
        parents=parents,
        z_prev=np.array(zp_rows, dtype=np.uint8).reshape(len(outcomes), m),
        z_curr=np.array(zc_rows, dtype=np.uint8).reshape(len(outcomes), m),
        outcome=np.array(outcomes, dtype=np.int8),
        trace_index=np.array(trace_ids, dtype=np.int64),
    )


def build_pseudo_node_data(pseudo_traces, v: int, graph: Graph = None, parents=None) -> NodeData:
    """Node data from pseudo-traces (v, A_v, y); z_prev is identically zero."""
    if parents is None:
        if graph is None:
            raise ValueError("supply the graph or an explicit parent order")
        parents = graph.parent_list(v)
    parents = tuple(parents)
    index = {u: j for j, u in enumerate(parents)}
    m = len(parents)
    zp_rows, zc_rows, outcomes, trace_ids = [], [], [], []
    for n, pt in enumerate(pseudo_traces):
        if pt.node != v:
            raise ValueError(f"pseudo-trace references node {pt.node}, expected {v}")
        z = np.zeros(m, dtype=np.uint8)
        for u in pt.active_parents:
            j = index.get(u)
            if j is None:
                raise ValueError(f"parent {u} is not a parent of node {v}")
            z[j] = 1
        zp_rows.append(np.zeros(m, dtype=np.uint8))
        zc_rows.append(z)
        outcomes.append(ROW_ACTIVATED if pt.y else ROW_TERMINAL)
        trace_ids.append(n)
    return NodeData(
        node=v,
        parents=parents,
        z_prev=np.array(zp_rows, dtype=np.uint8).reshape(len(outcomes), m),
        z_curr=np.array(zc_rows, dtype=np.uint8).reshape(len(outcomes), m),
        outcome=np.array(outcomes, dtype=np.int8),
        trace_index=np.array(trace_ids, dtype=np.int64),
    )


def _zero_on_empty(values, patterns):
    # an all-zero indicator row contributes nothing regardless of the density
    # value at 0, which may be infinite (e.g. beta with alpha < 1)
    empty = patterns.sum(axis=1) == 0
    if np.any(empty):
        values = np.where(empty, 0.0, values)
    return values


def _interval_terms(node_data, theta, spec):
    zp_a, zc_a, w_a, zc_t, w_t = node_data.compressed()
    theta = np.asarray(theta, dtype=float)
    x_a = zc_a @ theta
    y_a = zp_a @ theta
    x_t = zc_t @ theta
    diffs = spec.interval_prob(x_a, y_a)
    surv = spec.sf(x_t)
    tol = spec.interval_zero_tol()
    if np.any(np.asarray(diffs) <= tol):
        raise ZeroProbabilityError(
            node_data.node, None, "activation factor vanished at this theta"
        )
    if np.any(np.asarray(surv) <= tol):
        raise ZeroProbabilityError(
            node_data.node, None, "survival factor vanished at this theta"
        )
    return (zp_a, zc_a, w_a, zc_t, w_t, x_a, y_a, x_t, np.asarray(diffs), np.asarray(surv))


def node_log_likelihood(node_data: NodeData, theta, spec) -> float:
    """Log-likelihood of node_data at parent weights theta."""
    zp_a, zc_a, w_a, zc_t, w_t, x_a, y_a, x_t, diffs, surv = _interval_terms(
        node_data, theta, spec
    )
    theta = np.asarray(theta, dtype=float)
    total = 0.0
    if w_a.size:
        total += float(w_a @ spec.log_interval_prob(x_a, y_a))
    if w_t.size:
        total += float(w_t @ spec.log_sf(x_t))
    return total


def node_value_and_gradient(node_data: NodeData, theta, spec):
    """Log-likelihood and its analytic gradient, in one pass."""
    zp_a, zc_a, w_a, zc_t, w_t, x_a, y_a, x_t, diffs, surv = _interval_terms(
        node_data, theta, spec
    )
    m = len(node_data.parents)
    value = 0.0
    grad = np.zeros(m)
    if w_a.size:
        value += float(w_a @ spec.log_interval_prob(x_a, y_a))
        fx = spec.density(x_a)
        fy = _zero_on_empty(spec.density(y_a), zp_a)
        grad += zc_a.T @ (w_a * fx / diffs) - zp_a.T @ (w_a * fy / diffs)
    if w_t.size:
        value += float(w_t @ spec.log_sf(x_t))
        grad -= zc_t.T @ (w_t * spec.density(x_t) / surv)
    return value, grad


def node_gradient(node_data: NodeData, theta, spec) -> np.ndarray:
    return node_value_and_gradient(node_data, theta, spec)[1]


def node_hessian(node_data: NodeData, theta, spec) -> np.ndarray:
    """Analytic Hessian of the node log-likelihood (exactly symmetric)."""
    zp_a, zc_a, w_a, zc_t, w_t, x_a, y_a, x_t, diffs, surv = _interval_terms(
        node_data, theta, spec
    )
    m = len(node_data.parents)
    hess = np.zeros((m, m))
    if w_a.size:
        fx = spec.density(x_a)
        fy = _zero_on_empty(spec.density(y_a), zp_a)
        dfx = spec.density_derivative(x_a)
        dfy = _zero_on_empty(spec.density_derivative(y_a), zp_a)
        coef_cc = w_a * (dfx / diffs - (fx / diffs) ** 2)
        coef_pp = w_a * (-dfy / diffs - (fy / diffs) ** 2)
        coef_cp = w_a * fx * fy / diffs**2
        hess += (zc_a * coef_cc[:, None]).T @ zc_a
        hess += (zp_a * coef_pp[:, None]).T @ zp_a
        cross = (zc_a * coef_cp[:, None]).T @ zp_a
        hess += cross + cross.T
    if w_t.size:
        fx = spec.density(x_t)
        dfx = spec.density_derivative(x_t)
        coef = w_t * (-dfx / surv - (fx / surv) ** 2)
        hess += (zc_t * coef[:, None]).T @ zc_t
    return hess
