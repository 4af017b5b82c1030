"""Constrained maximum-likelihood fitting of parent weights.

Each child node is fitted independently by maximizing its log-likelihood
over the truncated polytope {theta >= eps, ||theta||_1 <= gamma}.  The
solver is projected gradient ascent with Barzilai-Borwein steps and Armijo
backtracking; the projection is the exact shifted simplex projection, so
feasibility of the returned point is exact rather than approximate.  The
binding optimality certificate is the norm of the gradient projected onto
the feasible cone at the solution.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .likelihood import NodeData, build_node_data, node_value_and_gradient
from .model import Trace, ZeroProbabilityError, default_gamma, validate_trace
from .thresholds import ThresholdSpec, make_beta, make_exponential_unit, make_uniform

__all__ = [
    "FitOptions",
    "NodeFitResult",
    "EstimationError",
    "fit_node",
    "fit_all",
    "fit_with_threshold_grid",
    "baseline_wc",
    "baseline_ptp",
    "project_truncated_simplex",
    "projected_gradient_norm",
]

_BOUNDARY_TOL = 1e-9


class EstimationError(ValueError):
    """Fitting could not be carried out."""


@dataclass(frozen=True)
class FitOptions:
    """Truncation constants and solver controls."""

    epsilon: float = 1e-6
    gamma: float = None  # default: h_v - epsilon for bounded supports, 10 otherwise
    tol: float = 1e-8
    max_iter: int = 2000
    grid: tuple = None  # threshold-parameter tuples for grid-search fitting

    def __post_init__(self):
        if self.epsilon <= 0:
            raise EstimationError(f"epsilon must be positive, got {self.epsilon}")
        if self.tol <= 0:
            raise EstimationError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise EstimationError("max_iter must be at least 1")

    def resolve_gamma(self, spec: ThresholdSpec, m: int) -> float:
        gamma = self.gamma if self.gamma is not None else default_gamma(spec, self.epsilon)
        if not m * self.epsilon < gamma:
            raise EstimationError(
                f"infeasible truncation: m*epsilon = {m * self.epsilon} !< "
                f"gamma = {gamma}"
            )
        if gamma > spec.support_bound:
            raise EstimationError(
                f"gamma = {gamma} exceeds the threshold support bound "
                f"{spec.support_bound}"
            )
        return gamma


@dataclass
class NodeFitResult:
    node: int
    parents: tuple
    weights: np.ndarray
    converged: bool
    loglik: float
    n_obs: int
    epsilon: float
    gamma: float
    spec: ThresholdSpec
    phi: dict = None  # chosen threshold parameters when grid search was used
    projected_gradient_norm: float = np.nan
    iterations: int = 0
    error: str = None
    covariance: object = None  # filled by the inference module

    @property
    def estimated(self) -> bool:
        return self.error is None

    @property
    def at_boundary(self) -> bool:
        """Whether the estimate sits on the truncation boundary.

        Normal-approximation inference is unreliable there and callers are
        expected to flag such nodes rather than report intervals silently.
        """
        if not self.estimated:
            return True
        return bool(
            np.any(self.weights <= self.epsilon + _BOUNDARY_TOL)
            or self.weights.sum() >= self.gamma - _BOUNDARY_TOL
        )


# -- feasible-set geometry ---------------------------------------------------


def _project_nonneg_l1ball(w: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum(w) <= radius}."""
    w = np.maximum(w, 0.0)
    s = w.sum()
    if s <= radius:
        return w
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, w.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(w - tau, 0.0)


def project_truncated_simplex(theta, epsilon: float, gamma: float) -> np.ndarray:
    """Exact Euclidean projection onto {theta >= epsilon, ||theta||_1 <= gamma}.

    The result satisfies both constraints exactly in floating point: lower
    bounds by clamping; the sum bound first by a multiplicative correction
    (the sort-based projection of very large inputs can overshoot by far
    more than an ulp), then by shaving ulps off the largest coordinate.
    """
    theta = np.asarray(theta, dtype=float)
    radius = gamma - theta.size * epsilon
    w = _project_nonneg_l1ball(theta - epsilon, radius)
    s = w.sum()
    if s > radius and s > 0.0:
        w *= radius / s
    out = np.maximum(w + epsilon, epsilon)
    for _ in range(1000):
        if out.sum() <= gamma:
            return out
        j = int(np.argmax(out))
        out[j] = np.nextafter(out[j], 0.0)
    raise EstimationError(
        f"projection failed to satisfy the sum bound: sum={out.sum()!r} > "
        f"gamma={gamma!r}"
    )


def projected_gradient_norm(theta, grad, epsilon: float, gamma: float) -> float:
    """Norm of the gradient projected onto the feasible cone at theta.

    At a constrained maximizer this is zero: ascent directions that leave
    the polytope are removed before taking the norm.
    """
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(grad, dtype=float)
    low = theta <= epsilon + 1e-12
    sum_active = theta.sum() >= gamma - max(1.0, gamma) * 1e-12
    if not sum_active:
        d = g.copy()
        d[low] = np.maximum(d[low], 0.0)
        return float(np.linalg.norm(d))
    # water-filling for the simplex-face multiplier
    free = ~low

    def excess(lam):
        d = g - lam
        d[low] = np.maximum(d[low], 0.0)
        return d.sum(), d

    total, d = excess(0.0)
    if total <= 0:
        return float(np.linalg.norm(d))
    lo, hi = 0.0, float(np.max(g)) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total, d = excess(mid)
        if abs(total) <= 1e-15 * max(1.0, float(np.abs(g).sum())):
            break
        if total > 0:
            lo = mid
        else:
            hi = mid
    _, d = excess(0.5 * (lo + hi))
    return float(np.linalg.norm(d))


# -- solver -------------------------------------------------------------------


def _newton_polish(fg, node_data, spec, theta, value, grad, epsilon, gamma, tol, max_polish=60):
    """Active-set Newton refinement driven by the projected-gradient norm.

    Near a solution, objective differences fall below floating-point noise
    while the first-order residual is still measurable, so steps are
    accepted when they shrink the projected gradient rather than when they
    raise the objective.  Feasibility stays exact through the projection.
    """
    from .likelihood import node_hessian

    pg = projected_gradient_norm(theta, grad, epsilon, gamma)
    it = 0
    while pg > tol and it < max_polish:
        it += 1
        low = theta <= epsilon + _BOUNDARY_TOL
        face = theta.sum() >= gamma - _BOUNDARY_TOL
        free = ~low
        k = int(free.sum())
        if k == 0:
            break
        hess = node_hessian(node_data, theta, spec)
        h_ff = hess[np.ix_(free, free)]
        g_f = grad[free]
        try:
            if face:
                kkt = np.zeros((k + 1, k + 1))
                kkt[:k, :k] = h_ff
                kkt[:k, k] = 1.0
                kkt[k, :k] = 1.0
                sol = np.linalg.solve(kkt, np.concatenate([-g_f, [0.0]]))
                d_f = sol[:k]
            else:
                d_f = np.linalg.solve(h_ff, -g_f)
        except np.linalg.LinAlgError:
            break
        direction = np.zeros_like(theta)
        direction[free] = d_f
        improved = False
        damp = 1.0
        for _ in range(25):
            cand = project_truncated_simplex(theta + damp * direction, epsilon, gamma)
            if np.any(cand != theta):
                cand_value, cand_grad = fg(cand)
                if np.isfinite(cand_value):
                    cand_pg = projected_gradient_norm(cand, cand_grad, epsilon, gamma)
                    if cand_pg < pg:
                        theta, value, grad, pg = cand, cand_value, cand_grad, cand_pg
                        improved = True
                        break
            damp *= 0.5
        if not improved:
            break
    return theta, value, grad, pg, it


class _SolverState:
    __slots__ = ("theta", "value", "grad", "pg", "step")

    def __init__(self, theta, value, grad, pg, step):
        self.theta = theta
        self.value = value
        self.grad = grad
        self.pg = pg
        self.step = step


def _bb_steps(fg, state, epsilon, gamma, tol, limit):
    """Projected gradient ascent with Barzilai-Borwein steps and Armijo
    backtracking; returns the number of accepted steps."""
    used = 0
    while state.pg > tol and used < limit:
        s = state.step
        theta, grad, value = state.theta, state.grad, state.value
        cand = project_truncated_simplex(theta + s * grad, epsilon, gamma)
        for _ in range(40):
            # escape the ulp regime where the projected point does not move
            if np.any(cand != theta):
                break
            s *= 4.0
            cand = project_truncated_simplex(theta + s * grad, epsilon, gamma)
        accepted = False
        for _ in range(60):
            move = cand - theta
            if not np.any(move):
                break
            cand_value, cand_grad = fg(cand)
            if np.isfinite(cand_value) and cand_value >= value + 1e-4 * float(
                grad @ move
            ):
                accepted = True
                break
            s *= 0.25
            cand = project_truncated_simplex(theta + s * grad, epsilon, gamma)
        if not accepted:
            return used
        used += 1
        d_theta = cand - theta
        d_grad = cand_grad - grad
        curv = float(d_theta @ d_grad)
        if curv < 0:
            state.step = min(max(float(d_theta @ d_theta) / -curv, 1e-12), 1e8)
        else:
            state.step = min(state.step * 4.0, 1e8)
        state.theta, state.value, state.grad = cand, cand_value, cand_grad
        state.pg = projected_gradient_norm(cand, cand_grad, epsilon, gamma)
    return used


def _maximize(node_data, spec, epsilon, gamma, tol, max_iter):
    def fg(theta):
        try:
            return node_value_and_gradient(node_data, theta, spec)
        except ZeroProbabilityError:
            return -np.inf, None

    m = len(node_data.parents)
    theta = np.full(m, epsilon + (gamma - m * epsilon) / (2.0 * m))
    theta = project_truncated_simplex(theta, epsilon, gamma)
    value, grad = fg(theta)
    if not np.isfinite(value):
        raise EstimationError(
            f"log-likelihood is degenerate at the interior starting point "
            f"for node {node_data.node}"
        )
    state = _SolverState(
        theta,
        value,
        grad,
        projected_gradient_norm(theta, grad, epsilon, gamma),
        1.0 / max(1.0, float(np.linalg.norm(grad))),
    )
    # a short first-order warmup, then alternate second-order refinement with
    # gradient bursts until the certificate holds or nothing moves
    it = _bb_steps(fg, state, epsilon, gamma, tol, min(25, max_iter))
    while state.pg > tol and it < max_iter:
        theta, value, grad, pg, polished = _newton_polish(
            fg, node_data, spec, state.theta, state.value, state.grad,
            epsilon, gamma, tol, max_polish=25,
        )
        state.theta, state.value, state.grad, state.pg = theta, value, grad, pg
        it += max(polished, 1)
        if state.pg <= tol:
            break
        stepped = _bb_steps(fg, state, epsilon, gamma, tol, 10)
        it += stepped
        if polished == 0 and stepped == 0:
            break  # numerically stuck; report the certificate as it stands
    return state.theta, state.value, state.pg, it


def fit_node(node_data: NodeData, spec: ThresholdSpec, options: FitOptions = None) -> NodeFitResult:
    """Maximize the node log-likelihood over the truncated simplex.

    Deterministic given its inputs.  Non-convergence within the iteration
    budget returns the best iterate with ``converged=False`` rather than
    raising.
    """
    options = options or FitOptions()
    if node_data.n_informative_rows == 0:
        raise EstimationError(f"node {node_data.node} has no informative rows")
    if not spec.log_concave_density:
        warnings.warn(
            f"threshold density for node {node_data.node} is not log-concave; "
            f"the fit is a local optimum only",
            stacklevel=2,
        )
    m = len(node_data.parents)
    gamma = options.resolve_gamma(spec, m)
    theta, value, pg, it = _maximize(
        node_data, spec, options.epsilon, gamma, options.tol, options.max_iter
    )
    return NodeFitResult(
        node=node_data.node,
        parents=node_data.parents,
        weights=theta,
        converged=bool(pg <= options.tol),
        loglik=float(value),
        n_obs=node_data.n_obs,
        epsilon=options.epsilon,
        gamma=gamma,
        spec=spec,
        projected_gradient_norm=float(pg),
        iterations=it,
    )


def fit_all(traces, graph: Graph, specs, options: FitOptions = None, threads: int = 1) -> dict:
    """Fit every child node that has informative data.

    ``specs`` is a single ThresholdSpec or a per-node sequence.  Per-node
    failures are recorded on the result (``error`` field), never raised, so
    a batch over many nodes always completes.  Fits are independent, so the
    thread count does not affect results.
    """
    options = options or FitOptions()
    traces = [validate_trace(graph, t) for t in traces]
    if isinstance(specs, ThresholdSpec):
        spec_of = lambda v: specs
    else:
        specs = tuple(specs)
        spec_of = lambda v: specs[v]

    def run(v):
        try:
            data = build_node_data(traces, graph, v, validate=False)
            if data.n_informative_rows == 0:
                raise EstimationError(f"node {v} has no informative traces")
            return fit_node(data, spec_of(v), options)
        except Exception as exc:  # noqa: BLE001 - per-node isolation is the contract
            return NodeFitResult(
                node=v,
                parents=graph.parent_list(v),
                weights=None,
                converged=False,
                loglik=np.nan,
                n_obs=0,
                epsilon=options.epsilon,
                gamma=np.nan,
                spec=spec_of(v),
                error=str(exc),
            )

    nodes = graph.child_nodes()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, nodes))
    else:
        results = [run(v) for v in nodes]
    return {r.node: r for r in results}


def _spec_from_phi(family: str, phi) -> ThresholdSpec:
    if family == "uniform":
        return make_uniform()
    if family == "exponential":
        return make_exponential_unit()
    if family == "beta":
        alpha, beta = (phi if isinstance(phi, (tuple, list)) else (1.0, phi))
        return make_beta(alpha, beta)
    raise EstimationError(f"unknown threshold family {family!r}")


def default_beta_grid(alpha: float = None) -> tuple:
    """The stock beta-parameter grid: alpha, beta in {1..10}.

    With ``alpha`` fixed, only beta varies (the single-parameter variant
    used when nodes are assumed easy to saturate).
    """
    if alpha is not None:
        return tuple((alpha, b) for b in range(1, 11))
    return tuple((a, b) for a in range(1, 11) for b in range(1, 11))


def fit_with_threshold_grid(node_data: NodeData, family: str, grid=None, options: FitOptions = None) -> NodeFitResult:
    """Fit under each grid value of the threshold parameters, keep the best.

    Ties in log-likelihood break toward the earliest grid position.  The
    grid falls back to ``options.grid``.  Raises only if every grid fit
    failed.
    """
    if grid is None and options is not None:
        grid = options.grid
    if grid is None:
        raise EstimationError("no threshold-parameter grid supplied")
    grid = tuple(grid)
    if not grid:
        raise EstimationError("threshold-parameter grid is empty")
    best = None
    failures = []
    for phi in grid:
        spec = _spec_from_phi(family, phi)
        if not spec.log_concave_density:
            failures.append(f"{phi}: not fit-safe (density not log-concave)")
            continue
        try:
            result = fit_node(node_data, spec, options)
        except Exception as exc:  # noqa: BLE001
            failures.append(f"{phi}: {exc}")
            continue
        if best is None or result.loglik > best.loglik:
            result.phi = {"family": family, "params": phi}
            best = result
    if best is None:
        raise EstimationError(
            "all grid fits failed: " + "; ".join(failures[:5])
        )
    return best


# -- heuristic baselines ------------------------------------------------------


def _cap_unit_sum(block: np.ndarray) -> np.ndarray:
    # normalized weights must satisfy sum <= 1 exactly; rounding can leave
    # the float sum an ulp above it (e.g. 7 * (1/7))
    while block.sum() > 1.0:
        j = int(np.argmax(block))
        block[j] = np.nextafter(block[j], 0.0)
    return block


def baseline_wc(graph: Graph) -> np.ndarray:
    """Weighted-cascade heuristic: each edge (u, v) gets 1 / indegree(v)."""
    weights = np.zeros(graph.edge_count())
    for v in range(graph.n):
        m = graph.in_degree(v)
        if m:
            weights[graph.child_slice(v)] = _cap_unit_sum(np.full(m, 1.0 / m))
    return weights


def baseline_ptp(traces, graph: Graph) -> np.ndarray:
    """Propagated-trace-proportion heuristic.

    Each edge's raw score is (#traces where u activates strictly before v) /
    (#traces where u activates); scores are renormalized so each fitted
    child's parent weights sum to 1, falling back to the uniform 1/indegree
    when all of a child's scores are zero.
    """
    traces = [t if isinstance(t, Trace) else Trace(t) for t in traces]
    times = []
    for trace in traces:
        at = {}
        for t, step in enumerate(trace.steps):
            for v in step:
                at[v] = t
        times.append(at)
    weights = np.zeros(graph.edge_count())
    for v in range(graph.n):
        parents = graph.parent_list(v)
        if not parents:
            continue
        raw = np.zeros(len(parents))
        for j, u in enumerate(parents):
            num = 0
            den = 0
            for at in times:
                tu = at.get(u)
                if tu is None:
                    continue
                den += 1
                tv = at.get(v)
                if tv is not None and tu < tv:
                    num += 1
            raw[j] = num / den if den else 0.0
        total = raw.sum()
        if total > 0:
            raw /= total
        else:
            raw[:] = 1.0 / len(parents)
        weights[graph.child_slice(v)] = _cap_unit_sum(raw)
    return weights
