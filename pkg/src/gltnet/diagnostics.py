"""Structural diagnostics: identifiability, submodularity, triggering embedding.

Identifiability of a node's parent weights is decided by collecting every
parent subset that can appear as a newly-activated set while the node is
still inactive (forward search over feasible trace prefixes from the seed
support) and checking, with exact integer arithmetic, whether the 0/1
matrix of achievable subsets has full rank.

Submodularity and monotonicity of the influence function are checked
exhaustively against exact spreads on small graphs.  The triggering-set
embedding solver reconstructs, for an in-degree-3 star, the unique signed
measure a triggering model would need, certifying non-embeddability when
any of its entries is negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import Graph, SeedDistribution
from .model import ExactSpreadOracle, GltModel

__all__ = [
    "NodeIdentifiability",
    "IdentifiabilityReport",
    "SubmodularityViolation",
    "MonotonicityViolation",
    "TriggeringEmbedding",
    "check_identifiability",
    "check_submodularity_exact",
    "check_monotonicity_exact",
    "solve_triggering_embedding",
]


@dataclass
class NodeIdentifiability:
    node: int
    verdict: str  # "identifiable" | "not-identifiable" | "unknown-cap-exceeded"
    parents: tuple
    achievable: tuple  # achievable parent subsets, as frozensets
    rank: int = None
    rank_deficiency: int = None
    witnesses: tuple = None  # subsets whose indicator matrix is invertible
    matrix: tuple = None  # rows: parents, columns: witnesses
    determinant: int = None


@dataclass
class IdentifiabilityReport:
    nodes: dict  # node -> NodeIdentifiability

    @property
    def identifiable(self) -> bool:
        return all(r.verdict == "identifiable" for r in self.nodes.values())

    def verdict(self, v: int) -> str:
        return self.nodes[v].verdict


def _exact_rank_and_pivots(columns, m):
    """Rank over the rationals of an m x k 0/1 matrix given as columns.

    Returns (rank, pivot column indices); exact, no floating point.
    """
    reduced = []  # list of (pivot_row, vector) with vector[pivot_row] == 1
    pivots = []
    for j, col in enumerate(columns):
        vec = [Fraction(x) for x in col]
        for pivot_row, basis in reduced:
            if vec[pivot_row]:
                factor = vec[pivot_row]
                vec = [a - factor * b for a, b in zip(vec, basis)]
        lead = next((i for i, a in enumerate(vec) if a), None)
        if lead is None:
            continue
        inv = vec[lead]
        vec = [a / inv for a in vec]
        reduced.append((lead, vec))
        pivots.append(j)
        if len(pivots) == m:
            break
    return len(pivots), pivots


def _exact_determinant(matrix):
    """Determinant of a square integer matrix, exact via Fractions."""
    a = [[Fraction(x) for x in row] for row in matrix]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col]), None)
        if pivot is None:
            return 0
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = a[col][col]
        for r in range(col + 1, n):
            if a[r][col]:
                factor = a[r][col] / inv
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    assert det.denominator == 1
    return int(det)


def _achievable_parent_subsets(graph, support, v, state_cap):
    """All subsets D_t intersect P(v) reachable while v stays inactive.

    Forward search over (active set, frontier) states of feasible trace
    prefixes, v excluded from every expansion.  Returns (subsets, capped).
    """
    parent_mask = 0
    for u in graph.parent_list(v):
        parent_mask |= 1 << u
    child_mask = [0] * graph.n
    for u in range(graph.n):
        for c in graph.children(u):
            child_mask[u] |= 1 << c
    achievable = set()
    visited = set()
    stack = []
    for seed, prob in support:
        if prob <= 0 or v in seed:
            continue
        mask = 0
        for u in seed:
            mask |= 1 << u
        if (mask, mask) not in visited:
            visited.add((mask, mask))
            stack.append((mask, mask))
    while stack:
        active, frontier = stack.pop()
        sub = frontier & parent_mask
        if sub:
            achievable.add(sub)
        cand = 0
        f = frontier
        while f:
            low = f & -f
            cand |= child_mask[low.bit_length() - 1]
            f ^= low
        cand &= ~active & ~(1 << v)
        # enumerate nonempty subsets of the candidate set
        sub_mask = cand
        while sub_mask:
            state = (active | sub_mask, sub_mask)
            if state not in visited:
                if len(visited) >= state_cap:
                    return achievable, True
                visited.add(state)
                stack.append(state)
            sub_mask = (sub_mask - 1) & cand
    return achievable, False


def check_identifiability(graph: Graph, seed_distribution: SeedDistribution, state_cap: int = 100_000) -> IdentifiabilityReport:
    """Theorem-style identifiability verdict for every child node.

    A node is identifiable iff the achievable parent subsets contain m of
    them whose 0/1 incidence matrix is invertible; rank decisions use exact
    integer arithmetic.  Nodes whose forward search exceeds ``state_cap``
    get the verdict "unknown-cap-exceeded".
    """
    support = seed_distribution.explicit_support(graph.n)
    nodes = {}
    for v in graph.child_nodes():
        parents = graph.parent_list(v)
        m = len(parents)
        masks, capped = _achievable_parent_subsets(graph, support, v, state_cap)
        subsets = tuple(
            frozenset(u for u in parents if mask >> u & 1) for mask in sorted(masks)
        )
        if capped:
            nodes[v] = NodeIdentifiability(
                node=v,
                verdict="unknown-cap-exceeded",
                parents=parents,
                achievable=subsets,
            )
            continue
        columns = [[1 if u in s else 0 for u in parents] for s in subsets]
        rank, pivots = _exact_rank_and_pivots(columns, m)
        if rank == m:
            witnesses = tuple(subsets[j] for j in pivots)
            matrix = tuple(
                tuple(1 if u in s else 0 for s in witnesses) for u in parents
            )
            det = _exact_determinant(matrix)
            nodes[v] = NodeIdentifiability(
                node=v,
                verdict="identifiable",
                parents=parents,
                achievable=subsets,
                rank=rank,
                rank_deficiency=0,
                witnesses=witnesses,
                matrix=matrix,
                determinant=det,
            )
        else:
            nodes[v] = NodeIdentifiability(
                node=v,
                verdict="not-identifiable",
                parents=parents,
                achievable=subsets,
                rank=rank,
                rank_deficiency=m - rank,
            )
    return IdentifiabilityReport(nodes=nodes)


# -- submodularity -------------------------------------------------------------


@dataclass(frozen=True)
class SubmodularityViolation:
    node: int
    subset: frozenset
    superset: frozenset
    gain_at_subset: float
    gain_at_superset: float

    @property
    def magnitude(self) -> float:
        return self.gain_at_superset - self.gain_at_subset


@dataclass(frozen=True)
class MonotonicityViolation:
    subset: frozenset
    superset: frozenset
    spread_subset: float
    spread_superset: float


def _mask_to_set(mask):
    out = set()
    while mask:
        low = mask & -mask
        out.add(low.bit_length() - 1)
        mask ^= low
    return frozenset(out)


def check_submodularity_exact(model: GltModel, max_budget: int = None, node_cap: int = 10**6, tol: float = 1e-9) -> list:
    """Exhaustive diminishing-returns check against exact spreads.

    Tests sigma(S' + v) - sigma(S') >= sigma(S + v) - sigma(S) for every
    S' subset of S with |S| <= max_budget (default: all sets) and v outside
    S, flagging violations beyond ``tol``.  Only feasible on graphs small
    enough for exact spread enumeration.
    """
    n = model.graph.n
    budget = n if max_budget is None else min(max_budget, n)
    oracle = ExactSpreadOracle(model, node_cap=node_cap)
    spread = {0: 0.0}

    def sigma(mask):
        got = spread.get(mask)
        if got is None:
            got = oracle.spread(_mask_to_set(mask))
            spread[mask] = got
        return got

    violations = []
    for s_mask in range(1 << n):
        if s_mask.bit_count() > budget:
            continue
        for v in range(n):
            bit = 1 << v
            if s_mask & bit:
                continue
            gain_s = sigma(s_mask | bit) - sigma(s_mask)
            sub = (s_mask - 1) & s_mask
            while True:
                gain_sub = sigma(sub | bit) - sigma(sub)
                if gain_sub < gain_s - tol:
                    violations.append(
                        SubmodularityViolation(
                            node=v,
                            subset=_mask_to_set(sub),
                            superset=_mask_to_set(s_mask),
                            gain_at_subset=gain_sub,
                            gain_at_superset=gain_s,
                        )
                    )
                if sub == 0:
                    break
                sub = (sub - 1) & s_mask
    return violations


def check_monotonicity_exact(model: GltModel, node_cap: int = 10**6, tol: float = 1e-9) -> list:
    """Exhaustive sigma(S) <= sigma(S + v) check (should never fail)."""
    n = model.graph.n
    oracle = ExactSpreadOracle(model, node_cap=node_cap)
    spread = {0: 0.0}

    def sigma(mask):
        got = spread.get(mask)
        if got is None:
            got = oracle.spread(_mask_to_set(mask))
            spread[mask] = got
        return got

    violations = []
    for s_mask in range(1 << n):
        for v in range(n):
            bit = 1 << v
            if s_mask & bit:
                continue
            if sigma(s_mask | bit) < sigma(s_mask) - tol:
                violations.append(
                    MonotonicityViolation(
                        subset=_mask_to_set(s_mask),
                        superset=_mask_to_set(s_mask | bit),
                        spread_subset=sigma(s_mask),
                        spread_superset=sigma(s_mask | bit),
                    )
                )
    return violations


# -- triggering embedding --------------------------------------------------------


@dataclass
class TriggeringEmbedding:
    probabilities: dict  # frozenset of parent labels -> solved mass
    feasible: bool
    negative_sets: tuple

    def mass(self, subset) -> float:
        return self.probabilities[frozenset(subset)]


def solve_triggering_embedding(model_or_weights, cdf=None, atol: float = 1e-9) -> TriggeringEmbedding:
    """Solve for the triggering-set distribution matching a 3-star model.

    Accepts either a GltModel on a star of in-degree 3 (child cdf and
    weights extracted) or a 3-vector of weights together with an explicit
    cdf callable.  The 8 subset masses are the solution of the linear
    system equating the activation probability of every seed subset; the
    embedding is infeasible as a distribution when any mass is negative
    beyond ``atol``.
    """
    if isinstance(model_or_weights, GltModel):
        graph = model_or_weights.graph
        child = [v for v in range(graph.n) if graph.in_degree(v) == 3]
        if len(child) != 1 or graph.edge_count() != 3:
            raise ValueError("expected a star graph with a single in-degree-3 child")
        child = child[0]
        labels = graph.parent_list(child)
        weights = model_or_weights.theta(child)
        cdf = model_or_weights.spec(child).cdf
    else:
        weights = np.asarray(model_or_weights, dtype=float)
        if weights.shape != (3,):
            raise ValueError(f"expected 3 weights, got shape {weights.shape}")
        if cdf is None:
            raise ValueError("an explicit cdf is required with raw weights")
        labels = (0, 1, 2)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for row, t_mask in enumerate(range(1, 8)):
        for s_mask in range(8):
            if s_mask & t_mask:
                a[row, s_mask] = 1.0
        b[row] = cdf(sum(weights[i] for i in range(3) if t_mask >> i & 1))
    a[7, :] = 1.0
    b[7] = 1.0
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"triggering-embedding system is singular: {exc}") from exc
    probabilities = {}
    for s_mask in range(8):
        subset = frozenset(labels[i] for i in range(3) if s_mask >> i & 1)
        probabilities[subset] = float(p[s_mask])
    negative = tuple(s for s, q in probabilities.items() if q < -atol)
    return TriggeringEmbedding(
        probabilities=probabilities,
        feasible=not negative,
        negative_sets=negative,
    )
