"""JSON / JSONL schemas and atomic file I/O.

Documents:
  graph:   {"n": int, "edges": [[parent, child], ...]}
  model:   graph fields + "weights" (canonical edge order) + "thresholds"
           (per-node family dicts)
  traces:  JSONL, one {"steps": [[...], ...]} object per line
  pseudo:  JSONL, one {"node": v, "active_parents": [...], "y": 0|1} per line
  fit:     {"nodes": {"<v>": {"parents": [...], "weights": [...], ...}}}

Input errors carry the file position (key path or line number).  Writes go
through a temp file and rename, so a crash never leaves a partial document.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .graph import Graph
from .likelihood import PseudoTrace
from .model import GltModel, Trace
from .thresholds import spec_from_dict, spec_to_dict

__all__ = [
    "SchemaError",
    "atomic_write_text",
    "graph_to_dict",
    "graph_from_dict",
    "model_to_dict",
    "model_from_dict",
    "trace_to_dict",
    "trace_from_dict",
    "write_traces_jsonl",
    "read_traces_jsonl",
    "write_pseudo_jsonl",
    "read_pseudo_jsonl",
    "fit_results_to_dict",
    "load_json",
    "dump_json",
]


class SchemaError(ValueError):
    """Malformed document, annotated with its position."""

    def __init__(self, message, where=""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def atomic_write_text(path: str, text: str):
    """Write via a sibling temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path: str):
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def load_json(path: str):
    with open(path) as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError(str(exc), where=path) from exc


def _need(d, key, where):
    if key not in d:
        raise SchemaError(f"missing key {key!r}", where=where)
    return d[key]


def graph_to_dict(graph: Graph) -> dict:
    return {"n": graph.n, "edges": [[u, v] for u, v in graph.edges]}


def graph_from_dict(d: dict, where: str = "graph") -> Graph:
    n = _need(d, "n", where)
    edges = _need(d, "edges", where)
    try:
        return Graph(int(n), [(int(e[0]), int(e[1])) for e in edges])
    except (TypeError, IndexError, ValueError) as exc:
        raise SchemaError(str(exc), where=where) from exc


def model_to_dict(model: GltModel) -> dict:
    out = graph_to_dict(model.graph)
    out["weights"] = [float(w) for w in model.weights]
    out["thresholds"] = [spec_to_dict(s) for s in model.thresholds]
    return out


def model_from_dict(d: dict, where: str = "model") -> GltModel:
    graph = graph_from_dict(d, where=where)
    weights = _need(d, "weights", where)
    thresholds = _need(d, "thresholds", where)
    try:
        specs = [spec_from_dict(t) for t in thresholds]
        return GltModel(graph, np.asarray(weights, dtype=float), specs)
    except ValueError as exc:
        raise SchemaError(str(exc), where=where) from exc


def trace_to_dict(trace: Trace) -> dict:
    return {"steps": [sorted(s) for s in trace.steps]}


def trace_from_dict(d: dict, where: str = "trace") -> Trace:
    steps = _need(d, "steps", where)
    try:
        return Trace(steps)
    except ValueError as exc:
        raise SchemaError(str(exc), where=where) from exc


def write_traces_jsonl(traces, path: str):
    lines = [json.dumps(trace_to_dict(t)) for t in traces]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_traces_jsonl(path: str) -> list:
    out = []
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(str(exc), where=where) from exc
            out.append(trace_from_dict(d, where=where))
    return out


def write_pseudo_jsonl(pseudo_traces, path: str):
    lines = [
        json.dumps(
            {
                "node": pt.node,
                "active_parents": sorted(pt.active_parents),
                "y": pt.y,
            }
        )
        for pt in pseudo_traces
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_pseudo_jsonl(path: str) -> list:
    out = []
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(str(exc), where=where) from exc
            try:
                out.append(
                    PseudoTrace(
                        node=int(_need(d, "node", where)),
                        active_parents=frozenset(
                            int(u) for u in _need(d, "active_parents", where)
                        ),
                        y=int(_need(d, "y", where)),
                    )
                )
            except ValueError as exc:
                raise SchemaError(str(exc), where=where) from exc
    return out


def fit_results_to_dict(results: dict, intervals: dict = None) -> dict:
    """Fit (and optionally inference) output document.

    ``results`` maps node -> NodeFitResult; ``intervals`` optionally maps
    node -> (CovarianceResult, [Interval, ...]).
    """
    nodes = {}
    for v in sorted(results):
        r = results[v]
        entry = {
            "parents": list(r.parents),
            "converged": bool(r.converged),
            "n_obs": int(r.n_obs),
        }
        if r.estimated:
            entry["weights"] = [float(x) for x in r.weights]
            entry["loglik"] = float(r.loglik)
            entry["at_boundary"] = bool(r.at_boundary)
        else:
            entry["error"] = r.error
        if r.phi is not None:
            entry["phi"] = {
                "family": r.phi["family"],
                "params": list(np.atleast_1d(r.phi["params"])),
            }
        if intervals and v in intervals:
            cov, ints = intervals[v]
            entry["valid"] = bool(cov.valid and not r.at_boundary)
            if cov.valid:
                entry["stderr"] = [
                    float(np.sqrt(max(cov.sigma[i, i], 0.0)))
                    for i in range(len(r.parents))
                ]
                entry["ci"] = [[it.lower, it.upper] for it in ints]
        nodes[str(v)] = entry
    return {"nodes": nodes}
