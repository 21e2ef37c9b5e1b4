"""Canonical undirected graph representation and JSON-lines serialization.

A Graph stores a dense node index range 0..num_nodes-1 and a canonical edge
list: every pair as (min, max), deduplicated, sorted lexicographically.
Graphs and GraphSets are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EndpointOutOfRangeError,
    InvariantViolationError,
    ParseError,
    SelfLoopError,
)


def _as_feature_matrix(values, expected_rows, what):
    """Coerce to a read-only float64 matrix with the required row count."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise InvariantViolationError(f"{what} must be a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] != expected_rows:
        raise InvariantViolationError(
            f"{what} has {arr.shape[0]} rows, expected {expected_rows}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvariantViolationError(f"{what} contains non-finite values")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with optional node/edge feature matrices.

    Construction canonicalizes the edge list: pairs are stored as
    (min, max), duplicates removed, sorted lexicographically. Self-loops
    and out-of-range endpoints raise instead of being dropped silently.
    """

    num_nodes: int
    edges: tuple = ()
    node_features: np.ndarray | None = None
    edge_features: np.ndarray | None = None

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 0:
            raise InvariantViolationError(f"num_nodes must be >= 0, got {n}")
        object.__setattr__(self, "num_nodes", n)

        raw = [(int(u), int(v)) for u, v in self.edges]
        for u, v in raw:
            if u == v:
                raise SelfLoopError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise EndpointOutOfRangeError(f"edge ({u},{v}) outside [0,{n})")
        normalized = [(min(u, v), max(u, v)) for u, v in raw]
        order = sorted(range(len(normalized)), key=lambda i: normalized[i])
        canonical = []
        kept = []
        for i in order:
            if canonical and canonical[-1] == normalized[i]:
                if self.edge_features is not None:
                    raise InvariantViolationError(
                        f"duplicate edge {normalized[i]} with edge features present"
                    )
                continue
            canonical.append(normalized[i])
            kept.append(i)
        object.__setattr__(self, "edges", tuple(canonical))

        if self.node_features is not None:
            object.__setattr__(
                self, "node_features", _as_feature_matrix(self.node_features, n, "node_features")
            )
        if self.edge_features is not None:
            ef = _as_feature_matrix(self.edge_features, len(raw), "edge_features")
            ef = np.ascontiguousarray(ef[kept])
            ef.flags.writeable = False
            object.__setattr__(self, "edge_features", ef)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        if self.num_nodes != other.num_nodes or self.edges != other.edges:
            return False
        for a, b in ((self.node_features, other.node_features),
                     (self.edge_features, other.edge_features)):
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    def __hash__(self):
        return hash((self.num_nodes, self.edges))

    def edge_array(self) -> np.ndarray:
        """Edges as an int array of shape (num_edges, 2); empty -> (0, 2)."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.asarray(self.edges, dtype=np.int64)


def canonicalize(graph: Graph) -> Graph:
    """Reapply edge canonicalization. Identity on already-valid graphs."""
    return Graph(graph.num_nodes, graph.edges, graph.node_features, graph.edge_features)


def adjacency(graph: Graph) -> list[list[int]]:
    """Per-node sorted neighbor lists. N(u) contains v iff N(v) contains u."""
    neigh = [[] for _ in range(graph.num_nodes)]
    for u, v in graph.edges:
        neigh[u].append(v)
        neigh[v].append(u)
    for lst in neigh:
        lst.sort()
    return neigh


@dataclass(frozen=True, eq=False)
class GraphSet:
    """Named, ordered, non-empty collection of graphs."""

    name: str
    graphs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        gs = tuple(self.graphs)
        if not gs:
            raise InvariantViolationError(f"graph set {self.name!r} is empty")
        for i, g in enumerate(gs):
            if not isinstance(g, Graph):
                raise InvariantViolationError(f"entry {i} of {self.name!r} is not a Graph")
        object.__setattr__(self, "graphs", gs)

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def __eq__(self, other):
        if not isinstance(other, GraphSet):
            return NotImplemented
        return self.name == other.name and self.graphs == other.graphs

    def replace(self, graphs, name: str | None = None) -> "GraphSet":
        return GraphSet(self.name if name is None else name, tuple(graphs))


def _graph_to_record(graph: Graph) -> dict:
    return {
        "n": graph.num_nodes,
        "edges": [list(e) for e in graph.edges],
        "x": None if graph.node_features is None else graph.node_features.tolist(),
        "e": None if graph.edge_features is None else graph.edge_features.tolist(),
    }


def _graph_from_record(record: dict, index: int) -> Graph:
    if not isinstance(record, dict):
        raise ParseError("record is not a JSON object", record=index)
    for key in ("n", "edges"):
        if key not in record:
            raise ParseError(f"missing required key {key!r}", record=index)
    n = record["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise ParseError(f"'n' must be an integer, got {n!r}", record=index)
    edges = record["edges"]
    if not isinstance(edges, list):
        raise ParseError("'edges' must be a list of [u, v] pairs", record=index)
    for e in edges:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            raise ParseError(f"malformed edge entry {e!r}", record=index)
    return Graph(
        num_nodes=n,
        edges=[tuple(e) for e in edges],
        node_features=record.get("x"),
        edge_features=record.get("e"),
    )


def save_graphs(graph_set: GraphSet, path) -> None:
    """Write a GraphSet as JSON lines, one graph per line, atomically.

    Floats are emitted with repr semantics, so load(save(S)) reproduces
    feature values bit-identically.
    """
    atomic_write_text(path, "".join(json.dumps(_graph_to_record(g)) + "\n" for g in graph_set))


def load_graphs(path, name: str | None = None) -> GraphSet:
    """Load a JSON-lines graph container written by save_graphs."""
    graphs = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", record=i) from exc
            graphs.append(_graph_from_record(record, i))
    if not graphs:
        raise ParseError(f"no graph records found in {path}")
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return GraphSet(name, tuple(graphs))


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file + rename in the same directory."""
    path = str(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
