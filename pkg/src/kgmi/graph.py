"""K-parent DAGs with index-ordered edges, benchmark graphs and distance diagnostics.

Nodes are labelled ``1..T`` as in the data model; every matrix is indexed
``0..T-1`` so that ``A[j - 1, i - 1] == 1`` encodes the edge ``(j, i)``.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, DuplicateEdge, EdgeOrderViolation, InDegreeMismatch

UNIFORM = "uniform"
NONUNIFORM = "nonuniform"

FIVE_EDGES = [(1, 3), (1, 4), (2, 3), (2, 5), (3, 4), (4, 5)]
TEN_EDGES = [
    (1, 3), (1, 4), (1, 10), (2, 3), (2, 5), (2, 6), (2, 7), (3, 4),
    (3, 8), (4, 5), (4, 7), (5, 6), (6, 9), (7, 8), (7, 10), (8, 9),
]
NONUNIFORM_TEN_EDGES = [
    (1, 3), (2, 4), (3, 4), (1, 5), (4, 5), (3, 6), (4, 6), (5, 7),
    (6, 8), (7, 8), (8, 9), (6, 10), (9, 10),
]


@dataclass(frozen=True)
class Dag:
    """Immutable DAG on nodes ``1..T`` whose edges all point forward in index order."""

    T: int
    edges: tuple[tuple[int, int], ...]
    mode: str = UNIFORM
    parents: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)
    roots: tuple[int, ...] = field(init=False, repr=False, compare=False)
    K: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        parents = {i: [] for i in range(1, self.T + 1)}
        for j, i in self.edges:
            parents[i].append(j)
        object.__setattr__(self, "parents", {i: tuple(sorted(p)) for i, p in parents.items()})
        object.__setattr__(self, "roots", tuple(i for i in parents if not parents[i]))
        object.__setattr__(self, "K", max((len(p) for p in parents.values()), default=0))

    @property
    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.T, self.T), dtype=int)
        for j, i in self.edges:
            A[j - 1, i - 1] = 1
        return A

    @property
    def nonroots(self) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.T + 1) if self.parents[i])

    def in_degree(self, i: int) -> int:
        return len(self.parents[i])

    def components(self) -> list[list[int]]:
        """Weakly connected components, each sorted, ordered by smallest node."""
        nbrs = _undirected_neighbours(self)
        seen: set[int] = set()
        comps = []
        for start in range(1, self.T + 1):
            if start in seen:
                continue
            comp = []
            queue = deque([start])
            seen.add(start)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in nbrs[u]:
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            comps.append(sorted(comp))
        return comps

    def root_tuples(self) -> list[tuple[int, ...]]:
        """Roots grouped by component; each group is sampled jointly."""
        root_set = set(self.roots)
        return [tuple(i for i in comp if i in root_set) for comp in self.components()]

    def to_json(self) -> str:
        return json.dumps({"T": self.T, "edges": [list(e) for e in self.edges], "mode": self.mode})

    def adjacency_csv(self) -> str:
        return adjacency_to_csv(self.adjacency)


def adjacency_to_csv(A: np.ndarray) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(np.asarray(A, dtype=int).tolist())
    return buf.getvalue()


def build_dag(T: int, edges: Iterable[Sequence[int]], mode: str = UNIFORM) -> Dag:
    """Validate an edge list and return a :class:`Dag`.

    In uniform mode every non-root node must have the same in-degree K (the
    maximum in-degree); non-uniform mode only bounds in-degrees by K.
    """
    if T < 1:
        raise DomainError(f"T must be positive, got {T}")
    if mode not in (UNIFORM, NONUNIFORM):
        raise DomainError(f"unknown mode {mode!r}")
    seen = set()
    clean = []
    for e in edges:
        j, i = int(e[0]), int(e[1])
        if not (1 <= j < i <= T):
            raise EdgeOrderViolation(f"edge ({j},{i}) violates 1 <= j < i <= {T}")
        if (j, i) in seen:
            raise DuplicateEdge(f"edge ({j},{i}) listed twice")
        seen.add((j, i))
        clean.append((j, i))
    dag = Dag(T, tuple(sorted(clean, key=lambda e: (e[1], e[0]))), mode)
    if mode == UNIFORM:
        bad = [i for i in dag.nonroots if dag.in_degree(i) != dag.K]
        if bad:
            raise InDegreeMismatch(f"nodes {bad} have in-degree != K={dag.K}")
    return dag


def dag_from_dict(d: dict) -> Dag:
    return build_dag(int(d["T"]), d.get("edges", []), d.get("mode", UNIFORM))


def meta_graph(which: str) -> Dag:
    """The benchmark graphs: ``five``, ``ten`` or ``nonuniform_ten``."""
    if which == "five":
        return build_dag(5, FIVE_EDGES)
    if which == "ten":
        return build_dag(10, TEN_EDGES)
    if which == "nonuniform_ten":
        return build_dag(10, NONUNIFORM_TEN_EDGES, NONUNIFORM)
    raise DomainError(f"unknown meta-graph {which!r}")


def disjoint_copies(dag: Dag, n: int) -> Dag:
    """``n`` copies of ``dag`` laid end to end with no edges between copies."""
    if n < 1:
        raise DomainError("need at least one copy")
    edges = [(j + c * dag.T, i + c * dag.T) for c in range(n) for j, i in dag.edges]
    return build_dag(dag.T * n, edges, dag.mode)


def _undirected_neighbours(dag: Dag) -> dict[int, set[int]]:
    nbrs: dict[int, set[int]] = {i: set() for i in range(1, dag.T + 1)}
    for j, i in dag.edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    return nbrs


@dataclass(frozen=True)
class GraphDiagnostics:
    dist: np.ndarray
    trek_dist: np.ndarray
    L_bound: int


def _bfs(start: int, nbrs: dict[int, Iterable[int]], T: int) -> np.ndarray:
    d = np.full(T, np.inf)
    d[start - 1] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if d[v - 1] == np.inf:
                d[v - 1] = d[u - 1] + 1
                queue.append(v)
    return d


def diagnostics(dag: Dag) -> GraphDiagnostics:
    """Shortest-path and common-ancestor distances between all node pairs.

    Roots that are sampled jointly (one tuple per component) are dependent even
    without a common ancestor, so consecutive members of a root tuple are linked
    at distance 1 in both ``dist`` and ``trek_dist``. Unreachable pairs are
    ``inf`` so that ``lam ** d`` evaluates to 0.
    """
    T = dag.T
    nbrs = _undirected_neighbours(dag)
    tuples = dag.root_tuples()
    for tup in tuples:
        for a, b in zip(tup, tup[1:]):
            nbrs[a].add(b)
            nbrs[b].add(a)
    dist = np.vstack([_bfs(i, nbrs, T) for i in range(1, T + 1)])

    children: dict[int, list[int]] = {i: [] for i in range(1, T + 1)}
    for j, i in dag.edges:
        children[j].append(i)
    # down[k, i]: directed path length k -> i
    down = np.vstack([_bfs(k, children, T) for k in range(1, T + 1)])
    trek = np.min(down[:, :, None] + down[:, None, :], axis=0)
    for tup in tuples:
        for p, a in enumerate(tup):
            for q, b in enumerate(tup):
                if a != b:
                    via = down[a - 1][:, None] + abs(p - q) + down[b - 1][None, :]
                    trek = np.minimum(trek, via)

    L = 1
    for comp in dag.components():
        idx = [c - 1 for c in comp]
        sub = dist[np.ix_(idx, idx)]
        for row in sub:
            _, counts = np.unique(row[np.isfinite(row)], return_counts=True)
            L = max(L, int(counts.max()))
    return GraphDiagnostics(dist=dist, trek_dist=trek, L_bound=L)


def effective_sequence_length(dag: Dag, lam: float, diag: GraphDiagnostics | None = None) -> float:
    """``T**2 / sum_{i,j} lam**dist(i,j)`` for ``lam`` in (0, 1)."""
    if not 0 < lam < 1:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    diag = diag or diagnostics(dag)
    return dag.T**2 / float(np.sum(np.power(lam, diag.dist)))
