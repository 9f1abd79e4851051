"""Exact pairwise joints by brute-force enumeration (the test oracle).

Each weakly connected component is enumerated separately; pairs in different
components are independent, so their joint is the outer product of marginals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationTooLarge
from .graph import Dag, GraphDiagnostics
from .kernel import KernelStats, TransitionKernel, reduce_kernel

MAX_ASSIGNMENTS = 10**7


@dataclass(frozen=True)
class PairJointTable:
    """``joint[i-1, j-1, a, b] = P(S_i = a, S_j = b)``; ``marginals[i-1]`` is the law of S_i."""

    joint: np.ndarray = field(repr=False)
    marginals: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return self.marginals.shape[0]

    def pair(self, i: int, j: int) -> np.ndarray:
        return self.joint[i - 1, j - 1]

    def to_json(self) -> str:
        T = self.T
        return json.dumps({f"({i},{j})": self.joint[i - 1, j - 1].tolist()
                           for i in range(1, T + 1) for j in range(1, T + 1) if i != j})


def component_law(dag: Dag, comp: list[int], kernel: TransitionKernel, stats: KernelStats) -> np.ndarray:
    """Full joint law of the nodes in ``comp`` as an array with one axis per node."""
    S, K = kernel.S, kernel.K
    n = len(comp)
    if S**n > MAX_ASSIGNMENTS:
        raise EnumerationTooLarge(f"{S}^{n} assignments exceed {MAX_ASSIGNMENTS}")
    axis = {node: a for a, node in enumerate(comp)}
    law = np.ones((S,) * n)

    def multiply(factor: np.ndarray, nodes: list[int]):
        shape = [1] * n
        for node in nodes:
            shape[axis[node]] = S
        return law * factor.reshape(shape)

    roots = [i for i in comp if not dag.parents[i]]
    if roots:
        r = len(roots)
        root_law = stats.M.sum(axis=tuple(range(r, K))) if r < K else stats.M
        law = multiply(root_law, roots)
    reduced = {}
    for i in comp:
        par = dag.parents[i]
        if not par:
            continue
        k = len(par)
        if k not in reduced:
            reduced[k] = kernel.table if k == K else reduce_kernel(kernel, range(1, k + 1), stats.mu).table
        law = multiply(reduced[k], list(par) + [i])
    return law


def exact_pair_joints(dag: Dag, kernel: TransitionKernel, stats: KernelStats) -> PairJointTable:
    T, S = dag.T, kernel.S
    joint = np.zeros((T, T, S, S))
    marg = np.zeros((T, S))
    comps = dag.components()
    for comp in comps:
        law = component_law(dag, comp, kernel, stats)
        n = len(comp)
        for a, i in enumerate(comp):
            marg[i - 1] = law.sum(axis=tuple(x for x in range(n) if x != a))
            for b in range(a + 1, n):
                j = comp[b]
                m = law.sum(axis=tuple(x for x in range(n) if x not in (a, b)))
                joint[i - 1, j - 1] = m
                joint[j - 1, i - 1] = m.T
    for i in range(T):
        joint[i, i] = np.diag(marg[i])
    node_comp = {node: c for c, comp in enumerate(comps) for node in comp}
    for i in range(1, T + 1):
        for j in range(1, T + 1):
            if node_comp[i] != node_comp[j]:
                joint[i - 1, j - 1] = np.outer(marg[i - 1], marg[j - 1])
    return PairJointTable(joint, marg)


def concentration_check(pairs: PairJointTable, stats: KernelStats, diag: GraphDiagnostics) -> float:
    """Largest value of ``|P_ij - mu mu'| - sqrt(mu mu') * lam**trek(i,j)`` over distinct pairs.

    A result ``<= 0`` means the correlation-decay bound holds everywhere.
    """
    mu = stats.mu
    prod = np.outer(mu, mu)
    root = np.sqrt(prod)
    with np.errstate(over="ignore"):
        decay = np.power(stats.lam, diag.trek_dist)
    worst = -np.inf
    T = pairs.T
    for i in range(T):
        for j in range(T):
            if i == j:
                continue
            slack = np.abs(pairs.joint[i, j] - prod) - root * decay[i, j]
            worst = max(worst, float(slack.max()))
    return worst
