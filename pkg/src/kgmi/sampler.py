"""Sequence generation from a DAG and a transition kernel.

Every sequence ``n`` owns the generator ``default_rng([seed, n])`` and consumes
exactly one uniform per position, so datasets do not depend on how the work is
split between workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RootCountMismatch
from .graph import UNIFORM, Dag
from .kernel import KernelStats, TransitionKernel, reduce_kernel


@dataclass(frozen=True)
class Sequence:
    states: np.ndarray
    seed: int
    index: int


@dataclass(frozen=True)
class Dataset:
    """``states[n]`` is sequence ``n``; extended sequences have length ``T + K + 1``."""

    states: np.ndarray = field(repr=False)
    T: int
    S: int
    K: int
    extended: bool
    seed: int

    @property
    def N(self) -> int:
        return self.states.shape[0]

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# T={self.T},S={self.S},K={self.K},extended={int(self.extended)},seed={self.seed}\n")
        np.savetxt(buf, self.states, fmt="%d", delimiter=",")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Dataset":
        header, _, body = text.partition("\n")
        if not header.startswith("#"):
            raise DomainError("dataset file lacks a header line")
        meta = dict(item.split("=") for item in header[1:].strip().split(","))
        states = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
        return cls(states, int(meta["T"]), int(meta["S"]), int(meta["K"]), bool(int(meta["extended"])), int(meta["seed"]))


class _Plan:
    """Per-node sampling rules shared by all sequences of a dataset."""

    def __init__(self, dag: Dag, kernel: TransitionKernel, stats: KernelStats):
        K = kernel.K
        self.S = kernel.S
        self.K = K
        self.T = dag.T
        self.tuples = dag.root_tuples()
        for tup in self.tuples:
            if len(tup) > K or (dag.mode == UNIFORM and len(tup) != K):
                raise RootCountMismatch(f"component roots {tup} but K={K}")
        M = stats.M
        self.root_laws = {}
        for tup in self.tuples:
            r = len(tup)
            law = M.sum(axis=tuple(range(r, K))) if r < K else M
            self.root_laws[r] = np.cumsum(law.ravel())
        self.cdfs = {}
        for i in dag.nonroots:
            k = dag.in_degree(i)
            if k not in self.cdfs:
                kk = kernel if k == K else reduce_kernel(kernel, range(1, k + 1), stats.mu)
                self.cdfs[k] = np.cumsum(kk.table, axis=-1)
        self.full_cdf = np.cumsum(kernel.table, axis=-1)
        self.parents = dag.parents
        self.nonroots = dag.nonroots


def _inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    s = (u[:, None] > cdf_rows).sum(axis=1)
    return np.minimum(s, cdf_rows.shape[1] - 1)


def _uniforms(seed: int, N: int, length: int, start: int = 0) -> np.ndarray:
    return np.stack([np.random.default_rng([seed, n]).random(length) for n in range(start, start + N)])


def _fill(plan: _Plan, u: np.ndarray, extended: bool) -> np.ndarray:
    N = u.shape[0]
    S, K, T = plan.S, plan.K, plan.T
    out = np.zeros((N, u.shape[1]), dtype=np.int64)
    for tup in plan.tuples:
        flat = _inverse_cdf(np.broadcast_to(plan.root_laws[len(tup)], (N, S ** len(tup))), u[:, tup[0] - 1])
        coords = np.unravel_index(flat, (S,) * len(tup))
        for node, c in zip(tup, coords):
            out[:, node - 1] = c
    for i in plan.nonroots:
        par = plan.parents[i]
        cdf = plan.cdfs[len(par)]
        rows = cdf[tuple(out[:, p - 1] for p in par)]
        out[:, i - 1] = _inverse_cdf(rows, u[:, i - 1])
    if extended:
        tail = np.minimum((u[:, T:T + K] * S).astype(np.int64), S - 1)
        out[:, T:T + K] = tail
        rows = plan.full_cdf[tuple(tail[:, k] for k in range(K))]
        out[:, T + K] = _inverse_cdf(rows, u[:, T + K])
    return out


def sample_dataset(dag: Dag, kernel: TransitionKernel, stats: KernelStats, N: int, seed: int,
                   extended: bool = False, start: int = 0) -> Dataset:
    """Draw ``N`` sequences; content depends only on the arguments.

    Roots of each component are drawn jointly from the stationary law ``M``
    (a component with fewer than K roots uses the law of the leading
    coordinates); in non-uniform mode a node with ``k < K`` parents uses the
    kernel reduced to its first ``k`` slots.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    plan = _Plan(dag, kernel, stats)
    length = dag.T + (kernel.K + 1 if extended else 0)
    u = _uniforms(seed, N, length, start)
    states = _fill(plan, u, extended)
    return Dataset(states, dag.T, kernel.S, kernel.K, extended, seed)


def sample_sequence(dag: Dag, kernel: TransitionKernel, stats: KernelStats, rng_seed: int, index: int = 0) -> Sequence:
    ds = sample_dataset(dag, kernel, stats, 1, rng_seed, start=index)
    return Sequence(ds.states[0], rng_seed, index)


def sample_extended(dag: Dag, kernel: TransitionKernel, stats: KernelStats, rng_seed: int, index: int = 0) -> Sequence:
    ds = sample_dataset(dag, kernel, stats, 1, rng_seed, extended=True, start=index)
    return Sequence(ds.states[0], rng_seed, index)
