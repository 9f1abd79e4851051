"""f-divergences, f-mutual information and kernel-guided MI tables."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidJoint, SupportMismatch, ZeroDenominator, ZeroJointEntry
from .exactdist import PairJointTable, exact_pair_joints
from .graph import Dag
from .kernel import KernelMixture, KernelStats, kernel_stats

POPULATION = "population"
ESTIMATED = "estimated"
NAIVE = "naive"


class FKind(enum.Enum):
    KL = "KL"
    PearsonChi2 = "PearsonChi2"
    NeymanChi2 = "NeymanChi2"
    SquaredHellinger = "SquaredHellinger"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self is FKind.KL:
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
        if self is FKind.PearsonChi2:
            return x * x - x
        if self is FKind.NeymanChi2:
            with np.errstate(divide="ignore"):
                return (1.0 - x) ** 2 / x
        return (np.sqrt(x) - 1.0) ** 2

    @classmethod
    def parse(cls, name) -> "FKind":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").lower()
        aliases = {
            "kl": cls.KL, "pearsonchi2": cls.PearsonChi2, "chi2": cls.PearsonChi2, "pearson": cls.PearsonChi2,
            "neymanchi2": cls.NeymanChi2, "neyman": cls.NeymanChi2,
            "squaredhellinger": cls.SquaredHellinger, "hellinger": cls.SquaredHellinger,
        }
        if key not in aliases:
            raise DomainError(f"unknown f-divergence {name!r}")
        return aliases[key]


def f_divergence(P, Q, f: FKind) -> float:
    """``sum_x Q(x) f(P(x)/Q(x))`` with ``0 log 0 = 0``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise SupportMismatch(f"shapes {P.shape} and {Q.shape} differ")
    if np.any(Q <= 0):
        raise ZeroDenominator("reference distribution must be strictly positive")
    return float(np.sum(Q * f(P / Q)))


def f_mutual_information(joint, f: FKind) -> float:
    """f-divergence between a joint and the product of its marginals."""
    J = np.asarray(joint, dtype=float)
    if J.ndim != 2 or np.any(J <= 0) or abs(J.sum() - 1) > 1e-9:
        raise InvalidJoint("joint must be a strictly positive matrix summing to 1")
    return f_divergence(J, np.outer(J.sum(1), J.sum(0)), f)


@dataclass(frozen=True)
class KgmiTable:
    """Per-head score tables ``values[l, j-1, i-1]`` (zero unless ``j < i``).

    ``responsible[i-1]`` is the number of heads expected to find a parent of
    node ``i``: its in-degree. Gap statistics only use those heads.
    """

    values: np.ndarray = field(repr=False)
    f: str
    mode: str
    responsible: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def watched(self) -> list[tuple[int, int]]:
        """(head, node) pairs, 1-based, that should concentrate on a parent."""
        return [(ell, i) for i in range(2, self.T + 1) for ell in range(1, int(self.responsible[i - 1]) + 1)]

    def maximizers(self) -> dict[tuple[int, int], int]:
        """Best candidate ``j`` per watched (head, node); ties go to the smallest index."""
        return {(ell, i): int(np.argmax(self.values[ell - 1, : i - 1, i - 1])) + 1 for ell, i in self.watched()}

    def delta_li(self) -> dict[tuple[int, int], float]:
        out = {}
        for ell, i in self.watched():
            col = np.sort(self.values[ell - 1, : i - 1, i - 1])[::-1]
            out[(ell, i)] = float(col[0] - col[1]) if col.size > 1 else float("inf")
        return out

    @property
    def delta(self) -> float:
        return min(self.delta_li().values(), default=float("inf"))

    @property
    def I_max(self) -> float:
        T = self.T
        mask = np.triu(np.ones((T, T), bool), 1)
        return float(self.values[:, mask].max()) if T > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "f": self.f,
            "mode": self.mode,
            "heads": self.values.tolist(),
            "delta": self.delta,
            "delta_li": {f"{ell},{i}": v for (ell, i), v in self.delta_li().items()},
            "I_max": self.I_max,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def make_table(values: np.ndarray, dag: Dag, f: str, mode: str) -> KgmiTable:
    values = np.array(values, dtype=float)
    T = dag.T
    values[:, ~np.triu(np.ones((T, T), bool), 1)] = 0.0
    values.setflags(write=False)
    resp = np.array([dag.in_degree(i) for i in range(1, T + 1)])
    return KgmiTable(values, f, mode, resp)


def _components(dag: Dag, mixture: KernelMixture, pairs: Sequence[PairJointTable] | None,
                stats: Sequence[KernelStats] | None):
    stats = list(stats) if stats is not None else [kernel_stats(k) for _, k in mixture.components]
    if pairs is None:
        pairs = [exact_pair_joints(dag, k, st) for (_, k), st in zip(mixture.components, stats)]
    for pj in pairs:
        off = ~np.eye(pj.T, dtype=bool)
        if np.any(pj.joint[off] <= 0):
            raise ZeroJointEntry("population joints must be strictly positive")
    return [(w, st, pj) for (w, _), st, pj in zip(mixture.components, stats, pairs)]


def _kgmi_values(st: KernelStats, pj: PairJointTable, f: FKind) -> np.ndarray:
    K = st.marginals.shape[0]
    T = pj.T
    out = np.zeros((K, T, T))
    for i in range(T):
        for j in range(i):
            Pij = pj.joint[i, j]
            Pi, Pj = pj.marginals[i], pj.marginals[j]
            prod = np.outer(Pi, Pj)
            scale = f(Pij / prod) * prod / Pij
            for ell in range(K):
                out[ell, j, i] = np.sum(Pj[None, :] * st.marginals[ell].T * scale)
    return out


def kgmi_table(dag: Dag, mixture: KernelMixture, f: FKind = FKind.KL,
               pairs: Sequence[PairJointTable] | None = None,
               stats: Sequence[KernelStats] | None = None) -> KgmiTable:
    """Population kernel-guided MI of every ordered pair ``j < i`` for every head.

    The weight of cell ``(s', s)`` is ``P_j(s) pi^l(s'|s) P_i(s') P_j(s) / P_ij(s', s)``,
    using the exact node marginals ``P_i`` and ``P_j``.
    """
    f = FKind.parse(f)
    total = np.zeros((mixture.K, dag.T, dag.T))
    for w, st, pj in _components(dag, mixture, pairs, stats):
        total += w * _kgmi_values(st, pj, f)
    return make_table(total, dag, f.value, POPULATION)


def naive_table(dag: Dag, mixture: KernelMixture, f: FKind = FKind.KL,
                pairs: Sequence[PairJointTable] | None = None,
                stats: Sequence[KernelStats] | None = None) -> KgmiTable:
    """Head-independent table: every head sees the plain f-MI of each pair."""
    f = FKind.parse(f)
    T = dag.T
    single = np.zeros((T, T))
    for w, _, pj in _components(dag, mixture, pairs, stats):
        for i in range(T):
            for j in range(i):
                single[j, i] += w * f_mutual_information(pj.joint[i, j], f)
    return make_table(np.broadcast_to(single, (mixture.K, T, T)), dag, f.value, NAIVE)


def chi2_closed_form(dag: Dag, mixture: KernelMixture,
                     pairs: Sequence[PairJointTable] | None = None,
                     stats: Sequence[KernelStats] | None = None,
                     denominator: str = "mu") -> KgmiTable:
    """Simplified Pearson form ``sum pi^l(s'|s) P_ij(s', s) / D(s') - 1``.

    ``denominator="mu"`` uses the stationary marginal for ``D``; ``"node"``
    uses the exact marginal of node ``i``, which is what the general
    definition reduces to algebraically.
    """
    if denominator not in ("mu", "node"):
        raise DomainError(f"unknown denominator {denominator!r}")
    K, T = mixture.K, dag.T
    total = np.zeros((K, T, T))
    for w, st, pj in _components(dag, mixture, pairs, stats):
        for i in range(T):
            D = st.mu if denominator == "mu" else pj.marginals[i]
            for j in range(i):
                Pij = pj.joint[i, j]
                for ell in range(K):
                    total[ell, j, i] += w * (np.sum(st.marginals[ell].T * Pij / D[:, None]) - 1.0)
    return make_table(total, dag, FKind.PearsonChi2.value, POPULATION)
