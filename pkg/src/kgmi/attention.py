"""Reparameterized multi-head attention and its gradient-ascent trainer.

Only the masked score matrices ``Q[l]`` are trainable. Column ``i`` of head
``l`` is a softmax over the strictly earlier positions ``j < i``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadHyperparameter, DimensionMismatch, DomainError, NonFiniteUpdate
from .infometric import KgmiTable


def causal_mask(T: int) -> np.ndarray:
    """``mask[j, i]`` is True iff position ``j`` is visible to target ``i`` (``j < i``)."""
    return np.triu(np.ones((T, T), dtype=bool), 1)


def masked_softmax(Q: np.ndarray) -> np.ndarray:
    """Column softmax of ``Q[l, :, i]`` over rows ``j < i``; column 0 is all zeros."""
    T = Q.shape[-1]
    mask = causal_mask(T)
    Z = np.where(mask, Q, -np.inf)
    m = Z.max(axis=-2, keepdims=True)
    m[~np.isfinite(m)] = 0.0
    E = np.exp(Z - m)
    s = E.sum(axis=-2, keepdims=True)
    s[s == 0] = 1.0
    return E / s


@dataclass
class AttentionState:
    Q: np.ndarray
    eta: float
    eps_attn: float
    t: int = 0

    @property
    def K(self) -> int:
        return self.Q.shape[0]

    @property
    def T(self) -> int:
        return self.Q.shape[1]

    @property
    def attn(self) -> np.ndarray:
        return masked_softmax(self.Q)

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "Q": self.Q.tolist(), "attn": self.attn.tolist()})


def init_state(T: int, K: int, eta: float, eps_attn: float = 0.1) -> AttentionState:
    if T < 2 or K < 1:
        raise BadHyperparameter(f"need T >= 2 and K >= 1, got T={T}, K={K}")
    if not eta > 0:
        raise BadHyperparameter("learning rate must be positive")
    if not 0 < eps_attn < 1:
        raise BadHyperparameter("eps_attn must lie in (0, 1)")
    return AttentionState(np.zeros((K, T, T)), float(eta), float(eps_attn))


def _values(table) -> np.ndarray:
    return table.values if isinstance(table, KgmiTable) else np.asarray(table, dtype=float)


def _check(state: AttentionState, tab: np.ndarray):
    if tab.shape != state.Q.shape:
        raise DimensionMismatch(f"table shape {tab.shape} vs state {state.Q.shape}")


def objective_from_attn(A: np.ndarray, tab: np.ndarray) -> float:
    K, T, _ = tab.shape
    return float(np.sum(A * tab) / (K * T))


def objective(state: AttentionState, table) -> float:
    """``(1/(K T)) sum_l sum_{j,i} table[l, j, i] attn[l, j, i]``."""
    tab = _values(table)
    _check(state, tab)
    return objective_from_attn(state.attn, tab)


def optimal_objective(table) -> float:
    """Supremum of the objective: every column puts all mass on its best entry.

    Columns with no visible position contribute nothing. Columns of root
    targets are included, which matters when they are not identically zero.
    """
    tab = _values(table)
    K, T, _ = tab.shape
    if T < 2:
        return 0.0
    best = sum(tab[:, : i - 1, i - 1].max(axis=1).sum() for i in range(2, T + 1))
    return float(best / (K * T))


def gradient_from_attn(A: np.ndarray, tab: np.ndarray) -> np.ndarray:
    K, T, _ = tab.shape
    avg = np.sum(A * tab, axis=1, keepdims=True)
    return A * (tab - avg) / (K * T)


def gradient(state: AttentionState, table) -> np.ndarray:
    """``grad[l, j, i] = attn[l, j, i] (table[l, j, i] - sum_k attn[l, k, i] table[l, k, i]) / (K T)``."""
    tab = _values(table)
    _check(state, tab)
    return gradient_from_attn(state.attn, tab)


TRAJECTORY_COLUMNS = ("t", "L", "gap", "min_parent_attn", "max_root_deviation", "grad_inf_norm")


@dataclass
class TrainTrajectory:
    """Logged diagnostics of one training run.

    ``stop_epoch`` is the first iteration at which every watched (head, node)
    has max attention above ``1 - eps_attn`` (``None`` if never).
    ``first_concentration[l, i-1]`` is the same per (head, node), -1 if never.
    """

    records: list[dict] = field(repr=False)
    max_attn: np.ndarray = field(repr=False)
    argmax_attn: np.ndarray = field(repr=False)
    stop_epoch: int | None
    first_concentration: np.ndarray = field(repr=False)
    L_star: float
    final: AttentionState = field(repr=False)
    objective_monotone: bool
    maximizer_monotone: bool
    worst_root_deviation: float
    worst_gap_after_stop: float | None
    gap_history: np.ndarray = field(repr=False)
    gap_epoch: int | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({k: r[k] for k in TRAJECTORY_COLUMNS})
        return buf.getvalue()


def _root_columns(table, T: int) -> np.ndarray:
    if isinstance(table, KgmiTable):
        resp = table.responsible
    else:
        resp = np.ones(T, dtype=int)
    return np.array([i for i in range(3, T + 1) if resp[i - 1] == 0], dtype=int)


def _watch_mask(table, K: int, T: int) -> np.ndarray:
    mask = np.zeros((K, T), dtype=bool)
    if isinstance(table, KgmiTable):
        for ell, i in table.watched():
            mask[ell - 1, i - 1] = True
    else:
        mask[:, 1:] = True
    return mask


def train(table, eta: float = 10.0, tau: int = 10_000, eps_attn: float = 0.1, log_every: int = 100,
          stop_early: bool = False, monitor: Callable[[int, np.ndarray], None] | None = None,
          stop_gap: float | None = None) -> TrainTrajectory:
    """Plain gradient ascent ``Q <- Q + eta * grad`` from the zero state.

    Parameters
    ----------
    table : KgmiTable or ndarray of shape (K, T, T)
        Frozen score table; gap statistics use its watched (head, node) pairs.
    tau : int
        Maximum number of updates.
    log_every : int
        Record diagnostics every ``log_every`` iterations (and at the end).
    stop_early : bool
        Stop as soon as every watched pair is concentrated.
    monitor : callable, optional
        Called as ``monitor(t, attn)`` at every iteration.
    stop_gap : float, optional
        Also stop once ``L* - L`` is at or below this value; ``gap_epoch``
        records when that first happened.
    """
    if tau < 1 or log_every < 1:
        raise BadHyperparameter("tau and log_every must be positive")
    tab = _values(table)
    K, T, _ = tab.shape
    state = init_state(T, K, eta, eps_attn)
    L_star = optimal_objective(tab)
    watch = _watch_mask(table, K, T)
    roots = _root_columns(table, T)
    uniform = np.zeros(T)
    uniform[1:] = 1.0 / np.arange(1, T)
    visible = causal_mask(T)
    best = np.array([[int(np.argmax(tab[ell, : i - 1, i - 1])) if i > 1 else 0 for i in range(1, T + 1)]
                     for ell in range(K)])
    heads = np.arange(K)[:, None]
    cols = np.arange(T)[None, :]

    records = []
    maxes, argmaxes = [], []
    first = np.full((K, T), -1, dtype=int)
    stop = None
    prev_L = -np.inf
    prev_best = np.zeros((K, T))
    obj_mono = best_mono = True
    worst_root = 0.0
    worst_gap_after = None
    gap_epoch = None
    gaps = []

    t = 0
    while True:
        A = masked_softmax(state.Q)
        L = objective_from_attn(A, tab)
        gap = L_star - L
        gaps.append(gap)
        if stop_gap is not None and gap_epoch is None and gap <= stop_gap:
            gap_epoch = t
        colmax = A.max(axis=1)
        conc = colmax > 1 - eps_attn
        newly = conc & (first < 0)
        first[newly] = t
        if stop is None and np.all(conc[watch]):
            stop = t
        if stop is not None:
            worst_gap_after = gap if worst_gap_after is None else max(worst_gap_after, gap)
        if L < prev_L - 1e-15:
            obj_mono = False
        at_best = A[heads, best, cols]
        if np.any(at_best[watch] < prev_best[watch] - 1e-15):
            best_mono = False
        prev_L, prev_best = L, at_best
        root_dev = 0.0
        if roots.size:
            sub = A[:, :, roots - 1]
            root_dev = float(np.max(np.abs(sub - uniform[roots - 1]) * visible[:, roots - 1]))
        worst_root = max(worst_root, root_dev)
        if monitor is not None:
            monitor(t, A)
        G = gradient_from_attn(A, tab)
        done = t >= tau or (stop_early and stop is not None) or gap_epoch is not None
        if t % log_every == 0 or done:
            records.append({
                "t": t,
                "L": L,
                "gap": gap,
                "min_parent_attn": float(at_best[watch].min()) if watch.any() else 1.0,
                "max_root_deviation": root_dev,
                "grad_inf_norm": float(np.abs(G).max()),
            })
            maxes.append(colmax)
            argmaxes.append(A.argmax(axis=1) + 1)
        if done:
            break
        state.Q = state.Q + eta * G
        if not np.all(np.isfinite(state.Q)):
            raise NonFiniteUpdate(f"non-finite scores at iteration {t + 1}")
        t += 1
        state.t = t

    return TrainTrajectory(
        records=records,
        max_attn=np.array(maxes),
        argmax_attn=np.array(argmaxes),
        stop_epoch=stop,
        first_concentration=first,
        L_star=L_star,
        final=state,
        objective_monotone=obj_mono,
        maximizer_monotone=best_mono,
        worst_root_deviation=worst_root,
        worst_gap_after_stop=worst_gap_after,
        gap_history=np.array(gaps),
        gap_epoch=gap_epoch,
    )


def tau_star(K: int, T: int, I_max: float, delta: float, eta: float, eps_attn: float) -> float:
    """Iteration bound for the objective gap to fall below ``I_max * eps_attn``."""
    if not delta > 0:
        raise DomainError("information gap must be positive")
    if not 0 < eps_attn < 1:
        raise DomainError("eps_attn must lie in (0, 1)")
    first = 4 * K * T * I_max * math.log(I_max / eps_attn) / (eps_attn * eta * delta) if I_max > 0 else 0.0
    return first + 4 * K * T**2 * math.log(T) / (eta * delta)


def tau_star_node(K: int, T: int, i: int, delta_li: float, eta: float, eps_attn: float) -> float:
    """Iteration bound for head ``l`` on node ``i`` to exceed ``1 - eps_attn``."""
    if not delta_li > 0:
        raise DomainError("information gap must be positive")
    if not 0 < eps_attn < 1:
        raise DomainError("eps_attn must lie in (0, 1)")
    return (4 * K * T * math.log(1 / eps_attn) / (eps_attn * eta * delta_li)
            + 4 * K * T * i * math.log(i) / (eta * delta_li))
