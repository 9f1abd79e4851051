"""Order-K transition kernels and their stationary statistics.

A kernel is stored as an array ``table`` of shape ``(S,) * K + (S,)`` with
``table[s_1, ..., s_K, s'] = pi(s' | s_1, ..., s_K)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceFailure, DomainError, NonPositiveEntry, RowSumError

ROW_TOL = 1e-12


@dataclass(frozen=True)
class TransitionKernel:
    """Validated conditional table pi(s'|s_1..s_K) with strictly positive entries."""

    S: int
    K: int
    table: np.ndarray = field(repr=False)

    def row(self, parents: Sequence[int]) -> np.ndarray:
        return self.table[tuple(parents)]

    @property
    def gamma(self) -> float:
        return float(self.S * self.table.min())

    def to_dict(self) -> dict:
        rows = {
            ",".join(map(str, idx)): self.table[idx].tolist()
            for idx in itertools.product(range(self.S), repeat=self.K)
        }
        return {"S": self.S, "K": self.K, "table": rows}


def build_kernel(S: int, K: int, table) -> TransitionKernel:
    """Validate ``table`` (array or mapping from parent tuples to rows).

    Raises
    ------
    RowSumError
        If some row does not sum to one within ``1e-12``.
    NonPositiveEntry
        If some entry is ``<= 0`` (the data model needs a positive kernel).
    """
    if S < 1 or K < 0:
        raise DomainError(f"invalid sizes S={S}, K={K}")
    shape = (S,) * K + (S,)
    if isinstance(table, dict):
        arr = np.full(shape, np.nan)
        for key, row in table.items():
            idx = _parse_key(key)
            if len(idx) != K:
                raise DomainError(f"row key {key!r} does not have {K} parents")
            arr[idx] = row
        if np.isnan(arr).any():
            raise DomainError("kernel table is missing rows")
    else:
        arr = np.array(table, dtype=float)
        if arr.shape != shape:
            raise DomainError(f"kernel table has shape {arr.shape}, expected {shape}")
    if not np.all(arr > 0):
        raise NonPositiveEntry("kernel entries must be strictly positive")
    sums = arr.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > ROW_TOL:
        raise RowSumError(f"rows sum to {sums.min():.15g}..{sums.max():.15g}")
    arr.setflags(write=False)
    return TransitionKernel(S, K, arr)


def _parse_key(key) -> tuple[int, ...]:
    if isinstance(key, str):
        return tuple(int(x) for x in key.split(",") if x.strip() != "")
    return tuple(int(x) for x in key)


def paper_kernel(p: Sequence[float] | None = None) -> TransitionKernel:
    """The benchmark S=3, K=2 kernel with nine tunable offsets ``p``."""
    p = np.zeros(9) if p is None else np.asarray(p, dtype=float)
    if p.shape != (9,):
        raise DomainError("paper_kernel needs exactly 9 offsets")
    p0, p1, p2, p3, p4, p5, p6, p7, p8 = p
    rows = {
        (0, 0): (0.1, 0.5 - p0, 0.4 + p0),
        (0, 1): (0.2 + p1, 0.3, 0.5 - p1),
        (0, 2): (0.3, 0.4 - p2, 0.3 + p2),
        (1, 0): (0.5 - p3, 0.3, 0.2 + p3),
        (1, 1): (0.4 + p4, 0.4 - p4, 0.2),
        (1, 2): (0.2 + p5, 0.3, 0.5 - p5),
        (2, 0): (0.6 - p6, 0.2 + p6, 0.2),
        (2, 1): (0.1 + p7, 0.5 - p7, 0.4),
        (2, 2): (0.2 + p8, 0.3, 0.5 - p8),
    }
    arr = np.zeros((3, 3, 3))
    for k, v in rows.items():
        arr[k] = v
    if np.any(arr >= 1):
        raise NonPositiveEntry("offsets push an entry to >= 1")
    return build_kernel(3, 2, arr)


def kernel_from_dict(d: dict) -> TransitionKernel:
    if "paper_kernel" in d:
        return paper_kernel(d["paper_kernel"].get("p"))
    return build_kernel(int(d["S"]), int(d["K"]), d["table"])


def kernel_to_json(kernel: TransitionKernel) -> str:
    return json.dumps(kernel.to_dict())


def lift_kernel(kernel: TransitionKernel) -> np.ndarray:
    """Shift chain on S^K: (s_1..s_K) -> (s_2..s_K, s') with probability pi(s'|s)."""
    S, K = kernel.S, kernel.K
    if K == 0:
        return np.ones((1, 1))
    n = S**K
    lifted = np.zeros((n, n))
    for idx in itertools.product(range(S), repeat=K):
        src = np.ravel_multi_index(idx, (S,) * K)
        for s_new in range(S):
            dst = np.ravel_multi_index(idx[1:] + (s_new,), (S,) * K)
            lifted[src, dst] += kernel.table[idx + (s_new,)]
    return lifted


def _solve_stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def _power_stationary(P: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    M = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = M @ P
        if np.max(np.abs(nxt - M)) < tol:
            return nxt / nxt.sum()
        M = nxt
    raise ConvergenceFailure(f"power iteration did not reach {tol} in {max_iter} steps")


def stationary(kernel: TransitionKernel, max_iter: int = 1_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M, mu)``: the stationary law on S^K (shape ``(S,)*K``) and its marginal.

    The linear solve is the answer; power iteration is an independent check.
    """
    P = lift_kernel(kernel)
    M = _solve_stationary(P)
    M_pow = _power_stationary(P, 1e-14, max_iter)
    if np.max(np.abs(M - M_pow)) > 1e-10:
        raise ConvergenceFailure("linear solve and power iteration disagree")
    if np.max(np.abs(M @ P - M)) >= 1e-12:
        raise ConvergenceFailure("stationary residual above 1e-12")
    M = M.reshape((kernel.S,) * kernel.K)
    mu = coordinate_marginals(M)[0] if kernel.K else np.ones(kernel.S) / kernel.S
    return M, mu


def coordinate_marginals(M: np.ndarray) -> np.ndarray:
    """Row ``k`` is the marginal of coordinate ``k`` of a law on S^K."""
    K = M.ndim
    return np.stack([M.sum(axis=tuple(a for a in range(K) if a != k)) for k in range(K)])


def marginal_kernels(kernel: TransitionKernel, M: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Array ``out[l, s, s'] = pi^l(s'|s)``: child law given only parent slot ``l``."""
    K = kernel.K
    weighted = kernel.table * M[..., None]
    out = np.empty((K, kernel.S, kernel.S))
    for ell in range(K):
        other = tuple(a for a in range(K) if a != ell)
        out[ell] = weighted.sum(axis=other) / mu[:, None]
    return out


def assumption1_margin(marginals: np.ndarray) -> float:
    """Smallest max-abs difference between two marginal kernels (inf when K < 2)."""
    K = marginals.shape[0]
    if K < 2:
        return float("inf")
    return float(min(np.max(np.abs(marginals[a] - marginals[b])) for a, b in itertools.combinations(range(K), 2)))


def normalized_matrices(marginals: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """``B[k, s, s'] = sqrt(mu(s)/mu(s')) * (pi^k(s'|s) - mu(s'))``."""
    scale = np.sqrt(mu[:, None] / mu[None, :])
    return scale[None] * (marginals - mu[None, None, :])


def spectral_norm(B: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest singular value via power iteration on ``B^T B``."""
    G = B.T @ B
    if not np.any(G):
        return 0.0
    v = np.ones(G.shape[0]) + np.linspace(0.0, 0.1, G.shape[0])
    v /= np.linalg.norm(v)
    val = 0.0
    for _ in range(max_iter):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        new_val = float(v @ w)
        v = w / nrm
        if abs(new_val - val) <= tol * max(new_val, 1e-300):
            return float(np.sqrt(max(new_val, 0.0)))
        val = new_val
    raise ConvergenceFailure("spectral norm iteration did not converge")


@dataclass(frozen=True)
class KernelStats:
    """Derived quantities of a kernel; arrays are 0-based in states and heads."""

    lifted: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    mu: np.ndarray
    marginals: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    lam: float
    gamma: float
    assumption1: bool
    assumption1_margin: float


def spectral_stats(kernel: TransitionKernel, marginals: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, float, float]:
    B = normalized_matrices(marginals, mu)
    lam = max((spectral_norm(b) for b in B), default=0.0)
    return B, lam, kernel.gamma


def kernel_stats(kernel: TransitionKernel) -> KernelStats:
    M, mu = stationary(kernel)
    marg = marginal_kernels(kernel, M, mu)
    B, lam, gamma = spectral_stats(kernel, marg, mu)
    margin = assumption1_margin(marg)
    return KernelStats(
        lifted=lift_kernel(kernel),
        M=M,
        mu=mu,
        marginals=marg,
        B=B,
        lam=lam,
        gamma=gamma,
        assumption1=margin > 1e-12,
        assumption1_margin=margin,
    )


def reduce_kernel(kernel: TransitionKernel, keep: Sequence[int], mu: np.ndarray) -> TransitionKernel:
    """Average out the parent slots not in ``keep`` (1-based) against ``mu``.

    The reduced kernel keeps the marginal stationary law of the full one.
    """
    keep = sorted(set(int(k) for k in keep))
    if not keep and kernel.K == 0:
        return kernel
    if any(k < 1 or k > kernel.K for k in keep):
        raise DomainError(f"slots {keep} outside 1..{kernel.K}")
    arr = kernel.table
    for axis in reversed(range(kernel.K)):
        if axis + 1 not in keep:
            shape = [1] * arr.ndim
            shape[axis] = kernel.S
            arr = (arr * mu.reshape(shape)).sum(axis=axis)
    arr = arr / arr.sum(axis=-1, keepdims=True)
    return build_kernel(kernel.S, len(keep), arr)


@dataclass(frozen=True)
class KernelMixture:
    """Finite distribution over kernels; a single component is a point mass."""

    components: tuple[tuple[float, TransitionKernel], ...]

    def __post_init__(self):
        w = np.array([c[0] for c in self.components], dtype=float)
        if len(w) == 0 or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise DomainError("mixture weights must be positive and sum to 1")
        if len({(k.S, k.K) for _, k in self.components}) != 1:
            raise DomainError("mixture kernels must share S and K")

    @classmethod
    def point_mass(cls, kernel: TransitionKernel) -> "KernelMixture":
        return cls(((1.0, kernel),))

    @property
    def S(self) -> int:
        return self.components[0][1].S

    @property
    def K(self) -> int:
        return self.components[0][1].K
