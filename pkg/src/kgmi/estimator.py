"""Sample-based Pearson chi-square KG-MI from extended sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadHyperparameter, EmptyIndexSet, IndexOutOfRange, NotExtended
from .graph import Dag
from .infometric import ESTIMATED, FKind, KgmiTable, make_table
from .sampler import Dataset

DEFAULT_KAPPA = 1e-3


@dataclass(frozen=True)
class EstimatorConfig:
    kappa: float = DEFAULT_KAPPA
    N: int = 10_000

    def __post_init__(self):
        if self.kappa < 0:
            raise BadHyperparameter("kappa must be nonnegative")
        if self.N < 1:
            raise BadHyperparameter("N must be positive")

    def supports_epsilon(self, eps: float) -> bool:
        """Whether kappa is small enough for a target accuracy ``eps``."""
        return self.kappa <= eps / 4


def empirical_mu(sequence, index_set, S: int) -> np.ndarray:
    """Frequency of each state over the 1-based positions in ``index_set``."""
    idx = np.asarray(list(index_set), dtype=int)
    if idx.size == 0:
        raise EmptyIndexSet("index set is empty")
    seq = np.asarray(sequence)
    if idx.min() < 1 or idx.max() > seq.shape[-1]:
        raise IndexOutOfRange("index outside the sequence")
    return np.bincount(seq[idx - 1], minlength=S)[:S] / idx.size


def _pieces(ds: Dataset, kappa: float):
    if not ds.extended:
        raise NotExtended("estimator needs sequences with the labelled tail")
    if kappa < 0:
        raise BadHyperparameter("kappa must be nonnegative")
    X = ds.states
    T, K, S = ds.T, ds.K, ds.S
    y = X[:, T + K]
    counts = (X[:, :T, None] == np.arange(S)).sum(axis=1)
    mu_hat_y = counts[np.arange(ds.N), y] / T
    # with kappa = 0 an unseen label has mu_hat = 0, but then 1{y = X_i} is 0 too
    den = mu_hat_y + kappa
    w = np.divide(S, den, out=np.zeros(ds.N), where=den > 0)
    A = (X[:, :T] == y[:, None]).astype(float)
    B = np.stack([(X[:, :T] == X[:, T + ell][:, None]).astype(float) for ell in range(K)])
    return w, A, B


def chi2_kgmi_estimate(ds: Dataset, ell: int, i: int, j: int, kappa: float = DEFAULT_KAPPA) -> float:
    """Average over sequences of ``S 1{y=X_i} 1{tail_l=X_j} / (mu_hat(y) + kappa) - 1``."""
    if not (1 <= ell <= ds.K and 1 <= j < i <= ds.T):
        raise IndexOutOfRange(f"need 1 <= l <= {ds.K} and 1 <= j < i <= {ds.T}")
    w, A, B = _pieces(ds, kappa)
    return float(np.mean(w * A[:, i - 1] * B[ell - 1][:, j - 1]) - 1.0)


def estimate_table(ds: Dataset, dag: Dag, kappa: float = DEFAULT_KAPPA,
                   n_boot: int = 200, seed: int = 0) -> tuple[KgmiTable, np.ndarray]:
    """Estimated table for all heads and pairs plus bootstrap standard errors.

    Returns
    -------
    table : KgmiTable
        ``mode == "estimated"``.
    se : ndarray, shape (K, T, T)
        Standard deviation of the table over ``n_boot`` resamples of sequences.
    """
    w, A, B = _pieces(ds, kappa)
    N = ds.N
    wA = w[:, None] * A
    Bt = B.transpose(0, 2, 1)
    est = (Bt @ wA) / N - 1.0
    se = np.zeros_like(est)
    if n_boot > 0:
        rng = np.random.default_rng(seed)
        acc = np.zeros_like(est)
        acc2 = np.zeros_like(est)
        for _ in range(n_boot):
            c = rng.multinomial(N, np.full(N, 1.0 / N)).astype(float)
            b = (Bt @ (c[:, None] * wA)) / N - 1.0
            acc += b
            acc2 += b * b
        mean = acc / n_boot
        se = np.sqrt(np.maximum(acc2 / n_boot - mean**2, 0.0) * n_boot / max(n_boot - 1, 1))
    mask = ~np.triu(np.ones((ds.T, ds.T), bool), 1)
    se[:, mask] = 0.0
    return make_table(est, dag, FKind.PearsonChi2.value, ESTIMATED), se
