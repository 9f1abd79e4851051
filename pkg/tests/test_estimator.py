import itertools

import numpy as np
import pytest

from kgmi.errors import BadHyperparameter, EmptyIndexSet, IndexOutOfRange, NotExtended
from kgmi.estimator import EstimatorConfig, chi2_kgmi_estimate, empirical_mu, estimate_table
from kgmi.exactdist import exact_pair_joints
from kgmi.graph import meta_graph
from kgmi.kernel import kernel_stats, paper_kernel
from kgmi.sampler import Dataset, sample_dataset


@pytest.fixture(scope="module")
def bench():
    k = paper_kernel()
    return k, kernel_stats(k)


def single(seq, T, K=2, S=3):
    return Dataset(np.array([seq]), T, S, K, True, 0)


def expected_estimate(dag, k, st, kappa):
    """Exact expectation of the estimator by enumerating nodes, tail and label."""
    T, S, K = dag.T, k.S, k.K
    from kgmi.exactdist import component_law
    law = component_law(dag, list(range(1, T + 1)), k, st)
    out = np.zeros((K, T, T))
    for x in itertools.product(range(S), repeat=T):
        px = law[x]
        counts = np.bincount(x, minlength=S) / T
        for tail in itertools.product(range(S), repeat=K):
            for y in range(S):
                w = px * k.table[tail + (y,)] / S**K * S / (counts[y] + kappa)
                if w == 0:
                    continue
                for i in range(T):
                    if x[i] != y:
                        continue
                    for ell in range(K):
                        for j in range(i):
                            if x[j] == tail[ell]:
                                out[ell, j, i] += w
    return out - 1.0


def test_empirical_mu():
    assert np.allclose(empirical_mu(np.zeros(5, int), range(1, 6), 3), [1, 0, 0])
    assert np.allclose(empirical_mu([0, 1, 2, 0, 1, 2], range(1, 7), 3), 1 / 3)
    with pytest.raises(EmptyIndexSet):
        empirical_mu([0, 1], [], 3)
    with pytest.raises(IndexOutOfRange):
        empirical_mu([0, 1], [3], 3)


def test_empirical_mu_mean(bench):
    k, st = bench
    d = meta_graph("ten")
    X = sample_dataset(d, k, st, 100_000, seed=21).states
    mus = np.stack([(X == s).mean(axis=1) for s in range(3)], axis=1)
    target = exact_pair_joints(d, k, st).marginals.mean(axis=0)
    se = mus.std(axis=0) / np.sqrt(len(mus))
    assert np.all(np.abs(mus.mean(axis=0) - target) <= 3 * se)
    assert np.allclose(empirical_mu(X[0], range(1, 11), 3), mus[0])


def test_single_sequence_examples():
    ds = single(np.zeros(13, int), T=10)
    assert chi2_kgmi_estimate(ds, 1, 3, 1, kappa=0.0) == pytest.approx(2.0)
    seq = np.zeros(13, int)
    seq[12] = 1
    assert chi2_kgmi_estimate(single(seq, T=10), 1, 3, 1, kappa=0.0) == pytest.approx(-1.0)


def test_errors(bench):
    k, st = bench
    plain = sample_dataset(meta_graph("five"), k, st, 10, 0)
    with pytest.raises(NotExtended):
        chi2_kgmi_estimate(plain, 1, 3, 1)
    ext = sample_dataset(meta_graph("five"), k, st, 10, 0, extended=True)
    with pytest.raises(IndexOutOfRange):
        chi2_kgmi_estimate(ext, 3, 3, 1)
    with pytest.raises(IndexOutOfRange):
        chi2_kgmi_estimate(ext, 1, 2, 3)
    with pytest.raises(BadHyperparameter):
        EstimatorConfig(kappa=-1)
    assert EstimatorConfig(kappa=1e-3).supports_epsilon(0.004)


def test_table_matches_pointwise(bench):
    k, st = bench
    d = meta_graph("five")
    ds = sample_dataset(d, k, st, 2000, 1, extended=True)
    tab, se = estimate_table(ds, d, n_boot=20)
    assert tab.mode == "estimated"
    for ell in (1, 2):
        for i in range(2, 6):
            for j in range(1, i):
                assert tab.values[ell - 1, j - 1, i - 1] == pytest.approx(chi2_kgmi_estimate(ds, ell, i, j))
    assert np.all(se[:, np.tril_indices(5)[0], np.tril_indices(5)[1]] == 0)


def test_order_invariance_and_kappa_monotone(bench):
    k, st = bench
    d = meta_graph("five")
    ds = sample_dataset(d, k, st, 3000, 2, extended=True)
    perm = Dataset(ds.states[::-1].copy(), ds.T, ds.S, ds.K, True, ds.seed)
    a, _ = estimate_table(ds, d, n_boot=0)
    b, _ = estimate_table(perm, d, n_boot=0)
    assert np.allclose(a.values, b.values, atol=1e-12)
    prev = None
    for kappa in (0.0, 1e-3, 1e-2, 0.1):
        cur, _ = estimate_table(ds, d, kappa, n_boot=0)
        if prev is not None:
            assert np.all(cur.values <= prev.values + 1e-15)
        prev = cur


def test_unbiased_for_its_expectation(bench):
    k, st = bench
    d = meta_graph("five")
    exact = expected_estimate(d, k, st, 1e-3)
    ds = sample_dataset(d, k, st, 100_000, 8, extended=True)
    tab, se = estimate_table(ds, d, n_boot=100, seed=1)
    mask = np.triu(np.ones((5, 5), bool), 1)
    z = np.abs(tab.values - exact)[:, mask] / se[:, mask]
    assert z.max() < 4.0


def test_two_seeds_agree(bench):
    k, st = bench
    d = meta_graph("five")
    a, sa = estimate_table(sample_dataset(d, k, st, 50_000, 100, extended=True), d, n_boot=100, seed=1)
    b, sb = estimate_table(sample_dataset(d, k, st, 50_000, 200, extended=True), d, n_boot=100, seed=2)
    mask = np.triu(np.ones((5, 5), bool), 1)
    diff = np.abs(a.values - b.values)[:, mask]
    assert np.all(diff <= 3 * np.sqrt(sa**2 + sb**2)[:, mask])
