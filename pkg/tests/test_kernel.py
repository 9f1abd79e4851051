import json

import numpy as np
import pytest

from kgmi.errors import DomainError, NonPositiveEntry, RowSumError
from kgmi.kernel import (KernelMixture, build_kernel, coordinate_marginals, kernel_from_dict, kernel_stats,
                         kernel_to_json, lift_kernel, marginal_kernels, paper_kernel, reduce_kernel,
                         spectral_norm, stationary)
from oracles import marginal_kernels_loop, paper_table, stationary_eig

# stationary marginal of the benchmark kernel with zero offsets, frozen from stationary_eig
MU_P0 = np.array([0.27368108, 0.3582921, 0.36802682])
LAMBDA_P0 = 0.170016543980273


def uniform_kernel(S=3, K=2):
    return build_kernel(S, K, np.full((S,) * K + (S,), 1.0 / S))


def test_build_kernel_validation():
    build_kernel(2, 1, [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(RowSumError):
        build_kernel(2, 1, [[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(NonPositiveEntry):
        build_kernel(2, 1, [[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(DomainError):
        build_kernel(2, 1, [[0.5, 0.5]])


def test_paper_kernel_rows():
    k = paper_kernel()
    assert np.allclose(k.row((0, 0)), (0.1, 0.5, 0.4))
    assert np.allclose(k.row((2, 2)), (0.2, 0.3, 0.5))
    assert np.array_equal(k.table, paper_table())
    p = np.zeros(9)
    p[0] = 0.1
    assert np.allclose(paper_kernel(p).row((0, 0)), (0.1, 0.4, 0.5))
    p[0] = 0.5
    with pytest.raises(NonPositiveEntry):
        paper_kernel(p)


def test_kernel_json_round_trip():
    k = paper_kernel(np.linspace(-0.05, 0.05, 9))
    back = kernel_from_dict(json.loads(kernel_to_json(k)))
    assert np.array_equal(back.table, k.table)
    assert kernel_from_dict({"paper_kernel": {"p": [0] * 9}}).table[0, 0, 0] == 0.1


def test_lift_kernel():
    k1 = build_kernel(2, 1, [[0.3, 0.7], [0.6, 0.4]])
    assert np.allclose(lift_kernel(k1), k1.table)
    rng = np.random.default_rng(1)
    t = rng.uniform(0.1, 1, (2, 2, 2))
    k2 = build_kernel(2, 2, t / t.sum(-1, keepdims=True))
    L = lift_kernel(k2)
    assert np.all((L > 0).sum(axis=1) == 2)
    assert np.allclose(L.sum(axis=1), 1)
    Lp = lift_kernel(paper_kernel())
    # (0,0) -> (0,1) has index 0 -> 1
    assert Lp[0, 1] == pytest.approx(0.5)


def test_stationary_uniform():
    M, mu = stationary(uniform_kernel())
    assert np.allclose(M, 1 / 9) and np.allclose(mu, 1 / 3)


def test_stationary_paper_against_eigen_oracle():
    M, mu = stationary(paper_kernel())
    assert np.allclose(M, stationary_eig(paper_table()), atol=1e-10)
    assert np.allclose(mu, MU_P0, atol=1e-8)
    L = lift_kernel(paper_kernel())
    assert np.max(np.abs(M.ravel() @ L - M.ravel())) < 1e-12


def test_stationarity_identities():
    k = paper_kernel()
    st = kernel_stats(k)
    cm = coordinate_marginals(st.M)
    assert np.max(np.abs(cm - cm[0])) < 1e-10
    # sum_s M(s) pi(s'|s) = mu(s')
    assert np.allclose(np.einsum("ab,abc->c", st.M, k.table), st.mu, atol=1e-10)
    for pk in st.marginals:
        assert np.allclose(st.mu @ pk, st.mu, atol=1e-10)
        assert np.allclose(pk.sum(axis=1), 1)


def test_marginal_kernels_oracle():
    k = paper_kernel()
    M, mu = stationary(k)
    assert np.allclose(marginal_kernels(k, M, mu), marginal_kernels_loop(paper_table(), M), atol=1e-14)


def test_marginal_kernels_special_cases():
    st = kernel_stats(uniform_kernel())
    assert np.allclose(st.marginals, 1 / 3)
    assert not st.assumption1
    q = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2], [0.1, 0.1, 0.8]])
    k = build_kernel(3, 2, np.broadcast_to(q[:, None, :], (3, 3, 3)))
    st = kernel_stats(k)
    assert np.allclose(st.marginals[0], q, atol=1e-12)
    st = kernel_stats(paper_kernel())
    assert st.assumption1 and np.max(np.abs(st.marginals[0] - st.marginals[1])) > 0


def test_spectral_stats():
    st = kernel_stats(uniform_kernel())
    assert st.lam < 1e-12 and np.allclose(st.B, 0)
    st = kernel_stats(paper_kernel())
    svd = max(np.linalg.svd(b, compute_uv=False)[0] for b in st.B)
    assert st.lam == pytest.approx(svd, abs=1e-10)
    assert st.lam == pytest.approx(LAMBDA_P0, abs=1e-10)
    assert st.gamma == pytest.approx(0.3)
    assert st.lam <= 1 - st.gamma / 3


@pytest.mark.parametrize("seed", range(5))
def test_gamma_positivity_consequences(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.2, 1, (3, 3, 3))
    k = build_kernel(3, 2, t / t.sum(-1, keepdims=True))
    st = kernel_stats(k)
    assert st.mu.min() >= st.gamma / 3 - 1e-12
    assert st.marginals.min() >= st.gamma / 3 - 1e-12
    assert st.lam <= 1 - st.gamma / 3
    G = rng.normal(size=(4, 4))
    assert spectral_norm(G) == pytest.approx(np.linalg.norm(G, 2), rel=1e-9)


def test_reduce_kernel():
    k = paper_kernel()
    st = kernel_stats(k)
    assert np.allclose(reduce_kernel(k, [1, 2], st.mu).table, k.table)
    assert np.allclose(reduce_kernel(uniform_kernel(), [2], np.full(3, 1 / 3)).table, 1 / 3)
    r = reduce_kernel(k, [1], st.mu)
    assert r.K == 1
    assert np.max(np.abs(r.table.sum(axis=1) - 1)) < 1e-12
    manual = np.einsum("abc,b->ac", k.table, st.mu)
    assert np.allclose(r.table, manual, atol=1e-14)
    # averaging against mu x mu instead of M does not keep mu stationary for this kernel;
    # the drift is frozen here so any change in the reduction is noticed
    drift = st.mu @ r.table - st.mu
    assert np.allclose(drift, [0.01109564, -0.00410229, -0.00699336], atol=1e-8)
    assert abs(drift.sum()) < 1e-12


def test_mixture():
    k = paper_kernel()
    m = KernelMixture.point_mass(k)
    assert m.S == 3 and m.K == 2
    with pytest.raises(DomainError):
        KernelMixture(((0.5, k),))
