import numpy as np
import pytest

from cransim import (
    ScenarioConfig,
    SingularChannelError,
    associate,
    cluster_greedy,
    cluster_trivial,
    drop_deployment,
    synthesize,
    wmmse_cb,
    wmmse_scope,
    zfbf_all,
    zfbf_cluster,
)


def rand_channel(rng, k, a):
    return (rng.normal(size=(k, a)) + 1j * rng.normal(size=(k, a))) / np.sqrt(2)


# --- ZFBF --------------------------------------------------------------------

def test_zfbf_identity_channel():
    w = zfbf_cluster(np.eye(2, dtype=complex), p_budget_mw=8.0)
    assert np.allclose(np.abs(w), 2.0 * np.eye(2))  # each column power 8/2 = 4
    assert np.allclose(np.linalg.norm(w, axis=0) ** 2, 4.0)


def test_zfbf_zero_forces_interference():
    rng = np.random.default_rng(0)
    h = rand_channel(rng, 4, 8)
    w = zfbf_cluster(h, 10.0)
    g = h @ w
    off = g - np.diag(np.diag(g))
    assert np.max(np.abs(off)) < 1e-9 * np.linalg.norm(h) * np.linalg.norm(w)


def test_zfbf_diagonal_product_and_power_split():
    rng = np.random.default_rng(1)
    h = rand_channel(rng, 3, 6)
    p = 12.0
    w = zfbf_cluster(h, p)
    assert np.allclose(np.linalg.norm(w, axis=0) ** 2, p / 3)
    g = h @ w
    assert np.all(np.abs(np.diag(g)) > 0)


def test_zfbf_rank_deficient_errors():
    h = np.array([[1.0, 0.0], [1.0, 0.0]], dtype=complex)
    with pytest.raises(SingularChannelError):
        zfbf_cluster(h, 1.0)


def test_zfbf_more_users_than_antennas_errors():
    rng = np.random.default_rng(2)
    with pytest.raises(SingularChannelError):
        zfbf_cluster(rand_channel(rng, 5, 4), 1.0)


def test_zfbf_empty_cluster():
    w = zfbf_cluster(np.zeros((0, 4), dtype=complex), 1.0)
    assert w.shape == (4, 0)


def test_zfbf_scaling_covariance():
    # Scaling the channel by gamma rotates the unit-norm columns by the
    # conjugate phase and leaves the zero-forcing structure unchanged.
    rng = np.random.default_rng(3)
    h = rand_channel(rng, 3, 5)
    gamma = 2.5 * np.exp(1j * 0.7)
    w1 = zfbf_cluster(h, 3.0)
    w2 = zfbf_cluster(gamma * h, 3.0)
    assert np.allclose(w2, w1 * np.exp(-1j * np.angle(gamma)), atol=1e-12)
    g = (gamma * h) @ w2
    off = g - np.diag(np.diag(g))
    assert np.max(np.abs(off)) < 1e-9 * np.max(np.abs(np.diag(g)))


def test_zfbf_all_gc_zero_interference():
    cfg = ScenarioConfig(external_interference=False).validated()
    dep = drop_deployment(cfg, 4)
    ch = synthesize(dep, cfg, 4)
    pre = zfbf_all(ch, cluster_trivial(cfg), None, cfg)
    g = ch.h @ pre.w
    sig = np.abs(np.diag(g)) ** 2
    intra = (np.abs(g) ** 2).sum(axis=1) - sig
    assert np.max(intra / sig) < 1e-12


def test_zfbf_all_lc_intra_cluster_clean_inter_cluster_dirty():
    cfg = ScenarioConfig(
        n_rrh=4, m_ant=2, n_users=4, users_per_rrh=1, coordination="LC",
        cluster_size=2, external_interference=False, noise_dbm=-110.0,
    ).validated()
    dep = drop_deployment(cfg, 9)
    ch = synthesize(dep, cfg, 9)
    assoc = associate(ch, cfg)
    clus = cluster_greedy(ch, assoc, cfg)
    pre = zfbf_all(ch, clus, assoc, cfg)
    g = np.abs(ch.h @ pre.w) ** 2
    sig = np.diag(g)
    cluster_of_user = {u: ci for ci, members in enumerate(clus.clusters) for r in members for u in assoc.served[r]}
    inter = 0.0
    for k in range(4):
        for j in range(4):
            if j == k:
                continue
            if cluster_of_user[j] == cluster_of_user[k]:
                assert g[k, j] < 1e-12 * sig[k]
            else:
                inter += g[k, j]
    assert inter > 0.0


def test_zfbf_support_confined_to_cluster():
    cfg = ScenarioConfig(
        n_rrh=4, m_ant=2, n_users=4, users_per_rrh=1, coordination="LC",
        cluster_size=2, external_interference=False,
    ).validated()
    dep = drop_deployment(cfg, 12)
    ch = synthesize(dep, cfg, 12)
    assoc = associate(ch, cfg)
    clus = cluster_greedy(ch, assoc, cfg)
    pre = zfbf_all(ch, clus, assoc, cfg)
    for u in range(4):
        cluster = clus.clusters[clus.member_of[assoc.owner[u]]]
        inside = np.concatenate([np.arange(r * 2, (r + 1) * 2) for r in cluster])
        outside = np.setdiff1d(np.arange(8), inside)
        assert np.all(pre.w[outside, u] == 0)
        assert np.linalg.norm(pre.w[inside, u]) > 0


def test_nc_equals_gc_for_single_rrh():
    gc = ScenarioConfig(n_rrh=1, m_ant=4, n_users=2, coordination="GC", external_interference=False).validated()
    nc = ScenarioConfig(n_rrh=1, m_ant=4, n_users=2, coordination="NC", external_interference=False).validated()
    dep = drop_deployment(gc, 6)
    ch = synthesize(dep, gc, 6)
    w_gc = zfbf_all(ch, cluster_trivial(gc), None, gc).w
    assoc = associate(ch, nc)
    w_nc = zfbf_all(ch, cluster_trivial(nc), assoc, nc).w
    assert np.allclose(w_gc, w_nc)


# --- WMMSE -------------------------------------------------------------------

def test_wmmse_single_user_matched_filter():
    rng = np.random.default_rng(10)
    for _ in range(50):
        m = int(rng.integers(2, 6))
        h = rand_channel(rng, 1, m)
        p = float(rng.uniform(0.5, 20.0))
        v, diag = wmmse_scope(h, np.array([0]), m, p, 1.0, max_iter=100, tol=1e-8)
        mf = h[0].conj() / np.linalg.norm(h[0])
        vk = v[:, 0]
        cos = np.abs(mf.conj() @ vk) / np.linalg.norm(vk)
        assert np.arccos(min(cos, 1.0)) < 1e-6
        assert np.linalg.norm(vk) ** 2 == pytest.approx(p, rel=1e-6)


def test_wmmse_objective_monotone():
    rng = np.random.default_rng(11)
    for _ in range(20):
        b = int(rng.integers(1, 4))
        m = int(rng.integers(2, 5))
        j = int(rng.integers(1, min(m, 2) + 1))
        h = rand_channel(rng, b * j, b * m)
        owner = np.repeat(np.arange(b), j)
        _, diag = wmmse_scope(h, owner, m, 10.0, 1.0, max_iter=60, tol=1e-12)
        assert np.all(np.diff(diag.history) <= 1e-8)


def test_wmmse_respects_per_rrh_power():
    rng = np.random.default_rng(12)
    b, m, j = 3, 4, 2
    p = 5.0
    h = rand_channel(rng, b * j, b * m)
    owner = np.repeat(np.arange(b), j)
    v, _ = wmmse_scope(h, owner, m, p, 1.0, max_iter=50, tol=1e-6)
    for n in range(b):
        users = np.flatnonzero(owner == n)
        power = np.linalg.norm(v[np.ix_(np.arange(n * m, (n + 1) * m), users)]) ** 2
        assert power <= p * (1 + 1e-6)


def test_wmmse_symmetric_instance_equal_rates():
    # Two RRHs, one user each, identical direct and identical cross gains:
    # the fixed point inherits the symmetry, so per-user rates match.
    m = 3
    rng = np.random.default_rng(13)
    a = rand_channel(rng, 1, m)[0]
    b = rand_channel(rng, 1, m)[0]
    h = np.zeros((2, 2 * m), dtype=complex)
    h[0, :m] = a
    h[0, m:] = b
    h[1, m:] = a
    h[1, :m] = b
    v, _ = wmmse_scope(h, np.array([0, 1]), m, 4.0, 1.0, max_iter=200, tol=1e-10)
    g = h @ v
    sig = np.abs(np.diag(g)) ** 2
    intra = (np.abs(g) ** 2).sum(axis=1) - sig
    rates = np.log2(1 + sig / (intra + 1.0))
    assert rates[0] == pytest.approx(rates[1], rel=1e-6)


def test_wmmse_support_and_column_presence():
    cfg = ScenarioConfig(
        n_rrh=3, m_ant=2, n_users=3, users_per_rrh=1, coordination="NC",
        precoder="CB", external_interference=False,
    ).validated()
    dep = drop_deployment(cfg, 14)
    ch = synthesize(dep, cfg, 14)
    assoc = associate(ch, cfg)
    pre = wmmse_cb(ch, cluster_trivial(cfg), assoc, cfg)
    for u in range(3):
        own = assoc.owner[u]
        inside = np.arange(own * 2, (own + 1) * 2)
        outside = np.setdiff1d(np.arange(6), inside)
        assert np.all(pre.w[outside, u] == 0)
        assert np.linalg.norm(pre.w[inside, u]) > 0
    assert len(pre.scope_diagnostics) == 3


def test_wmmse_gc_converges_and_reports():
    cfg = ScenarioConfig(
        n_rrh=4, m_ant=2, n_users=4, users_per_rrh=1, coordination="GC",
        precoder="CB", external_interference=False, noise_dbm=-90.0,
    ).validated()
    dep = drop_deployment(cfg, 15)
    ch = synthesize(dep, cfg, 15)
    assoc = associate(ch, cfg)
    pre = wmmse_cb(ch, cluster_trivial(cfg), assoc, cfg)
    d = pre.scope_diagnostics[0]
    assert d.history.size == d.iterations
    assert np.all(np.diff(d.history) <= 1e-8)


def test_wmmse_zero_channel_user_excluded():
    h = np.array([[1.0 + 0j, 0.5], [0.0, 0.0]])
    v, diag = wmmse_scope(h, np.array([0, 0]), 2, 2.0, 1.0, max_iter=50, tol=1e-8)
    assert np.all(v[:, 1] == 0)
    assert np.linalg.norm(v[:, 0]) > 0
