import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cransim import (
    ChannelSet,
    ScenarioConfig,
    build_rx_correlation,
    build_tx_correlation,
    draw_fading,
    load_channel_dump,
    path_loss_db,
    psd_repair,
    rician_params,
    save_channel_dump,
    sqrt_psd,
    synthesize,
)
from cransim.channel import color_fading, rx_correlation, tx_correlation
from cransim.scenario import Deployment, drop_deployment, pairwise_dist


def make_deployment(rrh_pos, user_pos):
    """Hand-built in-AD-only deployment for controlled channel tests."""
    rrh = np.asarray(rrh_pos, dtype=float)
    usr = np.asarray(user_pos, dtype=float)
    d_rr = pairwise_dist(rrh, rrh)
    d_uu = pairwise_dist(usr, usr)
    empty = np.zeros((0, 2))

    def min_off(d):
        n = d.shape[0]
        if n < 2:
            return float("inf")
        return float(d[~np.eye(n, dtype=bool)].min())

    return Deployment(
        rrh_pos=rrh,
        user_pos=usr,
        out_rrh_pos=empty,
        out_user_pos=empty,
        d_rrh_user=pairwise_dist(rrh, usr),
        d_out_rrh_user=np.zeros((0, len(usr))),
        d_rrh_rrh=d_rr,
        d_user_user=d_uu,
        d_min_rrh=min_off(d_rr),
        d_min_user=min_off(d_uu),
        d_out_rrh_out_rrh=np.zeros((0, 0)),
        d_out_user_out_user=np.zeros((0, 0)),
        d_out_rrh_out_user=np.zeros((0, 0)),
        d_min_out_rrh=float("inf"),
        d_min_out_user=float("inf"),
    )


# --- path loss -------------------------------------------------------------

def test_path_loss_reference_points():
    assert path_loss_db(1.0) == pytest.approx(36.3)
    assert path_loss_db(10.0) == pytest.approx(73.9)
    assert path_loss_db(100.0) == pytest.approx(111.5)


def test_path_loss_rejects_below_one_meter():
    with pytest.raises(ValueError):
        path_loss_db(0.5)


@given(st.floats(min_value=1.0, max_value=1e5), st.floats(min_value=1.0, max_value=1e5))
def test_path_loss_monotone(d1, d2):
    lo, hi = sorted([d1, d2])
    assert path_loss_db(lo) <= path_loss_db(hi)


# --- Rician parameters -----------------------------------------------------

def test_rician_params_reference():
    mu, sigma = rician_params(1.0)
    assert mu == pytest.approx(np.sqrt(0.5))
    assert sigma == pytest.approx(0.5)


def test_rician_params_rayleigh_limit():
    mu, sigma = rician_params(0.0)
    assert mu == 0.0
    assert sigma == pytest.approx(np.sqrt(0.5))


def test_rician_params_los_limit():
    assert rician_params(float("inf")) == (1.0, 0.0)


def test_rician_params_negative():
    with pytest.raises(ValueError):
        rician_params(-0.1)


@given(st.floats(min_value=0.0, max_value=1e6))
def test_rician_unit_power_identity(k):
    mu, sigma = rician_params(k)
    assert mu**2 + 2 * sigma**2 == pytest.approx(1.0)


def test_small_scale_unit_power():
    rng = np.random.default_rng(1)
    fad = draw_fading(rng, np.random.default_rng(2), 200, 50, 10, 1.0, 8.0)
    power = np.abs(fad.eta) ** 2
    assert power.size >= 100_000
    assert power.mean() == pytest.approx(1.0, rel=0.01)


# --- correlation matrices ---------------------------------------------------

def test_psd_repair_idempotent_on_psd():
    idx = np.arange(6)
    r = 0.5 ** np.abs(np.subtract.outer(idx, idx))  # exponential model is PSD
    before = np.linalg.eigvalsh(r)
    after = np.linalg.eigvalsh(psd_repair(r))
    assert np.max(np.abs(before - after)) < 1e-12


def test_psd_repair_fixes_indefinite():
    r = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.9], [0.0, 0.9, 1.0]])
    assert np.linalg.eigvalsh(r)[0] < 0
    fixed = psd_repair(r)
    assert np.linalg.eigvalsh(fixed)[0] >= -1e-12
    assert np.allclose(np.diag(fixed), 1.0)


def test_sqrt_psd_squares_back():
    idx = np.arange(5)
    r = 0.7 ** np.abs(np.subtract.outer(idx, idx))
    s = sqrt_psd(r)
    assert np.allclose(s @ s, r, atol=1e-12)


def test_tx_correlation_single_rrh_block():
    dep = make_deployment([[0, 0]], [[0, 1]])
    cfg = ScenarioConfig(n_rrh=1, m_ant=4, n_users=1, external_interference=False).validated()
    r = build_tx_correlation(dep, cfg)
    assert r.shape == (4, 4)
    assert np.allclose(np.diag(r), 1.0)
    assert r[0, 2] == pytest.approx(0.25)  # rho_t^2
    assert r[0, 1] == pytest.approx(0.5)


def test_tx_correlation_off_block_at_min_distance():
    # Two RRHs exactly d_min apart: hop count ceil(1) = 1, entry rho_t'.
    dep = make_deployment([[0, 0], [0, 50]], [[0, 1]])
    cfg = ScenarioConfig(n_rrh=2, m_ant=4, n_users=1, external_interference=False).validated()
    r = build_tx_correlation(dep, cfg)
    assert cfg.rho_t_prime == pytest.approx(0.0625)
    assert np.allclose(r[:4, 4:], 0.0625)
    assert np.allclose(r[4:, :4], 0.0625)


def test_rx_correlation_hop_counts():
    dep = make_deployment([[0, 0]], [[0, 0], [1, 0], [3.5, 0]])
    cfg = ScenarioConfig(n_rrh=1, m_ant=4, n_users=3, external_interference=False).validated()
    r = build_rx_correlation(dep, cfg)
    assert np.allclose(np.diag(r), 1.0)
    assert r[0, 1] == pytest.approx(0.5)     # d = d_min, one hop
    assert r[1, 2] == pytest.approx(0.125)   # d = 2.5 d_min -> ceil = 3
    assert r[0, 2] == pytest.approx(0.0625)  # d = 3.5 d_min -> ceil = 4


def test_rx_correlation_zero_rho_is_identity():
    d = pairwise_dist(np.array([[0.0, 0], [3, 0], [9, 0]]), np.array([[0.0, 0], [3, 0], [9, 0]]))
    r = rx_correlation(d, 3.0, 0.0)
    assert np.allclose(r, np.eye(3))


# --- synthesis ---------------------------------------------------------------

def test_synthesize_deterministic():
    cfg = ScenarioConfig().validated()
    dep = drop_deployment(cfg, 21)
    a = synthesize(dep, cfg, 99)
    b = synthesize(dep, cfg, 99)
    assert np.array_equal(a.h, b.h)
    assert np.array_equal(a.h_cross, b.h_cross)
    assert np.array_equal(a.h_out, b.h_out)
    c = synthesize(dep, cfg, 100)
    assert not np.array_equal(a.h, c.h)
    assert np.all(np.isfinite(a.h)) and np.all(a.h != 0)


def test_external_off_keeps_in_ad_channel():
    cfg_on = ScenarioConfig(external_interference=True).validated()
    cfg_off = ScenarioConfig(external_interference=False).validated()
    dep_on = drop_deployment(cfg_on, 4)
    dep_off = drop_deployment(cfg_off, 4)
    a = synthesize(dep_on, cfg_on, 7)
    b = synthesize(dep_off, cfg_off, 7)
    assert np.array_equal(a.h, b.h)
    assert b.h_cross is None and b.h_out is None


def test_mean_channel_power_at_one_meter():
    # Uncorrelated, no shadowing, every link at exactly 1 m: the mean power
    # must equal the 36.3 dB path gain since E|eta|^2 = 1.
    from dataclasses import replace as dc_replace

    m = 100
    angles = np.linspace(0, 2 * np.pi, m, endpoint=False)
    users = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dep = make_deployment([[0, 0]], users)
    dep = dc_replace(dep, d_rrh_user=np.ones((1, m)))
    cfg = ScenarioConfig(
        n_rrh=1, m_ant=m, n_users=m, users_per_rrh=m if m <= m else None,
        rho_t=0.0, rho_r=0.0, shadow_sigma_db=0.0, external_interference=False,
    ).validated()
    samples = []
    for seed in range(10):
        ch = synthesize(dep, cfg, seed)
        samples.append(np.abs(ch.h) ** 2)
    power = np.concatenate(samples)
    assert power.size >= 100_000
    assert power.mean() == pytest.approx(10 ** (-3.63), rel=0.02)


def test_los_only_limit_is_deterministic_path_gain():
    dep = make_deployment([[0, 0]], [[0, 10.0]])
    cfg = ScenarioConfig(
        n_rrh=1, m_ant=2, n_users=1, rician_k=float("inf"), rho_t=0.0, rho_r=0.0,
        shadow_sigma_db=0.0, external_interference=False,
    ).validated()
    ch = synthesize(dep, cfg, 0)
    expected = 10 ** (-path_loss_db(10.0) / 20)
    assert np.allclose(np.abs(ch.h), expected)
    again = synthesize(dep, cfg, 123)
    assert np.array_equal(ch.h, again.h)  # no randomness left


def _batched_colored(rx_sqrt, tx_sqrt, k_factor, n_draws, rng):
    k = rx_sqrt.shape[0]
    a = tx_sqrt.shape[0]
    mu, sigma = rician_params(k_factor)
    eta = rng.normal(mu, sigma, (n_draws, k, a)) + 1j * rng.normal(0.0, sigma, (n_draws, k, a))
    return np.einsum("ki,dia,an->dkn", rx_sqrt, eta, tx_sqrt)


def test_adjacent_antenna_correlation_matches_model():
    idx = np.arange(4)
    r_tx = 0.5 ** np.abs(np.subtract.outer(idx, idx))
    r_rx = np.eye(2)
    draws = _batched_colored(sqrt_psd(r_rx), sqrt_psd(r_tx), 1.0, 10_000, np.random.default_rng(3))
    x = draws[:, 0, 0]
    y = draws[:, 0, 1]
    xc = x - x.mean()
    yc = y - y.mean()
    corr = (xc * yc.conj()).mean() / (xc.std() * yc.std())
    assert abs(corr.real - 0.5) < 0.05
    assert abs(corr.imag) < 0.05


def test_kronecker_coloring_covariance():
    # Rayleigh draws (zero mean): cov(vec H) must match R_tx (x) R_rx.
    idx = np.arange(3)
    r_tx = 0.6 ** np.abs(np.subtract.outer(idx, idx))
    r_rx = np.array([[1.0, 0.4], [0.4, 1.0]])
    draws = _batched_colored(sqrt_psd(r_rx), sqrt_psd(r_tx), 0.0, 20_000, np.random.default_rng(4))
    flat = draws.reshape(draws.shape[0], -1)  # row-major: (user, antenna)
    emp = (flat[:, :, None] * flat[:, None, :].conj()).mean(axis=0)
    expected = np.kron(r_rx, r_tx)
    assert np.max(np.abs(emp - expected)) < 0.05


def test_color_fading_shape():
    rng = np.random.default_rng(0)
    eta = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    out = color_fading(eta, np.eye(3), np.eye(4))
    assert np.array_equal(out, eta)


def test_channel_dump_roundtrip(tmp_path):
    cfg = ScenarioConfig(n_rrh=2, m_ant=2, n_users=3, external_interference=False).validated()
    dep = drop_deployment(cfg, 1)
    sets = [synthesize(dep, cfg, s) for s in (10, 11)]
    path = tmp_path / "channels.npz"
    save_channel_dump(path, sets, cfg.m_ant, drop_seeds=[10, 11])
    records = load_channel_dump(path)
    assert len(records) == 2
    assert np.array_equal(records[0]["h"], sets[0].h)
    assert np.array_equal(records[1]["h"], sets[1].h)
