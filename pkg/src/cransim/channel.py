"""Correlated Rician channel synthesis.

Per drop we build three complex channel matrices, all with the same recipe
(small-scale Rician fading, Kronecker spatial coloring, lognormal shadowing,
3GPP path loss applied as linear amplitude gains):

* ``h``       in-AD RRH antennas -> in-AD users, K x (N*M)
* ``h_cross`` external antennas  -> in-AD users, K x (N_out*M_out)
* ``h_out``   external antennas  -> external users (the external tier's own
              system, needed to precode the interference it radiates)

Transmit-side correlation has exponential intra-RRH blocks and distance-driven
entries between RRHs; receive-side correlation is distance-driven between
users. Both may come out indefinite, so they pass through a clip-and-rescale
PSD repair before the matrix square roots are taken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Deployment, ScenarioConfig


def path_loss_db(d_m) -> np.ndarray:
    """3GPP-style path loss in dB at distance d_m meters (valid for d >= 1)."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("path_loss_db requires distances >= 1 m")
    return 36.3 + 37.6 * np.log10(d)


def rician_params(k_factor: float) -> tuple[float, float]:
    """Mean and std of the real part of the unit-power Rician coefficient."""
    if k_factor < 0:
        raise ValueError("Rician factor must be >= 0")
    if np.isinf(k_factor):
        return 1.0, 0.0
    mu = np.sqrt(k_factor / (k_factor + 1.0))
    sigma = np.sqrt(1.0 / (2.0 * k_factor + 2.0))
    return float(mu), float(sigma)


def _eigh(a: np.ndarray):
    """Symmetric eigendecomposition with an SVD fallback.

    Threaded LAPACK divide-and-conquer occasionally fails to converge on
    large correlation matrices whose block structure produces eigenvalues
    with huge multiplicities; the SVD route (singular values with signs
    recovered from u_i . v_i) is slower but dependable.
    """
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError:
        u, s, vt = np.linalg.svd(a)
        sign = np.sign(np.einsum("ij,ji->j", u, vt))
        sign[sign == 0] = 1.0
        lam = s * sign
        order = np.argsort(lam)
        return lam[order], u[:, order]


def psd_repair(r: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues to zero and rescale the diagonal back to 1.

    The ceiling-exponent correlation models are not guaranteed PSD; this is
    the minimal repair that keeps their structure. Idempotent on matrices
    that are already PSD with unit diagonal.
    """
    s = 0.5 * (r + r.T)
    w, v = _eigh(s)
    if w[0] >= 0.0:
        repaired = s
    else:
        repaired = (v * np.clip(w, 0.0, None)) @ v.T
    d = np.diag(repaired).copy()
    d[d <= 0.0] = 1.0
    scale = 1.0 / np.sqrt(d)
    repaired = repaired * np.outer(scale, scale)
    return 0.5 * (repaired + repaired.T)


def sqrt_psd(r: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root (eigenvalues clipped at zero)."""
    w, v = _eigh(r)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def tx_correlation(d_rrh_rrh: np.ndarray, d_min: float, m_ant: int, rho_t: float, rho_t_prime: float) -> np.ndarray:
    """Transmit correlation over n*m antennas: exponential m x m blocks per
    RRH, distance-ratio entries between different RRHs, then PSD repair."""
    n = d_rrh_rrh.shape[0]
    idx = np.arange(m_ant)
    block = rho_t ** np.abs(np.subtract.outer(idx, idx))
    r = np.empty((n * m_ant, n * m_ant))
    for i in range(n):
        for j in range(n):
            if i == j:
                r[i * m_ant : (i + 1) * m_ant, j * m_ant : (j + 1) * m_ant] = block
            else:
                hops = np.ceil(d_rrh_rrh[i, j] / d_min)
                r[i * m_ant : (i + 1) * m_ant, j * m_ant : (j + 1) * m_ant] = rho_t_prime**hops
    return psd_repair(r)


def rx_correlation(d_user_user: np.ndarray, d_min: float, rho_r: float) -> np.ndarray:
    """Receive correlation over users from pairwise distance ratios."""
    k = d_user_user.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    if k == 1:
        return np.ones((1, 1))
    r = rho_r ** np.ceil(d_user_user / d_min)
    np.fill_diagonal(r, 1.0)
    return psd_repair(r)


def build_tx_correlation(dep: Deployment, cfg: ScenarioConfig) -> np.ndarray:
    return tx_correlation(dep.d_rrh_rrh, dep.d_min_rrh, cfg.m_ant, cfg.rho_t, cfg.rho_t_prime)


def build_rx_correlation(dep: Deployment, cfg: ScenarioConfig) -> np.ndarray:
    return rx_correlation(dep.d_user_user, dep.d_min_user, cfg.rho_r)


@dataclass(frozen=True)
class FadingDraw:
    """One small-scale + shadow fading realization.

    ``eta`` is (n_rx, n_tx * m_ant) complex with E|eta|^2 = 1; ``zeta_db`` is
    (n_tx, n_rx) shadow fading in dB, shared by the antennas of one RRH.
    """

    eta: np.ndarray
    zeta_db: np.ndarray


def draw_fading(rng_fading, rng_shadow, n_rx: int, n_tx: int, m_ant: int, k_factor: float, shadow_sigma_db: float) -> FadingDraw:
    mu, sigma = rician_params(k_factor)
    shape = (n_rx, n_tx * m_ant)
    eta = rng_fading.normal(mu, sigma, shape) + 1j * rng_fading.normal(0.0, sigma, shape)
    zeta_db = rng_shadow.normal(0.0, shadow_sigma_db, (n_tx, n_rx))
    return FadingDraw(eta=eta, zeta_db=zeta_db)


def color_fading(eta: np.ndarray, rx_sqrt: np.ndarray, tx_sqrt: np.ndarray) -> np.ndarray:
    """Kronecker coloring: pre/post multiply by the correlation square roots."""
    return rx_sqrt @ eta @ tx_sqrt


@dataclass(frozen=True)
class ChannelSet:
    """All channel matrices and correlation matrices for one drop."""

    h: np.ndarray
    h_cross: np.ndarray | None
    r_tx: np.ndarray
    r_rx: np.ndarray
    h_out: np.ndarray | None = None
    r_tx_out: np.ndarray | None = None
    r_rx_out: np.ndarray | None = None


def _link_channel(fading: FadingDraw, rx_sqrt, tx_sqrt, d_tx_rx: np.ndarray, m_ant: int) -> np.ndarray:
    colored = color_fading(fading.eta, rx_sqrt, tx_sqrt)
    # Amplitude scale per (user, RRH): sqrt of linear shadow times path gain.
    amp_db = 0.5 * fading.zeta_db.T - 0.5 * path_loss_db(d_tx_rx).T
    scale = np.repeat(10.0 ** (amp_db / 10.0), m_ant, axis=1)
    return colored * scale


def synthesize(dep: Deployment, cfg: ScenarioConfig, seed: int) -> ChannelSet:
    """Synthesize the in-AD channel and, if enabled, the external-tier ones.

    Deterministic per (dep, cfg, seed). The in-AD matrices use their own
    random substreams so they do not change when the external tier is
    switched on or off.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1))
    rngs = [np.random.default_rng(c) for c in ss.spawn(6)]

    r_tx = build_tx_correlation(dep, cfg)
    r_rx = build_rx_correlation(dep, cfg)
    tx_sqrt = sqrt_psd(r_tx)
    rx_sqrt = sqrt_psd(r_rx)

    fad = draw_fading(rngs[0], rngs[1], cfg.n_users, cfg.n_rrh, cfg.m_ant, cfg.rician_k, cfg.shadow_sigma_db)
    h = _link_channel(fad, rx_sqrt, tx_sqrt, dep.d_rrh_user, cfg.m_ant)

    if not cfg.external_interference:
        return ChannelSet(h=h, h_cross=None, r_tx=r_tx, r_rx=r_rx)

    r_tx_out = tx_correlation(dep.d_out_rrh_out_rrh, dep.d_min_out_rrh, cfg.m_out, cfg.rho_t, cfg.rho_t_prime)
    r_rx_out = rx_correlation(dep.d_out_user_out_user, dep.d_min_out_user, cfg.rho_r)
    tx_out_sqrt = sqrt_psd(r_tx_out)
    rx_out_sqrt = sqrt_psd(r_rx_out)

    fad_cross = draw_fading(rngs[2], rngs[3], cfg.n_users, cfg.n_out, cfg.m_out, cfg.rician_k, cfg.shadow_sigma_db)
    h_cross = _link_channel(fad_cross, rx_sqrt, tx_out_sqrt, dep.d_out_rrh_user, cfg.m_out)

    fad_out = draw_fading(rngs[4], rngs[5], cfg.k_out, cfg.n_out, cfg.m_out, cfg.rician_k, cfg.shadow_sigma_db)
    h_out = _link_channel(fad_out, rx_out_sqrt, tx_out_sqrt, dep.d_out_rrh_out_user, cfg.m_out)

    return ChannelSet(
        h=h, h_cross=h_cross, r_tx=r_tx, r_rx=r_rx, h_out=h_out, r_tx_out=r_tx_out, r_rx_out=r_rx_out
    )


def save_channel_dump(path, channel_sets: list[ChannelSet], m_ant: int, drop_seeds=None) -> None:
    """Write per-drop H / H_cross records with index metadata (npz format)."""
    arrays: dict[str, np.ndarray] = {}
    for i, ch in enumerate(channel_sets):
        arrays[f"drop{i:04d}_h"] = ch.h
        if ch.h_cross is not None:
            arrays[f"drop{i:04d}_h_cross"] = ch.h_cross
    if channel_sets:
        k, nm = channel_sets[0].h.shape
        arrays["row_user_index"] = np.arange(k)
        arrays["col_rrh_index"] = np.repeat(np.arange(nm // m_ant), m_ant)
        arrays["col_antenna_index"] = np.tile(np.arange(m_ant), nm // m_ant)
    arrays["n_drops"] = np.array([len(channel_sets)])
    if drop_seeds is not None:
        arrays["drop_seeds"] = np.asarray(drop_seeds, dtype=np.uint64)
    np.savez_compressed(path, **arrays)


def load_channel_dump(path) -> list[dict]:
    """Read back a channel dump written by :func:`save_channel_dump`."""
    data = np.load(path)
    n = int(data["n_drops"][0]) if "n_drops" in data else 0
    records = []
    for i in range(n):
        rec = {"h": data[f"drop{i:04d}_h"]}
        key = f"drop{i:04d}_h_cross"
        if key in data:
            rec["h_cross"] = data[key]
        records.append(rec)
    return records
