"""Transmit precoding: per-cluster zero-forcing and iterative WMMSE
coordinated beamforming.

Power is embedded in the precoder columns, so downstream SINR evaluation
needs no separate per-user power vector. ZFBF splits a cluster budget of
B * P_rrh equally over the cluster's users; WMMSE enforces the per-RRH
power constraint exactly (up to the bisection tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .association import Association
from .channel import ChannelSet
from .scenario import ScenarioConfig

if TYPE_CHECKING:  # avoids an import cycle with the clustering module
    from .clustering import Clustering

COND_LIMIT = 1e12
# Tight power bisection keeps the weighted-MSE objective monotone to well
# below 1e-8 even when beams ride the power constraint every iteration.
POWER_BISECT_TOL = 1e-11
ZERO_CHANNEL_NORM = 1e-15


class SingularChannelError(RuntimeError):
    """Cluster channel too close to rank deficient to invert."""


@dataclass(frozen=True)
class ScopeDiagnostics:
    """Convergence record of one WMMSE coordination scope."""

    iterations: int
    objective: float
    converged: bool
    history: np.ndarray  # weighted-MSE objective after each iteration


@dataclass(frozen=True)
class PrecodeResult:
    """Global precoders with power embedded in the column scaling.

    ``w`` is (N*M) x K; column k is supported only on the antennas serving
    user k. ``w_out`` is the external tier's precoder in the same convention
    (None when external interference is off).
    """

    w: np.ndarray
    w_out: np.ndarray | None = None
    scope_diagnostics: tuple[ScopeDiagnostics, ...] = field(default=())
    out_scope_diagnostics: tuple[ScopeDiagnostics, ...] = field(default=())

    @property
    def converged(self) -> bool:
        scopes = self.scope_diagnostics + self.out_scope_diagnostics
        return all(d.converged for d in scopes)


def zfbf_cluster(h_c: np.ndarray, p_budget_mw: float) -> np.ndarray:
    """Zero-forcing precoder for one cluster channel h_c (K_c x A_c).

    Rows are equilibrated before the pseudo-inverse; any right inverse has
    the same unit-normalized columns, and the equilibrated Gram matrix is a
    scale-free rank-deficiency measure. Columns carry power p_budget / K_c.
    """
    k_c, a_c = h_c.shape
    if k_c == 0:
        return np.zeros((a_c, 0), dtype=complex)
    if k_c > a_c:
        raise SingularChannelError(f"{k_c} users exceed {a_c} antennas")
    row_norms = np.linalg.norm(h_c, axis=1)
    if np.any(row_norms < ZERO_CHANNEL_NORM):
        raise SingularChannelError("user with vanishing channel in cluster")
    hs = h_c / row_norms[:, None]
    gram = hs @ hs.conj().T
    if np.linalg.cond(gram) > COND_LIMIT:
        raise SingularChannelError("cluster channel is rank deficient")
    raw = np.linalg.solve(gram, hs).conj().T
    raw /= np.linalg.norm(raw, axis=0)
    return raw * np.sqrt(p_budget_mw / k_c)


def _cluster_users(clusters, assoc: Association | None, n_users: int):
    """Served-user list per cluster; without an association (global ZFBF)
    the single cluster serves every user."""
    if assoc is None:
        if len(clusters) != 1:
            raise ValueError("association required unless there is a single global cluster")
        return [list(range(n_users))]
    return [[u for rrh in members for u in assoc.served[rrh]] for members in clusters]


def _antenna_cols(members, m_ant: int) -> np.ndarray:
    return np.concatenate([np.arange(r * m_ant, (r + 1) * m_ant) for r in members])


def assemble_zfbf(h: np.ndarray, clusters, users_per_cluster, m_ant: int, p_rrh_mw: float) -> np.ndarray:
    """Per-cluster ZFBF scattered into a global (total antennas) x K matrix."""
    n_users = h.shape[0]
    w = np.zeros((h.shape[1], n_users), dtype=complex)
    for members, users in zip(clusters, users_per_cluster):
        if not users:
            continue
        cols = _antenna_cols(members, m_ant)
        w_c = zfbf_cluster(h[np.ix_(users, cols)], len(members) * p_rrh_mw)
        w[np.ix_(cols, users)] = w_c
    return w


def zfbf_all(ch: ChannelSet, clus: Clustering, assoc: Association | None, cfg: ScenarioConfig) -> PrecodeResult:
    """ZFBF over all clusters of the in-AD system.

    Under global coordination the (single) cluster inverts the full channel
    for all K users and no association is needed.
    """
    users_per_cluster = _cluster_users(clus.clusters, assoc, cfg.n_users)
    w = assemble_zfbf(ch.h, clus.clusters, users_per_cluster, cfg.m_ant, cfg.p_rrh_mw)
    return PrecodeResult(w=w)


def wmmse_scope(
    h: np.ndarray,
    owner: np.ndarray,
    m_ant: int,
    p_rrh_mw: float,
    noise_mw: float,
    max_iter: int = 100,
    tol: float = 1e-5,
) -> tuple[np.ndarray, ScopeDiagnostics]:
    """Iterative WMMSE beamforming within one coordination scope.

    h is (K_s x B_s*m_ant); owner[k] is the local RRH index whose antennas
    carry user k's beam. Alternates scalar MMSE receivers, MSE weights
    1/mse, and per-RRH beamformers that minimize the weighted sum-MSE under
    that RRH's power cap (multiplier found on the eigenbasis of the quadratic
    term, so the cap is met by scalar bisection). The weighted objective
    sum_k (w_k mse_k - log w_k) is non-increasing across iterations.
    """
    k_s, a_s = h.shape
    b_s = a_s // m_ant
    cols = [np.arange(n * m_ant, (n + 1) * m_ant) for n in range(b_s)]
    users_of = [np.flatnonzero(owner == n) for n in range(b_s)]

    own_rows = np.zeros((k_s, m_ant), dtype=complex)
    for k in range(k_s):
        own_rows[k] = h[k, cols[owner[k]]]
    own_norm = np.linalg.norm(own_rows, axis=1)
    active = own_norm > ZERO_CHANNEL_NORM

    v = np.zeros((a_s, k_s), dtype=complex)
    for n in range(b_s):
        js = [j for j in users_of[n] if active[j]]
        if not js:
            continue
        scale = np.sqrt(p_rrh_mw / len(js))
        for j in js:
            v[cols[n], j] = scale * own_rows[j].conj() / own_norm[j]

    h_blocks = h.reshape(k_s, b_s, m_ant)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = h @ v
        akk = np.einsum("kk->k", g)
        g2 = np.abs(g) ** 2
        np.fill_diagonal(g2, 0.0)
        interf = g2.sum(axis=1)  # off-diagonal sum, exact (no cancellation)
        prx = interf + np.abs(akk) ** 2 + noise_mw
        u = np.where(active, akk / prx, 0.0)
        mse = np.where(active, (interf + noise_mw) / prx, 1.0)
        wgt = 1.0 / np.clip(mse, 1e-100, None)
        coef = wgt * np.abs(u) ** 2

        a_stack = np.einsum("k,kni,knj->nij", coef, h_blocks.conj(), h_blocks)
        lam, q = np.linalg.eigh(a_stack)
        lam = np.clip(lam, 0.0, None)

        v = np.zeros_like(v)
        for n in range(b_s):
            js = users_of[n][active[users_of[n]]]
            if js.size == 0:
                continue
            c = (wgt[js] * u[js]) * h[np.ix_(js, cols[n])].conj().T  # m x J_n
            ct = q[n].conj().T @ c
            g2 = np.abs(ct) ** 2
            lam_n = lam[n]
            v[np.ix_(cols[n], js)] = q[n] @ _power_scaled(ct, g2, lam_n, p_rrh_mw)

        # Objective with the just-updated beamformers and current (u, w).
        g = h @ v
        akk = np.einsum("kk->k", g)
        prx = (np.abs(g) ** 2).sum(axis=1) + noise_mw
        mse_full = np.abs(u) ** 2 * prx - 2.0 * np.real(np.conj(u) * akk) + 1.0
        obj = float(np.sum(wgt * mse_full - np.log(wgt)))
        history.append(obj)
        if it > 1 and abs(history[-2] - obj) <= tol * max(abs(history[-2]), 1e-12):
            converged = True
            break

    diag = ScopeDiagnostics(iterations=it, objective=history[-1], converged=converged, history=np.array(history))
    return v, diag


def _power_scaled(ct: np.ndarray, g2: np.ndarray, lam: np.ndarray, p_mw: float) -> np.ndarray:
    """Solve (A + mu I) v_j = c_j on A's eigenbasis with the smallest mu >= 0
    that keeps the total power within p_mw."""
    thresh = lam[-1] * 1e-12 if lam[-1] > 0 else 0.0
    pos = lam > thresh
    power0 = float((g2[pos] / lam[pos, None] ** 2).sum()) if pos.any() else 0.0
    if not pos.any() and g2.sum() > 0:
        # Quadratic term vanished; any positive mu is feasible, fall through
        # to bisection against the raw linear term.
        power0 = np.inf
    if power0 <= p_mw:
        out = np.zeros_like(ct)
        out[pos] = ct[pos] / lam[pos, None]
        return out
    lo, hi = 0.0, float(np.sqrt(g2.sum() / p_mw))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pw = float((g2 / (lam[:, None] + mid) ** 2).sum())
        if abs(pw - p_mw) <= POWER_BISECT_TOL * p_mw:
            hi = mid
            break
        if pw > p_mw:
            lo = mid
        else:
            hi = mid
    return ct / (lam[:, None] + hi)


def wmmse_cb(
    ch: ChannelSet,
    clus: Clustering,
    assoc: Association,
    cfg: ScenarioConfig,
    max_iter: int | None = None,
    tol: float | None = None,
) -> PrecodeResult:
    """WMMSE coordinated beamforming with one scope per cluster.

    Global coordination is the single all-RRH scope; local coordination runs
    one independent scope per cluster (inter-cluster interference is not seen
    by the optimizer, only by the evaluation).
    """
    max_iter = cfg.cb_max_iter if max_iter is None else max_iter
    tol = cfg.cb_tol if tol is None else tol
    w = np.zeros((cfg.n_rrh * cfg.m_ant, cfg.n_users), dtype=complex)
    diags = []
    for members in clus.clusters:
        users = [u for rrh in members for u in assoc.served[rrh]]
        if not users:
            continue
        cols = _antenna_cols(members, cfg.m_ant)
        local_rrh = {rrh: i for i, rrh in enumerate(members)}
        owner = np.array([local_rrh[int(assoc.owner[u])] for u in users])
        v, diag = wmmse_scope(
            ch.h[np.ix_(users, cols)], owner, cfg.m_ant, cfg.p_rrh_mw, cfg.noise_mw, max_iter, tol
        )
        w[np.ix_(cols, users)] = v
        diags.append(diag)
    return PrecodeResult(w=w, scope_diagnostics=tuple(diags))
