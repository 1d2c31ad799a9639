"""RRH clustering: trivial partitions for the GC/NC regimes and the greedy
sum-rate-driven partition for local coordination.

The greedy rule grows one cluster at a time. Each step adds the unassigned
RRH (with its associated users) whose inclusion maximizes the candidate
cluster's internal sum-rate, evaluated in isolation: interference from RRHs
outside the candidate set and from the external tier is ignored here and
only enters the final system evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .association import Association
from .channel import ChannelSet
from .scenario import ScenarioConfig

RateEval = Callable[[Sequence[int]], float]


@dataclass(frozen=True)
class Clustering:
    """Disjoint equal-size RRH clusters covering all RRHs."""

    clusters: tuple[tuple[int, ...], ...]
    member_of: np.ndarray  # (N,) cluster index per RRH


def _as_clustering(clusters: list[list[int]], n_rrh: int) -> Clustering:
    member_of = np.full(n_rrh, -1, dtype=int)
    for ci, members in enumerate(clusters):
        member_of[list(members)] = ci
    return Clustering(clusters=tuple(tuple(m) for m in clusters), member_of=member_of)


def cluster_trivial(cfg: ScenarioConfig) -> Clustering:
    """GC: one cluster of all RRHs. NC: one singleton cluster per RRH."""
    n = cfg.n_rrh
    if cfg.coordination == "GC":
        return _as_clustering([list(range(n))], n)
    if cfg.coordination == "NC":
        return _as_clustering([[i] for i in range(n)], n)
    raise ValueError("cluster_trivial applies to GC or NC only; use cluster_greedy for LC")


def internal_sum_rate(h_c: np.ndarray, w_c: np.ndarray, noise_mw: float) -> float:
    """Sum-rate of a cluster served by w_c, seeing only its own interference."""
    g = h_c @ w_c
    sig = np.abs(np.diag(g)) ** 2
    intra = (np.abs(g) ** 2).sum(axis=1) - sig
    return float(np.log2(1.0 + sig / (intra + noise_mw)).sum())


def make_rate_eval(
    h: np.ndarray,
    assoc: Association,
    m_ant: int,
    precoder: str,
    p_rrh_mw: float,
    noise_mw: float,
    cb_max_iter: int = 100,
    cb_tol: float = 1e-5,
) -> RateEval:
    """Evaluator mapping a candidate RRH set to its isolated internal
    sum-rate under the configured precoding scheme."""
    from .precoding import SingularChannelError, wmmse_scope, zfbf_cluster

    def rate_eval(members: Sequence[int]) -> float:
        users = [u for rrh in members for u in assoc.served[rrh]]
        if not users:
            return 0.0
        cols = np.concatenate([np.arange(r * m_ant, (r + 1) * m_ant) for r in members])
        h_c = h[np.ix_(users, cols)]
        if precoder == "ZFBF":
            if len(users) > cols.size:
                return -np.inf
            try:
                w_c = zfbf_cluster(h_c, len(members) * p_rrh_mw)
            except SingularChannelError:
                return -np.inf
        else:
            local = {rrh: i for i, rrh in enumerate(members)}
            owner = np.array([local[int(assoc.owner[u])] for u in users])
            w_c, _ = wmmse_scope(h_c, owner, m_ant, p_rrh_mw, noise_mw, cb_max_iter, cb_tol)
        return internal_sum_rate(h_c, w_c, noise_mw)

    return rate_eval


def cluster_greedy(
    ch: ChannelSet,
    assoc: Association,
    cfg: ScenarioConfig,
    rate_eval: RateEval | None = None,
) -> Clustering:
    """Greedy partition into C clusters of B RRHs each (LC regime).

    A new cluster is seeded with the unassigned RRH of maximal singleton
    rate, then grown one RRH at a time by the same maximization. Ties go to
    the lowest RRH index.
    """
    if cfg.n_clusters * cfg.cluster_size != cfg.n_rrh:
        raise ValueError("cluster_greedy requires C*B = N")
    if rate_eval is None:
        rate_eval = make_rate_eval(
            ch.h, assoc, cfg.m_ant, cfg.precoder, cfg.p_rrh_mw, cfg.noise_mw, cfg.cb_cluster_eval_iter, cfg.cb_tol
        )

    unassigned = list(range(cfg.n_rrh))  # kept ascending so argmax breaks ties low
    clusters: list[list[int]] = []
    for _ in range(cfg.n_clusters):
        members: list[int] = []
        while len(members) < cfg.cluster_size:
            scores = np.array([rate_eval(members + [r]) for r in unassigned])
            best = unassigned[int(np.argmax(scores))]
            members.append(best)
            unassigned.remove(best)
        clusters.append(members)
    return _as_clustering(clusters, cfg.n_rrh)
