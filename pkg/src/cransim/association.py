"""Greedy RRH-centric user association.

RRHs are visited in ascending index order; each takes the best unassigned
users measured by the squared norm of the user's channel vector toward that
RRH (ties go to the lower user index). The outcome depends on the visiting
order: permuting the RRHs may change the association. The fixed ascending
order keeps results reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class Association:
    """Per-RRH served-user lists and the inverse user->RRH map."""

    served: tuple[tuple[int, ...], ...]
    owner: np.ndarray  # (K,) int, -1 only if a user went unserved


def channel_gain_matrix(h: np.ndarray, m_ant: int) -> np.ndarray:
    """Aggregate gain ||h_{k,n}||^2 per (RRH n, user k), shape (N, K)."""
    k, nm = h.shape
    g = np.abs(h.reshape(k, nm // m_ant, m_ant)) ** 2
    return g.sum(axis=2).T


def greedy_associate(gain: np.ndarray, users_per_rrh: int) -> Association:
    n, k = gain.shape
    unassigned = np.ones(k, dtype=bool)
    served: list[tuple[int, ...]] = []
    owner = np.full(k, -1, dtype=int)
    for rrh in range(n):
        cand = np.flatnonzero(unassigned)
        if cand.size == 0:
            served.append(())
            continue
        # Stable sort on the negated metric keeps index order among ties.
        order = cand[np.argsort(-gain[rrh, cand], kind="stable")]
        picked = order[: min(users_per_rrh, cand.size)]
        unassigned[picked] = False
        owner[picked] = rrh
        served.append(tuple(int(u) for u in picked))
    return Association(served=tuple(served), owner=owner)


def associate(ch: ChannelSet, cfg: ScenarioConfig) -> Association:
    """Associate the in-AD users to in-AD RRHs."""
    return greedy_associate(channel_gain_matrix(ch.h, cfg.m_ant), cfg.users_per_rrh)


def associate_external(ch: ChannelSet, cfg: ScenarioConfig) -> Association:
    """Associate the external tier's own users to external RRHs."""
    return greedy_associate(channel_gain_matrix(ch.h_out, cfg.m_out), cfg.users_per_out_rrh)
