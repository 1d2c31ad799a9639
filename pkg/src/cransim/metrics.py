"""SINR, sum-rate, overhead-adjusted sum-rate, and ECDF statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .precoding import PrecodeResult
from .scenario import ScenarioConfig


class OverheadError(ValueError):
    """Training overhead meets or exceeds the downlink symbol budget."""


@dataclass(frozen=True)
class RateReport:
    """Per-user SINRs and the drop's (adjusted) sum-rate."""

    sinr: np.ndarray                 # (K,) linear
    rate: np.ndarray                 # (K,) bits/s/Hz
    sum_rate: float                  # bits/s/Hz
    adjusted_sum_rate: float         # bits/s/Hz after the training discount
    omega: float                     # training symbols per second
    interference_split: np.ndarray   # (K, 3): intra-AD, external, noise power


def sinr_all(ch: ChannelSet, pre: PrecodeResult, cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-user SINR and its (intra, external, noise) denominator split.

    Transmit powers are already embedded in the precoder columns. The
    external term is dropped when external interference is disabled.
    """
    k = ch.h.shape[0]
    if pre.w.shape != (ch.h.shape[1], k):
        raise ValueError(f"precoder shape {pre.w.shape} does not match channel {ch.h.shape}")
    g2 = np.abs(ch.h @ pre.w) ** 2
    sig = np.diag(g2).copy()
    np.fill_diagonal(g2, 0.0)
    intra = g2.sum(axis=1)  # off-diagonal sum, exact even under zero forcing
    if cfg.external_interference and pre.w_out is not None:
        if ch.h_cross is None:
            raise ValueError("external interference enabled but h_cross missing")
        if pre.w_out.shape[0] != ch.h_cross.shape[1]:
            raise ValueError("external precoder does not match h_cross")
        ext = (np.abs(ch.h_cross @ pre.w_out) ** 2).sum(axis=1)
    else:
        ext = np.zeros(k)
    noise = np.full(k, cfg.noise_mw)
    sinr = sig / (intra + ext + noise)
    return sinr, np.stack([intra, ext, noise], axis=1)


def sum_rate(sinr: np.ndarray) -> float:
    """Shannon sum-rate in bits/s/Hz over all users."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR values must be nonnegative")
    return float(np.log2(1.0 + sinr).sum())


def training_overhead(cfg: ScenarioConfig) -> float:
    """Phase-synchronization training symbols per second: one per user per
    piloting interval."""
    return cfg.n_users * cfg.pf_hz


def adjusted_sum_rate(raw_sum_rate: float, cfg: ScenarioConfig) -> float:
    """Discount the sum-rate by the fraction of symbols spent on training."""
    omega = training_overhead(cfg)
    if omega >= cfg.w_sym:
        raise OverheadError(f"overhead {omega} >= symbol budget {cfg.w_sym}")
    return (cfg.w_sym - omega) / cfg.w_sym * raw_sum_rate


def rate_report(ch: ChannelSet, pre: PrecodeResult, cfg: ScenarioConfig) -> RateReport:
    sinr, split = sinr_all(ch, pre, cfg)
    raw = sum_rate(sinr)
    return RateReport(
        sinr=sinr,
        rate=np.log2(1.0 + sinr),
        sum_rate=raw,
        adjusted_sum_rate=adjusted_sum_rate(raw, cfg),
        omega=training_overhead(cfg),
        interference_split=split,
    )


def ecdf(values) -> np.ndarray:
    """Empirical CDF: (n, 2) array of sorted values and step probabilities i/n."""
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        raise ValueError("ecdf requires at least one value")
    probs = np.arange(1, vals.size + 1) / vals.size
    return np.stack([vals, probs], axis=1)
