"""Scenario configuration and random node deployment.

A scenario is one antenna domain (AD): a square of side ``side_m`` meters
holding N multi-antenna radio heads (RRHs) and K single-antenna users,
surrounded by an external tier of RRHs and users occupying the ring of the
eight neighboring domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

COORDINATION_MODES = ("GC", "LC", "NC")
PRECODERS = ("ZFBF", "CB")
SWEEPABLE = ("p_rrh_dbm", "pf_hz", "n_users")

# Path-loss model is only valid from 1 m outward; closer users are redrawn.
MIN_LINK_DIST_M = 1.0

_REDRAW_LIMIT = 10_000


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """All tunables of one simulation scenario.

    Optional fields (``None``) are derived in :meth:`validated`:
    ``users_per_rrh`` from K/N, ``rho_t_prime`` from ``rho_t ** m_ant``,
    cluster counts from the coordination mode, and the external-tier sizes
    from the in-AD ones.
    """

    n_rrh: int = 24
    m_ant: int = 4
    n_users: int = 48
    users_per_rrh: int | None = None

    side_m: float = 250.0
    alpha: float = 3.76
    shadow_sigma_db: float = 8.0
    rician_k: float = 1.0

    rho_t: float = 0.5
    rho_r: float = 0.5
    rho_t_prime: float | None = None

    n_clusters: int | None = None
    cluster_size: int | None = None
    coordination: str = "GC"
    precoder: str = "ZFBF"

    p_rrh_dbm: float = 20.0
    # Noise floor placing the default scenario in the interference-limited
    # regime across the 0..30 dBm per-RRH power range.
    noise_dbm: float = -110.0
    external_interference: bool = True
    n_out: int | None = None
    m_out: int | None = None
    k_out: int | None = None

    pf_hz: float = 0.0
    w_sym: float = 14000.0

    n_drops: int = 200
    master_seed: int = 1
    sweep_param: str | None = None
    sweep_values: tuple = field(default=None)

    cb_max_iter: int = 100
    cb_tol: float = 1e-5
    # Iteration budget for the WMMSE runs inside the greedy-clustering
    # candidate evaluator; ranking candidates needs far less accuracy than
    # the final precoder.
    cb_cluster_eval_iter: int = 30

    def validated(self) -> "ScenarioConfig":
        """Return a fully-resolved copy, raising ConfigError on violations."""
        upd: dict = {}

        for name in ("n_rrh", "m_ant", "n_users"):
            if getattr(self, name) < (1 if name != "n_users" else 0):
                raise ConfigError(f"{name} must be positive")
        if self.side_m <= 0:
            raise ConfigError("side_m must be positive")
        if self.rician_k < 0:
            raise ConfigError("rician_k must be >= 0")
        if self.shadow_sigma_db < 0:
            raise ConfigError("shadow_sigma_db must be >= 0")
        if self.coordination not in COORDINATION_MODES:
            raise ConfigError(f"coordination must be one of {COORDINATION_MODES}")
        if self.precoder not in PRECODERS:
            raise ConfigError(f"precoder must be one of {PRECODERS}")
        if self.n_drops < 1:
            raise ConfigError("n_drops must be >= 1")

        n, m, k = self.n_rrh, self.m_ant, self.n_users
        if k > n * m:
            raise ConfigError(f"n_users={k} exceeds total antennas n_rrh*m_ant={n * m}")

        j = self.users_per_rrh
        if j is None:
            j = max(1, math.ceil(k / n))
            upd["users_per_rrh"] = j
        if j > m:
            raise ConfigError(f"users_per_rrh={j} exceeds m_ant={m}")
        if k > n * j:
            raise ConfigError(f"n_users={k} exceeds n_rrh*users_per_rrh={n * j}")

        if not 0.0 <= self.rho_t <= 1.0:
            raise ConfigError("rho_t must lie in [0, 1]")
        if not 0.0 <= self.rho_r <= 1.0:
            raise ConfigError("rho_r must lie in [0, 1]")
        rtp = self.rho_t_prime
        if rtp is None:
            rtp = self.rho_t**m
            upd["rho_t_prime"] = rtp
        if not 0.0 <= rtp <= self.rho_t:
            raise ConfigError("rho_t_prime must lie in [0, rho_t]")

        c, b = self.n_clusters, self.cluster_size
        if self.coordination == "GC":
            c, b = _check_forced(c, b, 1, n, "GC")
        elif self.coordination == "NC":
            c, b = _check_forced(c, b, n, 1, "NC")
        else:  # LC
            if b is None and c is None:
                raise ConfigError("coordination=LC requires cluster_size (or n_clusters)")
            if b is None:
                if n % c:
                    raise ConfigError(f"n_clusters={c} does not divide n_rrh={n}")
                b = n // c
            if c is None:
                if n % b:
                    raise ConfigError(f"cluster_size={b} does not divide n_rrh={n}")
                c = n // b
            if c * b != n:
                raise ConfigError(f"C*B != N (n_clusters={c} * cluster_size={b} != n_rrh={n})")
        upd["n_clusters"], upd["cluster_size"] = c, b

        n_out = 3 * n if self.n_out is None else self.n_out
        m_out = m if self.m_out is None else self.m_out
        k_out = (n_out * m_out) // 2 if self.k_out is None else self.k_out
        upd["n_out"], upd["m_out"], upd["k_out"] = n_out, m_out, k_out
        if self.external_interference:
            if n_out < 1 or m_out < 1 or k_out < 1:
                raise ConfigError("external tier sizes must be positive when enabled")
            if k_out > n_out * m_out:
                raise ConfigError(f"k_out={k_out} exceeds n_out*m_out={n_out * m_out}")
            if self.precoder == "ZFBF" and self.coordination == "LC" and n_out % b:
                raise ConfigError(f"cluster_size={b} does not divide n_out={n_out}")

        if self.pf_hz < 0:
            raise ConfigError("pf_hz must be >= 0")
        if self.w_sym <= 0:
            raise ConfigError("w_sym must be positive")
        if k * self.pf_hz >= self.w_sym:
            raise ConfigError(f"training overhead n_users*pf_hz={k * self.pf_hz} must stay below w_sym={self.w_sym}")

        if self.sweep_param is not None:
            if self.sweep_param not in SWEEPABLE:
                raise ConfigError(f"sweep_param must be one of {SWEEPABLE}")
            if not self.sweep_values:
                raise ConfigError("sweep_values must be a nonempty list when sweep_param is set")
            upd["sweep_values"] = tuple(self.sweep_values)

        if self.cb_max_iter < 1 or self.cb_tol <= 0:
            raise ConfigError("cb_max_iter must be >= 1 and cb_tol > 0")
        if self.cb_cluster_eval_iter < 1:
            raise ConfigError("cb_cluster_eval_iter must be >= 1")

        return replace(self, **upd)

    @property
    def p_rrh_mw(self) -> float:
        return 10.0 ** (self.p_rrh_dbm / 10.0)

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_dbm / 10.0)

    @property
    def users_per_out_rrh(self) -> int:
        return max(1, math.ceil(self.k_out / self.n_out))

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if d["sweep_values"] is not None:
            d["sweep_values"] = list(d["sweep_values"])
        return d


def _check_forced(c, b, want_c, want_b, mode):
    if c is not None and c != want_c:
        raise ConfigError(f"coordination={mode} forces n_clusters={want_c}, got {c}")
    if b is not None and b != want_b:
        raise ConfigError(f"coordination={mode} forces cluster_size={want_b}, got {b}")
    return want_c, want_b


_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}


def load_config(path) -> ScenarioConfig:
    """Load a flat YAML key-value config file and return a validated config.

    Missing keys fall back to the defaults above; unknown keys are an error.
    An empty file yields the full default scenario.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a flat key-value mapping")
    unknown = sorted(set(raw) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    for key, val in raw.items():
        if isinstance(val, dict):
            raise ConfigError(f"{path}: key '{key}' must be a scalar or list, not a mapping")
    if "sweep_values" in raw and raw["sweep_values"] is not None:
        raw["sweep_values"] = tuple(raw["sweep_values"])
    return ScenarioConfig(**raw).validated()


@dataclass(frozen=True)
class Deployment:
    """Node positions (meters) and all pairwise distances for one drop.

    ``out_*`` arrays cover the external tier in the 8-neighbor ring; they are
    empty when external interference is disabled. ``d_min_*`` are minimum
    pairwise distances over distinct same-type nodes (inf if fewer than two).
    """

    rrh_pos: np.ndarray
    user_pos: np.ndarray
    out_rrh_pos: np.ndarray
    out_user_pos: np.ndarray
    d_rrh_user: np.ndarray
    d_out_rrh_user: np.ndarray
    d_rrh_rrh: np.ndarray
    d_user_user: np.ndarray
    d_min_rrh: float
    d_min_user: float
    d_out_rrh_out_rrh: np.ndarray
    d_out_user_out_user: np.ndarray
    d_out_rrh_out_user: np.ndarray
    d_min_out_rrh: float
    d_min_out_user: float


def pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix between two (n, 2) point sets."""
    if a.size == 0 or b.size == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def _min_offdiag(d: np.ndarray) -> float:
    n = d.shape[0]
    if n < 2:
        return float("inf")
    mask = ~np.eye(n, dtype=bool)
    return float(d[mask].min())


def _draw_square(rng, n, side):
    return rng.uniform(0.0, side, size=(n, 2))


def _draw_ring(rng, n, side):
    # Uniform over the 3x3 super-square minus the central AD, via rejection.
    pts = np.empty((n, 2))
    got = 0
    while got < n:
        cand = rng.uniform(-side, 2.0 * side, size=(n - got, 2))
        inside = (
            (cand[:, 0] >= 0.0) & (cand[:, 0] <= side) & (cand[:, 1] >= 0.0) & (cand[:, 1] <= side)
        )
        keep = cand[~inside]
        pts[got : got + len(keep)] = keep
        got += len(keep)
    return pts


def _enforce(rng, pts, draw, anchors=None, min_anchor=MIN_LINK_DIST_M):
    """Redraw points that coincide with each other or sit closer than
    ``min_anchor`` to any anchor point."""
    for _ in range(_REDRAW_LIMIT):
        bad = np.zeros(len(pts), dtype=bool)
        if len(pts) > 1:
            d = pairwise_dist(pts, pts)
            np.fill_diagonal(d, np.inf)
            coincident = d.min(axis=1) == 0.0
            if coincident.any():
                # Redraw one of each coincident pair, keep the lower index.
                seen = np.zeros(len(pts), dtype=bool)
                for i in np.flatnonzero(coincident):
                    if not seen[i]:
                        partners = np.flatnonzero(d[i] == 0.0)
                        seen[partners] = True
                        bad[partners] = True
        if anchors is not None and len(anchors):
            da = pairwise_dist(pts, anchors)
            bad |= da.min(axis=1) < min_anchor
        if not bad.any():
            return pts
        pts[bad] = draw(rng, int(bad.sum()))
    raise RuntimeError("could not place nodes after redraw limit; check geometry")


def drop_deployment(cfg: ScenarioConfig, seed: int) -> Deployment:
    """Draw one random deployment: uniform in-AD nodes, uniform ring nodes.

    Deterministic for a fixed (cfg, seed). The in-AD draw consumes its own
    random substreams, so the in-AD geometry is identical whether or not the
    external tier is generated.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1))
    rng_rrh, rng_user, rng_orrh, rng_ouser = (np.random.default_rng(c) for c in ss.spawn(4))
    side = cfg.side_m

    rrh = _enforce(rng_rrh, _draw_square(rng_rrh, cfg.n_rrh, side), lambda r, n: _draw_square(r, n, side))
    users = _enforce(
        rng_user, _draw_square(rng_user, cfg.n_users, side), lambda r, n: _draw_square(r, n, side), anchors=rrh
    )

    if cfg.external_interference:
        orrh = _enforce(
            rng_orrh, _draw_ring(rng_orrh, cfg.n_out, side), lambda r, n: _draw_ring(r, n, side), anchors=users
        )
        ousers = _enforce(
            rng_ouser, _draw_ring(rng_ouser, cfg.k_out, side), lambda r, n: _draw_ring(r, n, side), anchors=orrh
        )
    else:
        orrh = np.zeros((0, 2))
        ousers = np.zeros((0, 2))

    d_rrh_rrh = pairwise_dist(rrh, rrh)
    d_user_user = pairwise_dist(users, users)
    d_orr = pairwise_dist(orrh, orrh)
    d_ouu = pairwise_dist(ousers, ousers)
    return Deployment(
        rrh_pos=rrh,
        user_pos=users,
        out_rrh_pos=orrh,
        out_user_pos=ousers,
        d_rrh_user=pairwise_dist(rrh, users),
        d_out_rrh_user=pairwise_dist(orrh, users),
        d_rrh_rrh=d_rrh_rrh,
        d_user_user=d_user_user,
        d_min_rrh=_min_offdiag(d_rrh_rrh),
        d_min_user=_min_offdiag(d_user_user),
        d_out_rrh_out_rrh=d_orr,
        d_out_user_out_user=d_ouu,
        d_out_rrh_out_user=pairwise_dist(orrh, ousers),
        d_min_out_rrh=_min_offdiag(d_orr),
        d_min_out_user=_min_offdiag(d_ouu),
    )
