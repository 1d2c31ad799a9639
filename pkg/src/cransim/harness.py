"""Monte-Carlo engine: per-drop pipeline, sweeps, paired scheme comparison,
and file output (CSV + provenance + figures).

Every drop is a pure function of (config, drop seed). Drop seeds are stable
64-bit hashes of (master seed, axis index, drop index), so results do not
depend on execution order or parallelism, and two schemes compared under the
same master seed see identical deployments and fading.
"""

from __future__ import annotations

import json
import multiprocessing
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__  # noqa: F401  (re-exported into provenance)
from .association import Association, associate
from .channel import ChannelSet, synthesize
from .clustering import Clustering, cluster_greedy, cluster_trivial
from .metrics import RateReport, rate_report
from .precoding import PrecodeResult, SingularChannelError, wmmse_cb, zfbf_all
from .scenario import Deployment, ScenarioConfig, drop_deployment

MAX_DROP_ATTEMPTS = 5
REJECTION_RATE_LIMIT = 0.10

_U64 = 2**64 - 1


def derive_drop_seed(master_seed: int, axis_index: int, drop_index: int) -> int:
    """Stable 64-bit drop seed; independent of parallelism and scheme."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & _U64, spawn_key=(axis_index, drop_index))
    return int(ss.generate_state(1, np.uint64)[0])


def _subseed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed) & _U64, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DropContext:
    """Deployment plus channels: everything random about one drop."""

    dep: Deployment
    ch: ChannelSet


def build_drop_context(cfg: ScenarioConfig, drop_seed: int, attempt: int = 0) -> DropContext:
    dep = drop_deployment(cfg, _subseed(drop_seed, attempt, 0))
    ch = synthesize(dep, cfg, _subseed(drop_seed, attempt, 1))
    return DropContext(dep=dep, ch=ch)


def _external_view(cfg: ScenarioConfig) -> ScenarioConfig:
    """Config describing the external tier as a standalone system.

    Under ZFBF the tier mirrors the in-AD coordination mode; under CB each
    external RRH precodes for its own users (singleton scopes).
    """
    mode = cfg.coordination if cfg.precoder == "ZFBF" else "NC"
    if mode == "GC":
        c, b = 1, cfg.n_out
    elif mode == "NC":
        c, b = cfg.n_out, 1
    else:
        b = cfg.cluster_size
        c = cfg.n_out // b
    return replace(
        cfg,
        n_rrh=cfg.n_out,
        m_ant=cfg.m_out,
        n_users=cfg.k_out,
        users_per_rrh=cfg.users_per_out_rrh,
        coordination=mode,
        n_clusters=c,
        cluster_size=b,
        external_interference=False,
    )


def _external_channel_view(ch: ChannelSet) -> ChannelSet:
    return ChannelSet(h=ch.h_out, h_cross=None, r_tx=ch.r_tx_out, r_rx=ch.r_rx_out)


def _precode_system(ch: ChannelSet, cfg: ScenarioConfig):
    """Association, clustering, and precoding for one system (in-AD or the
    external tier viewed as its own system)."""
    if cfg.precoder == "ZFBF" and cfg.coordination == "GC":
        # The single global cluster jointly serves every user.
        assoc = None
        clus = cluster_trivial(cfg)
        pre = zfbf_all(ch, clus, None, cfg)
        return pre, assoc, clus
    assoc = associate(ch, cfg)
    clus = cluster_greedy(ch, assoc, cfg) if cfg.coordination == "LC" else cluster_trivial(cfg)
    if cfg.precoder == "ZFBF":
        pre = zfbf_all(ch, clus, assoc, cfg)
    else:
        pre = wmmse_cb(ch, clus, assoc, cfg)
    return pre, assoc, clus


def precode_external(ch: ChannelSet, cfg: ScenarioConfig) -> PrecodeResult:
    """Precoder of the external tier for its own users, same scheme as in-AD."""
    view = _external_view(cfg)
    pre, _, _ = _precode_system(_external_channel_view(ch), view)
    return pre


@dataclass(frozen=True)
class DropResult:
    """One drop's rates plus association/clustering provenance."""

    report: RateReport
    association: Association | None
    clustering: Clustering
    precode: PrecodeResult
    rejected: int
    drop_seed: int


def run_drop(cfg: ScenarioConfig, drop_seed: int) -> DropResult:
    """Full pipeline for one drop; singular channel draws are redrawn with a
    derived sub-seed (counted in ``rejected``)."""
    cfg = cfg.validated()
    last_err: Exception | None = None
    for attempt in range(MAX_DROP_ATTEMPTS):
        ctx = build_drop_context(cfg, drop_seed, attempt)
        try:
            pre, assoc, clus = _precode_system(ctx.ch, cfg)
            if cfg.external_interference:
                pre_out = precode_external(ctx.ch, cfg)
                pre = replace(pre, w_out=pre_out.w, out_scope_diagnostics=pre_out.scope_diagnostics)
            report = rate_report(ctx.ch, pre, cfg)
            return DropResult(
                report=report,
                association=assoc,
                clustering=clus,
                precode=pre,
                rejected=attempt,
                drop_seed=drop_seed,
            )
        except SingularChannelError as err:
            last_err = err
    raise SingularChannelError(f"drop seed {drop_seed} rejected {MAX_DROP_ATTEMPTS} times: {last_err}")


@dataclass(frozen=True)
class SweepResult:
    """Aggregated statistics per swept-axis point."""

    axis_param: str
    axis_values: tuple
    mean_sum_rate: np.ndarray
    mean_adjusted_sum_rate: np.ndarray
    std_error: np.ndarray
    n_drops: np.ndarray
    n_rejected: np.ndarray
    sum_rates: tuple          # per point: array of per-drop sum-rates
    adjusted_sum_rates: tuple
    provenance: dict


def _point_config(raw_cfg: ScenarioConfig, param: str | None, value) -> ScenarioConfig:
    if param is None:
        return raw_cfg.validated()
    overrides = {param: value}
    if param == "n_users":
        # Let the per-RRH quota re-derive unless the user pinned it.
        overrides["users_per_rrh"] = raw_cfg.users_per_rrh
    return replace(raw_cfg, **overrides).validated()


def _drop_task(args) -> tuple[float, float, int]:
    cfg, seed = args
    res = run_drop(cfg, seed)
    return res.report.sum_rate, res.report.adjusted_sum_rate, res.rejected


def _execute(tasks, worker, parallel: int):
    if parallel <= 1:
        return [worker(t) for t in tasks]
    with multiprocessing.Pool(parallel) as pool:
        return pool.map(worker, tasks)


def _aggregate(per_drop, n_requested: int):
    sums = np.array([r[0] for r in per_drop if r is not None])
    adjs = np.array([r[1] for r in per_drop if r is not None])
    rejected = sum(r[2] for r in per_drop if r is not None)
    rejected += MAX_DROP_ATTEMPTS * sum(1 for r in per_drop if r is None)
    if rejected > REJECTION_RATE_LIMIT * n_requested:
        raise RuntimeError(f"rejection rate {rejected}/{n_requested} exceeds {REJECTION_RATE_LIMIT:.0%}")
    se = float(sums.std(ddof=1) / np.sqrt(sums.size)) if sums.size > 1 else 0.0
    return sums, adjs, se, rejected


def _provenance(cfg: ScenarioConfig, **extra) -> dict:
    prov = {"config": cfg.as_dict(), "master_seed": cfg.master_seed, "code_version": __version__}
    prov.update(extra)
    return prov


def _run_axis(raw_cfg: ScenarioConfig, param: str | None, values, n_drops: int, parallel: int) -> SweepResult:
    axis_param = param if param is not None else "p_rrh_dbm"
    axis_values = tuple(values) if param is not None else (raw_cfg.validated().p_rrh_dbm,)
    base = raw_cfg.validated()

    means, adj_means, ses, counts, rejects, all_sums, all_adjs = [], [], [], [], [], [], []
    for ai, value in enumerate(axis_values):
        pcfg = _point_config(raw_cfg, param, value)
        tasks = [(pcfg, derive_drop_seed(base.master_seed, ai, d)) for d in range(n_drops)]
        per_drop = _execute(tasks, _safe_drop_task, parallel)
        sums, adjs, se, rejected = _aggregate(per_drop, n_drops)
        means.append(sums.mean())
        adj_means.append(adjs.mean())
        ses.append(se)
        counts.append(sums.size)
        rejects.append(rejected)
        all_sums.append(sums)
        all_adjs.append(adjs)

    return SweepResult(
        axis_param=axis_param,
        axis_values=axis_values,
        mean_sum_rate=np.array(means),
        mean_adjusted_sum_rate=np.array(adj_means),
        std_error=np.array(ses),
        n_drops=np.array(counts),
        n_rejected=np.array(rejects),
        sum_rates=tuple(all_sums),
        adjusted_sum_rates=tuple(all_adjs),
        provenance=_provenance(base, axis_param=axis_param, axis_values=list(axis_values), n_drops=n_drops),
    )


def _safe_drop_task(args):
    try:
        return _drop_task(args)
    except SingularChannelError:
        return None


def run_point(cfg: ScenarioConfig, n_drops: int | None = None, parallel: int = 1) -> SweepResult:
    """Monte-Carlo statistics for the configured scenario (no sweep)."""
    base = cfg.validated()
    return _run_axis(cfg, None, None, n_drops or base.n_drops, parallel)


def dump_channels(cfg: ScenarioConfig, path, n_drops: int | None = None) -> None:
    """Write the channel matrices of the first drops to a regression-fixture
    file (one H / H_cross record per drop)."""
    from .channel import save_channel_dump

    base = cfg.validated()
    n = n_drops or base.n_drops
    seeds = [derive_drop_seed(base.master_seed, 0, d) for d in range(n)]
    sets = [build_drop_context(base, s).ch for s in seeds]
    save_channel_dump(path, sets, base.m_ant, drop_seeds=seeds)


def run_sweep(cfg: ScenarioConfig, n_drops: int | None = None, parallel: int = 1) -> SweepResult:
    """Sweep the configured axis, n_drops independent drops per point."""
    base = cfg.validated()
    if base.sweep_param is None:
        raise ValueError("run_sweep requires sweep_param/sweep_values in the config")
    return _run_axis(cfg, base.sweep_param, base.sweep_values, n_drops or base.n_drops, parallel)


_VARIANT_RE = re.compile(r"^(GC|NC|LC(\d+))-(ZFBF|CB)$")


@dataclass(frozen=True)
class SchemeVariant:
    """One coordination/precoder combination, e.g. GC-ZFBF or LC4-CB."""

    name: str
    coordination: str
    precoder: str
    cluster_size: int | None = None


def parse_variant(spec: str) -> SchemeVariant:
    m = _VARIANT_RE.match(spec.strip())
    if not m:
        raise ValueError(f"variant '{spec}' is not of the form GC-ZFBF, NC-CB, or LC<B>-ZFBF")
    coord = "LC" if m.group(2) else m.group(1)
    size = int(m.group(2)) if m.group(2) else None
    return SchemeVariant(name=spec.strip(), coordination=coord, precoder=m.group(3), cluster_size=size)


def apply_variant(raw_cfg: ScenarioConfig, variant: SchemeVariant) -> ScenarioConfig:
    return replace(
        raw_cfg,
        coordination=variant.coordination,
        precoder=variant.precoder,
        cluster_size=variant.cluster_size,
        n_clusters=None,
    )


def _compare_drop_task(args):
    """Evaluate every variant on one shared drop context (paired seeds).

    A singular draw for any variant rejects the drop for all of them, so the
    pairing survives redraws.
    """
    point_cfgs, seed = args
    for attempt in range(MAX_DROP_ATTEMPTS):
        ctx = build_drop_context(point_cfgs[0][1], seed, attempt)
        out = {}
        ext_cache: dict[tuple, PrecodeResult] = {}
        try:
            for name, vcfg in point_cfgs:
                pre, _, _ = _precode_system(ctx.ch, vcfg)
                if vcfg.external_interference:
                    key = (vcfg.precoder, vcfg.coordination, vcfg.cluster_size) if vcfg.precoder == "ZFBF" else ("CB",)
                    if key not in ext_cache:
                        ext_cache[key] = precode_external(ctx.ch, vcfg)
                    pre = replace(pre, w_out=ext_cache[key].w)
                report = rate_report(ctx.ch, pre, vcfg)
                out[name] = (report.sum_rate, report.adjusted_sum_rate, attempt)
            return out
        except SingularChannelError:
            continue
    return None


def run_compare(
    raw_cfg: ScenarioConfig,
    variants: list[SchemeVariant],
    n_drops: int | None = None,
    parallel: int = 1,
) -> dict[str, SweepResult]:
    """Run several scheme variants on identical drops (variance pairing).

    All variants share deployment and fading per (axis value, drop index);
    only association, clustering, and precoding differ.
    """
    base = raw_cfg.validated()
    n_drops = n_drops or base.n_drops
    if base.sweep_param is not None:
        param, values = base.sweep_param, base.sweep_values
    else:
        param, values = None, (base.p_rrh_dbm,)
    axis_param = param if param is not None else "p_rrh_dbm"

    collected: dict[str, list[list]] = {v.name: [] for v in variants}
    for ai, value in enumerate(values):
        point_cfgs = [(v.name, _point_config(apply_variant(raw_cfg, v), param, value)) for v in variants]
        tasks = [(point_cfgs, derive_drop_seed(base.master_seed, ai, d)) for d in range(n_drops)]
        results = _execute(tasks, _compare_drop_task, parallel)
        for v in variants:
            collected[v.name].append([r[v.name] if r is not None else None for r in results])

    out = {}
    for v in variants:
        means, adj_means, ses, counts, rejects, all_sums, all_adjs = [], [], [], [], [], [], []
        for per_drop in collected[v.name]:
            sums, adjs, se, rejected = _aggregate(per_drop, n_drops)
            means.append(sums.mean())
            adj_means.append(adjs.mean())
            ses.append(se)
            counts.append(sums.size)
            rejects.append(rejected)
            all_sums.append(sums)
            all_adjs.append(adjs)
        out[v.name] = SweepResult(
            axis_param=axis_param,
            axis_values=tuple(values),
            mean_sum_rate=np.array(means),
            mean_adjusted_sum_rate=np.array(adj_means),
            std_error=np.array(ses),
            n_drops=np.array(counts),
            n_rejected=np.array(rejects),
            sum_rates=tuple(all_sums),
            adjusted_sum_rates=tuple(all_adjs),
            provenance=_provenance(
                base, axis_param=axis_param, axis_values=list(values), n_drops=n_drops, variant=v.name
            ),
        )
    return out


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("axis_param", "axis_value", "mean_sum_rate", "mean_adjusted_sum_rate", "std_error", "n_drops", "n_rejected")

_PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Regenerate the figures from the CSV files next to this script."""
from pathlib import Path

from cransim import plots

plots.render_out_dir(Path(__file__).resolve().parent)
'''


def _write_csv(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _sweep_rows(result: SweepResult, variant: str | None = None):
    rows = []
    for i, value in enumerate(result.axis_values):
        row = [
            result.axis_param,
            value,
            result.mean_sum_rate[i],
            result.mean_adjusted_sum_rate[i],
            result.std_error[i],
            int(result.n_drops[i]),
            int(result.n_rejected[i]),
        ]
        if variant is not None:
            row.insert(0, variant)
        rows.append(row)
    return rows


def _write_ecdfs(result: SweepResult, out_dir: Path, prefix: str = "ecdf") -> None:
    from .metrics import ecdf

    for i, sums in enumerate(result.sum_rates):
        rows = [(v, p) for v, p in ecdf(sums)]
        _write_csv(out_dir / f"{prefix}_{i}.csv", ("sum_rate", "cum_prob"), rows)


def emit(results: SweepResult, out_dir) -> list[Path]:
    """Write sweep.csv, per-point ECDF CSVs, provenance, a plot script, and
    the rendered figures."""
    from . import plots

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, _sweep_rows(results))
    _write_ecdfs(results, out)
    (out / "run.json").write_text(json.dumps(results.provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "plot_results.py").write_text(_PLOT_SCRIPT, encoding="utf-8")
    plots.render_out_dir(out)
    return sorted(out.iterdir())


def emit_compare(results: dict[str, SweepResult], out_dir) -> list[Path]:
    """Write compare.csv with one block per variant, plus ECDFs and figures."""
    from . import plots

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    provenance = {}
    for name, res in results.items():
        rows.extend(_sweep_rows(res, variant=name))
        _write_ecdfs(res, out, prefix=f"ecdf_{name}")
        provenance[name] = res.provenance
    _write_csv(out / "compare.csv", ("variant",) + SWEEP_COLUMNS, rows)
    (out / "run.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "plot_results.py").write_text(_PLOT_SCRIPT, encoding="utf-8")
    plots.render_out_dir(out)
    return sorted(out.iterdir())
