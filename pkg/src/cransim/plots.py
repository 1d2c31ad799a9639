"""Figure rendering for sweep and comparison outputs.

Reads the delimited files written by the harness and renders the usual
figure families next to them: ergodic sum-rate versus the swept axis, and
the ECDF of the per-drop sum-rate.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_AXIS_LABELS = {
    "p_rrh_dbm": "Power allocation per RRH (dBm)",
    "pf_hz": "Piloting frequency (1/s)",
    "n_users": "Number of users K",
}


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _axis_label(param: str) -> str:
    return _AXIS_LABELS.get(param, param)


def render_sweep(sweep_csv: Path, out_png: Path) -> Path:
    rows = _read_csv(sweep_csv)
    x = [float(r["axis_value"]) for r in rows]
    mean = [float(r["mean_sum_rate"]) for r in rows]
    adj = [float(r["mean_adjusted_sum_rate"]) for r in rows]
    se = [float(r["std_error"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(x, mean, yerr=[2 * s for s in se], marker="o", capsize=3, label="sum-rate")
    if any(abs(a - m) > 1e-12 for a, m in zip(adj, mean)):
        ax.errorbar(x, adj, yerr=[2 * s for s in se], marker="s", capsize=3, label="adjusted sum-rate")
    ax.set_xlabel(_axis_label(rows[0]["axis_param"]))
    ax.set_ylabel("Ergodic sum-rate (bits/s/Hz)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render_compare(compare_csv: Path, out_png: Path) -> Path:
    rows = _read_csv(compare_csv)
    variants: dict[str, list[dict]] = {}
    for r in rows:
        variants.setdefault(r["variant"], []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vrows in variants.items():
        x = [float(r["axis_value"]) for r in vrows]
        y = [float(r["mean_adjusted_sum_rate"]) for r in vrows]
        se = [2 * float(r["std_error"]) for r in vrows]
        ax.errorbar(x, y, yerr=se, marker="o", capsize=3, label=name)
    ax.set_xlabel(_axis_label(rows[0]["axis_param"]))
    ax.set_ylabel("Ergodic sum-rate (bits/s/Hz)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render_ecdfs(ecdf_csvs: list[Path], out_png: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for path in ecdf_csvs:
        rows = _read_csv(path)
        x = [float(r["sum_rate"]) for r in rows]
        p = [float(r["cum_prob"]) for r in rows]
        ax.step(x, p, where="post", label=path.stem)
    ax.set_xlabel("Sum-rate (bits/s/Hz)")
    ax.set_ylabel("ECDF")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.4)
    if len(ecdf_csvs) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render_out_dir(out_dir) -> list[Path]:
    """Render every figure the directory's CSV files support."""
    out = Path(out_dir)
    made = []
    if (out / "sweep.csv").exists():
        made.append(render_sweep(out / "sweep.csv", out / "fig_sweep.png"))
    if (out / "compare.csv").exists():
        made.append(render_compare(out / "compare.csv", out / "fig_compare.png"))
    ecdfs = sorted(out.glob("ecdf_*.csv"))
    if ecdfs:
        made.append(render_ecdfs(ecdfs, out / "fig_ecdf.png"))
    return made
