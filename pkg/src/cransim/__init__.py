"""System-level Monte-Carlo simulator for a cloud-RAN downlink antenna
domain: correlated Rician channels, greedy user association, greedy RRH
clustering, ZFBF / WMMSE coordinated-beamforming precoding, external
interference, and piloting-overhead-adjusted sum-rate evaluation."""

__version__ = "0.1.0"

from .association import Association, associate, associate_external, greedy_associate
from .channel import (
    ChannelSet,
    FadingDraw,
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
from .clustering import Clustering, cluster_greedy, cluster_trivial, internal_sum_rate, make_rate_eval
from .harness import (
    DropResult,
    SchemeVariant,
    SweepResult,
    derive_drop_seed,
    emit,
    emit_compare,
    parse_variant,
    run_compare,
    run_drop,
    run_point,
    run_sweep,
)
from .metrics import OverheadError, RateReport, adjusted_sum_rate, ecdf, rate_report, sinr_all, sum_rate
from .precoding import PrecodeResult, SingularChannelError, wmmse_cb, wmmse_scope, zfbf_all, zfbf_cluster
from .scenario import ConfigError, Deployment, ScenarioConfig, drop_deployment, load_config

__all__ = [
    "__version__",
    "Association",
    "ChannelSet",
    "Clustering",
    "ConfigError",
    "Deployment",
    "DropResult",
    "FadingDraw",
    "OverheadError",
    "PrecodeResult",
    "RateReport",
    "ScenarioConfig",
    "SchemeVariant",
    "SingularChannelError",
    "SweepResult",
    "adjusted_sum_rate",
    "associate",
    "associate_external",
    "build_rx_correlation",
    "build_tx_correlation",
    "cluster_greedy",
    "cluster_trivial",
    "derive_drop_seed",
    "draw_fading",
    "drop_deployment",
    "ecdf",
    "emit",
    "emit_compare",
    "greedy_associate",
    "internal_sum_rate",
    "load_channel_dump",
    "load_config",
    "make_rate_eval",
    "parse_variant",
    "path_loss_db",
    "psd_repair",
    "rate_report",
    "rician_params",
    "run_compare",
    "run_drop",
    "run_point",
    "run_sweep",
    "save_channel_dump",
    "sinr_all",
    "sqrt_psd",
    "sum_rate",
    "synthesize",
    "wmmse_cb",
    "wmmse_scope",
    "zfbf_all",
    "zfbf_cluster",
]
