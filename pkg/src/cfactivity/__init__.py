"""Covariance-based activity detection for grant-free access in cell-free massive MIMO."""

from cfactivity.covkit import CovState, GammaEstimate, dominant_step, ml_cost
from cfactivity.detector import DetectorConfig, detect, run_reference_bruteforce
from cfactivity.fronthaul import MinifloatFormat, decode, encode, quantize_payload
from cfactivity.metrics import RocCurve, pmd_pfa, roc_sweep, snr_cdf, threshold_detect
from cfactivity.netmodel import (
    ClusterMap,
    ReceivedBatch,
    Scenario,
    SimParams,
    build_clusters,
    calibrate_snr_target,
    generate_scenario,
    sample_activity,
    synthesize_received,
)
from cfactivity.polyroot import build_step_poly, cluster_step, real_roots

__version__ = "0.1.0"

__all__ = [
    "ClusterMap",
    "CovState",
    "DetectorConfig",
    "GammaEstimate",
    "MinifloatFormat",
    "ReceivedBatch",
    "RocCurve",
    "Scenario",
    "SimParams",
    "build_clusters",
    "build_step_poly",
    "calibrate_snr_target",
    "cluster_step",
    "decode",
    "detect",
    "dominant_step",
    "encode",
    "generate_scenario",
    "ml_cost",
    "pmd_pfa",
    "quantize_payload",
    "real_roots",
    "roc_sweep",
    "run_reference_bruteforce",
    "sample_activity",
    "snr_cdf",
    "synthesize_received",
    "threshold_detect",
]
