"""Seeded Monte-Carlo experiments.

Each trial draws a fresh network, one coherence block, optionally pushes it
through the quantised fronthaul, and runs the configured detector. Trial ``t``
derives all of its seeds from ``(root_seed, t)`` alone, so results do not
depend on trial order or on how many worker processes share the load.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cfactivity.covkit import StateCorruptionError
from cfactivity.detector import DetectorConfig, detect
from cfactivity.fronthaul import MinifloatFormat, default_mode, quantize_payload
from cfactivity.metrics import DEFAULT_THRESHOLDS, RocCurve, roc_sweep
from cfactivity.netmodel import (
    CALIBRATION_SAMPLES,
    ConfigError,
    SimParams,
    build_clusters,
    generate_scenario,
    resolve_power_target,
    sample_activity,
    synthesize_received,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FronthaulConfig:
    B: int = 20
    B_M: int | None = None
    mode: str | None = None  # "raw", "cov" or None for the L-vs-N default

    @property
    def fmt(self) -> MinifloatFormat:
        return MinifloatFormat(self.B, self.B_M)


@dataclass(frozen=True)
class ExperimentSpec:
    sim: SimParams = field(default_factory=SimParams)
    det: DetectorConfig = field(default_factory=lambda: DetectorConfig(algorithm="cluster", T=2))
    fronthaul: FronthaulConfig | None = None
    n_trials: int = 500
    root_seed: int = 1
    thresholds: tuple = tuple(float(x) for x in DEFAULT_THRESHOLDS)
    output_dir: str = "results"
    workers: int = 1
    fixed_geometry: bool = False
    calibration_samples: int = CALIBRATION_SAMPLES
    kind: str = "roc"  # "roc" or "snr"
    label: str = ""

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.kind not in ("roc", "snr"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind == "roc":
            self.det.validate_for(self.sim.n_aps, self.sim.K)
        if self.fronthaul is not None:
            self.fronthaul.fmt  # validates the bit split
        th = np.asarray(self.thresholds, dtype=float)
        if th.ndim != 1 or th.size == 0 or np.any(np.diff(th) < 0) or np.any(th < 0):
            raise ConfigError("thresholds must be a non-empty ascending list of non-negative values")


@dataclass
class TrialRecord:
    trial_id: int
    gamma: np.ndarray
    rho: np.ndarray
    activity: np.ndarray
    iterations_run: int
    final_cost: float
    cost_trace: list = field(default_factory=list)
    audit_trace: list = field(default_factory=list)
    nonzero_trace: list = field(default_factory=list)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.activity)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    sim: SimParams  # with the calibrated SNR target filled in
    curve: RocCurve
    records: list
    excluded: list  # (trial_id, message)


def trial_seeds(root_seed: int, trial_id: int, perm_seed: int = 0):
    """``(scenario, batch, permutation)`` seeds of one trial."""
    scen, batch = np.random.SeedSequence(root_seed, spawn_key=(trial_id,)).generate_state(2, np.uint64)
    perm = np.random.SeedSequence([root_seed, perm_seed], spawn_key=(trial_id,)).generate_state(1, np.uint64)[0]
    return int(scen), int(batch), int(perm)


def calibration_seed(root_seed: int) -> int:
    return int(np.random.SeedSequence([root_seed, 0xCA1]).generate_state(1, np.uint64)[0])


def resolve_sim(spec: ExperimentSpec) -> SimParams:
    return resolve_power_target(spec.sim, calibration_seed(spec.root_seed), spec.calibration_samples)


def run_trial(spec: ExperimentSpec, sim: SimParams, trial_id: int) -> TrialRecord:
    scen_seed, batch_seed, perm_seed = trial_seeds(spec.root_seed, trial_id, spec.det.perm_seed)
    if spec.fixed_geometry:
        scen_seed = trial_seeds(spec.root_seed, 0)[0]
    scn = generate_scenario(sim, scen_seed)
    activity, _ = sample_activity(sim.K, sim.eps, batch_seed)
    mode = None
    if spec.fronthaul is not None:
        mode = spec.fronthaul.mode or default_mode(scn.L, scn.n_antennas)
    batch = synthesize_received(scn, activity, batch_seed, keep_raw=(mode == "raw"))
    if spec.fronthaul is not None:
        batch = quantize_payload(batch, spec.fronthaul.fmt, mode)
    T = 1 if spec.det.algorithm == "dominant" else spec.det.T
    clusters = build_clusters(scn.beta, T)
    est = detect(scn, batch, clusters, dataclasses.replace(spec.det, perm_seed=perm_seed))
    return TrialRecord(
        trial_id=trial_id,
        gamma=est.gamma,
        rho=scn.rho,
        activity=batch.activity,
        iterations_run=est.iterations_run,
        final_cost=est.final_cost,
        cost_trace=list(est.cost_trace),
        audit_trace=list(est.audit_trace),
        nonzero_trace=list(est.nonzero_trace),
    )


def _run_chunk(args):
    spec, sim, ids = args
    out = []
    for t in ids:
        try:
            out.append(run_trial(spec, sim, t))
        except StateCorruptionError as exc:
            log.warning("trial %d aborted: %s", t, exc)
            out.append((t, str(exc)))
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    if spec.kind != "roc":
        raise ConfigError("run_experiment handles ROC experiments; use snr_cdf for SNR studies")
    sim = resolve_sim(spec)
    ids = list(range(spec.n_trials))
    if spec.workers == 1:
        results = _run_chunk((spec, sim, ids))
    else:
        chunks = [ids[i:: spec.workers * 4] for i in range(spec.workers * 4)]
        with ProcessPoolExecutor(spec.workers) as pool:
            results = [r for part in pool.map(_run_chunk, [(spec, sim, c) for c in chunks]) for r in part]
    records, excluded = [], []
    for r in results:
        (excluded if isinstance(r, tuple) else records).append(r)
    records.sort(key=lambda r: r.trial_id)
    excluded.sort()
    curve = roc_sweep(records, spec.thresholds, provenance={"label": spec.label})
    return ExperimentResult(spec=spec, sim=sim, curve=curve, records=records, excluded=excluded)
