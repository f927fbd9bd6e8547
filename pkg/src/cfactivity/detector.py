"""Coordinate-descent activity detectors.

Three drivers share one loop: each iteration draws a fresh permutation of the
devices, visits every device once, and keeps the sweep only if it lowered the
full ML cost. They differ in how a device's step is chosen:

``dominant``
    closed-form step from the device's strongest AP only;
``cluster``
    exact minimiser of the cost restricted to the ``T`` strongest APs;
``parallel``
    as ``cluster``, but the permutation is cut into ``G`` groups whose steps
    are all solved against the covariances frozen at the start of the group.

Every step is propagated to all ``M`` AP covariances.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from cfactivity.covkit import (
    CovState,
    GammaEstimate,
    cost_from_scratch,
    dominant_step,
    ml_cost,
)
from cfactivity.netmodel import ClusterMap, ConfigError, ReceivedBatch, Scenario, substream
from cfactivity.polyroot import cluster_step

log = logging.getLogger(__name__)

ALGORITHMS = ("dominant", "cluster", "parallel")
SKIP_FACTOR = 1e-18  # steps with |delta * beta| below this times sigma2 are not propagated


@dataclass(frozen=True)
class DetectorConfig:
    algorithm: str = "cluster"
    T: int = 1
    G: int = 1
    max_iter: int = 10
    perm_seed: int = 0
    cost_audit: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; pick one of {ALGORITHMS}")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.G < 1:
            raise ConfigError("G must be >= 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    def validate_for(self, M: int, K: int) -> None:
        T = 1 if self.algorithm == "dominant" else self.T
        if T > M:
            raise ConfigError(f"cluster size {T} exceeds the {M} available APs")
        if self.algorithm == "parallel" and self.G > K:
            raise ConfigError(f"group count {self.G} exceeds the {K} devices")


def _solve_step(a, b, gamma_k, dominant: bool) -> float:
    if dominant:
        return dominant_step(a[0], b[0], gamma_k)
    return cluster_step(a, b, gamma_k)


def _sequential_sweep(state, gamma, order, scn, QY, clusters, dominant, skip):
    S, beta = scn.S, scn.beta
    for k in order:
        s = S[:, k]
        V = state.Qinv @ s  # (M, L)
        q = np.real(V @ s.conj())
        cl = clusters[k]
        bk = beta[cl, k]
        Vc = V[cl]
        a = bk * q[cl]
        b = bk * np.real(np.einsum("tl,tlj,tj->t", Vc.conj(), QY[cl], Vc))
        delta = _solve_step(a, b, gamma[k], dominant)
        if delta == 0.0:
            continue
        c = delta * beta[:, k]
        c[np.abs(c) <= skip] = 0.0
        state.update_all(s, c, V, q)
        gamma[k] = max(gamma[k] + delta, 0.0)


def _parallel_sweep(state, gamma, order, scn, QY, clusters, n_groups, skip):
    S, beta = scn.S, scn.beta
    for group in np.array_split(order, n_groups):
        if group.size == 0:
            continue
        Sg = S[:, group]  # (L, n)
        V = state.Qinv @ Sg  # (M, L, n) snapshot at the group start
        q = np.real(np.einsum("ln,mln->mn", Sg.conj(), V))
        W = QY @ V
        r = np.real(np.einsum("mln,mln->mn", V.conj(), W))
        deltas = np.empty(group.size)
        for j, k in enumerate(group):
            cl = clusters[k]
            deltas[j] = cluster_step(beta[cl, k] * q[cl, j], beta[cl, k] * r[cl, j], gamma[k])
        # updates are applied one by one against the live state, in permuted order
        for j, k in enumerate(group):
            delta = deltas[j]
            if delta == 0.0:
                continue
            c = delta * beta[:, k]
            c[np.abs(c) <= skip] = 0.0
            state.update_all(S[:, k], c)
            gamma[k] = max(gamma[k] + delta, 0.0)


def detect(scn: Scenario, batch: ReceivedBatch, clusters: ClusterMap, cfg: DetectorConfig) -> GammaEstimate:
    """Estimate ``gamma = a * rho`` from the sample covariances of ``batch``."""
    M, K, L = scn.M, scn.K, scn.L
    cfg.validate_for(M, K)
    QY = batch.sample_cov
    if QY.shape != (M, L, L):
        raise ValueError(f"sample covariances have shape {QY.shape}, expected {(M, L, L)}")
    dominant = cfg.algorithm == "dominant"
    if dominant:
        members = clusters.clusters[:, :1]
    else:
        if clusters.clusters.shape[1] < cfg.T:
            raise ConfigError(f"cluster map has T={clusters.T}, detector needs {cfg.T}")
        members = clusters.clusters[:, : cfg.T]
    skip = SKIP_FACTOR * scn.sigma2
    rng = substream(cfg.perm_seed, "permutation")

    state = CovState(M, L, scn.sigma2)
    gamma = np.zeros(K)
    est = GammaEstimate(gamma=gamma.copy())
    cost_prev = ml_cost(state, QY)
    est.cost_trace.append(cost_prev)
    est.nonzero_trace.append(0)
    if cfg.cost_audit:
        est.audit_trace.append(cost_from_scratch(gamma, scn.beta, scn.S, scn.sigma2, QY))

    for it in range(1, cfg.max_iter + 1):
        gamma_prev = gamma.copy()
        order = rng.permutation(K)
        if cfg.algorithm == "parallel":
            _parallel_sweep(state, gamma, order, scn, QY, members, cfg.G, skip)
        else:
            _sequential_sweep(state, gamma, order, scn, QY, members, dominant, skip)
        state.symmetrize()
        cost = ml_cost(state, QY)
        est.iterations_run = it
        est.cost_trace.append(cost)
        est.nonzero_trace.append(int(np.count_nonzero(gamma > 1e-12)))
        if cfg.cost_audit:
            ref = cost_from_scratch(gamma, scn.beta, scn.S, scn.sigma2, QY)
            est.audit_trace.append(ref)
            if abs(cost - ref) > 1e-6 * abs(ref):
                log.warning("iteration %d: incremental cost %.12g drifts from audit %.12g", it, cost, ref)
        if cost >= cost_prev:
            est.gamma = gamma_prev
            return est
        cost_prev = cost
    est.gamma = gamma
    return est


def trace_rows(est: GammaEstimate):
    """``(iteration, cost, nonzero)`` rows for convergence plots."""
    return [(i, c, n) for i, (c, n) in enumerate(zip(est.cost_trace, est.nonzero_trace))]


DEFAULT_GRID = (0.0, 0.25, 0.5, 1.0, 2.0)


def run_reference_bruteforce(scn: Scenario, batch: ReceivedBatch, grid=DEFAULT_GRID) -> GammaEstimate:
    """Exhaustive minimisation of the ML cost over ``grid * rho_k`` per device.

    Only toy instances are accepted (``K <= 6``, ``M <= 2``).
    """
    if scn.K > 6 or scn.M > 2:
        raise ValueError(f"brute force refused for K={scn.K}, M={scn.M} (limits K<=6, M<=2)")
    grid = np.asarray(grid, dtype=float)
    best, best_cost = None, np.inf
    for combo in itertools.product(grid, repeat=scn.K):
        gamma = np.asarray(combo) * scn.rho
        cost = cost_from_scratch(gamma, scn.beta, scn.S, scn.sigma2, batch.sample_cov)
        if cost < best_cost:
            best, best_cost = gamma, cost
    return GammaEstimate(gamma=best, cost_trace=[best_cost], iterations_run=0)
