"""Activity decisions, miss/false-alarm statistics and SNR distributions.

Decisions threshold the *normalised* estimate ``gamma_hat_k / rho_k``: an
active device ideally scores 1 and an inactive one 0, whatever its power
control, so one scalar sweeps every device at once.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from cfactivity.netmodel import SimParams, sample_dominant_snr_db

DEFAULT_THRESHOLDS = np.logspace(-4, 1, 60)


class DetectionRecord(NamedTuple):
    gamma: np.ndarray
    rho: np.ndarray
    activity: np.ndarray  # bool mask


def threshold_detect(gamma_hat, rho, th: float):
    if th < 0:
        raise ValueError("threshold must be non-negative")
    a_hat = np.asarray(gamma_hat, float) / np.asarray(rho, float) >= th
    return a_hat, set(np.flatnonzero(a_hat).tolist())


def pmd_pfa(est, truth, K: int):
    """Per-trial miss and false-alarm ratios.

    ``None`` marks a ratio that is undefined for this trial (no active devices
    for the miss ratio, no inactive devices for the false-alarm ratio).
    """
    est, truth = set(est), set(truth)
    pmd = None if not truth else 1.0 - len(truth & est) / len(truth)
    pfa = None if len(truth) == K else len(est - truth) / (K - len(truth))
    return pmd, pfa


@dataclass
class RocCurve:
    thresholds: np.ndarray
    pfa: np.ndarray
    pmd: np.ndarray  # nan where no trial had an active device
    n_trials: int
    n_md_trials: int = 0
    n_fa_trials: int = 0
    provenance: dict = field(default_factory=dict)

    @property
    def points(self):
        return list(zip(self.pfa, self.pmd))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("threshold,pfa,pmd\n")
        for th, fa, md in zip(self.thresholds, self.pfa, self.pmd):
            md_s = "" if np.isnan(md) else repr(float(md))
            fa_s = "" if np.isnan(fa) else repr(float(fa))
            buf.write(f"{float(th)!r},{fa_s},{md_s}\n")
        return buf.getvalue()


def _scores(rec):
    return np.asarray(rec.gamma, float) / np.asarray(rec.rho, float), np.asarray(rec.activity, bool)


def roc_sweep(records: Sequence, thresholds=DEFAULT_THRESHOLDS, provenance: dict | None = None) -> RocCurve:
    """Average per-trial miss and false-alarm ratios for every threshold."""
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be ascending")
    md_sum = np.zeros(thresholds.size)
    fa_sum = np.zeros(thresholds.size)
    n_md = n_fa = 0
    for rec in records:
        score, act = _scores(rec)
        on = np.sort(score[act])
        off = np.sort(score[~act])
        if on.size:
            # devices scoring strictly below the threshold are missed
            md_sum += np.searchsorted(on, thresholds, side="left") / on.size
            n_md += 1
        if off.size:
            fa_sum += (off.size - np.searchsorted(off, thresholds, side="left")) / off.size
            n_fa += 1
    with np.errstate(invalid="ignore"):
        pmd = md_sum / n_md if n_md else np.full(thresholds.size, np.nan)
        pfa = fa_sum / n_fa if n_fa else np.full(thresholds.size, np.nan)
    return RocCurve(thresholds, pfa, pmd, len(records), n_md, n_fa, dict(provenance or {}))


@dataclass
class OperatingPoint:
    threshold: float
    pfa: float
    pmd: float
    misses: int  # pooled over trials, for binomial comparisons
    actives: int
    per_trial_pmd: np.ndarray


def operating_point(records: Sequence, target_pfa: float) -> OperatingPoint:
    """Lowest threshold whose false-alarm rate does not exceed ``target_pfa``.

    False alarms are a step function of the threshold with a jump at every
    inactive device's score, so the crossing is located exactly.
    """
    off_scores, off_w, on_scores = [], [], []
    n_fa = 0
    for rec in records:
        score, act = _scores(rec)
        if (~act).any():
            off_scores.append(score[~act])
            off_w.append(np.full((~act).sum(), 1.0 / (~act).sum()))
            n_fa += 1
    if not n_fa:
        raise ValueError("no trial has inactive devices")
    s = np.concatenate(off_scores)
    w = np.concatenate(off_w) / n_fa
    values, inv = np.unique(-s, return_inverse=True)  # distinct scores, descending
    values = -values
    mass = np.bincount(inv, weights=w)
    above = np.concatenate([[0.0], np.cumsum(mass)])  # above[j]: rate strictly above values[j]
    j = int(np.flatnonzero(above[:-1] <= target_pfa + 1e-12)[-1])
    if above[-1] <= target_pfa + 1e-12:
        th = 0.0
    else:
        th = float(np.nextafter(values[j], np.inf))

    misses = actives = 0
    per_trial = []
    fa_total = 0.0
    for rec in records:
        score, act = _scores(rec)
        on = score[act]
        if on.size:
            miss = int(np.count_nonzero(on < th))
            misses += miss
            actives += on.size
            per_trial.append(miss / on.size)
        if (~act).any():
            fa_total += np.count_nonzero(score[~act] >= th) / (~act).sum()
    per_trial = np.asarray(per_trial)
    pmd = float(per_trial.mean()) if per_trial.size else float("nan")
    return OperatingPoint(th, fa_total / n_fa, pmd, misses, actives, per_trial)


def two_proportion_test(x1: int, n1: int, x2: int, n2: int) -> float:
    """Two-sided p-value for equal binomial proportions ``x1/n1`` and ``x2/n2``."""
    p = (x1 + x2) / (n1 + n2)
    se = np.sqrt(p * (1.0 - p) * (1.0 / n1 + 1.0 / n2))
    if se == 0:
        return 1.0
    z = (x1 / n1 - x2 / n2) / se
    return float(2.0 * stats.norm.sf(abs(z)))


@dataclass
class EmpiricalCdf:
    samples: np.ndarray  # sorted

    def quantile(self, q):
        return np.quantile(self.samples, q)

    def __call__(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.samples.size

    def to_csv(self, n_points: int | None = None) -> str:
        x = self.samples
        p = np.arange(1, x.size + 1) / x.size
        if n_points is not None and n_points < x.size:
            idx = np.unique(np.linspace(0, x.size - 1, n_points).round().astype(int))
            x, p = x[idx], p[idx]
        buf = io.StringIO()
        buf.write("snr_db,cdf\n")
        for xi, pi in zip(x, p):
            buf.write(f"{float(xi)!r},{float(pi)!r}\n")
        return buf.getvalue()


def snr_cdf(params: SimParams, n_samples: int, seed: int) -> EmpiricalCdf:
    """Distribution of the full-power SNR at each device's dominant AP."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    return EmpiricalCdf(np.sort(sample_dominant_snr_db(params, n_samples, seed)))
