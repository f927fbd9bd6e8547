"""Named experiment presets, one per result figure (``fig2-snr`` ... ``fig9-fronthaul``).

``scale="paper"`` uses the full parameterisation (K=400, L=40, 1e5 trials).
``scale="desk"`` keeps the geometry, noise and power model but shrinks the
device population and sequence length to K=100, L=20 (load K*eps/L of 0.5
instead of 1) and runs 500 trials, which fits in minutes on one core.
"""

from __future__ import annotations

import dataclasses

from cfactivity.detector import DetectorConfig
from cfactivity.harness.experiment import ExperimentSpec, FronthaulConfig
from cfactivity.netmodel import ConfigError, SimParams

PRESETS = (
    "fig2-snr",
    "fig3-roc",
    "fig4-roc",
    "fig5-cluster",
    "fig6-convergence",
    "fig7-eps",
    "fig8-parallel",
    "fig9-fronthaul",
)

SCALES = {
    "paper": dict(K=400, L=40, n_trials=100_000, snr_samples=100_000),
    "desk": dict(K=100, L=20, n_trials=500, snr_samples=20_000),
}

DESK_NOTE = "desk scale: K=100, L=20, 500 trials; geometry, noise and power model unchanged"


def _base(scale: str, **sim) -> tuple[SimParams, int]:
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; pick 'paper' or 'desk'")
    s = SCALES[scale]
    params = dict(M=20, N=2, K=s["K"], L=s["L"], eps=0.1, area_side=2000.0, shadow_var=4.0)
    params.update(sim)
    return SimParams(**params), s["n_trials"]


def _spec(name, scale, sim, det, **kw) -> ExperimentSpec:
    return ExperimentSpec(sim=sim, det=det, label=f"{name}/{scale}", **kw)


def preset_variants(name: str, scale: str = "desk") -> dict[str, ExperimentSpec]:
    """All curves of one figure, keyed by a short label; the first is the headline."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    dominant = DetectorConfig(algorithm="dominant", T=1, max_iter=10)
    cluster2 = DetectorConfig(algorithm="cluster", T=2, max_iter=10)
    out = {}

    if name == "fig2-snr":
        n = SCALES[scale]["snr_samples"] if scale in SCALES else None
        for side in (2000.0, 1000.0):
            for sh in (4.0, 8.0):
                for label, extra in (("coloc", dict(colocated=True)), ("cf-M20", {}), ("cf-M100", dict(M=100))):
                    sim, _ = _base(scale, area_side=side, shadow_var=sh, power_policy="full", **extra)
                    key = f"{label}-{int(side)}m-sh{int(sh)}"
                    out[key] = _spec(name, scale, sim, dominant, n_trials=n, kind="snr")
        return out

    if name in ("fig3-roc", "fig4-roc"):
        side = 2000.0 if name == "fig3-roc" else 1000.0
        for label, extra in (
            ("cf-M20-N2", {}),
            ("cf-M20-N4", dict(N=4)),
            ("cf-M40-N2", dict(M=40)),
            ("coloc-40ant", dict(colocated=True)),
            ("coloc-80ant", dict(colocated=True, N=4)),
        ):
            sim, n = _base(scale, area_side=side, **extra)
            out[label] = _spec(name, scale, sim, dominant, n_trials=n)
        return out

    if name == "fig5-cluster":
        for M in (20, 25):
            for T in (1, 2, 3):
                sim, n = _base(scale, M=M)
                out[f"M{M}-T{T}"] = _spec(name, scale, sim, dataclasses.replace(cluster2, T=T), n_trials=n)
        return out

    if name == "fig6-convergence":
        for T in (2, 1, 3):
            sim, n = _base(scale)
            det = dataclasses.replace(cluster2, T=T, cost_audit=True)
            out[f"T{T}"] = _spec(name, scale, sim, det, n_trials=min(n, 200))
        return out

    if name == "fig7-eps":
        eps_values = (0.1, 0.2, 0.3) if scale == "paper" else (0.1, 0.25, 0.35)
        for eps in eps_values:
            sim, n = _base(scale, eps=eps)
            out[f"eps{eps:g}"] = _spec(name, scale, sim, cluster2, n_trials=n)
        return out

    if name == "fig8-parallel":
        sim, n = _base(scale)
        K = sim.K
        out[f"parallel-G{K // 10}"] = _spec(name, scale, sim, DetectorConfig(algorithm="parallel", T=2, G=K // 10), n_trials=n)
        out["cluster-T2"] = _spec(name, scale, sim, cluster2, n_trials=n)
        out[f"parallel-G{K}"] = _spec(name, scale, sim, DetectorConfig(algorithm="parallel", T=2, G=K), n_trials=n)
        return out

    # fig9-fronthaul
    sim, n = _base(scale)
    for B in (20, 8, 12, 16):
        out[f"B{B}"] = _spec(name, scale, sim, cluster2, n_trials=n, fronthaul=FronthaulConfig(B=B))
    out["lossless"] = _spec(name, scale, sim, cluster2, n_trials=n)
    return out


def preset(name: str, scale: str = "desk") -> ExperimentSpec:
    return next(iter(preset_variants(name, scale).values()))


def apply_overrides(spec: ExperimentSpec, overrides: dict[str, str]) -> ExperimentSpec:
    """Apply ``section.key=value`` overrides (``sim.M``, ``det.T``, ``n_trials`` ...)."""
    from cfactivity.harness.config import coerce_into

    return coerce_into(spec, overrides)
