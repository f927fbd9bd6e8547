"""Plot-ready result files.

One run directory holds

``roc.csv``         ``threshold,pfa,pmd``, one row per threshold
``trials.csv``      ``trial_id,n_active,iterations,final_cost``
``cost_trace.csv``  per-iteration incremental and audited cost (audited runs)
``records.npz``     raw estimates, enough to re-sweep any threshold grid
``manifest.json``   spec echo, resolved SNR target, seed rule, version, exclusions

Only the manifest carries a timestamp; every CSV body is a pure function of
the spec.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import os
from pathlib import Path

import numpy as np

import cfactivity
from cfactivity.harness.config import dump_config
from cfactivity.harness.presets import DESK_NOTE
from cfactivity.metrics import RocCurve

SEED_RULE = (
    "trial t: (scenario, batch) seeds = SeedSequence(root_seed, spawn_key=(t,)).generate_state(2); "
    "permutation seed = SeedSequence([root_seed, det.perm_seed], spawn_key=(t,)).generate_state(1); "
    "SNR calibration seed = SeedSequence([root_seed, 0xCA1]).generate_state(1)"
)


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _num(x) -> str:
    x = float(x)
    return "" if np.isnan(x) else repr(x)


def trials_csv(records) -> str:
    rows = ["trial_id,n_active,iterations,final_cost"]
    for r in records:
        rows.append(f"{r.trial_id},{int(np.count_nonzero(r.activity))},{r.iterations_run},{_num(r.final_cost)}")
    return "\n".join(rows) + "\n"


def cost_trace_csv(records) -> str:
    rows = ["trial_id,iteration,cost,audit_cost,nonzero"]
    for r in records:
        for i, c in enumerate(r.cost_trace):
            audit = r.audit_trace[i] if i < len(r.audit_trace) else float("nan")
            nz = r.nonzero_trace[i] if i < len(r.nonzero_trace) else ""
            rows.append(f"{r.trial_id},{i},{_num(c)},{_num(audit)},{nz}")
    return "\n".join(rows) + "\n"


def save_archive(path: Path, records):
    K = len(records[0].gamma) if records else 0
    stack = lambda attr, dt: np.array([getattr(r, attr) for r in records], dtype=dt).reshape(len(records), K)
    try:
        np.savez_compressed(
            path,
            trial_id=np.array([r.trial_id for r in records], dtype=np.int64),
            gamma=stack("gamma", float),
            rho=stack("rho", float),
            activity=stack("activity", bool),
            iterations=np.array([r.iterations_run for r in records], dtype=np.int64),
            final_cost=np.array([r.final_cost for r in records], dtype=float),
        )
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def load_archive(path):
    """Records from ``records.npz`` as light objects with gamma/rho/activity."""
    path = Path(path)
    if path.is_dir():
        path = path / "records.npz"
    try:
        data = np.load(path)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    from cfactivity.metrics import DetectionRecord

    return [DetectionRecord(g, r, a) for g, r, a in zip(data["gamma"], data["rho"], data["activity"])]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def emit_outputs(
    curve: RocCurve,
    records,
    out_dir,
    *,
    spec=None,
    sim=None,
    excluded=(),
    archive: bool = True,
) -> list[Path]:
    """Write the run directory; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    written = []

    def put(name, text):
        _write(out / name, text)
        written.append(out / name)

    put("roc.csv", curve.to_csv())
    put("trials.csv", trials_csv(records))
    audited = (spec is not None and spec.det.cost_audit) or any(r.audit_trace for r in records)
    if audited:
        put("cost_trace.csv", cost_trace_csv(records))
    if archive:
        save_archive(out / "records.npz", records)
        written.append(out / "records.npz")

    manifest = {
        "code_version": cfactivity.__version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "n_trials_recorded": len(records),
        "excluded_count": len(excluded),
        "excluded": [{"trial_id": t, "reason": msg} for t, msg in excluded],
        "roc": {
            "n_thresholds": int(len(curve.thresholds)),
            "trials_with_actives": curve.n_md_trials,
            "trials_with_inactives": curve.n_fa_trials,
            "decision": "device declared active when gamma_hat / rho >= threshold",
        },
        "seed_rule": SEED_RULE,
        "files": [p.name for p in written] + ["manifest.json"],
    }
    if not records:
        manifest["note"] = "zero trials recorded"
    if spec is not None:
        manifest["spec"] = _jsonable(dataclasses.asdict(spec))
        manifest["config_ini"] = dump_config(spec)
        manifest["geometry"] = "fixed across trials" if spec.fixed_geometry else "redrawn every trial"
        if spec.label.endswith("/desk"):
            manifest["scale_note"] = DESK_NOTE
    if sim is not None:
        manifest["resolved_sim"] = _jsonable(dataclasses.asdict(sim))
        manifest["resolved_target_snr_db"] = sim.target_snr_db
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(out / "manifest.json")
    return written


def emit_result(result, out_dir=None, archive: bool = True) -> list[Path]:
    """:func:`emit_outputs` for an :class:`ExperimentResult`."""
    return emit_outputs(
        result.curve,
        result.records,
        out_dir if out_dir is not None else result.spec.output_dir,
        spec=result.spec,
        sim=result.sim,
        excluded=result.excluded,
        archive=archive,
    )


def emit_snr(cdf, out_dir, *, spec=None, label: str = "", n_points: int | None = 2000) -> Path:
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    name = f"snr_cdf_{label}.csv" if label else "snr_cdf.csv"
    _write(out / name, cdf.to_csv(n_points))
    return out / name
