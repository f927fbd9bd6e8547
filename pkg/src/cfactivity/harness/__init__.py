"""Experiment orchestration: specs, presets, seeded runs and result files."""

from cfactivity.harness.config import coerce_into, dump_config, load_config
from cfactivity.harness.experiment import (
    ExperimentResult,
    ExperimentSpec,
    FronthaulConfig,
    TrialRecord,
    run_experiment,
    run_trial,
)
from cfactivity.harness.outputs import emit_outputs, emit_result, load_archive
from cfactivity.harness.presets import PRESETS, apply_overrides, preset, preset_variants

__all__ = [
    "PRESETS",
    "ExperimentResult",
    "ExperimentSpec",
    "FronthaulConfig",
    "TrialRecord",
    "apply_overrides",
    "coerce_into",
    "dump_config",
    "emit_outputs",
    "emit_result",
    "load_archive",
    "load_config",
    "preset",
    "preset_variants",
    "run_experiment",
    "run_trial",
]
