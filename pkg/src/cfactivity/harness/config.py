"""Sectioned text configuration for experiments.

A config file is INI-style; every field has a default taken from the desk
setup (``ExperimentSpec()``)::

    [experiment]
    n_trials = 200
    root_seed = 7
    thresholds = 1e-4:10:60      ; log-spaced lo:hi:count, or a comma list

    [sim]
    M = 20
    colocated = false

    [detector]
    algorithm = parallel
    T = 2
    G = 10

    [fronthaul]                  ; omit the section for a lossless fronthaul
    B = 16
"""

from __future__ import annotations

import configparser
import dataclasses
import types
import typing

import numpy as np

from cfactivity.harness.experiment import ExperimentSpec, FronthaulConfig
from cfactivity.netmodel import ConfigError

SECTION_ALIASES = {
    "sim": "sim",
    "det": "det",
    "detector": "det",
    "fronthaul": "fronthaul",
    "experiment": "",
    "": "",
}


def parse_thresholds(text: str) -> tuple:
    text = text.strip()
    if ":" in text:
        lo, hi, n = text.split(":")
        return tuple(float(x) for x in np.geomspace(float(lo), float(hi), int(n)))
    return tuple(float(x) for x in text.split(","))


def _parse(text: str, hint):
    text = str(text).strip()
    args = typing.get_args(hint)
    if typing.get_origin(hint) in (typing.Union, types.UnionType):
        if text.lower() in ("none", "null", "") and type(None) in args:
            return None
        hint = next(a for a in args if a is not type(None))
    if hint is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if hint is int:
        return int(float(text)) if "e" in text.lower() else int(text)
    if hint is float:
        return float(text)
    if hint is tuple:
        return parse_thresholds(text)
    return text


def _update(obj, values: dict):
    if not values:
        return obj
    hints = typing.get_type_hints(type(obj))
    parsed = {}
    for name, text in values.items():
        if name not in hints:
            raise ConfigError(f"{type(obj).__name__} has no field {name!r}")
        try:
            parsed[name] = _parse(text, hints[name])
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}: {text!r} ({exc})") from None
    return dataclasses.replace(obj, **parsed)


def coerce_into(spec: ExperimentSpec, flat: dict) -> ExperimentSpec:
    """Apply ``{"sim.M": "20", "det.T": "2", "n_trials": "50"}``-style settings."""
    groups = {"sim": {}, "det": {}, "fronthaul": {}, "": {}}
    for key, value in flat.items():
        section, _, name = key.rpartition(".")
        if section not in SECTION_ALIASES:
            raise ConfigError(f"unknown config section {section!r} in {key!r}")
        groups[SECTION_ALIASES[section]][name] = value
    sim = _update(spec.sim, groups["sim"])
    det = _update(spec.det, groups["det"])
    fh = spec.fronthaul
    fh_values = dict(groups["fronthaul"])
    enabled = fh_values.pop("enabled", None)
    if enabled is not None and not _parse(enabled, bool):
        fh = None
    elif fh_values or enabled is not None:
        fh = _update(fh or FronthaulConfig(), fh_values)
    top = {}
    if groups[""]:
        top = dataclasses.asdict(_update(_TopLevel(), groups[""]))
        top = {k: v for k, v in top.items() if k in groups[""]}
    return dataclasses.replace(spec, sim=sim, det=det, fronthaul=fh, **top)


@dataclasses.dataclass
class _TopLevel:
    n_trials: int = 0
    root_seed: int = 0
    thresholds: tuple = ()
    output_dir: str = ""
    workers: int = 1
    fixed_geometry: bool = False
    calibration_samples: int = 0
    kind: str = ""
    label: str = ""


def load_config(path, base: ExperimentSpec | None = None) -> ExperimentSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep field-name case (M, N, K, L, T, G, B, B_M)
    with open(path) as fh:
        cp.read_file(fh)
    flat = {}
    for section in cp.sections():
        if section not in SECTION_ALIASES:
            raise ConfigError(f"{path}: unknown section [{section}]")
        prefix = SECTION_ALIASES[section]
        for key, value in cp.items(section):
            flat[f"{prefix}.{key}" if prefix else key] = value
    if "fronthaul" in cp.sections() and not any(k.startswith("fronthaul.") for k in flat):
        flat["fronthaul.enabled"] = "true"
    return coerce_into(base or ExperimentSpec(), flat)


def dump_config(spec: ExperimentSpec) -> str:
    """INI text that :func:`load_config` turns back into ``spec``."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    top = dataclasses.asdict(spec)
    for key in ("sim", "det", "fronthaul"):
        top.pop(key)
    th = top.pop("thresholds")
    cp["experiment"] = {k: str(v) for k, v in top.items()}
    cp["experiment"]["thresholds"] = ",".join(repr(float(x)) for x in th)
    cp["sim"] = {k: str(v) for k, v in dataclasses.asdict(spec.sim).items()}
    cp["detector"] = {k: str(v) for k, v in dataclasses.asdict(spec.det).items()}
    if spec.fronthaul is not None:
        cp["fronthaul"] = {k: str(v) for k, v in dataclasses.asdict(spec.fronthaul).items()}
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
