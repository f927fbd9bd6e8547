"""Command-line entry point: ``cfactivity {run,preset,roc,snr-cdf}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from cfactivity.harness.config import load_config, parse_thresholds
from cfactivity.harness.experiment import ExperimentSpec, calibration_seed, run_experiment
from cfactivity.harness.outputs import emit_result, emit_snr, load_archive
from cfactivity.harness.presets import PRESETS, apply_overrides, preset_variants
from cfactivity.metrics import operating_point, roc_sweep, snr_cdf
from cfactivity.netmodel import ConfigError

log = logging.getLogger("cfactivity")


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _execute(spec: ExperimentSpec, out_dir: Path):
    t0 = time.perf_counter()
    if spec.kind == "snr":
        cdf = snr_cdf(spec.sim, spec.n_trials, calibration_seed(spec.root_seed))
        path = emit_snr(cdf, out_dir)
        q = cdf.quantile([0.05, 0.5, 0.95])
        print(f"{out_dir}: SNR quantiles 5/50/95% = {q[0]:.2f} / {q[1]:.2f} / {q[2]:.2f} dB -> {path.name}")
        return
    result = emit_and_summarize(run_experiment(spec), out_dir)
    print(f"{out_dir}: {result} ({time.perf_counter() - t0:.1f} s)")


def emit_and_summarize(result, out_dir: Path) -> str:
    emit_result(result, out_dir)
    msg = f"{len(result.records)} trials"
    if result.excluded:
        msg += f", {len(result.excluded)} excluded"
    if result.records:
        try:
            op = operating_point(result.records, 0.1)
            msg += f", Pmd at Pfa<=0.1: {op.pmd:.4g} ({op.misses}/{op.actives} misses)"
        except ValueError:
            pass
    return msg


def cmd_run(args):
    spec = load_config(args.config)
    spec = apply_overrides(spec, _overrides(args.set))
    if args.workers:
        spec = dataclasses.replace(spec, workers=args.workers)
    _execute(spec, Path(args.out or spec.output_dir))


def cmd_preset(args):
    if args.list:
        for name in PRESETS:
            print(name + ": " + ", ".join(preset_variants(name, args.scale)))
        return
    if not args.name:
        raise ConfigError("preset name required (or --list)")
    variants = preset_variants(args.name, args.scale)
    if args.all:
        chosen = list(variants)
    elif args.variant:
        if args.variant not in variants:
            raise ConfigError(f"{args.name} has no variant {args.variant!r}; pick from {', '.join(variants)}")
        chosen = [args.variant]
    else:
        chosen = [next(iter(variants))]
    base = Path(args.out or "results") / f"{args.name}-{args.scale}"
    over = _overrides(args.set)
    for label in chosen:
        spec = apply_overrides(variants[label], over)
        if args.workers:
            spec = dataclasses.replace(spec, workers=args.workers)
        _execute(spec, base / label)


def cmd_roc(args):
    records = load_archive(args.dir)
    th = parse_thresholds(args.thresholds)
    curve = roc_sweep(records, th, provenance={"source": str(args.dir)})
    text = curve.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_snr(args):
    spec = ExperimentSpec(kind="snr", n_trials=args.samples)
    spec = apply_overrides(spec, _overrides(args.set))
    spec = dataclasses.replace(spec, sim=dataclasses.replace(spec.sim, power_policy="full"))
    _execute(spec, Path(args.out))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfactivity", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("config")
    r.add_argument("set", nargs="*", metavar="key=value", help="overrides such as sim.M=40 det.T=3")
    r.add_argument("-o", "--out", help="output directory (default: the config's output_dir)")
    r.add_argument("-j", "--workers", type=int)
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("preset", help="run a figure preset")
    pr.add_argument("name", nargs="?", choices=PRESETS)
    pr.add_argument("set", nargs="*", metavar="key=value")
    pr.add_argument("--scale", default="desk", choices=("desk", "paper"))
    pr.add_argument("--variant", help="curve label within the preset (default: the first)")
    pr.add_argument("--all", action="store_true", help="run every curve of the preset")
    pr.add_argument("--list", action="store_true", help="list presets and their curves")
    pr.add_argument("-o", "--out", help="parent output directory (default: results)")
    pr.add_argument("-j", "--workers", type=int)
    pr.set_defaults(func=cmd_preset)

    rc = sub.add_parser("roc", help="re-sweep thresholds over a stored run")
    rc.add_argument("dir", help="run directory or records.npz")
    rc.add_argument("--thresholds", default="1e-4:10:60", help="lo:hi:count (log-spaced) or a comma list")
    rc.add_argument("-o", "--out", help="write CSV here instead of stdout")
    rc.set_defaults(func=cmd_roc)

    s = sub.add_parser("snr-cdf", help="dominant-AP SNR distribution at full power")
    s.add_argument("set", nargs="*", metavar="key=value", help="e.g. sim.M=100 sim.shadow_var=8")
    s.add_argument("-n", "--samples", type=int, default=20_000)
    s.add_argument("-o", "--out", default="results/snr")
    s.set_defaults(func=cmd_snr)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"cfactivity: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
