"""Command-line entry point: ``twinforge <subcommand> [options]``.

Exit codes: 0 success, 1 invalid input or configuration, 2 a pipeline stage failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .doe import group_metrics
from .errors import StageFailure, TwinForgeError
from .fom import FomConfig
from .pipeline import (
    Pipeline,
    PipelineConfig,
    SignalPlan,
    bench,
    config_from_dict,
    config_to_dict,
    load_config,
    load_signal_csv,
    predict,
)
from .rom.io import import_model
from .signals import SignalKind, TimeGrid, generate
from .store import StoreManifest, fmt, load_dataset

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 1, 2

# subcommand -> last pipeline stage it runs
STAGE_COMMANDS = {
    "gen-signals": "signals",
    "simulate": "simulate",
    "features": "features",
    "select-test": "select_test",
    "train": "train",
    "correlate": "correlate",
    "partner-chart": "partners",
    "finalize": "finalize",
    "run": "finalize",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags below override its fields")
    p.add_argument("--store", help="data set store root (default: $TWINFORGE_STORE or <output>/store)")
    p.add_argument("--output", help="artifact directory")
    p.add_argument("--workers", type=int, help="worker processes for simulation and training")
    p.add_argument("--seed-base", type=int, help="seed of the first generated signal")
    for kind in SignalKind:
        p.add_argument(f"--n-{kind.value.lower()}", type=int, metavar="COUNT",
                       help=f"number of {kind.value} signals")
    p.add_argument("--test-k", type=int, help="test group size")
    p.add_argument("--partners", type=int, help="number of recommended partners to try")
    p.add_argument("--max-epochs", type=int, help="training epoch budget per ROM")
    p.add_argument("--base-feature", help="feature that picks the base data set")
    p.add_argument("--base-direction", choices=("max", "min"))


def build_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    doc = config_to_dict(cfg)
    if args.store:
        doc["store_root"] = args.store
    if args.output:
        doc["output_dir"] = args.output
    if args.workers is not None:
        doc["workers"] = args.workers
    if args.seed_base is not None:
        doc["signals"]["seed_base"] = args.seed_base
    counts = dict(doc["signals"]["counts"])
    for kind in SignalKind:
        value = getattr(args, f"n_{kind.value.lower()}")
        if value is not None:
            if value == 0:
                counts.pop(kind.value, None)
            else:
                counts[kind.value] = value
    doc["signals"]["counts"] = counts
    for flag, key in (("test_k", "test_k"), ("partners", "partners"),
                      ("base_feature", "base_feature"), ("base_direction", "base_direction")):
        if getattr(args, flag) is not None:
            doc[key] = getattr(args, flag)
    if args.max_epochs is not None:
        doc["train"]["max_epochs"] = args.max_epochs
    return config_from_dict(doc)


def _cmd_stage(args) -> int:
    cfg = build_config(args)
    until = STAGE_COMMANDS[args.command]
    results = Pipeline(cfg).run(until)
    summary = {k: v for k, v in results[until].items() if k not in ("artifacts", "config_digest")}
    print(json.dumps({"stage": until, "output": cfg.output_dir, **summary}, indent=1, sort_keys=True))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = build_config(args)
    model = import_model(args.model)
    store = StoreManifest.open(cfg.store_path)
    ids = args.ids or store.ids
    gm = group_metrics(model, [load_dataset(i, store) for i in ids])
    print(json.dumps({"ids": ids, **gm.as_dict()}, indent=1, sort_keys=True))
    return EXIT_OK


def _signal_from_args(args):
    if args.signal:
        return load_signal_csv(args.signal)
    grid = TimeGrid(n_samples=args.n_samples, dt=args.dt)
    kind = SignalKind(args.kind)
    return generate(kind, SignalPlan().config_for(kind), grid, args.seed)


def _cmd_predict(args) -> int:
    signal = _signal_from_args(args)
    traj = predict(args.model, signal, args.x0, args.out)
    if args.out is None:
        sys.stdout.write("t,T_A,T_B\n")
        for k, t in enumerate(signal.grid.times):
            sys.stdout.write(",".join(fmt(float(v)) for v in (t, traj.outputs[0, k], traj.outputs[1, k])) + "\n")
    return EXIT_OK


def _cmd_bench(args) -> int:
    fom_cfg = FomConfig()
    if args.config:
        fom_cfg = load_config(args.config).fom
    if args.dt_internal is not None:
        fom_cfg = replace(fom_cfg, dt_internal=args.dt_internal)
    report = bench(args.model, fom_cfg, _signal_from_args(args), repeats=args.repeats)
    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return EXIT_OK


def _add_signal_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--signal", help="CSV with t,T_oven columns")
    p.add_argument("--kind", default="APRBS", choices=[k.value for k in SignalKind],
                   help="generated signal kind when --signal is absent")
    p.add_argument("--seed", type=int, default=0, help="seed of the generated signal")
    p.add_argument("--n-samples", type=int, default=280)
    p.add_argument("--dt", type=float, default=5.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, stage in STAGE_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the pipeline through stage '{stage}'")
        _add_config_flags(p)
        p.set_defaults(func=_cmd_stage)

    p = sub.add_parser("evaluate", help="metrics of a model file on stored data sets")
    _add_config_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("ids", nargs="*", help="data set ids (default: the whole store)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="integrate an exported ROM on an excitation")
    p.add_argument("--model", required=True)
    p.add_argument("--x0", type=float, nargs=2, required=True, metavar=("T_A", "T_B"))
    p.add_argument("--out", help="output CSV (default: stdout)")
    _add_signal_flags(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bench", help="ROM vs FOM wall time and speed-up")
    p.add_argument("--model", required=True)
    p.add_argument("--config", help="JSON config whose fom section is used")
    p.add_argument("--dt-internal", type=float)
    p.add_argument("--repeats", type=int, default=20)
    _add_signal_flags(p)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except TwinForgeError as exc:
        print(f"error: {getattr(exc, 'code', 'ERROR')}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
