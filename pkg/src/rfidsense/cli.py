"""Command-line entry point: simulate, extract, split, train, eval, run, compare, monitor."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import channel_sim as sim
from .data_prep import balance_classes, load_split, save_split, split
from .domain import FeatureMode, sort_classes
from .evaluation import evaluate, metrics_dict, render_report, write_metrics
from .experiments import (
    ExperimentKind,
    SessionSpec,
    StageError,
    compare_runs,
    default_plan,
    load_config,
    load_run_metrics,
    run_experiment,
    simulate_plan,
)
from .features import (
    extract_samples,
    fit_standardization,
    read_feature_csv,
    samples_to_arrays,
    standardize_matrix,
    write_feature_csv,
)
from .ingest import PhaseUnit, iter_reader_log, read_reader_log, write_reader_log
from .mlp import PRESET_MODES, PRESETS, ClassifierModel, TrainConfig, init_network, load_model, save_model, train


class CliError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")


def _phase_unit(text: str) -> PhaseUnit:
    return PhaseUnit(text)


def cmd_simulate(args) -> int:
    plan = json.loads(Path(args.plan).read_text("utf-8"))
    profiles = sim.load_profiles(args.profile) if args.profile else sim.default_profiles()
    channel = sim.ChannelConfig.from_dict(plan.get("channel", {}))
    if "sessions" in plan:
        sessions = [SessionSpec.from_dict(s) for s in plan["sessions"]]
    else:
        sessions = default_plan(ExperimentKind.parse(plan.get("kind", "onesec")), None, float(plan.get("scale", 1.0)))
    log = simulate_plan(sessions, profiles, channel, int(plan.get("seed", channel.seed)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_reader_log(log, out / "reads.csv")
    print(f"wrote {len(log.reads)} reads for {len(sessions)} sessions to {out / 'reads.csv'}")
    return 0


def cmd_extract(args) -> int:
    mode = FeatureMode.parse(args.mode)
    log = read_reader_log(args.inp, _phase_unit(args.phase_unit))
    samples = extract_samples(log, mode, args.window_ms, args.min_reads, circular=not args.naive_phase)
    if not samples:
        raise CliError("extract", "no labelled samples produced")
    write_feature_csv(samples, args.out)
    print(f"wrote {len(samples)} {mode.name} samples to {args.out}")
    return 0


def cmd_split(args) -> int:
    samples = read_feature_csv(args.inp)
    balanced = balance_classes(samples, args.seed)
    ds = split(balanced, (args.train, args.val, args.test), args.seed)
    save_split(ds, args.out)
    print(f"split {len(balanced)} balanced samples: train={len(ds.train)} val={len(ds.val)} test={len(ds.test)}")
    return 0


def _load_training_data(data_dir: Path, seed: int):
    if (data_dir / "train.csv").exists():
        return load_split(data_dir)
    feats = data_dir / "features.csv"
    if not feats.exists():
        raise CliError("train", f"{data_dir} holds neither train/val/test CSVs nor features.csv")
    return split(balance_classes(read_feature_csv(feats), seed), seed=seed)


def cmd_train(args) -> int:
    ds = _load_training_data(Path(args.data), args.seed)
    spec = PRESETS[args.preset].with_seed(args.seed)
    mode = PRESET_MODES[args.preset]
    if ds.train and ds.train[0].features.mode is not mode:
        raise CliError("train", f"preset {args.preset} needs {mode.name} features")
    classes = sort_classes({s.label for s in ds.train})
    if len(classes) != spec.output_dim:
        raise CliError("train", f"preset {args.preset} has {spec.output_dim} outputs, data has {len(classes)} classes")
    params = fit_standardization(ds.train)
    model = ClassifierModel(init_network(spec), params, classes, mode, args.preset, not args.naive_phase)
    xtr, _ = samples_to_arrays(ds.train)
    xva, _ = samples_to_arrays(ds.val)
    cfg = TrainConfig(max_epochs=args.max_epochs, patience=args.patience, seed=args.seed)
    net, hist = train(
        model.network,
        (standardize_matrix(params, xtr), model.label_to_output([s.label for s in ds.train])),
        (standardize_matrix(params, xva), model.label_to_output([s.label for s in ds.val])),
        cfg,
    )
    model.network = net
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    with open(out / "history.json", "w", encoding="utf-8") as fh:
        json.dump(hist.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"trained {hist.epochs} epochs (best {hist.best_epoch}); model at {out / 'model.json'}")
    if ds.test:
        acc, cm = evaluate(model, ds.test)
        write_metrics(metrics_dict(acc, cm), out / "metrics.json")
        print(f"test accuracy {acc:.4f}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    samples = read_feature_csv(args.data)
    acc, cm = evaluate(model, samples)
    print(render_report(acc, cm))
    if args.json:
        write_metrics(metrics_dict(acc, cm), args.json)
    if args.confusion_csv:
        cm.to_csv(args.confusion_csv)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_experiment(cfg, args.out)
    print(f"{cfg.name}: test accuracy {report.accuracy:.4f} after {report.history.epochs} epochs")
    print(f"artifacts in {Path(report.artifacts['metrics']).parent}")
    return 0


def cmd_compare(args) -> int:
    metrics = []
    for d in args.dirs:
        m = load_run_metrics(d)
        m.setdefault("name", Path(d).name)
        metrics.append(m)
    print(compare_runs(metrics).render())
    return 0


def cmd_monitor(args) -> int:
    from .alert import EVENT_COLUMNS, Monitor, load_policy, RiskPolicy

    model = load_model(args.model)
    policy = load_policy(args.policy) if args.policy else RiskPolicy()
    monitor = Monitor(model, policy)
    src = sys.stdin if args.stdin or not args.inp else open(args.inp, newline="", encoding="utf-8")
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="", encoding="utf-8")
    import csv

    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS)

    def emit(events):
        for e in events:
            writer.writerow([e.seq, e.timestamp_ms, e.tag_id, e.material.name, f"{e.confidence:.6f}"])
        if events:
            out.flush()

    try:
        wall0 = log0 = None
        for read, _ in iter_reader_log(src, _phase_unit(args.phase_unit), strict_order=False):
            if args.realtime:
                if wall0 is None:
                    wall0, log0 = time.monotonic(), read.timestamp_ms
                delay = (read.timestamp_ms - log0) / 1000.0 - (time.monotonic() - wall0)
                if delay > 0:
                    time.sleep(delay)
            emit(monitor.process_read(read))
        emit(monitor.flush())
    finally:
        if src is not sys.stdin:
            src.close()
        if out is not sys.stdout:
            out.close()
    m = monitor.drain_metrics()
    print(f"reads={m.reads_seen} windows={m.windows_evaluated} events={m.events_emitted} dropped={m.reads_dropped}",
          file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfidsense", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a labelled reader log from a session plan")
    s.add_argument("--profile", help="material profile CSV (default: bundled profiles)")
    s.add_argument("--plan", required=True, help="session plan JSON")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("extract", help="reader log CSV -> feature CSV")
    s.add_argument("--mode", required=True, choices=["single", "window", "window-dist"])
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--phase-unit", default="radians", choices=[u.value for u in PhaseUnit])
    s.add_argument("--window-ms", type=int, default=1000)
    s.add_argument("--min-reads", type=int, default=2)
    s.add_argument("--naive-phase", action="store_true", help="arithmetic phase mean/variance")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("split", help="balance and split a feature CSV into train/val/test")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train", type=float, default=0.70)
    s.add_argument("--val", type=float, default=0.15)
    s.add_argument("--test", type=float, default=0.15)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train a preset network on a split directory")
    s.add_argument("--preset", required=True, choices=sorted(PRESETS))
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-epochs", type=int, default=200)
    s.add_argument("--patience", type=int, default=10)
    s.add_argument("--naive-phase", action="store_true", help="record naive phase stats in the model")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a model on a feature CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--json", help="also write metrics JSON here")
    s.add_argument("--confusion-csv", help="also write the confusion matrix CSV here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("run", help="run a full experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="override the config's out_dir")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("compare", help="compare accuracies across run directories")
    s.add_argument("dirs", nargs="+")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("monitor", help="stream reads through a model and emit alerts")
    s.add_argument("--model", required=True)
    s.add_argument("--policy", help="risk policy JSON (default policy if omitted)")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--in", dest="inp")
    src.add_argument("--stdin", action="store_true")
    s.add_argument("--out", default="-", help="events CSV (default stdout)")
    s.add_argument("--phase-unit", default="radians", choices=[u.value for u in PhaseUnit])
    s.add_argument("--realtime", action="store_true", help="replay at log timestamps")
    s.set_defaults(func=cmd_monitor)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
