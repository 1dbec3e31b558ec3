"""End-to-end experiment runs: simulate -> window -> features -> balance ->
split -> standardize -> train -> evaluate, with every artifact persisted."""
from __future__ import annotations

import csv
import enum
import json
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import channel_sim as sim
from .data_prep import DEFAULT_FRACTIONS, balance_classes, class_counts, save_split, split
from .domain import ALL_CLASSES, DomainError, FeatureMode, MaterialClass, sort_classes
from .evaluation import ConfusionMatrix, evaluate, metrics_dict, render_report, write_metrics
from .features import extract_samples, fit_standardization, samples_to_arrays, standardize_matrix, write_feature_csv
from .ingest import PhaseUnit, ReaderLog, read_reader_log, write_reader_log
from .mlp import PRESETS, ClassifierModel, History, TrainConfig, init_network, save_model, train

DIST_CLASSES = (MaterialClass.Control, MaterialClass.PlasticBox, MaterialClass.FabricBag, MaterialClass.Backpack)
REFERENCE_ACCURACY = {"single": 0.7412, "onesec": 0.8921, "dist": 0.8190}
EXPECTED_ORDER = ("onesec", "dist", "single")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class ExperimentKind(enum.Enum):
    SinglePoint = "single"
    OneSecond = "onesec"
    WithDistance = "dist"

    @property
    def feature_mode(self) -> FeatureMode:
        return {
            ExperimentKind.SinglePoint: FeatureMode.SinglePoint,
            ExperimentKind.OneSecond: FeatureMode.WindowStats,
            ExperimentKind.WithDistance: FeatureMode.WindowStatsDist,
        }[self]

    @classmethod
    def parse(cls, text: str) -> "ExperimentKind":
        s = str(text).strip().lower()
        for k in cls:
            if s in (k.value, k.name.lower()):
                return k
        raise DomainError(f"unknown experiment kind {text!r}")


@dataclass(frozen=True)
class SessionSpec:
    material: MaterialClass
    distance_m: float
    duration_s: float

    def to_dict(self) -> dict:
        return {"class": self.material.name, "distance_m": self.distance_m, "duration_s": self.duration_s}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SessionSpec":
        return cls(MaterialClass.parse(d["class"]), float(d["distance_m"]), float(d["duration_s"]))


def default_plan(kind: ExperimentKind, classes: Optional[Sequence[MaterialClass]] = None,
                 scale: float = 1.0) -> List[SessionSpec]:
    """Full-scale plans: 10 min at 2 m per class, or 2 min at each of 0.3/1/2 m."""
    if kind is ExperimentKind.WithDistance:
        classes = sort_classes(classes or DIST_CLASSES)
        return [SessionSpec(c, d, 120.0 * scale) for c in classes for d in (0.3, 1.0, 2.0)]
    classes = sort_classes(classes or ALL_CLASSES)
    return [SessionSpec(c, 2.0, 600.0 * scale) for c in classes]


@dataclass
class ExperimentConfig:
    kind: ExperimentKind
    name: str = ""
    sessions: List[SessionSpec] = field(default_factory=list)
    classes: Tuple[MaterialClass, ...] = ()
    preset: str = ""
    profiles_path: Optional[str] = None
    reads_path: Optional[str] = None
    channel: sim.ChannelConfig = field(default_factory=sim.ChannelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    window_ms: int = 1000
    min_reads: int = 2
    circular_phase: bool = True
    fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS
    out_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.preset:
            self.preset = self.kind.value
        if self.preset not in PRESETS:
            raise DomainError(f"unknown network preset {self.preset!r}")
        if not self.classes:
            self.classes = DIST_CLASSES if self.kind is ExperimentKind.WithDistance else ALL_CLASSES
        self.classes = sort_classes(self.classes)
        if not self.sessions and self.reads_path is None:
            self.sessions = default_plan(self.kind, self.classes)
        if not self.name:
            self.name = self.kind.value
        self.validate()

    def validate(self) -> None:
        spec = PRESETS[self.preset]
        if spec.output_dim != len(self.classes):
            raise DomainError(f"preset {self.preset} has {spec.output_dim} outputs but {len(self.classes)} classes configured")
        if spec.input_dim != self.kind.feature_mode.length:
            raise DomainError(f"preset {self.preset} expects {spec.input_dim} features, {self.kind.name} produces {self.kind.feature_mode.length}")
        if self.reads_path is None:
            planned = {s.material for s in self.sessions}
            missing = [c.name for c in self.classes if c not in planned]
            if missing:
                raise DomainError(f"session plan has no session for {', '.join(missing)}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "name": self.name,
            "preset": self.preset,
            "classes": [c.name for c in self.classes],
            "sessions": [s.to_dict() for s in self.sessions],
            "profiles": self.profiles_path,
            "reads": self.reads_path,
            "channel": {k: getattr(self.channel, k) for k in self.channel.__dataclass_fields__},
            "train": {k: getattr(self.train, k) for k in self.train.__dataclass_fields__},
            "seed": self.seed,
            "window_ms": self.window_ms,
            "min_reads": self.min_reads,
            "phase_stats": "circular" if self.circular_phase else "naive",
            "fractions": list(self.fractions),
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Optional[Path] = None) -> "ExperimentConfig":
        def resolve(p):
            if p is None or base_dir is None or Path(p).is_absolute():
                return p
            return str(base_dir / p)

        kind = ExperimentKind.parse(d["kind"])
        classes = tuple(MaterialClass.parse(c) for c in d.get("classes", ()))
        sessions = [SessionSpec.from_dict(s) for s in d.get("sessions", ())]
        if not sessions and d.get("reads") is None and "plan_scale" in d:
            sessions = default_plan(kind, classes or None, float(d["plan_scale"]))
        phase_stats = d.get("phase_stats", "circular")
        if phase_stats not in ("circular", "naive"):
            raise DomainError("phase_stats must be 'circular' or 'naive'")
        return cls(
            kind=kind,
            name=d.get("name", ""),
            sessions=sessions,
            classes=classes,
            preset=d.get("preset", ""),
            profiles_path=resolve(d.get("profiles")),
            reads_path=resolve(d.get("reads")),
            channel=sim.ChannelConfig.from_dict(d.get("channel", {})),
            train=TrainConfig.from_dict(d.get("train", {})),
            seed=int(d.get("seed", 0)),
            window_ms=int(d.get("window_ms", 1000)),
            min_reads=int(d.get("min_reads", 2)),
            circular_phase=phase_stats == "circular",
            fractions=tuple(d.get("fractions", DEFAULT_FRACTIONS)),
            out_dir=resolve(d.get("out_dir")),
        )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh), base_dir=path.parent)


def _seeds(seed: int) -> Dict[str, int]:
    children = np.random.SeedSequence(seed).spawn(5)
    names = ("sim", "balance", "split", "init", "shuffle")
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


def tag_id_for(material: MaterialClass, session_index: int) -> str:
    return f"E2003412{material.index:04X}{session_index:012X}"


def simulate_plan(sessions: Sequence[SessionSpec], profiles: sim.ProfileSet,
                  channel: sim.ChannelConfig, seed: int, gap_ms: int = 1000) -> ReaderLog:
    """One tag per session; sessions run back to back in time."""
    log = ReaderLog(source="simulated")
    children = np.random.SeedSequence(seed).spawn(len(sessions))
    t = 0
    for i, (s, ss) in enumerate(zip(sessions, children)):
        tag = tag_id_for(s.material, i)
        reads = sim.generate_session(channel, profiles[s.material], s.distance_m, s.duration_s,
                                     np.random.default_rng(ss), tag_id=tag, start_ms=t)
        log.reads.extend(reads)
        log.labels[tag] = s.material
        t += int(round(s.duration_s * 1000)) + gap_ms
    return log


@dataclass
class ExperimentReport:
    name: str
    kind: ExperimentKind
    accuracy: float
    confusion: ConfusionMatrix
    history: History
    sample_counts: Dict[str, int]
    artifacts: Dict[str, str] = field(default_factory=dict)
    model: Optional[ClassifierModel] = None

    def metrics(self) -> dict:
        m = metrics_dict(self.accuracy, self.confusion)
        m["name"] = self.name
        m["kind"] = self.kind.value
        m["samples"] = self.sample_counts
        m["history"] = self.history.to_dict()
        return m


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


def run_experiment(cfg: ExperimentConfig, out_dir: Union[str, Path, None] = None) -> ExperimentReport:
    out = Path(out_dir or cfg.out_dir or f"runs/{cfg.name}")
    out.mkdir(parents=True, exist_ok=True)
    seeds = _seeds(cfg.seed)
    art: Dict[str, str] = {}

    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    art["config"] = str(out / "config.json")

    @_stage("simulate")
    def stage_sim() -> ReaderLog:
        if cfg.reads_path is not None:
            return read_reader_log(cfg.reads_path, PhaseUnit.Radians)
        profiles = sim.load_profiles(cfg.profiles_path) if cfg.profiles_path else sim.default_profiles()
        return simulate_plan(cfg.sessions, profiles, cfg.channel, seeds["sim"])

    log = stage_sim()
    write_reader_log(log, out / "reads.csv")
    art["reads"] = str(out / "reads.csv")

    @_stage("features")
    def stage_features():
        samples = extract_samples(log, cfg.kind.feature_mode, cfg.window_ms, cfg.min_reads, cfg.circular_phase)
        return [s for s in samples if s.label in cfg.classes]

    samples = stage_features()
    write_feature_csv(samples, out / "features.csv")
    art["features"] = str(out / "features.csv")

    @_stage("split")
    def stage_split():
        balanced = balance_classes(samples, seeds["balance"], cfg.classes)
        return balanced, split(balanced, cfg.fractions, seeds["split"])

    balanced, ds = stage_split()
    save_split(ds, out / "data")
    art["data"] = str(out / "data")

    @_stage("train")
    def stage_train():
        params = fit_standardization(ds.train)
        spec = PRESETS[cfg.preset].with_seed(seeds["init"])
        probe = ClassifierModel(init_network(spec), params, cfg.classes, cfg.kind.feature_mode, cfg.preset)
        xtr, _ = samples_to_arrays(ds.train)
        xva, _ = samples_to_arrays(ds.val)
        ytr = probe.label_to_output([s.label for s in ds.train])
        yva = probe.label_to_output([s.label for s in ds.val])
        tcfg = replace(cfg.train, seed=seeds["shuffle"])
        net, hist = train(probe.network, (standardize_matrix(params, xtr), ytr),
                          (standardize_matrix(params, xva), yva), tcfg)
        model = ClassifierModel(net, params, cfg.classes, cfg.kind.feature_mode, cfg.preset, cfg.circular_phase)
        return model, hist

    model, hist = stage_train()
    save_model(model, out / "model.json")
    art["model"] = str(out / "model.json")
    _write_history(hist, out / "history.csv")
    art["history"] = str(out / "history.csv")

    @_stage("evaluate")
    def stage_eval():
        return evaluate(model, ds.test)

    acc, cm = stage_eval()
    counts = {
        "raw": len(samples),
        "balanced": len(balanced),
        "train": len(ds.train),
        "val": len(ds.val),
        "test": len(ds.test),
        "per_class_raw": {c.name: n for c, n in class_counts(samples).items()},
    }
    report = ExperimentReport(cfg.name, cfg.kind, acc, cm, hist, counts, art, model)
    write_metrics(report.metrics(), out / "metrics.json")
    art["metrics"] = str(out / "metrics.json")
    cm.to_csv(out / "confusion.csv")
    art["confusion"] = str(out / "confusion.csv")
    (out / "report.txt").write_text(render_report(acc, cm) + "\n", encoding="utf-8")
    return report


def _write_history(hist: History, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
        for i in range(hist.epochs):
            w.writerow([i + 1, repr(hist.train_loss[i]), repr(hist.val_loss[i]),
                        repr(hist.train_acc[i]), repr(hist.val_acc[i])])


def load_run_metrics(run_dir: Union[str, Path]) -> dict:
    with open(Path(run_dir) / "metrics.json", encoding="utf-8") as fh:
        return json.load(fh)


@dataclass
class Comparison:
    rows: List[Tuple[str, str, float]]
    ordering: List[str]
    ties: List[Tuple[str, str]]
    expected_order_holds: Optional[bool]

    def render(self) -> str:
        lines = [f"{'run':<24}{'kind':<10}{'accuracy':>10}{'reference':>10}"]
        for name, kind, acc in self.rows:
            ref = REFERENCE_ACCURACY.get(kind)
            lines.append(f"{name:<24}{kind:<10}{acc:>10.4f}{(f'{ref:.4f}' if ref else '-'):>10}")
        lines.append("ordering: " + " > ".join(self.ordering))
        for a, b in self.ties:
            lines.append(f"tie: {a} == {b}")
        if self.expected_order_holds is not None:
            verdict = "holds" if self.expected_order_holds else "does NOT hold"
            lines.append(f"expected ordering {' > '.join(EXPECTED_ORDER)}: {verdict}")
        return "\n".join(lines)


def compare_runs(reports: Sequence[Union[ExperimentReport, Mapping]]) -> Comparison:
    """Tabulate accuracies and check onesec > dist > single among the kinds present."""
    if len(reports) < 2:
        raise DomainError("compare_runs needs at least two reports")
    rows = []
    for r in reports:
        if isinstance(r, ExperimentReport):
            rows.append((r.name, r.kind.value, float(r.accuracy)))
        else:
            kind = ExperimentKind.parse(r["kind"]).value
            rows.append((str(r.get("name", kind)), kind, float(r["accuracy"])))
    ranked = sorted(rows, key=lambda row: -row[2])
    ties = [(a[0], b[0]) for i, a in enumerate(ranked) for b in ranked[i + 1:] if a[2] == b[2]]

    best_by_kind: Dict[str, float] = {}
    for _, kind, acc in rows:
        best_by_kind[kind] = max(acc, best_by_kind.get(kind, -1.0))
    present = [k for k in EXPECTED_ORDER if k in best_by_kind]
    holds: Optional[bool] = None
    if len(present) >= 2:
        holds = all(best_by_kind[a] > best_by_kind[b] for a, b in zip(present, present[1:]))
    return Comparison(rows, [r[0] for r in ranked], ties, holds)
