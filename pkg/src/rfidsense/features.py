"""Feature extraction (2/4/5-dimensional), standardization and feature CSVs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Union

import numpy as np

from . import _core
from .domain import (
    DomainError,
    FeatureMode,
    FeatureVector,
    LabeledSample,
    MaterialClass,
    ReadWindow,
    TagRead,
    check_uniform_mode,
)


def single_point_features(read: TagRead) -> FeatureVector:
    return FeatureVector(np.array([read.rssi_dbm, read.phase_rad]), FeatureMode.SinglePoint)


def window_feature_matrix(windows: Sequence[ReadWindow], circular: bool = True) -> np.ndarray:
    """Stack [rssi_mean, rssi_var, phase_mean, phase_var] rows for many windows at once.

    Phase statistics are circular by default: mean direction in [0, 2pi) and
    2*(1 - mean resultant length). ``circular=False`` gives arithmetic mean and
    sample variance of the raw phases instead.
    """
    counts = np.fromiter((len(w.reads) for w in windows), dtype=np.int64, count=len(windows))
    if counts.size and counts.min() < 2:
        raise DomainError("window features need at least 2 reads per window")
    offsets = np.zeros(counts.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    rssi = np.fromiter((r.rssi_dbm for w in windows for r in w.reads), dtype=np.float64, count=int(offsets[-1]))
    phase = np.fromiter((r.phase_rad for w in windows for r in w.reads), dtype=np.float64, count=int(offsets[-1]))
    return _core.window_stats(rssi, phase, offsets, circular)


def window_features(w: ReadWindow, circular: bool = True) -> FeatureVector:
    if len(w.reads) < 2:
        raise DomainError("window features need at least 2 reads")
    return FeatureVector(window_feature_matrix([w], circular)[0], FeatureMode.WindowStats)


def with_distance(f: FeatureVector, d: float) -> FeatureVector:
    if f.mode is not FeatureMode.WindowStats:
        raise DomainError("distance can only be appended to WindowStats features")
    if not d > 0:
        raise DomainError(f"distance must be > 0, got {d}")
    return FeatureVector(np.append(f.values, float(d)), FeatureMode.WindowStatsDist)


def window_distance(w: ReadWindow) -> float:
    ds = [r.distance_m for r in w.reads if r.distance_m is not None]
    if not ds:
        raise DomainError(f"window at {w.window_start_ms} ms has no distance readings")
    return math.fsum(ds) / len(ds)


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray
    mode: Optional[FeatureMode] = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StandardizationParams):
            return NotImplemented
        return (self.mode is other.mode and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.std, other.std))


class StandardizationError(DomainError):
    pass


def _as_matrix(samples) -> np.ndarray:
    rows = []
    for s in samples:
        if isinstance(s, LabeledSample):
            rows.append(s.features.values)
        elif isinstance(s, FeatureVector):
            rows.append(s.values)
        else:
            rows.append(np.asarray(s, dtype=np.float64))
    return np.vstack(rows) if rows else np.empty((0, 0))


def fit_standardization(samples) -> StandardizationParams:
    """Per-feature mean/std (population) from training samples only."""
    samples = list(samples)
    if len(samples) < 2:
        raise StandardizationError("need at least 2 samples to fit standardization")
    mode = None
    if isinstance(samples[0], LabeledSample):
        mode = check_uniform_mode(samples)
    elif isinstance(samples[0], FeatureVector):
        mode = samples[0].mode
    x = _as_matrix(samples)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    names = mode.columns if mode is not None else tuple(f"feature{i}" for i in range(x.shape[1]))
    for i, s in enumerate(std):
        if not s > 0:
            raise StandardizationError(f"feature {names[i]!r} has zero variance")
    return StandardizationParams(mean, std, mode)


def standardize_matrix(params: StandardizationParams, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - params.mean) / params.std


def apply_standardization(params: StandardizationParams, f: FeatureVector) -> np.ndarray:
    """Scaled values for the network. Variance slots may become negative, so a
    bare array is returned rather than a FeatureVector of the same mode."""
    if params.mode is not None and f.mode is not params.mode:
        raise DomainError(f"params fitted for {params.mode.name}, got {f.mode.name}")
    return standardize_matrix(params, f.values)


# Feature CSV persistence

def feature_header(mode: FeatureMode) -> List[str]:
    return list(mode.columns) + ["label"]


def write_feature_csv(samples: Sequence[LabeledSample], out: Union[str, Path, TextIO]) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_feature_csv(samples, fh)
        return
    mode = check_uniform_mode(samples)
    if mode is None:
        raise DomainError("cannot write an empty feature set (mode unknown)")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(feature_header(mode))
    for s in samples:
        w.writerow([repr(float(v)) for v in s.features.values] + [s.label.index])


def read_feature_csv(source: Union[str, Path, Iterable[str]]) -> List[LabeledSample]:
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_feature_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip() for h in header]
    mode = next((m for m in FeatureMode if feature_header(m) == header), None)
    if mode is None:
        raise DomainError(f"unrecognized feature header {','.join(header)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            vals = np.array([float(v) for v in row[:-1]])
            out.append(LabeledSample(FeatureVector(vals, mode), MaterialClass.parse(row[-1])))
        except (ValueError, DomainError) as exc:
            raise DomainError(f"line {lineno}: {exc}") from None
    return out


def samples_to_arrays(samples: Sequence[LabeledSample]):
    x = _as_matrix(samples)
    y = np.array([s.label.index for s in samples], dtype=np.int64)
    return x, y


def extract_samples(log, mode: FeatureMode, window_ms: int = 1000, min_reads: int = 2,
                    circular: bool = True) -> List[LabeledSample]:
    """Labelled feature vectors for every labelled tag in a ReaderLog."""
    from .ingest import window_reads

    out: List[LabeledSample] = []
    for tag in log.tag_ids():
        label = log.labels.get(tag)
        if label is None:
            continue
        if mode is FeatureMode.SinglePoint:
            out.extend(LabeledSample(single_point_features(r), label, tag) for r in log.reads_for(tag))
            continue
        windows = window_reads(log, tag, window_ms, max(min_reads, 2))
        if not windows:
            continue
        mat = window_feature_matrix(windows, circular)
        for w, row in zip(windows, mat):
            f = FeatureVector(row, FeatureMode.WindowStats)
            if mode is FeatureMode.WindowStatsDist:
                f = with_distance(f, window_distance(w))
            out.append(LabeledSample(f, label, tag))
    return out
