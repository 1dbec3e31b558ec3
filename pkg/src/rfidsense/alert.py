"""Streaming choke-point monitor: sliding per-tag windows, classification,
confidence + consecutive-window debouncing and per-tag cooldown."""
from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, TextIO, Tuple, Union

import numpy as np

from . import _core
from .domain import DomainError, FeatureMode, MaterialClass, TagRead
from .mlp import ClassifierModel, predict

EVENT_COLUMNS = ("seq", "timestamp_ms", "tag_id", "class", "confidence")


@dataclass(frozen=True)
class RiskPolicy:
    suspicious: Tuple[MaterialClass, ...] = (MaterialClass.JacketPocket, MaterialClass.Backpack)
    min_confidence: float = 0.8
    consecutive: int = 2
    cooldown_ms: int = 10_000
    window_ms: int = 1000
    slide_ms: int = 200
    min_reads: int = 2
    choke_distance_m: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "suspicious", tuple(self.suspicious))
        if not 0.0 < self.min_confidence <= 1.0:
            raise DomainError("min_confidence must lie in (0, 1]")
        if self.consecutive < 1:
            raise DomainError("consecutive must be >= 1")
        if self.cooldown_ms < 0:
            raise DomainError("cooldown_ms must be >= 0")
        if self.window_ms <= 0 or self.slide_ms <= 0:
            raise DomainError("window_ms and slide_ms must be > 0")
        if self.min_reads < 2:
            raise DomainError("min_reads must be >= 2 for window statistics")
        if self.choke_distance_m is not None and not self.choke_distance_m > 0:
            raise DomainError("choke_distance_m must be > 0")

    @classmethod
    def from_dict(cls, d: Mapping) -> "RiskPolicy":
        kw = {k: d[k] for k in cls.__dataclass_fields__ if k in d and k != "suspicious"}
        if "suspicious" in d:
            kw["suspicious"] = tuple(MaterialClass.parse(c) for c in d["suspicious"])
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["suspicious"] = [c.name for c in self.suspicious]
        return d


def load_policy(path: Union[str, Path]) -> RiskPolicy:
    with open(path, encoding="utf-8") as fh:
        return RiskPolicy.from_dict(json.load(fh))


@dataclass(frozen=True)
class AlertEvent:
    seq: int
    timestamp_ms: int
    tag_id: str
    material: MaterialClass
    confidence: float
    window_start_ms: int
    window_end_ms: int
    streak_start_ms: int

    @property
    def latency_ms(self) -> int:
        """From the first read of the first qualifying window to the alert."""
        return self.timestamp_ms - self.streak_start_ms


@dataclass
class MonitorMetrics:
    reads_seen: int = 0
    windows_evaluated: int = 0
    events_emitted: int = 0
    reads_dropped: int = 0


@dataclass
class _TagState:
    next_start: int
    times: List[int] = field(default_factory=list)
    rssi: List[float] = field(default_factory=list)
    phase: List[float] = field(default_factory=list)
    dist: List[Optional[float]] = field(default_factory=list)
    streak: int = 0
    streak_start: int = 0
    quiet_until: int = -(2 ** 62)

    def insert(self, r: TagRead) -> None:
        i = bisect.bisect_right(self.times, r.timestamp_ms)
        self.times.insert(i, r.timestamp_ms)
        self.rssi.insert(i, r.rssi_dbm)
        self.phase.insert(i, r.phase_rad)
        self.dist.insert(i, r.distance_m)

    def prune(self, before: int) -> None:
        k = bisect.bisect_left(self.times, before)
        if k:
            del self.times[:k], self.rssi[:k], self.phase[:k], self.dist[:k]


class Monitor:
    """Consumes reads in per-tag timestamp order and emits AlertEvents."""

    def __init__(self, model: ClassifierModel, policy: RiskPolicy = RiskPolicy()):
        unknown = [c.name for c in policy.suspicious if c not in model.classes]
        if unknown:
            raise DomainError(f"suspicious classes not known to the model: {', '.join(unknown)}")
        if model.feature_mode is FeatureMode.SinglePoint:
            raise DomainError("monitoring needs a window-feature model")
        self.model = model
        self.policy = policy
        self.metrics = MonitorMetrics()
        self._tags: Dict[str, _TagState] = {}
        self._seq = 0
        self._suspicious = frozenset(policy.suspicious)
        self._uses_distance = model.feature_mode is FeatureMode.WindowStatsDist

    def process_read(self, read: TagRead) -> List[AlertEvent]:
        self.metrics.reads_seen += 1
        st = self._tags.get(read.tag_id)
        if st is None:
            st = self._tags[read.tag_id] = _TagState(next_start=read.timestamp_ms)
        if read.timestamp_ms < st.next_start:
            self.metrics.reads_dropped += 1
            return []
        events = self._advance(read.tag_id, st, read.timestamp_ms)
        st.insert(read)
        return events

    def process(self, reads: Iterable[TagRead]) -> List[AlertEvent]:
        out: List[AlertEvent] = []
        for r in reads:
            out.extend(self.process_read(r))
        return out

    def flush(self) -> List[AlertEvent]:
        """Close every window that contains buffered reads (end of stream)."""
        out: List[AlertEvent] = []
        for tag, st in self._tags.items():
            if st.times:
                out.extend(self._advance(tag, st, st.times[-1] + self.policy.window_ms))
        return out

    def drain_metrics(self) -> MonitorMetrics:
        m = self.metrics
        return MonitorMetrics(m.reads_seen, m.windows_evaluated, m.events_emitted, m.reads_dropped)

    def _advance(self, tag: str, st: _TagState, now: int) -> List[AlertEvent]:
        """Evaluate all windows of ``tag`` that end at or before ``now``."""
        W, step = self.policy.window_ms, self.policy.slide_ms
        events: List[AlertEvent] = []
        while st.next_start + W <= now:
            s = st.next_start
            if not st.times or st.times[0] >= s + W:
                # empty windows: skip ahead to the first one that can hold a read
                target = st.times[0] if st.times else now
                k = max(1, (target - W - s) // step + 1)
                st.next_start = s + k * step
                st.streak = 0
                continue
            hi = bisect.bisect_left(st.times, s + W)
            ev = self._evaluate(tag, st, s, hi)
            if ev is not None:
                events.append(ev)
            st.next_start = s + step
            st.prune(st.next_start)
        return events

    def _evaluate(self, tag: str, st: _TagState, start: int, hi: int) -> Optional[AlertEvent]:
        pol = self.policy
        if hi < pol.min_reads:
            st.streak = 0
            return None
        rssi = np.array(st.rssi[:hi], dtype=np.float64)
        phase = np.array(st.phase[:hi], dtype=np.float64)
        feats = _core.window_stats(rssi, phase, np.array([0, hi], dtype=np.int64), self.model.circular_phase)[0]
        if self._uses_distance:
            d = pol.choke_distance_m
            if d is None:
                ds = [x for x in st.dist[:hi] if x is not None]
                if not ds:
                    raise DomainError("distance model needs choke_distance_m or per-read distances")
                d = float(np.mean(ds))
            feats = np.append(feats, d)
        k, p = predict(self.model.network, self.model.prepare(feats))
        self.metrics.windows_evaluated += 1
        cls, conf = self.model.classes[k], float(p[k])
        end = start + pol.window_ms
        if end < st.quiet_until:
            st.streak = 0
            return None
        if cls in self._suspicious and conf >= pol.min_confidence:
            if st.streak == 0:
                st.streak_start = st.times[0]
            st.streak += 1
        else:
            st.streak = 0
            return None
        if st.streak < pol.consecutive:
            return None
        self._seq += 1
        self.metrics.events_emitted += 1
        ev = AlertEvent(self._seq, end, tag, cls, conf, start, end, st.streak_start)
        st.quiet_until = end + pol.cooldown_ms
        st.streak = 0
        return ev


def write_events(events: Iterable[AlertEvent], out: Union[str, Path, TextIO]) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_events(events, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for e in events:
        w.writerow([e.seq, e.timestamp_ms, e.tag_id, e.material.name, f"{e.confidence:.6f}"])


def read_events(source: Union[str, Path, Iterable[str]]) -> List[dict]:
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_events(fh)
    rows = list(csv.DictReader(source))
    for r in rows:
        r["seq"] = int(r["seq"])
        r["timestamp_ms"] = int(r["timestamp_ms"])
        r["confidence"] = float(r["confidence"])
    return rows
