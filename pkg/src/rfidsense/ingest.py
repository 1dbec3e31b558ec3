"""Reader-log CSV parsing and per-tag tumbling windows."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

from .domain import DomainError, MaterialClass, ReadWindow, TagRead

LOG_COLUMNS = ("timestamp_ms", "tag_id", "antenna_port", "rssi_dbm", "phase", "distance_m", "label")
IMPINJ_PHASE_STEPS = 4096


class ParseError(DomainError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PhaseUnit(enum.Enum):
    Radians = "radians"
    ImpinjUnits = "impinj"


@dataclass
class ReaderLog:
    reads: List[TagRead] = field(default_factory=list)
    source: str = ""
    labels: Dict[str, MaterialClass] = field(default_factory=dict)

    def tag_ids(self) -> List[str]:
        seen: Dict[str, None] = {}
        for r in self.reads:
            seen.setdefault(r.tag_id)
        return list(seen)

    def reads_for(self, tag: str) -> List[TagRead]:
        return [r for r in self.reads if r.tag_id == tag]


def _opt_float(text: str) -> Optional[float]:
    text = text.strip()
    return float(text) if text else None


def iter_reader_log(
    stream: Iterable[str],
    phase_unit: PhaseUnit = PhaseUnit.Radians,
    strict_order: bool = True,
) -> Iterator[Tuple[TagRead, Optional[MaterialClass]]]:
    """Yield ``(read, label)`` pairs row by row; suitable for unbounded streams."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return
    header = [h.strip() for h in header]
    if tuple(header) != LOG_COLUMNS:
        raise ParseError(1, f"expected header {','.join(LOG_COLUMNS)}")
    last_ts: Dict[str, int] = {}
    labels: Dict[str, MaterialClass] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(LOG_COLUMNS):
            raise ParseError(lineno, f"expected {len(LOG_COLUMNS)} fields, got {len(row)}")
        try:
            ts = int(row[0])
            tag = row[1].strip()
            if not tag:
                raise ValueError("empty tag_id")
            port = int(row[2])
            rssi = float(row[3])
            raw_phase = float(row[4])
            if phase_unit is PhaseUnit.ImpinjUnits:
                if not (raw_phase.is_integer() and 0 <= raw_phase < IMPINJ_PHASE_STEPS):
                    raise ValueError(f"phase {row[4]!r} outside 0..{IMPINJ_PHASE_STEPS - 1} units")
                phase = raw_phase * 2.0 * math.pi / IMPINJ_PHASE_STEPS
            else:
                phase = raw_phase
            read = TagRead(ts, tag, port, rssi, phase, _opt_float(row[5]))
            label = MaterialClass.parse(row[6]) if row[6].strip() else None
        except (ValueError, DomainError) as exc:
            raise ParseError(lineno, str(exc)) from None
        if strict_order:
            if ts < last_ts.get(tag, ts):
                raise ParseError(lineno, f"timestamp {ts} goes backwards for tag {tag}")
            last_ts[tag] = ts
        if label is not None and labels.setdefault(tag, label) is not label:
            raise ParseError(lineno, f"tag {tag} labelled both {labels[tag]} and {label}")
        yield read, label


def parse_reader_log(
    stream: Iterable[str],
    phase_unit: PhaseUnit = PhaseUnit.Radians,
    source: str = "",
) -> ReaderLog:
    log = ReaderLog(source=source)
    for read, label in iter_reader_log(stream, phase_unit):
        if label is not None:
            log.labels.setdefault(read.tag_id, label)
        log.reads.append(read)
    return log


def read_reader_log(path: Union[str, Path], phase_unit: PhaseUnit = PhaseUnit.Radians) -> ReaderLog:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_reader_log(fh, phase_unit, source=str(path))


def write_reader_log(log: ReaderLog, out: Union[str, Path, TextIO]) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_reader_log(log, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in log.reads:
        label = log.labels.get(r.tag_id)
        w.writerow([
            r.timestamp_ms,
            r.tag_id,
            r.antenna_port,
            repr(r.rssi_dbm),
            repr(r.phase_rad),
            "" if r.distance_m is None else repr(r.distance_m),
            label.name if label is not None else "",
        ])


def window_reads(
    log: Union[ReaderLog, Sequence[TagRead]],
    tag: str,
    window_ms: int = 1000,
    min_reads: int = 2,
) -> List[ReadWindow]:
    """Tumbling windows aligned to the tag's first read; short windows are dropped."""
    if window_ms <= 0:
        raise DomainError("window_ms must be > 0")
    reads = log.reads_for(tag) if isinstance(log, ReaderLog) else [r for r in log if r.tag_id == tag]
    if not reads:
        return []
    t0 = reads[0].timestamp_ms
    windows = []
    for k, group in groupby(reads, key=lambda r: (r.timestamp_ms - t0) // window_ms):
        chunk = tuple(group)
        if len(chunk) < min_reads:
            continue
        start = t0 + k * window_ms
        windows.append(ReadWindow(chunk, start, start + window_ms))
    return windows
