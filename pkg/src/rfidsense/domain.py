"""Shared vocabulary: container classes, tag reads, windows and feature vectors."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi
RSSI_MIN_DBM = -120.0
RSSI_MAX_DBM = 0.0


class DomainError(ValueError):
    """Raised when a value violates a domain invariant."""


class MaterialClass(enum.Enum):
    """The seven container classes, in fixed index order."""

    Control = 0
    PlasticBox = 1
    CardboardBox = 2
    PlasticBag = 3
    JacketPocket = 4
    FabricBag = 5
    Backpack = 6

    @property
    def index(self) -> int:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "MaterialClass":
        """Accept a class name (case-insensitive) or its integer index."""
        s = str(text).strip()
        if s.lstrip("-").isdigit():
            return material_class_from_index(int(s))
        for member in cls:
            if member.name.lower() == s.lower():
                return member
        raise DomainError(f"unknown material class {text!r}")

    def __str__(self) -> str:
        return self.name


ALL_CLASSES: Tuple[MaterialClass, ...] = tuple(MaterialClass)


def material_class_from_index(i: int) -> MaterialClass:
    if not 0 <= int(i) < len(ALL_CLASSES):
        raise DomainError(f"class index {i} outside 0..{len(ALL_CLASSES) - 1}")
    return ALL_CLASSES[int(i)]


def sort_classes(classes: Sequence[MaterialClass]) -> Tuple[MaterialClass, ...]:
    return tuple(sorted(set(classes), key=lambda c: c.index))


@dataclass(frozen=True)
class TagRead:
    timestamp_ms: int
    tag_id: str
    antenna_port: int
    rssi_dbm: float
    phase_rad: float
    distance_m: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.phase_rad < TWO_PI:
            raise DomainError(f"phase {self.phase_rad} outside [0, 2pi)")
        if not RSSI_MIN_DBM <= self.rssi_dbm <= RSSI_MAX_DBM:
            raise DomainError(f"rssi {self.rssi_dbm} dBm outside [-120, 0]")
        if self.distance_m is not None and not self.distance_m > 0:
            raise DomainError(f"distance {self.distance_m} must be > 0")


@dataclass(frozen=True)
class ReadWindow:
    reads: Tuple[TagRead, ...]
    window_start_ms: int
    window_end_ms: int

    def __post_init__(self) -> None:
        if self.window_end_ms <= self.window_start_ms:
            raise DomainError("window end must follow window start")
        tags = {r.tag_id for r in self.reads}
        if len(tags) > 1:
            raise DomainError(f"window mixes tags {sorted(tags)}")
        prev = None
        for r in self.reads:
            if not self.window_start_ms <= r.timestamp_ms < self.window_end_ms:
                raise DomainError(f"read at {r.timestamp_ms} outside window")
            if prev is not None and r.timestamp_ms < prev:
                raise DomainError("window reads out of timestamp order")
            prev = r.timestamp_ms

    @property
    def length_ms(self) -> int:
        return self.window_end_ms - self.window_start_ms

    @property
    def tag_id(self) -> Optional[str]:
        return self.reads[0].tag_id if self.reads else None


class FeatureMode(enum.Enum):
    SinglePoint = "single"
    WindowStats = "window"
    WindowStatsDist = "window-dist"

    @property
    def length(self) -> int:
        return _MODE_LENGTH[self]

    @property
    def columns(self) -> Tuple[str, ...]:
        return _MODE_COLUMNS[self]

    @classmethod
    def parse(cls, text: str) -> "FeatureMode":
        s = str(text).strip().lower()
        for m in cls:
            if s in (m.value, m.name.lower()):
                return m
        raise DomainError(f"unknown feature mode {text!r}")


_MODE_LENGTH = {
    FeatureMode.SinglePoint: 2,
    FeatureMode.WindowStats: 4,
    FeatureMode.WindowStatsDist: 5,
}

_MODE_COLUMNS = {
    FeatureMode.SinglePoint: ("rssi_mean", "phase_mean"),
    FeatureMode.WindowStats: ("rssi_mean", "rssi_var", "phase_mean", "phase_var"),
    FeatureMode.WindowStatsDist: ("rssi_mean", "rssi_var", "phase_mean", "phase_var", "distance_m"),
}

# Positions of variance components, which must be non-negative.
_VAR_SLOTS = {
    FeatureMode.SinglePoint: (),
    FeatureMode.WindowStats: (1, 3),
    FeatureMode.WindowStatsDist: (1, 3),
}


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    mode: FeatureMode

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if arr.shape[0] != self.mode.length:
            raise DomainError(
                f"{self.mode.name} needs {self.mode.length} values, got {arr.shape[0]}"
            )
        for k in _VAR_SLOTS[self.mode]:
            if arr[k] < 0:
                raise DomainError(f"variance component {k} is negative")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.mode is other.mode and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.mode, self.values.tobytes()))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: MaterialClass
    group: str = field(default="", compare=False)


def check_uniform_mode(samples: Sequence[LabeledSample]) -> Optional[FeatureMode]:
    """Return the shared feature mode, or raise if modes are mixed."""
    modes = {s.features.mode for s in samples}
    if len(modes) > 1:
        raise DomainError(f"mixed feature modes in dataset: {sorted(m.name for m in modes)}")
    return next(iter(modes)) if modes else None
