"""Synthetic UHF backscatter channel: log-distance RSSI, round-trip phase and
per-material attenuation / scattering, realized as a Poisson read process."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Union

import numpy as np

from .domain import (
    ALL_CLASSES,
    TWO_PI,
    DomainError,
    MaterialClass,
    TagRead,
)

PROFILE_COLUMNS = ("class", "rssi_atten_db", "rssi_sigma_db", "phase_offset_rad", "phase_sigma_rad")


class ProfileError(DomainError):
    pass


@dataclass(frozen=True)
class MaterialProfile:
    material: MaterialClass
    rssi_atten_db: float
    rssi_sigma_db: float
    phase_offset_rad: float
    phase_sigma_rad: float

    def __post_init__(self) -> None:
        if self.rssi_atten_db < 0:
            raise ProfileError(f"{self.material}: rssi_atten_db must be >= 0")
        if not self.rssi_sigma_db > 0:
            raise ProfileError(f"{self.material}: rssi_sigma_db must be > 0")
        if not self.phase_sigma_rad > 0:
            raise ProfileError(f"{self.material}: phase_sigma_rad must be > 0")


ProfileSet = Dict[MaterialClass, MaterialProfile]


@dataclass(frozen=True)
class ChannelConfig:
    rssi0_dbm: float = -55.0
    d0_m: float = 1.0
    path_loss_exponent: float = 2.0
    read_rate_hz: float = 5.0
    noise_floor_dbm: float = -84.0
    wavelength_m: float = 0.327
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.d0_m > 0:
            raise DomainError("d0_m must be > 0")
        if not 1.5 <= self.path_loss_exponent <= 4.0:
            raise DomainError("path_loss_exponent must lie in [1.5, 4.0]")
        if not self.read_rate_hz > 0:
            raise DomainError("read_rate_hz must be > 0")
        if not self.wavelength_m > 0:
            raise DomainError("wavelength_m must be > 0")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChannelConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


def _check_distance(d: float) -> None:
    if not d > 0:
        raise DomainError(f"distance must be > 0, got {d}")


def expected_rssi(cfg: ChannelConfig, profile: MaterialProfile, d: float) -> float:
    _check_distance(d)
    return cfg.rssi0_dbm - 10.0 * cfg.path_loss_exponent * math.log10(d / cfg.d0_m) - profile.rssi_atten_db


def expected_phase(cfg: ChannelConfig, profile: MaterialProfile, d: float) -> float:
    _check_distance(d)
    return wrap_phase(4.0 * math.pi * d / cfg.wavelength_m + profile.phase_offset_rad)


def wrap_phase(x):
    """Map angles into [0, 2pi); works on scalars and arrays."""
    w = np.mod(x, TWO_PI)
    # mod can return exactly 2pi for tiny negative inputs
    w = np.where(w >= TWO_PI, 0.0, w)
    return float(w) if np.ndim(w) == 0 else w


def make_rng(seed: Union[int, np.random.Generator, None]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _realize(cfg, profile, d, n, rng):
    mu_r = expected_rssi(cfg, profile, d)
    mu_p = expected_phase(cfg, profile, d)
    rssi = mu_r + profile.rssi_sigma_db * rng.standard_normal(n)
    phase = wrap_phase(mu_p + profile.phase_sigma_rad * rng.standard_normal(n))
    return rssi, np.atleast_1d(phase)


def sample_read(
    cfg: ChannelConfig,
    profile: MaterialProfile,
    d: float,
    t_ms: int,
    rng,
    tag_id: str = "E200000000000000",
    antenna_port: int = 1,
) -> Optional[TagRead]:
    """Draw one read; None means the read fell below the receive sensitivity."""
    rng = make_rng(rng)
    rssi, phase = _realize(cfg, profile, d, 1, rng)
    r = float(rssi[0])
    if r < cfg.noise_floor_dbm:
        return None
    return TagRead(int(t_ms), tag_id, antenna_port, min(r, 0.0), float(phase[0]), float(d))


def generate_session(
    cfg: ChannelConfig,
    profile: MaterialProfile,
    d: float,
    duration_s: float,
    rng,
    tag_id: str = "E200000000000000",
    start_ms: int = 0,
    antenna_port: int = 1,
) -> List[TagRead]:
    """Reads from one static tag over ``duration_s`` at Poisson arrival times."""
    if not duration_s > 0:
        raise DomainError("duration_s must be > 0")
    _check_distance(d)
    rng = make_rng(rng)
    duration_ms = duration_s * 1000.0
    mean_gap_ms = 1000.0 / cfg.read_rate_hz
    # over-draw gaps, then trim to the duration
    n_draw = int(duration_s * cfg.read_rate_hz * 1.5) + 20
    times = []
    t = 0.0
    last = -1
    while True:
        gaps = rng.exponential(mean_gap_ms, n_draw)
        done = False
        for g in gaps:
            t += g
            if t >= duration_ms:
                done = True
                break
            ts = int(t)
            if ts <= last:
                ts = last + 1
                if ts >= duration_ms:
                    done = True
                    break
            times.append(ts)
            last = ts
        if done:
            break
    n = len(times)
    rssi, phase = _realize(cfg, profile, d, n, rng)
    out = []
    for ts, r, p in zip(times, rssi, phase):
        if r < cfg.noise_floor_dbm:
            continue
        out.append(TagRead(start_ms + ts, tag_id, antenna_port, min(float(r), 0.0), float(p), float(d)))
    return out


def default_profiles() -> ProfileSet:
    """Bundled profile set honouring the qualitative attenuation/variance orderings."""
    text = resources.files("rfidsense").joinpath("data/default_profiles.csv").read_text("utf-8")
    return parse_profiles(io.StringIO(text))


def parse_profiles(stream: Iterable[str]) -> ProfileSet:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or set(PROFILE_COLUMNS) - set(reader.fieldnames):
        raise ProfileError(f"profile header must contain {','.join(PROFILE_COLUMNS)}")
    profiles: ProfileSet = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            cls = MaterialClass.parse(row["class"])
            prof = MaterialProfile(
                cls,
                float(row["rssi_atten_db"]),
                float(row["rssi_sigma_db"]),
                float(row["phase_offset_rad"]),
                float(row["phase_sigma_rad"]),
            )
        except (ValueError, TypeError) as exc:
            raise ProfileError(f"line {lineno}: {exc}") from exc
        if cls in profiles:
            raise ProfileError(f"line {lineno}: duplicate profile for {cls}")
        profiles[cls] = prof
    missing = [c.name for c in ALL_CLASSES if c not in profiles]
    if missing:
        raise ProfileError(f"profile set missing classes: {', '.join(missing)}")
    return profiles


def load_profiles(path: Union[str, Path]) -> ProfileSet:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_profiles(fh)


def save_profiles(profiles: ProfileSet, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for cls in ALL_CLASSES:
            p = profiles[cls]
            w.writerow([cls.name, repr(p.rssi_atten_db), repr(p.rssi_sigma_db),
                        repr(p.phase_offset_rad), repr(p.phase_sigma_rad)])
