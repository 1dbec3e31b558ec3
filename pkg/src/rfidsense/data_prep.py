"""Class balancing and stratified train/validation/test splitting."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .domain import DomainError, LabeledSample, MaterialClass, check_uniform_mode, sort_classes
from .features import read_feature_csv, write_feature_csv

DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)
SPLIT_NAMES = ("train", "val", "test")


def _by_class(samples: Sequence[LabeledSample]) -> Dict[MaterialClass, List[LabeledSample]]:
    groups: Dict[MaterialClass, List[LabeledSample]] = defaultdict(list)
    for s in samples:
        groups[s.label].append(s)
    return groups


def class_counts(samples: Sequence[LabeledSample]) -> Dict[MaterialClass, int]:
    return {c: len(v) for c, v in sorted(_by_class(samples).items(), key=lambda kv: kv[0].index)}


def balance_classes(
    samples: Sequence[LabeledSample],
    seed: int = 0,
    classes: Optional[Sequence[MaterialClass]] = None,
) -> List[LabeledSample]:
    """Downsample every class to the smallest class count.

    ``classes`` lists the classes that must be present; defaults to those seen.
    Surviving samples keep their original relative order.
    """
    groups = _by_class(samples)
    required = sort_classes(classes) if classes is not None else sort_classes(groups)
    empty = [c.name for c in required if not groups.get(c)]
    if empty:
        raise DomainError(f"no samples for class {', '.join(empty)}")
    target = min(len(groups[c]) for c in required)
    rng = np.random.default_rng(seed)
    keep = set()
    for c in required:
        members = groups[c]
        chosen = rng.choice(len(members), size=target, replace=False)
        keep.update(id(members[i]) for i in chosen)
    return [s for s in samples if id(s) in keep]


def _largest_remainder(n: int, fractions: Sequence[float]) -> List[int]:
    raw = [n * f for f in fractions]
    base = [int(np.floor(r)) for r in raw]
    short = n - sum(base)
    # ties go to the earlier split
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


@dataclass
class SplitDataset:
    train: List[LabeledSample]
    val: List[LabeledSample]
    test: List[LabeledSample]
    fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0

    def parts(self) -> Dict[str, List[LabeledSample]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def split(
    samples: Sequence[LabeledSample],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    seed: int = 0,
) -> SplitDataset:
    """Stratified split: each class shuffled and apportioned by largest remainder."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise DomainError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    check_uniform_mode(samples)
    rng = np.random.default_rng(seed)
    out: Tuple[List[LabeledSample], ...] = ([], [], [])
    for cls, members in sorted(_by_class(samples).items(), key=lambda kv: kv[0].index):
        if len(members) < 3:
            raise DomainError(f"class {cls.name} has {len(members)} samples; need at least 3")
        counts = _largest_remainder(len(members), fractions)
        if min(counts) == 0:
            raise DomainError(f"class {cls.name} too small to populate every split")
        perm = rng.permutation(len(members))
        pos = 0
        for part, k in zip(out, counts):
            part.extend(members[i] for i in perm[pos:pos + k])
            pos += k
    return SplitDataset(out[0], out[1], out[2], fractions, seed)  # type: ignore[arg-type]


def save_split(ds: SplitDataset, out_dir: Union[str, Path]) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in ds.parts().items():
        write_feature_csv(part, out_dir / f"{name}.csv")
    meta = {
        "seed": ds.seed,
        "fractions": list(ds.fractions),
        "counts": {name: len(part) for name, part in ds.parts().items()},
        "class_counts": {
            name: {c.name: n for c, n in class_counts(part).items()} for name, part in ds.parts().items()
        },
    }
    with open(out_dir / "split.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_split(data_dir: Union[str, Path]) -> SplitDataset:
    data_dir = Path(data_dir)
    meta_path = data_dir / "split.json"
    meta = json.loads(meta_path.read_text("utf-8")) if meta_path.exists() else {}
    parts = [read_feature_csv(data_dir / f"{name}.csv") for name in SPLIT_NAMES]
    fr = tuple(meta.get("fractions", DEFAULT_FRACTIONS))
    return SplitDataset(parts[0], parts[1], parts[2], fr, int(meta.get("seed", 0)))  # type: ignore[arg-type]
