import math

import numpy as np
import pytest

from rfidsense.domain import (
    ALL_CLASSES,
    DomainError,
    FeatureMode,
    FeatureVector,
    LabeledSample,
    MaterialClass,
    ReadWindow,
    TagRead,
    check_uniform_mode,
    material_class_from_index,
)


def test_index_endpoints():
    assert material_class_from_index(0) is MaterialClass.Control
    assert material_class_from_index(6) is MaterialClass.Backpack


@pytest.mark.parametrize("bad", [7, -1, 100])
def test_index_out_of_range(bad):
    with pytest.raises(DomainError):
        material_class_from_index(bad)


def test_index_bijection_and_order():
    assert [c.index for c in ALL_CLASSES] == list(range(7))
    assert [c.name for c in ALL_CLASSES] == [
        "Control", "PlasticBox", "CardboardBox", "PlasticBag", "JacketPocket", "FabricBag", "Backpack",
    ]
    for i in range(7):
        assert material_class_from_index(i).index == i


@pytest.mark.parametrize("cls", list(MaterialClass))
def test_name_round_trip(cls):
    assert MaterialClass.parse(str(cls)) is cls
    assert MaterialClass.parse(cls.name.upper()) is cls
    assert MaterialClass.parse(str(cls.index)) is cls


def test_parse_unknown():
    with pytest.raises(DomainError):
        MaterialClass.parse("Suitcase")


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(phase_rad=2 * math.pi),
        dict(phase_rad=-0.01),
        dict(rssi_dbm=5.0),
        dict(rssi_dbm=-121.0),
        dict(distance_m=0.0),
    ],
)
def test_tag_read_invariants(kwargs):
    base = dict(timestamp_ms=0, tag_id="AA", antenna_port=1, rssi_dbm=-60.0, phase_rad=1.0, distance_m=None)
    base.update(kwargs)
    with pytest.raises(DomainError):
        TagRead(**base)


def test_read_window_checks():
    a = TagRead(0, "A", 1, -60.0, 1.0)
    b = TagRead(10, "B", 1, -60.0, 1.0)
    with pytest.raises(DomainError):
        ReadWindow((a, b), 0, 1000)
    with pytest.raises(DomainError):
        ReadWindow((TagRead(1000, "A", 1, -60.0, 1.0),), 0, 1000)
    w = ReadWindow((a, TagRead(999, "A", 1, -61.0, 1.0)), 0, 1000)
    assert w.length_ms == 1000 and w.tag_id == "A"


def test_feature_vector_length_and_variance():
    assert len(FeatureVector([1.0, 2.0], FeatureMode.SinglePoint)) == 2
    with pytest.raises(DomainError):
        FeatureVector([1.0, 2.0, 3.0], FeatureMode.SinglePoint)
    with pytest.raises(DomainError):
        FeatureVector([-60, -1.0, 1.0, 0.1], FeatureMode.WindowStats)
    f = FeatureVector(np.array([-60, 1.0, 1.0, 0.1, 2.0]), FeatureMode.WindowStatsDist)
    assert f.values.flags.writeable is False


def test_uniform_mode():
    s1 = LabeledSample(FeatureVector([1, 2], FeatureMode.SinglePoint), MaterialClass.Control)
    s2 = LabeledSample(FeatureVector([1, 2, 3, 4], FeatureMode.WindowStats), MaterialClass.Control)
    assert check_uniform_mode([s1, s1]) is FeatureMode.SinglePoint
    with pytest.raises(DomainError):
        check_uniform_mode([s1, s2])
