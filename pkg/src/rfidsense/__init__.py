"""Container/material classification from RFID tag reads."""
from ._core import BACKEND
from .domain import (
    ALL_CLASSES,
    DomainError,
    FeatureMode,
    FeatureVector,
    LabeledSample,
    MaterialClass,
    ReadWindow,
    TagRead,
    material_class_from_index,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_CLASSES",
    "BACKEND",
    "DomainError",
    "FeatureMode",
    "FeatureVector",
    "LabeledSample",
    "MaterialClass",
    "ReadWindow",
    "TagRead",
    "material_class_from_index",
]
