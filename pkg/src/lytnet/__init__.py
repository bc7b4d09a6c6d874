"""LytNetV2 inference engine and street-crossing guidance pipeline."""

from .model import CLASSES, LytNet, Prediction, build_default_spec

__version__ = "0.1.0"
