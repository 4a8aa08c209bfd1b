"""Conditional-GAN hair synthesis: data pipeline, networks, training,
inference tasks, evaluation metrics, CLI and HTTP service."""

__version__ = "0.1.0"

from .data import DatasetSplit, SampleRecord  # noqa: F401
from .models import HairSynthesisModel, ModelConfig  # noqa: F401
