"""Frame-to-feature extraction front end for the edmetrics dataset format."""

from .encoders import EncoderError, load_encoder
from .extract import ExtractionSummary, ExtractorConfig, extract_dataset, selfcheck

__version__ = "0.1.0"

__all__ = [
    "EncoderError",
    "ExtractionSummary",
    "ExtractorConfig",
    "extract_dataset",
    "load_encoder",
    "selfcheck",
]
