"""File-protocol adapter wrapping segmentation models for batch inference."""

from .adapter import AdapterConfig, binarize, mock_segment, run_batch

__all__ = ["AdapterConfig", "binarize", "mock_segment", "run_batch"]
