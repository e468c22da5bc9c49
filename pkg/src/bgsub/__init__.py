"""Background subtraction with per-pixel adaptive kernel variances."""

from .pipeline import BackgroundSubtractor, FrameResult, PipelineConfig, parse_config, process_sequence

__all__ = ["BackgroundSubtractor", "FrameResult", "PipelineConfig", "parse_config", "process_sequence"]
__version__ = "0.1.0"
