"""Run orchestration, report bundle and SVG rendering."""

from .config import ConfigError, DatasetEntry, RunConfig, load_config, parse_config
from .pipeline import PipelineError, ReportBundle, analyse, run_pipeline

__all__ = [
    "ConfigError",
    "DatasetEntry",
    "PipelineError",
    "ReportBundle",
    "RunConfig",
    "analyse",
    "load_config",
    "parse_config",
    "run_pipeline",
]
