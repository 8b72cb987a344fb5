"""Classify software-failure incidents into a ten-type taxonomy and chart them per industry."""

from .analytics import IndustryBreakdown, aggregate, dominant_failure
from .classifier import (
    BackendConfig,
    ClassificationResult,
    ResponseCache,
    classify_dataset,
    classify_record,
    keyword_oracle,
)
from .evaluation import ConfusionMatrix, MetricsReport, build_confusion, compute_metrics, diff_matrices
from .ingestion import Dataset, IncidentRecord, load_dataset, validate_dataset
from .prompting import FewShotExample, PromptVersion, RenderedPrompt, bundled_example_bank, render_prompt
from .reporting import ChartSpec, chart_spec, render_chart, render_markdown_report
from .taxonomy import FailureType, Industry, canonical_order, normalize_label

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "ChartSpec",
    "ClassificationResult",
    "ConfusionMatrix",
    "Dataset",
    "FailureType",
    "FewShotExample",
    "IncidentRecord",
    "Industry",
    "IndustryBreakdown",
    "MetricsReport",
    "PromptVersion",
    "RenderedPrompt",
    "ResponseCache",
    "aggregate",
    "build_confusion",
    "bundled_example_bank",
    "canonical_order",
    "chart_spec",
    "classify_dataset",
    "classify_record",
    "compute_metrics",
    "diff_matrices",
    "dominant_failure",
    "keyword_oracle",
    "load_dataset",
    "normalize_label",
    "render_chart",
    "render_markdown_report",
    "render_prompt",
    "validate_dataset",
]
