"""Incremental hierarchical text classification for early risk detection."""

__version__ = "0.1.0"

from .classifier import (
    BlockNode,
    Classification,
    ConfigError,
    Level,
    LevelConfig,
    RunningVector,
    SelectionPolicy,
    classify,
    classify_at_level,
    incremental_append,
    parse_blocks,
)
from .data import DataError, LabeledStream, load_dataset
from .evaluation import ErdeConfig, MetricsReport, chunk_split, erde, evaluate, latency_cost
from .explain import ExplanationTree, build_explanation, render_html
from .model import CategoryProfile, Hyperparams, Model, ModelError, Tokenizer, merge_profiles
from .stream import EarlyPolicy, Status, SubjectState, feed, finalize, run_subject
from .tuning import SearchSpec, grid_search, kfold_split, refine_sigma, search_sigma

__all__ = [
    "BlockNode", "CategoryProfile", "Classification", "ConfigError", "DataError", "EarlyPolicy",
    "ErdeConfig", "ExplanationTree", "Hyperparams", "LabeledStream", "Level", "LevelConfig",
    "MetricsReport", "Model", "ModelError", "RunningVector", "SearchSpec", "SelectionPolicy",
    "Status", "SubjectState", "Tokenizer", "build_explanation", "chunk_split", "classify",
    "classify_at_level", "erde", "evaluate", "feed", "finalize", "grid_search",
    "incremental_append", "kfold_split", "latency_cost", "load_dataset", "merge_profiles",
    "parse_blocks", "refine_sigma", "render_html", "run_subject", "search_sigma",
]
