"""Knowledge-graph-driven dialogue evaluation for clinical language models."""

from medkgeval._core import (
    Error,
    __version__,
    consistency,
    cosine_similarity,
    derive_case_seed,
    discriminative_symptoms,
    filter_graph,
    graph_stats,
    message_digest,
    normalize_score,
    run_cli,
)

__all__ = [
    "Error",
    "__version__",
    "consistency",
    "cosine_similarity",
    "derive_case_seed",
    "discriminative_symptoms",
    "filter_graph",
    "graph_stats",
    "message_digest",
    "normalize_score",
    "run_cli",
]
