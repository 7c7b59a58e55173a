"""Knapsack-based schema linking for text-to-SQL.

Scores every table and column of a database for relevance to a natural
language question, estimates how much redundancy the query can tolerate
from its most similar training queries, and picks the linked schema with
exact 0-1 knapsack optimization: tables first, then columns within each
selected table. Ships the indicator-gated linking metrics alongside.
"""

__version__ = "0.1.0"

from .gold import GoldExtractionError, extract_gold_linking
from .knapsack import KnapsackInstance, brute_force, discretize, solve_dp
from .linker import (
    CorpusLinkOutcome,
    KnapsackSchemaLinker,
    LinkDiagnostics,
    LinkerConfig,
    link_corpus,
    link_query,
)
from .metrics import (
    EvalReport,
    QueryScore,
    enhanced_scores,
    evaluate_corpus,
    missing_indicator,
    precision,
    recall,
)
from .schema import (
    COLUMN,
    TABLE,
    ColumnDef,
    LinkingResult,
    QueryCase,
    SchemaCatalog,
    SchemaError,
    TableDef,
    catalogs_by_id,
    contains,
    element_count,
    intersect,
    load_catalogs,
    load_linking_file,
    load_queries,
    load_queries_lenient,
    write_linking_file,
)
from .scoring import (
    ElementValues,
    FileScorer,
    LexicalScorer,
    OracleScorer,
    RemoteScorer,
    ScoreSheet,
    Scorer,
    ScoringError,
    combine_relevance,
    redundancy_of,
    score_query,
)
from .tolerance import (
    RemoteEmbedder,
    ToleranceEstimate,
    TrainingCorpusIndex,
    build_index,
    estimate_tolerance,
    top_k_similar,
)

__all__ = [
    "COLUMN",
    "TABLE",
    "ColumnDef",
    "CorpusLinkOutcome",
    "ElementValues",
    "EvalReport",
    "FileScorer",
    "GoldExtractionError",
    "KnapsackInstance",
    "KnapsackSchemaLinker",
    "LexicalScorer",
    "LinkDiagnostics",
    "LinkerConfig",
    "LinkingResult",
    "OracleScorer",
    "QueryCase",
    "QueryScore",
    "RemoteEmbedder",
    "RemoteScorer",
    "SchemaCatalog",
    "SchemaError",
    "ScoreSheet",
    "Scorer",
    "ScoringError",
    "TableDef",
    "ToleranceEstimate",
    "TrainingCorpusIndex",
    "brute_force",
    "build_index",
    "catalogs_by_id",
    "combine_relevance",
    "contains",
    "discretize",
    "element_count",
    "enhanced_scores",
    "estimate_tolerance",
    "evaluate_corpus",
    "extract_gold_linking",
    "intersect",
    "link_corpus",
    "link_query",
    "load_catalogs",
    "load_linking_file",
    "load_queries",
    "load_queries_lenient",
    "missing_indicator",
    "precision",
    "recall",
    "redundancy_of",
    "score_query",
    "solve_dp",
    "top_k_similar",
    "write_linking_file",
]
