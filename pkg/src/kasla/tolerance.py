"""Redundancy-tolerance estimation from similar training queries.

A query's knapsack budget is the largest gold redundancy sum among its
top-K most similar training queries, computed from each training query's
own cached score sheet. Budgets are kept separately for the table stage
and the per-table column stages (plus a flattened joint budget for the
single-knapsack ablation mode), then discretized with the same scale as
the weights.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import requests

from .gold import extract_gold_linking
from .knapsack import KnapsackError
from .scoring import Scorer, ScoreSheet, score_query, tokenize
from .schema import QueryCase, SchemaCatalog, resolve_catalog

DEFAULT_TOP_K = 30


class ToleranceError(ValueError):
    pass


class RemoteEmbedder:
    """Client for the optional /embed similarity endpoint."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        try:
            response = requests.post(
                f"{self.endpoint}/embed", json={"texts": list(texts)}, timeout=self.timeout
            )
            response.raise_for_status()
            vectors = response.json()["vectors"]
        except (requests.RequestException, KeyError, TypeError) as exc:
            raise ToleranceError(f"embed request failed: {exc}") from exc
        return [[float(v) for v in vec] for vec in vectors]


@dataclass(frozen=True)
class IndexEntry:
    case: QueryCase  # gold_linking always populated
    sheet: ScoreSheet
    vector: dict[str, float]
    norm: float


@dataclass
class TrainingCorpusIndex:
    entries: tuple[IndexEntry, ...]
    idf: dict[str, float]
    embedder: RemoteEmbedder | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def to_payload(self) -> dict:
        """Canonical content view; identical inputs give identical payloads."""
        return {
            "idf": {t: self.idf[t] for t in sorted(self.idf)},
            "cases": [
                {
                    "query_id": e.case.query_id,
                    "db_id": e.case.db_id,
                    "question": e.case.question,
                    "gold": {
                        t: sorted(cols)
                        for t, cols in sorted(e.case.gold_linking.entries.items())
                    },
                    "sheet": e.sheet.to_payload(),
                }
                for e in self.entries
            ],
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_payload(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ToleranceEstimate:
    table_capacity_raw: float
    column_capacity_raw: float
    table_capacity_int: int
    column_capacity_int: int
    k_used: int
    joint_capacity_raw: float = 0.0
    joint_capacity_int: int = 0
    fallback: bool = False

    def to_payload(self) -> dict:
        return {
            "table_capacity_raw": self.table_capacity_raw,
            "column_capacity_raw": self.column_capacity_raw,
            "table_capacity_int": self.table_capacity_int,
            "column_capacity_int": self.column_capacity_int,
            "joint_capacity_raw": self.joint_capacity_raw,
            "joint_capacity_int": self.joint_capacity_int,
            "k_used": self.k_used,
            "fallback": self.fallback,
        }


def build_index(
    train_cases: Iterable[QueryCase],
    catalogs: Mapping[str, SchemaCatalog],
    binary_scorer: Scorer,
    prob_scorer: Scorer,
    epsilon: float,
    embedder: RemoteEmbedder | None = None,
) -> TrainingCorpusIndex:
    """Score each training case against its own schema and index questions.

    Cases must carry gold_linking, or gold_sql from which it is derived.
    """
    prepared: list[tuple[QueryCase, ScoreSheet, list[str]]] = []
    for case in sorted(train_cases, key=lambda c: c.query_id):
        catalog = resolve_catalog(catalogs, case.db_id)
        gold = case.gold_linking
        if gold is None:
            if not case.gold_sql:
                raise ToleranceError(
                    f"training case {case.query_id!r} has neither gold_linking nor gold_sql"
                )
            gold, _ = extract_gold_linking(case.gold_sql, catalog)
        bound = case.with_gold(gold)
        sheet = score_query(bound, catalog, binary_scorer, prob_scorer, epsilon)
        prepared.append((bound, sheet, tokenize(case.question)))

    n = len(prepared)
    doc_freq: Counter[str] = Counter()
    for _, _, tokens in prepared:
        doc_freq.update(set(tokens))
    idf = {term: math.log((1 + n) / (1 + df)) + 1.0 for term, df in doc_freq.items()}

    entries = tuple(
        IndexEntry(
            case=case,
            sheet=sheet,
            vector=_weighted_vector(tokens, idf),
            norm=_norm(_weighted_vector(tokens, idf)),
        )
        for case, sheet, tokens in prepared
    )
    return TrainingCorpusIndex(entries=entries, idf=idf, embedder=embedder)


def _weighted_vector(tokens: list[str], idf: Mapping[str, float]) -> dict[str, float]:
    counts = Counter(tokens)
    return {term: count * idf.get(term, 1.0) for term, count in counts.items()}


def _norm(vector: Mapping[str, float]) -> float:
    return math.sqrt(sum(v * v for v in vector.values()))


def _cosine_sparse(a: Mapping[str, float], a_norm: float, b: Mapping[str, float], b_norm: float) -> float:
    if a_norm == 0.0 or b_norm == 0.0:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(value * b.get(term, 0.0) for term, value in a.items())
    return dot / (a_norm * b_norm)


def _cosine_dense(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def top_k_similar(
    index: TrainingCorpusIndex, question: str, k: int
) -> list[tuple[QueryCase, float]]:
    """The k most similar training cases, ties broken by ascending query_id."""
    if k < 1:
        raise ToleranceError(f"k must be >= 1, got {k}")
    if not index.entries:
        return []
    if index.embedder is not None:
        # one batch per call: the endpoint's idf weighting is per-request,
        # so vectors are only comparable within the same request
        vectors = index.embedder.embed(
            [question] + [entry.case.question for entry in index.entries]
        )
        query_vec = vectors[0]
        sims = [
            (entry, _cosine_dense(query_vec, vec))
            for entry, vec in zip(index.entries, vectors[1:])
        ]
    else:
        vector = _weighted_vector(tokenize(question), index.idf)
        norm = _norm(vector)
        sims = [
            (entry, _cosine_sparse(vector, norm, entry.vector, entry.norm))
            for entry in index.entries
        ]
    sims.sort(key=lambda pair: (-pair[1], pair[0].case.query_id))
    return [(entry.case, sim) for entry, sim in sims[:k]]


def _case_budgets(entry: IndexEntry) -> tuple[float, float, float]:
    """(table sum, max per-table column sum, flattened sum) of gold weights."""
    gold = entry.case.gold_linking
    sheet = entry.sheet
    table_sum = sum(sheet.table_scores[t].w for t in gold.entries)
    column_sums = [
        sum(sheet.column_scores[(t, c)].w for c in cols)
        for t, cols in gold.entries.items()
    ]
    max_column_sum = max(column_sums, default=0.0)
    joint_sum = table_sum + sum(column_sums)
    return table_sum, max_column_sum, joint_sum


def _entry_by_query_id(index: TrainingCorpusIndex) -> dict[str, IndexEntry]:
    return {entry.case.query_id: entry for entry in index.entries}


def estimate_tolerance(
    index: TrainingCorpusIndex,
    question: str,
    k: int,
    scale: int,
    query_sheet: ScoreSheet,
) -> ToleranceEstimate:
    """Budget estimate for one query.

    With an empty index the budgets fall back to the select-everything
    sums of the query's own sheet, so linking degrades to the full schema
    instead of an empty result.
    """
    if scale < 1:
        raise KnapsackError("scale must be >= 1")
    retrieved = top_k_similar(index, question, k)
    if not retrieved:
        table_raw = query_sheet.table_weight_sum()
        column_raw = max(
            (query_sheet.column_weight_sum(t) for t in query_sheet.table_scores),
            default=0.0,
        )
        joint_raw = table_raw + sum(
            query_sheet.column_weight_sum(t) for t in query_sheet.table_scores
        )
        return ToleranceEstimate(
            table_capacity_raw=table_raw,
            column_capacity_raw=column_raw,
            table_capacity_int=_floor_scaled(table_raw, scale),
            column_capacity_int=_floor_scaled(column_raw, scale),
            joint_capacity_raw=joint_raw,
            joint_capacity_int=_floor_scaled(joint_raw, scale),
            k_used=0,
            fallback=True,
        )

    by_id = _entry_by_query_id(index)
    table_raw = column_raw = joint_raw = 0.0
    for case, _ in retrieved:
        t_sum, c_sum, j_sum = _case_budgets(by_id[case.query_id])
        table_raw = max(table_raw, t_sum)
        column_raw = max(column_raw, c_sum)
        joint_raw = max(joint_raw, j_sum)
    return ToleranceEstimate(
        table_capacity_raw=table_raw,
        column_capacity_raw=column_raw,
        table_capacity_int=_floor_scaled(table_raw, scale),
        column_capacity_int=_floor_scaled(column_raw, scale),
        joint_capacity_raw=joint_raw,
        joint_capacity_int=_floor_scaled(joint_raw, scale),
        k_used=len(retrieved),
        fallback=False,
    )


def _floor_scaled(raw: float, scale: int) -> int:
    return int(math.floor(raw * scale))
