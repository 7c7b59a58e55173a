"""Linking metrics: recall, precision, the restricted missing indicator,
and the indicator-gated enhanced scores.

Per query, at a granularity g (tables, or (table, column) pairs):

    R  = |pred ∩ gold| / |gold|
    P  = |pred ∩ gold| / |pred|        (0 when pred is empty)
    I  = 1 if pred ⊇ gold else 0
    R+ = I * R,  P+ = I * P,  F1+ = harmonic mean of R+ and P+

Any single missing gold element zeroes the enhanced scores; corpus
aggregates are unweighted per-query means.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

from .schema import COLUMN, TABLE, Granularity, LinkingResult

GRANULARITIES: tuple[Granularity, ...] = (TABLE, COLUMN)

SCORE_FIELDS = ("recall", "precision", "indicator", "recall_plus", "precision_plus", "f1_plus")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class QueryScore:
    query_id: str
    granularity: Granularity
    recall: float
    precision: float
    indicator: int
    recall_plus: float
    precision_plus: float
    f1_plus: float


def recall(pred: LinkingResult, gold: LinkingResult, granularity: Granularity) -> float:
    gold_set = gold.elements(granularity)
    if not gold_set:
        raise MetricsError(f"undefined recall: empty gold at {granularity} granularity")
    return len(pred.elements(granularity) & gold_set) / len(gold_set)


def precision(pred: LinkingResult, gold: LinkingResult, granularity: Granularity) -> float:
    pred_set = pred.elements(granularity)
    if not pred_set:
        return 0.0
    return len(pred_set & gold.elements(granularity)) / len(pred_set)


def missing_indicator(pred: LinkingResult, gold: LinkingResult, granularity: Granularity) -> int:
    gold_set = gold.elements(granularity)
    if not gold_set:
        raise MetricsError(f"undefined indicator: empty gold at {granularity} granularity")
    return 1 if gold_set <= pred.elements(granularity) else 0


def enhanced_scores(
    pred: LinkingResult, gold: LinkingResult, granularity: Granularity, query_id: str = ""
) -> QueryScore:
    r = recall(pred, gold, granularity)
    p = precision(pred, gold, granularity)
    indicator = missing_indicator(pred, gold, granularity)
    r_plus = indicator * r
    p_plus = indicator * p
    denom = r_plus + p_plus
    f1_plus = 2.0 * r_plus * p_plus / denom if denom > 0 else 0.0
    return QueryScore(
        query_id=query_id,
        granularity=granularity,
        recall=r,
        precision=p,
        indicator=indicator,
        recall_plus=r_plus,
        precision_plus=p_plus,
        f1_plus=f1_plus,
    )


@dataclass
class EvalReport:
    per_query: list[QueryScore]
    aggregates: dict[Granularity, dict[str, float]]
    evaluated: dict[Granularity, int]
    missing_count: dict[Granularity, int]
    skipped_empty_gold: dict[Granularity, int]

    def aggregate(self, granularity: Granularity, field: str) -> float:
        return self.aggregates[granularity][field]

    def to_payload(self) -> dict:
        return {
            "per_query": [asdict(score) for score in self.per_query],
            "aggregates": self.aggregates,
            "evaluated": self.evaluated,
            "missing_count": self.missing_count,
            "skipped_empty_gold": self.skipped_empty_gold,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_payload(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    def summary_lines(self) -> list[str]:
        lines = []
        for granularity in GRANULARITIES:
            agg = self.aggregates[granularity]
            lines.append(
                f"{granularity}: "
                + " ".join(f"{name}={agg[name]:.4f}" for name in SCORE_FIELDS)
                + f" (n={self.evaluated[granularity]})"
            )
        return lines


def evaluate_corpus(
    preds: Mapping[str, LinkingResult], golds: Mapping[str, LinkingResult]
) -> EvalReport:
    """Score every gold query; a missing prediction counts as an empty linking.

    Queries whose gold is empty at a granularity are excluded from that
    granularity's aggregate and tallied separately.
    """
    per_query: list[QueryScore] = []
    sums: dict[Granularity, dict[str, float]] = {g: {f: 0.0 for f in SCORE_FIELDS} for g in GRANULARITIES}
    evaluated = {g: 0 for g in GRANULARITIES}
    missing_count = {g: 0 for g in GRANULARITIES}
    skipped = {g: 0 for g in GRANULARITIES}

    for query_id in sorted(golds):
        gold = golds[query_id]
        pred = preds.get(query_id)
        if pred is None:
            pred = LinkingResult(db_id=gold.db_id, entries={})
        for granularity in GRANULARITIES:
            if gold.is_empty(granularity):
                skipped[granularity] += 1
                continue
            score = enhanced_scores(pred, gold, granularity, query_id=query_id)
            per_query.append(score)
            evaluated[granularity] += 1
            if score.indicator == 0:
                missing_count[granularity] += 1
            for field in SCORE_FIELDS:
                sums[granularity][field] += getattr(score, field)

    aggregates: dict[Granularity, dict[str, float]] = {}
    for granularity in GRANULARITIES:
        n = evaluated[granularity]
        aggregates[granularity] = {
            field: (sums[granularity][field] / n if n else 0.0) for field in SCORE_FIELDS
        }
    return EvalReport(
        per_query=per_query,
        aggregates=aggregates,
        evaluated=evaluated,
        missing_count=missing_count,
        skipped_empty_gold=skipped,
    )
