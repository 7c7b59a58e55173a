"""Hierarchical knapsack linking.

Per query: score every element, estimate the redundancy budget from
similar training queries, solve one knapsack over tables, then one
knapsack per selected table over its columns, and return the union.
Runtime is O(n_t * C_t + n_t * (n_c * C_c)) DP cells, where n_t/n_c are
table/column counts and C_t/C_c the integer capacities; the per-stage
cell counts are surfaced in the diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator

from .knapsack import KnapsackInstance, discretize, dp_cell_count, solve_dp
from .metrics import evaluate_corpus
from .schema import (
    LinkingResult,
    QueryCase,
    SchemaCatalog,
    catalogs_by_id,
    resolve_catalog,
)
from .scoring import (
    DEFAULT_EPSILON,
    LexicalScorer,
    Scorer,
    ScoreSheet,
    score_query,
)
from .tolerance import (
    DEFAULT_TOP_K,
    RemoteEmbedder,
    ToleranceEstimate,
    TrainingCorpusIndex,
    build_index,
    estimate_tolerance,
)

DEFAULT_SCALE = 100


class LinkerError(ValueError):
    pass


@dataclass(frozen=True)
class LinkerConfig:
    top_k: int = DEFAULT_TOP_K
    epsilon: float = DEFAULT_EPSILON
    scale: int = DEFAULT_SCALE
    joint_tolerance: bool = False
    nonempty_fallback: bool = True

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise LinkerError(f"top_k must be >= 1, got {self.top_k}")
        if not 0.0 < self.epsilon < 1.0:
            raise LinkerError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.scale < 1:
            raise LinkerError(f"scale must be >= 1, got {self.scale}")


@dataclass(frozen=True)
class StageDiagnostics:
    stage: str  # "table", "columns:<table>", or "joint"
    capacity_int: int
    item_count: int
    selected: tuple[str, ...]
    rejected: tuple[str, ...]
    item_scores: tuple[tuple[str, float, int], ...]  # (name, relevance, weight_int)
    selected_weight_int: int
    dp_cells: int
    fallback_fired: bool


@dataclass
class LinkDiagnostics:
    query_id: str
    db_id: str
    tolerance: ToleranceEstimate
    stages: list[StageDiagnostics] = field(default_factory=list)

    @property
    def dp_cells(self) -> int:
        return sum(stage.dp_cells for stage in self.stages)

    @property
    def any_fallback(self) -> bool:
        return any(stage.fallback_fired for stage in self.stages)

    def to_payload(self) -> dict:
        return {
            "query_id": self.query_id,
            "db_id": self.db_id,
            "tolerance": self.tolerance.to_payload(),
            "dp_cells": self.dp_cells,
            "stages": [
                {
                    "stage": s.stage,
                    "capacity_int": s.capacity_int,
                    "item_count": s.item_count,
                    "selected": list(s.selected),
                    "rejected": list(s.rejected),
                    "item_scores": {name: [r, w] for name, r, w in s.item_scores},
                    "selected_weight_int": s.selected_weight_int,
                    "dp_cells": s.dp_cells,
                    "fallback_fired": s.fallback_fired,
                }
                for s in self.stages
            ],
        }


def _run_stage(
    stage: str,
    item_ids: Sequence[str],
    values: Sequence[float],
    weights: Sequence[float],
    capacity_raw: float,
    config: LinkerConfig,
) -> tuple[list[str], StageDiagnostics]:
    weights_int, capacity_int = discretize(weights, capacity_raw, config.scale)
    instance = KnapsackInstance(
        item_ids=tuple(item_ids),
        values=tuple(values),
        weights_int=weights_int,
        capacity_int=capacity_int,
        scale=config.scale,
    )
    selected = solve_dp(instance)
    fallback_fired = False
    if not selected and item_ids and config.nonempty_fallback:
        # budget starves the stage: keep the single best item anyway
        best = min(zip(item_ids, values), key=lambda pair: (-pair[1], pair[0]))
        selected = [best[0]]
        fallback_fired = True
    chosen = set(selected)
    diag = StageDiagnostics(
        stage=stage,
        capacity_int=capacity_int,
        item_count=len(item_ids),
        selected=tuple(selected),
        rejected=tuple(name for name in item_ids if name not in chosen),
        item_scores=tuple(
            (name, value, weight)
            for name, value, weight in zip(item_ids, values, weights_int)
        ),
        selected_weight_int=instance.weight_of(selected),
        dp_cells=dp_cell_count(len(item_ids), capacity_int),
        fallback_fired=fallback_fired,
    )
    return selected, diag


def link_query(
    case: QueryCase,
    schema: SchemaCatalog,
    binary_scorer: Scorer,
    prob_scorer: Scorer,
    index: TrainingCorpusIndex,
    config: LinkerConfig | None = None,
) -> tuple[LinkingResult, LinkDiagnostics]:
    config = config or LinkerConfig()
    try:
        sheet = score_query(case, schema, binary_scorer, prob_scorer, config.epsilon)
        tolerance = estimate_tolerance(
            index, case.question, config.top_k, config.scale, query_sheet=sheet
        )
    except Exception as exc:
        raise LinkerError(f"query {case.query_id!r}: {exc}") from exc

    diagnostics = LinkDiagnostics(
        query_id=case.query_id, db_id=schema.db_id, tolerance=tolerance
    )
    if config.joint_tolerance:
        entries = _link_joint(schema, sheet, tolerance, config, diagnostics)
    else:
        entries = _link_hierarchical(schema, sheet, tolerance, config, diagnostics)
    result = LinkingResult.from_entries(schema, entries)
    return result, diagnostics


def _link_hierarchical(
    schema: SchemaCatalog,
    sheet: ScoreSheet,
    tolerance: ToleranceEstimate,
    config: LinkerConfig,
    diagnostics: LinkDiagnostics,
) -> dict[str, set[str]]:
    table_names = [t.name for t in schema.tables]
    selected_tables, stage = _run_stage(
        "table",
        table_names,
        [sheet.table_scores[t].r for t in table_names],
        [sheet.table_scores[t].w for t in table_names],
        tolerance.table_capacity_raw,
        config,
    )
    diagnostics.stages.append(stage)

    entries: dict[str, set[str]] = {}
    for table_name in selected_tables:
        table = schema.table(table_name)
        column_names = [c.name for c in table.columns]
        selected_columns, stage = _run_stage(
            f"columns:{table_name}",
            column_names,
            [sheet.column_scores[(table_name, c)].r for c in column_names],
            [sheet.column_scores[(table_name, c)].w for c in column_names],
            tolerance.column_capacity_raw,
            config,
        )
        diagnostics.stages.append(stage)
        entries[table_name] = set(selected_columns)
    return entries


def _link_joint(
    schema: SchemaCatalog,
    sheet: ScoreSheet,
    tolerance: ToleranceEstimate,
    config: LinkerConfig,
    diagnostics: LinkDiagnostics,
) -> dict[str, set[str]]:
    ids: list[str] = []
    values: list[float] = []
    weights: list[float] = []
    for table in schema.tables:
        ids.append(f"t:{table.name}")
        values.append(sheet.table_scores[table.name].r)
        weights.append(sheet.table_scores[table.name].w)
        for col in table.columns:
            ids.append(f"c:{table.name}.{col.name}")
            values.append(sheet.column_scores[(table.name, col.name)].r)
            weights.append(sheet.column_scores[(table.name, col.name)].w)
    selected, stage = _run_stage(
        "joint", ids, values, weights, tolerance.joint_capacity_raw, config
    )
    diagnostics.stages.append(stage)

    entries: dict[str, set[str]] = {}
    for item in selected:
        kind, name = item.split(":", 1)
        if kind == "t":
            entries.setdefault(name, set())
        else:
            table_name, col_name = name.rsplit(".", 1)
            entries.setdefault(table_name, set()).add(col_name)
    return entries


@dataclass
class CorpusLinkOutcome:
    results: dict[str, LinkingResult]
    diagnostics: dict[str, LinkDiagnostics]
    errors: dict[str, str]


def link_corpus(
    cases: Iterable[QueryCase],
    catalogs: Mapping[str, SchemaCatalog],
    binary_scorer: Scorer,
    prob_scorer: Scorer,
    index: TrainingCorpusIndex,
    config: LinkerConfig | None = None,
    jobs: int = 1,
) -> CorpusLinkOutcome:
    """Link every case; per-query failures are recorded, not raised.

    Results and diagnostics come back keyed and ordered by query_id, no
    matter how many workers ran.
    """
    config = config or LinkerConfig()
    ordered = sorted(cases, key=lambda c: c.query_id)

    def one(case: QueryCase) -> tuple[str, LinkingResult | None, LinkDiagnostics | None, str | None]:
        try:
            schema = resolve_catalog(catalogs, case.db_id)
            result, diag = link_query(case, schema, binary_scorer, prob_scorer, index, config)
            return case.query_id, result, diag, None
        except Exception as exc:
            return case.query_id, None, None, str(exc)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, ordered))
    else:
        rows = [one(case) for case in ordered]

    outcome = CorpusLinkOutcome(results={}, diagnostics={}, errors={})
    for query_id, result, diag, error in sorted(rows, key=lambda r: r[0]):
        if error is not None:
            outcome.errors[query_id] = error
        else:
            outcome.results[query_id] = result
            outcome.diagnostics[query_id] = diag
    return outcome


def write_diagnostics(path: str | Path, diagnostics: Mapping[str, LinkDiagnostics]) -> None:
    lines = [
        json.dumps(diagnostics[query_id].to_payload(), ensure_ascii=False)
        for query_id in sorted(diagnostics)
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class KnapsackSchemaLinker(BaseEstimator):
    """Estimator-style front door: fit on gold-labelled training cases,
    predict linkings for new cases.

    Parameters mirror LinkerConfig; ``scorer`` is a single Scorer used for
    both the binary and probabilistic roles, or a (binary, prob) pair.
    """

    def __init__(
        self,
        scorer: Scorer | tuple[Scorer, Scorer] | None = None,
        top_k: int = DEFAULT_TOP_K,
        epsilon: float = DEFAULT_EPSILON,
        scale: int = DEFAULT_SCALE,
        joint_tolerance: bool = False,
        nonempty_fallback: bool = True,
        embedder: RemoteEmbedder | None = None,
    ):
        self.scorer = scorer
        self.top_k = top_k
        self.epsilon = epsilon
        self.scale = scale
        self.joint_tolerance = joint_tolerance
        self.nonempty_fallback = nonempty_fallback
        self.embedder = embedder

    def _scorers(self) -> tuple[Scorer, Scorer]:
        scorer = self.scorer if self.scorer is not None else LexicalScorer()
        if isinstance(scorer, tuple):
            return scorer
        return scorer, scorer

    def _config(self) -> LinkerConfig:
        return LinkerConfig(
            top_k=self.top_k,
            epsilon=self.epsilon,
            scale=self.scale,
            joint_tolerance=self.joint_tolerance,
            nonempty_fallback=self.nonempty_fallback,
        )

    def fit(self, cases: Iterable[QueryCase], catalogs: Iterable[SchemaCatalog] | Mapping[str, SchemaCatalog]):
        if not isinstance(catalogs, Mapping):
            catalogs = catalogs_by_id(catalogs)
        binary_scorer, prob_scorer = self._scorers()
        self.catalogs_ = dict(catalogs)
        self.index_ = build_index(
            cases, catalogs, binary_scorer, prob_scorer, self._config().epsilon,
            embedder=self.embedder,
        )
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "index_"):
            raise LinkerError("linker is not fitted; call fit() first")

    def predict(self, cases: Sequence[QueryCase]) -> list[LinkingResult]:
        self._check_fitted()
        binary_scorer, prob_scorer = self._scorers()
        config = self._config()
        results = []
        for case in cases:
            schema = resolve_catalog(self.catalogs_, case.db_id)
            result, _ = link_query(case, schema, binary_scorer, prob_scorer, self.index_, config)
            results.append(result)
        return results

    def score(self, cases: Sequence[QueryCase]) -> float:
        """Mean column-level enhanced F1 against the cases' gold linkings."""
        self._check_fitted()
        golds = {}
        for case in cases:
            if case.gold_linking is None:
                raise LinkerError(f"query {case.query_id!r} has no gold_linking to score against")
            golds[case.query_id] = case.gold_linking
        preds = {
            case.query_id: result
            for case, result in zip(cases, self.predict(cases))
        }
        report = evaluate_corpus(preds, golds)
        return report.aggregate("column", "f1_plus")
