"""Relevance and redundancy scoring.

Each schema element gets a binary score (0/1), a probabilistic score
([0, 1]), a combined relevance r = max(epsilon, min(1, binary + prob)),
and a redundancy weight w = 1/r. The cap at 1 keeps relevant elements
comparable; the epsilon floor keeps weights finite so irrelevant
elements stay selectable only under enormous budgets.

Four scorer backends share one contract: lexical overlap (offline
default), precomputed score files, a remote HTTP service, and a gold-
derived oracle for testing.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import requests

from .schema import LinkingResult, QueryCase, SchemaCatalog, normalize_name

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.001

CACHE_DIR_ENV = "KASLA_CACHE_DIR"


class ScoringError(ValueError):
    pass


def combine_relevance(r_binary: float, r_prob: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Combined relevance: binary plus probabilistic, capped at 1,
    floored at epsilon."""
    if r_binary not in (0, 1):
        raise ScoringError(f"binary score must be 0 or 1, got {r_binary!r}")
    if not 0.0 <= r_prob <= 1.0:
        raise ScoringError(f"probabilistic score out of range: {r_prob!r}")
    if not 0.0 < epsilon < 1.0:
        raise ScoringError(f"epsilon must be in (0, 1), got {epsilon!r}")
    return max(epsilon, min(1.0, r_binary + r_prob))


def redundancy_of(r: float) -> float:
    """Redundancy weight: the inverse of relevance."""
    if r <= 0.0:
        raise ScoringError(f"relevance must be positive, got {r!r}")
    return 1.0 / r


@dataclass(frozen=True)
class ElementScore:
    r_binary: int
    r_prob: float
    r: float
    w: float


@dataclass
class ScoreSheet:
    """Per-element relevance and redundancy for one query."""

    query_id: str
    db_id: str
    table_scores: dict[str, ElementScore]
    column_scores: dict[tuple[str, str], ElementScore]

    def table_weight_sum(self) -> float:
        return sum(s.w for s in self.table_scores.values())

    def column_weight_sum(self, table: str) -> float:
        return sum(s.w for (t, _), s in self.column_scores.items() if t == table)

    def to_payload(self) -> dict:
        return {
            "query_id": self.query_id,
            "db_id": self.db_id,
            "tables": {
                t: [s.r_binary, s.r_prob, s.r, s.w]
                for t, s in sorted(self.table_scores.items())
            },
            "columns": {
                f"{t}.{c}": [s.r_binary, s.r_prob, s.r, s.w]
                for (t, c), s in sorted(self.column_scores.items())
            },
        }


@dataclass
class ElementValues:
    """Raw per-element output of one scorer pass."""

    tables: dict[str, float]
    columns: dict[tuple[str, str], float]


class Scorer(ABC):
    """Contract: full element coverage, in-range outputs, deterministic
    unless the implementation says otherwise."""

    @abstractmethod
    def score_binary(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        ...

    @abstractmethod
    def score_prob(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        ...


def score_query(
    case: QueryCase,
    schema: SchemaCatalog,
    binary_scorer: Scorer,
    prob_scorer: Scorer,
    epsilon: float = DEFAULT_EPSILON,
) -> ScoreSheet:
    """Run both scorers over every element of the schema and combine."""
    try:
        binary = binary_scorer.score_binary(case, schema)
        prob = prob_scorer.score_prob(case, schema)
    except ScoringError:
        raise
    except Exception as exc:
        raise ScoringError(f"query {case.query_id!r}: scorer failed: {exc}") from exc

    table_scores: dict[str, ElementScore] = {}
    column_scores: dict[tuple[str, str], ElementScore] = {}
    for table in schema.tables:
        rb = _pick(binary.tables, table.name, case.query_id, binary=True)
        rp = _pick(prob.tables, table.name, case.query_id, binary=False)
        table_scores[table.name] = _element_score(rb, rp, epsilon)
        for col in table.columns:
            key = (table.name, col.name)
            rb = _pick(binary.columns, key, case.query_id, binary=True)
            rp = _pick(prob.columns, key, case.query_id, binary=False)
            column_scores[key] = _element_score(rb, rp, epsilon)
    return ScoreSheet(
        query_id=case.query_id,
        db_id=schema.db_id,
        table_scores=table_scores,
        column_scores=column_scores,
    )


def _element_score(rb: float, rp: float, epsilon: float) -> ElementScore:
    r = combine_relevance(rb, rp, epsilon)
    return ElementScore(r_binary=int(rb), r_prob=rp, r=r, w=redundancy_of(r))


def _pick(values: Mapping, key, query_id: str, binary: bool) -> float:
    if key not in values:
        name = key if isinstance(key, str) else ".".join(key)
        raise ScoringError(f"query {query_id!r}: scorer omitted element {name!r}")
    value = values[key]
    if binary:
        if value not in (0, 1, 0.0, 1.0):
            name = key if isinstance(key, str) else ".".join(key)
            raise ScoringError(f"query {query_id!r}: binary score for {name!r} not in {{0,1}}: {value!r}")
        return int(value)
    if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
        name = key if isinstance(key, str) else ".".join(key)
        raise ScoringError(f"query {query_id!r}: probabilistic score for {name!r} out of range: {value!r}")
    return float(value)


_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; underscores and punctuation split."""
    return _WORD_RE.findall(text.lower())


def _word_trigrams(tokens: list[str]) -> set[tuple[str, str, str]]:
    return {tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)}


class LexicalScorer(Scorer):
    """Deterministic offline scorer from question/element-name overlap.

    The probabilistic score counts shared word trigrams and exact token
    matches, normalized by the element name's token count; the binary
    score thresholds it at 0.5.
    """

    BINARY_THRESHOLD = 0.5

    def score_prob(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        question_tokens = tokenize(case.question)
        question_grams = _word_trigrams(question_tokens)
        question_set = set(question_tokens)

        def overlap(name: str) -> float:
            name_tokens = tokenize(name)
            if not name_tokens:
                return 0.0
            matches: set = _word_trigrams(name_tokens) & question_grams
            matches |= set(name_tokens) & question_set
            return min(1.0, len(matches) / len(name_tokens))

        tables = {t.name: overlap(t.name) for t in schema.tables}
        columns = {
            (t.name, c.name): overlap(c.name) for t in schema.tables for c in t.columns
        }
        return ElementValues(tables=tables, columns=columns)

    def score_binary(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        prob = self.score_prob(case, schema)
        return ElementValues(
            tables={t: 1.0 if v >= self.BINARY_THRESHOLD else 0.0 for t, v in prob.tables.items()},
            columns={k: 1.0 if v >= self.BINARY_THRESHOLD else 0.0 for k, v in prob.columns.items()},
        )


class OracleScorer(Scorer):
    """Test-only scorer: binary = gold membership, probabilistic = 0."""

    def __init__(self, gold_by_query: Mapping[str, LinkingResult] | None = None,
                 default_gold: LinkingResult | None = None):
        self._gold_by_query = dict(gold_by_query or {})
        self._default_gold = default_gold

    @classmethod
    def from_gold(cls, gold: LinkingResult) -> "OracleScorer":
        return cls(default_gold=gold)

    @classmethod
    def from_cases(cls, cases, catalogs: Mapping[str, SchemaCatalog]) -> "OracleScorer":
        """Build from cases carrying gold_linking, or gold_sql to extract from."""
        from .gold import extract_gold_linking
        from .schema import resolve_catalog

        gold_by_query: dict[str, LinkingResult] = {}
        for case in cases:
            gold = case.gold_linking
            if gold is None and case.gold_sql:
                gold, _ = extract_gold_linking(case.gold_sql, resolve_catalog(catalogs, case.db_id))
            if gold is None:
                raise ScoringError(f"query {case.query_id!r}: no gold linking or SQL for oracle")
            gold_by_query[case.query_id] = gold
        return cls(gold_by_query=gold_by_query)

    def _gold_for(self, case: QueryCase) -> LinkingResult:
        gold = self._gold_by_query.get(case.query_id, self._default_gold)
        if gold is None:
            raise ScoringError(f"query {case.query_id!r}: oracle has no gold")
        return gold

    def score_binary(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        gold = self._gold_for(case)
        tables = {t.name: 1.0 if t.name in gold.entries else 0.0 for t in schema.tables}
        columns = {
            (t.name, c.name): 1.0 if c.name in gold.entries.get(t.name, set()) else 0.0
            for t in schema.tables
            for c in t.columns
        }
        return ElementValues(tables=tables, columns=columns)

    def score_prob(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        tables = {t.name: 0.0 for t in schema.tables}
        columns = {(t.name, c.name): 0.0 for t in schema.tables for c in t.columns}
        return ElementValues(tables=tables, columns=columns)


class FileScorer(Scorer):
    """Precomputed scores from a cache-format file, keyed by query and element."""

    def __init__(self, records: Mapping[tuple[str, str], tuple[float, float]]):
        self._records = dict(records)

    @classmethod
    def load(cls, path: str | Path) -> "FileScorer":
        records: dict[tuple[str, str], tuple[float, float]] = {}
        path = Path(path)
        with path.open(encoding="utf-8") as handle:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key = (str(record["query_id"]), str(record["element"]))
                    records[key] = (float(record["r_binary"]), float(record["r_prob"]))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ScoringError(f"{path}:{line_no}: bad score record: {exc}") from exc
        return cls(records)

    def _lookup(self, case: QueryCase, schema: SchemaCatalog, index: int) -> ElementValues:
        tables: dict[str, float] = {}
        columns: dict[tuple[str, str], float] = {}
        for table in schema.tables:
            key = (case.query_id, table.name)
            if key not in self._records:
                raise ScoringError(f"score file missing element {table.name!r} for query {case.query_id!r}")
            tables[table.name] = self._records[key][index]
            for col in table.columns:
                ckey = (case.query_id, f"{table.name}.{col.name}")
                if ckey not in self._records:
                    raise ScoringError(
                        f"score file missing element {table.name}.{col.name} for query {case.query_id!r}"
                    )
                columns[(table.name, col.name)] = self._records[ckey][index]
        return ElementValues(tables=tables, columns=columns)

    def score_binary(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        return self._lookup(case, schema, 0)

    def score_prob(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        return self._lookup(case, schema, 1)


def default_cache_path() -> Path:
    root = os.environ.get(CACHE_DIR_ENV)
    base = Path(root) if root else Path.home() / ".cache" / "kasla"
    return base / "score_cache.jsonl"


@dataclass
class ScoreCache:
    """Append-only (query_id, element) -> (r_binary, r_prob) store.

    Reads are lock-free; writes are serialized. Later records override
    earlier ones on load so merged updates stay last-write-wins.
    """

    path: Path
    _records: dict[tuple[str, str], list[float | None]] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    @classmethod
    def open(cls, path: str | Path | None = None) -> "ScoreCache":
        cache = cls(path=Path(path) if path else default_cache_path())
        if cache.path.exists():
            with cache.path.open(encoding="utf-8") as handle:
                for raw in handle:
                    line = raw.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        key = (str(record["query_id"]), str(record["element"]))
                        cache._records[key] = [record.get("r_binary"), record.get("r_prob")]
                    except (json.JSONDecodeError, KeyError, TypeError):
                        logger.warning("skipping bad cache line in %s", cache.path)
        return cache

    def get(self, query_id: str, element: str) -> list[float | None] | None:
        return self._records.get((query_id, element))

    def put(self, query_id: str, element: str, r_binary: float | None, r_prob: float | None) -> None:
        with self._lock:
            slot = self._records.setdefault((query_id, element), [None, None])
            if r_binary is not None:
                slot[0] = r_binary
            if r_prob is not None:
                slot[1] = r_prob
            self.path.parent.mkdir(parents=True, exist_ok=True)
            record = {
                "query_id": query_id,
                "element": element,
                "r_binary": slot[0],
                "r_prob": slot[1],
            }
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class RemoteScorer(Scorer):
    """HTTP scorer speaking the /score_prob and /score_binary protocol,
    with a local per-(query, element) cache for offline reruns."""

    def __init__(self, endpoint: str, timeout: float = 30.0, cache: ScoreCache | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.cache = cache

    @classmethod
    def connect(
        cls,
        endpoint: str,
        timeout: float = 30.0,
        cache_path: str | Path | None = None,
        use_cache: bool = True,
    ) -> "RemoteScorer":
        cache = ScoreCache.open(cache_path) if use_cache else None
        return cls(endpoint=endpoint, timeout=timeout, cache=cache)

    @staticmethod
    def _request_body(case: QueryCase, schema: SchemaCatalog) -> dict:
        return {
            "question": case.question,
            "db_id": schema.db_id,
            "tables": [
                {"name": t.name, "columns": [c.name for c in t.columns]}
                for t in schema.tables
            ],
        }

    def _post(self, route: str, case: QueryCase, schema: SchemaCatalog) -> dict:
        url = f"{self.endpoint}/{route}"
        try:
            response = requests.post(
                url, json=self._request_body(case, schema), timeout=self.timeout
            )
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise ScoringError(f"query {case.query_id!r}: {route} request failed: {exc}") from exc

    def _cached(self, case: QueryCase, schema: SchemaCatalog, index: int) -> ElementValues | None:
        if self.cache is None:
            return None
        tables: dict[str, float] = {}
        columns: dict[tuple[str, str], float] = {}
        for table in schema.tables:
            slot = self.cache.get(case.query_id, table.name)
            if slot is None or slot[index] is None:
                return None
            tables[table.name] = float(slot[index])
            for col in table.columns:
                cslot = self.cache.get(case.query_id, f"{table.name}.{col.name}")
                if cslot is None or cslot[index] is None:
                    return None
                columns[(table.name, col.name)] = float(cslot[index])
        return ElementValues(tables=tables, columns=columns)

    def _store(self, case: QueryCase, values: ElementValues, index: int) -> None:
        if self.cache is None:
            return
        for table, value in values.tables.items():
            self.cache.put(
                case.query_id, table,
                value if index == 0 else None,
                value if index == 1 else None,
            )
        for (table, col), value in values.columns.items():
            self.cache.put(
                case.query_id, f"{table}.{col}",
                value if index == 0 else None,
                value if index == 1 else None,
            )

    def score_prob(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        cached = self._cached(case, schema, 1)
        if cached is not None:
            return cached
        payload = self._post("score_prob", case, schema)
        values = parse_numeric_response(payload, schema)
        self._store(case, values, 1)
        return values

    def score_binary(self, case: QueryCase, schema: SchemaCatalog) -> ElementValues:
        cached = self._cached(case, schema, 0)
        if cached is not None:
            return cached
        payload = self._post("score_binary", case, schema)
        values = parse_binary_response(payload, schema, query_id=case.query_id)
        self._store(case, values, 0)
        return values


def parse_numeric_response(payload: dict, schema: SchemaCatalog) -> ElementValues:
    """Parse the numeric protocol shape {tables: {...}, columns: {t: {c: v}}}."""
    if not isinstance(payload, dict) or "tables" not in payload or "columns" not in payload:
        raise ScoringError("response missing tables/columns maps")
    raw_tables = payload["tables"]
    raw_columns = payload["columns"]
    tables: dict[str, float] = {}
    columns: dict[tuple[str, str], float] = {}
    by_norm = {normalize_name(t.name): t for t in schema.tables}
    for name, value in raw_tables.items():
        table = by_norm.get(normalize_name(str(name)))
        if table is not None:
            tables[table.name] = float(value)
    for tname, cols in raw_columns.items():
        table = by_norm.get(normalize_name(str(tname)))
        if table is None or not isinstance(cols, dict):
            continue
        for cname, value in cols.items():
            col = table.column(str(cname))
            if col is not None:
                columns[(table.name, col.name)] = float(value)
    return ElementValues(tables=tables, columns=columns)


def parse_binary_response(payload: dict, schema: SchemaCatalog, query_id: str = "") -> ElementValues:
    """Parse a binary response: numeric shape, or the generative-model map
    {simulated_sql, linking: {table: null|[col...]}}.

    Simulated SQL is accepted and discarded. A response matching neither
    shape degrades to all-zero binary scores with a warning.
    """
    if isinstance(payload, dict) and "linking" in payload:
        try:
            from .schema import linking_from_file_entries

            linking = linking_from_file_entries(schema, payload["linking"])
        except Exception:
            logger.warning("query %r: unparseable binary linking response; scoring all-zero", query_id)
            return _all_zero(schema)
        tables = {t.name: 1.0 if t.name in linking.entries else 0.0 for t in schema.tables}
        columns = {
            (t.name, c.name): 1.0 if c.name in linking.entries.get(t.name, set()) else 0.0
            for t in schema.tables
            for c in t.columns
        }
        return ElementValues(tables=tables, columns=columns)
    try:
        return parse_numeric_response(payload, schema)
    except (ScoringError, TypeError, ValueError):
        logger.warning("query %r: unparseable binary response; scoring all-zero", query_id)
        return _all_zero(schema)


def _all_zero(schema: SchemaCatalog) -> ElementValues:
    return ElementValues(
        tables={t.name: 0.0 for t in schema.tables},
        columns={(t.name, c.name): 0.0 for t in schema.tables for c in t.columns},
    )
