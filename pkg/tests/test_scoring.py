import json

import pytest

from kasla import (
    ElementValues,
    FileScorer,
    LexicalScorer,
    LinkingResult,
    OracleScorer,
    QueryCase,
    RemoteScorer,
    ScoringError,
    combine_relevance,
    redundancy_of,
    score_query,
)
from kasla.schema import SchemaCatalog
from kasla.scoring import (
    ScoreCache,
    parse_binary_response,
    parse_numeric_response,
    tokenize,
)


class ConstantScorer:
    """Stub: fixed binary and probabilistic values for every element."""

    def __init__(self, binary=0.0, prob=0.0):
        self.binary = binary
        self.prob = prob

    def _fill(self, schema, value):
        return ElementValues(
            tables={t.name: value for t in schema.tables},
            columns={(t.name, c.name): value for t in schema.tables for c in t.columns},
        )

    def score_binary(self, case, schema):
        return self._fill(schema, self.binary)

    def score_prob(self, case, schema):
        return self._fill(schema, self.prob)


def case_for(question="how many", query_id="q1", db_id="department_management"):
    return QueryCase(query_id=query_id, db_id=db_id, question=question)


def test_combine_relevance_examples():
    assert combine_relevance(1, 0.7, 0.001) == 1.0
    assert combine_relevance(0, 0.4, 0.001) == 0.4
    assert combine_relevance(0, 0.0, 0.001) == 0.001


def test_combine_relevance_rejects_bad_inputs():
    with pytest.raises(ScoringError):
        combine_relevance(2, 0.5)
    with pytest.raises(ScoringError):
        combine_relevance(0, 1.5)
    with pytest.raises(ScoringError):
        combine_relevance(0, 0.5, epsilon=0.0)


def test_redundancy_examples():
    assert redundancy_of(1.0) == 1.0
    assert redundancy_of(0.5) == 2.0
    assert redundancy_of(0.001) == 1000.0
    with pytest.raises(ScoringError):
        redundancy_of(0.0)


def test_combine_monotone_and_bounded():
    probs = [0.0, 0.1, 0.5, 0.9, 1.0]
    for binary in (0, 1):
        values = [combine_relevance(binary, p, 0.001) for p in probs]
        assert values == sorted(values)
        assert all(0.001 <= v <= 1.0 for v in values)
    # binary hit always saturates relevance, so weight is exactly 1
    for p in probs:
        assert redundancy_of(combine_relevance(1, p, 0.001)) == 1.0


def test_score_query_oracle(appendix_catalog):
    gold = LinkingResult.from_entries(appendix_catalog, {"head": ["age"]})
    scorer = OracleScorer.from_gold(gold)
    sheet = score_query(case_for(), appendix_catalog, scorer, scorer, 0.001)
    assert sheet.table_scores["head"].r == 1.0
    assert sheet.table_scores["head"].w == 1.0
    assert sheet.table_scores["department"].r == 0.001
    assert sheet.column_scores[("head", "age")].r == 1.0
    assert sheet.column_scores[("head", "name")].r == 0.001


def test_score_query_constant_half(appendix_catalog):
    scorer = ConstantScorer(binary=0.0, prob=0.5)
    sheet = score_query(case_for(), appendix_catalog, scorer, scorer, 0.001)
    for score in list(sheet.table_scores.values()) + list(sheet.column_scores.values()):
        assert score.r == 0.5
        assert score.w == 2.0


def test_score_query_full_coverage(appendix_catalog):
    scorer = ConstantScorer()
    sheet = score_query(case_for(), appendix_catalog, scorer, scorer)
    assert set(sheet.table_scores) == {"department", "head", "management"}
    assert len(sheet.column_scores) == sum(len(t.columns) for t in appendix_catalog.tables)


def test_score_query_missing_element(appendix_catalog):
    class Dropper(ConstantScorer):
        def score_binary(self, case, schema):
            values = super().score_binary(case, schema)
            del values.columns[("head", "age")]
            return values

    with pytest.raises(ScoringError, match="head.age"):
        score_query(case_for(), appendix_catalog, Dropper(), ConstantScorer())


def test_score_query_out_of_range(appendix_catalog):
    with pytest.raises(ScoringError, match="out of range"):
        score_query(case_for(), appendix_catalog, ConstantScorer(), ConstantScorer(prob=1.5))
    with pytest.raises(ScoringError, match="not in"):
        score_query(case_for(), appendix_catalog, ConstantScorer(binary=0.3), ConstantScorer())


def test_score_query_permutation_invariant(appendix_catalog):
    shuffled = SchemaCatalog(
        db_id=appendix_catalog.db_id, tables=tuple(reversed(appendix_catalog.tables))
    )
    scorer = LexicalScorer()
    case = case_for("show the head name and age")
    a = score_query(case, appendix_catalog, scorer, scorer)
    b = score_query(case, shuffled, scorer, scorer)
    assert a.table_scores == b.table_scores
    assert a.column_scores == b.column_scores


def test_lexical_scorer_examples(appendix_catalog):
    scorer = LexicalScorer()
    no_overlap = scorer.score_prob(case_for("older than 56"), appendix_catalog)
    assert no_overlap.columns[("head", "age")] == 0.0

    full = scorer.score_prob(case_for("department name ranking"), appendix_catalog)
    assert full.columns[("department", "name")] == 1.0

    empty = scorer.score_prob(case_for(""), appendix_catalog)
    assert all(v == 0.0 for v in empty.tables.values())
    assert all(v == 0.0 for v in empty.columns.values())


def test_lexical_binary_thresholds_prob(appendix_catalog):
    scorer = LexicalScorer()
    # head_id: one of two tokens matched -> prob 0.5 -> binary fires
    case = case_for("show the head")
    prob = scorer.score_prob(case, appendix_catalog)
    binary = scorer.score_binary(case, appendix_catalog)
    assert prob.columns[("head", "head_id")] == 0.5
    assert binary.columns[("head", "head_id")] == 1.0
    assert binary.columns[("head", "age")] == 0.0


def test_lexical_rank_preserved_under_monotone_transform(appendix_catalog):
    # squaring probabilistic scores preserves the relevance ordering
    scorer = LexicalScorer()

    class Squared(LexicalScorer):
        def score_prob(self, case, schema):
            values = super().score_prob(case, schema)
            return ElementValues(
                tables={k: v * v for k, v in values.tables.items()},
                columns={k: v * v for k, v in values.columns.items()},
            )

    zero = ConstantScorer()
    case = case_for("department head name and age ranking")
    base = score_query(case, appendix_catalog, zero, scorer)
    transformed = score_query(case, appendix_catalog, zero, Squared())
    keys = list(base.column_scores)
    for a in keys:
        for b in keys:
            if base.column_scores[a].r < base.column_scores[b].r:
                assert transformed.column_scores[a].r <= transformed.column_scores[b].r


def test_oracle_binary_definition(appendix_catalog):
    gold = LinkingResult.from_entries(appendix_catalog, {"head": ["age"]})
    values = OracleScorer.from_gold(gold).score_binary(case_for(), appendix_catalog)
    assert values.tables == {"department": 0.0, "head": 1.0, "management": 0.0}
    assert values.columns[("head", "age")] == 1.0
    assert values.columns[("head", "name")] == 0.0


def tokenize_sanity():
    assert tokenize("head_id") == ["head", "id"]


def _write_score_file(path, schema, query_id, skip=None):
    lines = []
    for table in schema.tables:
        lines.append({"query_id": query_id, "element": table.name, "r_binary": 1, "r_prob": 0.5})
        for col in table.columns:
            element = f"{table.name}.{col.name}"
            if element == skip:
                continue
            lines.append({"query_id": query_id, "element": element, "r_binary": 0, "r_prob": 0.25})
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\n")


def test_file_scorer_round_trip(tmp_path, appendix_catalog):
    path = tmp_path / "scores.jsonl"
    _write_score_file(path, appendix_catalog, "q1")
    scorer = FileScorer.load(path)
    sheet = score_query(case_for(), appendix_catalog, scorer, scorer)
    assert sheet.table_scores["head"].r_binary == 1
    assert sheet.column_scores[("head", "age")].r_prob == 0.25


def test_file_scorer_missing_element(tmp_path, appendix_catalog):
    path = tmp_path / "scores.jsonl"
    _write_score_file(path, appendix_catalog, "q1", skip="head.age")
    scorer = FileScorer.load(path)
    with pytest.raises(ScoringError, match="head.age"):
        score_query(case_for(), appendix_catalog, scorer, scorer)


def test_parse_numeric_response(appendix_catalog):
    payload = {
        "tables": {"department": 0.2, "head": 0.9, "management": 0.1},
        "columns": {
            "department": {"department_id": 0.1, "name": 0.2, "ranking": 0.3},
            "head": {"head_id": 0.4, "name": 0.5, "age": 0.6},
            "management": {"department_id": 0.7, "head_id": 0.8, "temporary_acting": 0.9},
        },
    }
    values = parse_numeric_response(payload, appendix_catalog)
    assert values.tables["head"] == 0.9
    assert values.columns[("head", "age")] == 0.6


def test_parse_binary_response_linking_map(appendix_catalog):
    payload = {
        "simulated_sql": "SELECT count(*) FROM head WHERE age > 56",
        "linking": {"department": None, "management": None, "head": ["age"]},
    }
    values = parse_binary_response(payload, appendix_catalog)
    assert values.tables == {"department": 0.0, "head": 1.0, "management": 0.0}
    assert values.columns[("head", "age")] == 1.0
    assert values.columns[("head", "name")] == 0.0


def test_parse_binary_response_unparseable_degrades(appendix_catalog, caplog):
    values = parse_binary_response({"garbage": True}, appendix_catalog, query_id="q9")
    assert all(v == 0.0 for v in values.tables.values())
    assert all(v == 0.0 for v in values.columns.values())


def test_remote_scorer_connection_error(appendix_catalog):
    scorer = RemoteScorer.connect("http://127.0.0.1:9", timeout=0.2, use_cache=False)
    with pytest.raises(ScoringError, match="q1"):
        scorer.score_prob(case_for(), appendix_catalog)


def test_score_cache_round_trip(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = ScoreCache.open(path)
    cache.put("q1", "head", 1.0, None)
    cache.put("q1", "head", None, 0.5)
    reloaded = ScoreCache.open(path)
    assert reloaded.get("q1", "head") == [1.0, 0.5]
    record = json.loads(path.read_text().splitlines()[-1])
    assert set(record) == {"query_id", "element", "r_binary", "r_prob"}


def test_remote_scorer_serves_from_cache(tmp_path, appendix_catalog):
    # a fully warmed cache answers without touching the network
    cache = ScoreCache.open(tmp_path / "cache.jsonl")
    for table in appendix_catalog.tables:
        cache.put("q1", table.name, 0.0, 0.5)
        for col in table.columns:
            cache.put("q1", f"{table.name}.{col.name}", 0.0, 0.5)
    scorer = RemoteScorer("http://127.0.0.1:9", timeout=0.2, cache=cache)
    values = scorer.score_prob(case_for(), appendix_catalog)
    assert values.tables["head"] == 0.5
    binary = scorer.score_binary(case_for(), appendix_catalog)
    assert binary.tables["head"] == 0.0
