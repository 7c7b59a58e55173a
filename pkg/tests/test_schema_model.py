import json

import pytest

from kasla import (
    COLUMN,
    TABLE,
    LinkingResult,
    SchemaError,
    contains,
    element_count,
    intersect,
    load_catalogs,
    load_linking_file,
    load_queries,
    write_linking_file,
)
from kasla.schema import ColumnDef, linking_from_file_entries, normalize_name

from conftest import TABLES_PATH


def test_load_catalogs_fixture_shapes(catalogs, appendix_catalog):
    assert len(catalogs) == 5
    assert len(appendix_catalog.tables) == 3
    head = appendix_catalog.table("head")
    assert head.column_names() == ("head_id", "name", "age")
    assert "head_id" in head.primary_key_columns


def test_foreign_keys_resolved(appendix_catalog):
    management = appendix_catalog.table("management")
    assert ("head_id", "head", "head_id") in management.foreign_keys
    assert ("department_id", "department", "department_id") in management.foreign_keys


def test_load_catalogs_deterministic():
    assert load_catalogs(TABLES_PATH) == load_catalogs(TABLES_PATH)


def test_empty_tables_file_rejected(tmp_path):
    empty = tmp_path / "tables.json"
    empty.write_text("")
    with pytest.raises(SchemaError, match="no databases"):
        load_catalogs(empty)
    empty.write_text("[]")
    with pytest.raises(SchemaError, match="no databases"):
        load_catalogs(empty)


def test_dangling_foreign_key_names_record(tmp_path):
    record = {
        "db_id": "broken",
        "table_names_original": ["a"],
        "column_names_original": [[-1, "*"], [0, "x"]],
        "column_types": ["text", "int"],
        "primary_keys": [],
        "foreign_keys": [[1, 99]],
    }
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([record]))
    with pytest.raises(SchemaError, match="broken"):
        load_catalogs(path)


def test_duplicate_db_id_rejected(tmp_path):
    record = {
        "db_id": "dup",
        "table_names_original": ["a"],
        "column_names_original": [[0, "x"]],
        "column_types": ["int"],
        "primary_keys": [],
        "foreign_keys": [],
    }
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([record, record]))
    with pytest.raises(SchemaError, match="duplicate db_id"):
        load_catalogs(path)


def test_sample_values_capped():
    col = ColumnDef(name="x", value_type="text", sample_values=("a", "b", "c", "d", "e"))
    assert len(col.sample_values) == 3
    col = ColumnDef(name="x", value_type="text", sample_values=("y" * 100,))
    assert len(col.sample_values[0]) == 64


def _write_queries(tmp_path, records):
    path = tmp_path / "queries.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def test_load_queries_basic_record(tmp_path, catalogs):
    path = _write_queries(
        tmp_path,
        [
            {
                "query_id": "q1",
                "db_id": "department_management",
                "question": "How many heads of the departments are older than 56?",
                "gold_linking": {"head": ["age"]},
            }
        ],
    )
    cases = load_queries(path, catalogs)
    assert len(cases) == 1
    assert cases[0].gold_linking.entries == {"head": {"age"}}


def test_load_queries_unknown_db(tmp_path, catalogs):
    path = _write_queries(
        tmp_path, [{"query_id": "q1", "db_id": "nope", "question": "x"}]
    )
    with pytest.raises(SchemaError, match="unknown db_id"):
        load_queries(path, catalogs)


def test_load_queries_bad_gold_linking(tmp_path, catalogs):
    path = _write_queries(
        tmp_path,
        [
            {
                "query_id": "q1",
                "db_id": "department_management",
                "question": "x",
                "gold_linking": {"head": ["nope"]},
            }
        ],
    )
    with pytest.raises(SchemaError, match="unknown column"):
        load_queries(path, catalogs)


def test_load_queries_duplicate_id(tmp_path, catalogs):
    rec = {"query_id": "q1", "db_id": "department_management", "question": "x"}
    path = _write_queries(tmp_path, [rec, rec])
    with pytest.raises(SchemaError, match="duplicate query_id"):
        load_queries(path, catalogs)


def test_name_normalization(appendix_catalog):
    assert appendix_catalog.table("`HEAD`").name == "head"
    result = LinkingResult.from_entries(appendix_catalog, {"HEAD": ["AGE"]})
    assert result.entries == {"head": {"age"}}
    assert normalize_name('"Name"') == "name"


def _result(catalog, entries):
    return LinkingResult.from_entries(catalog, entries)


def test_contains_examples(appendix_catalog):
    a = _result(appendix_catalog, {"head": ["age"]})
    b = _result(appendix_catalog, {"head": ["age"]})
    assert contains(a, b) and contains(b, a)
    assert intersect(a, b, COLUMN) == 1

    wider = _result(appendix_catalog, {"head": ["age", "name"]})
    assert contains(wider, a)
    assert not contains(a, wider)

    empty_cols = _result(appendix_catalog, {"head": []})
    assert not contains(empty_cols, a)  # column missing
    assert contains(a, empty_cols)  # table present, no columns demanded


def test_contains_transitive(appendix_catalog):
    a = _result(appendix_catalog, {"head": ["age", "name"], "department": ["name"]})
    b = _result(appendix_catalog, {"head": ["age", "name"]})
    c = _result(appendix_catalog, {"head": ["age"]})
    assert contains(a, b) and contains(b, c) and contains(a, c)


def test_intersect_properties(appendix_catalog):
    a = _result(appendix_catalog, {"head": ["age"], "department": ["name", "ranking"]})
    b = _result(appendix_catalog, {"department": ["name"], "management": []})
    for g in (TABLE, COLUMN):
        assert intersect(a, b, g) == intersect(b, a, g)
        assert intersect(a, a, g) == element_count(a, g)
    assert element_count(a, TABLE) == 2
    assert element_count(a, COLUMN) == 3
    assert element_count(b, TABLE) == 2  # empty-column table still counts


def test_mismatched_db_rejected(appendix_catalog, catalogs):
    other = catalogs[normalize_name("concert_hall")]
    a = _result(appendix_catalog, {"head": ["age"]})
    b = _result(other, {"singer": ["name"]})
    with pytest.raises(SchemaError, match="mismatched db_id"):
        contains(a, b)


def test_linking_file_round_trip(tmp_path, appendix_catalog, catalogs):
    results = {
        "q1": _result(appendix_catalog, {"head": ["age"]}),
        "q2": _result(appendix_catalog, {"department": ["name"], "management": []}),
    }
    path = tmp_path / "pred.jsonl"
    write_linking_file(path, results, catalogs)
    loaded = load_linking_file(path, catalogs)
    assert loaded.keys() == results.keys()
    for query_id in results:
        assert loaded[query_id].entries == results[query_id].entries
        assert loaded[query_id].db_id == results[query_id].db_id


def test_linking_file_format_is_full_map(tmp_path, appendix_catalog, catalogs):
    results = {"q1": _result(appendix_catalog, {"head": ["age"]})}
    path = tmp_path / "pred.jsonl"
    write_linking_file(path, results, catalogs)
    record = json.loads(path.read_text())
    assert record["linking"] == {"department": None, "head": ["age"], "management": None}


def test_null_and_omitted_mean_not_linked(appendix_catalog):
    linked = linking_from_file_entries(
        appendix_catalog, {"department": None, "head": ["age"]}
    )
    assert linked.entries == {"head": {"age"}}


def test_duplicate_query_id_in_linking_file(tmp_path, appendix_catalog, catalogs):
    path = tmp_path / "pred.jsonl"
    record = {"query_id": "q1", "db_id": "department_management", "linking": {"head": ["age"]}}
    path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n")
    with pytest.raises(SchemaError, match="duplicate query_id"):
        load_linking_file(path, catalogs)
