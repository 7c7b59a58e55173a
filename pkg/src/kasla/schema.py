"""Database schema catalogs, query cases, and linking results.

Loads Spider/BIRD-style ``tables.json`` catalogs and newline-delimited
query files, and owns the on-disk linking-result format: a map from
every table in the database to either ``null`` (not linked) or the list
of linked column names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Literal, Mapping

Granularity = Literal["table", "column"]

TABLE: Granularity = "table"
COLUMN: Granularity = "column"

VALUE_TYPES = ("int", "real", "text", "date", "blob", "other")

# Spider/BIRD type labels folded onto our value types.
_TYPE_ALIASES = {
    "int": "int",
    "integer": "int",
    "number": "real",
    "real": "real",
    "float": "real",
    "numeric": "real",
    "text": "text",
    "varchar": "text",
    "boolean": "other",
    "time": "date",
    "date": "date",
    "datetime": "date",
    "blob": "blob",
}

MAX_SAMPLE_VALUES = 3
MAX_SAMPLE_LENGTH = 64


class SchemaError(ValueError):
    """Invalid catalog, query, or linking data."""


def normalize_name(name: str) -> str:
    """Case-fold an identifier and strip surrounding quote characters."""
    return name.strip().strip("`\"'[]").lower()


def _canonical_type(raw: str) -> str:
    return _TYPE_ALIASES.get(raw.strip().lower(), "other")


@dataclass(frozen=True)
class ColumnDef:
    name: str
    value_type: str = "other"
    sample_values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not normalize_name(self.name):
            raise SchemaError("column name empty after normalization")
        if self.value_type not in VALUE_TYPES:
            raise SchemaError(f"unknown value type {self.value_type!r}")
        trimmed = tuple(v[:MAX_SAMPLE_LENGTH] for v in self.sample_values[:MAX_SAMPLE_VALUES])
        object.__setattr__(self, "sample_values", trimmed)


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]
    primary_key_columns: frozenset[str] = frozenset()
    foreign_keys: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for col in self.columns:
            key = normalize_name(col.name)
            if key in seen:
                raise SchemaError(f"duplicate column {col.name!r} in table {self.name!r}")
            seen.add(key)
        for pk in self.primary_key_columns:
            if normalize_name(pk) not in seen:
                raise SchemaError(f"primary key {pk!r} not a column of {self.name!r}")

    def column(self, name: str) -> ColumnDef | None:
        key = normalize_name(name)
        for col in self.columns:
            if normalize_name(col.name) == key:
                return col
        return None

    def column_names(self) -> tuple[str, ...]:
        return tuple(col.name for col in self.columns)


@dataclass(frozen=True)
class SchemaCatalog:
    db_id: str
    tables: tuple[TableDef, ...]

    def __post_init__(self) -> None:
        if not self.tables:
            raise SchemaError(f"catalog {self.db_id!r} has no tables")
        seen: set[str] = set()
        for table in self.tables:
            key = normalize_name(table.name)
            if key in seen:
                raise SchemaError(f"duplicate table {table.name!r} in {self.db_id!r}")
            seen.add(key)
        for table in self.tables:
            for local_col, remote_table, remote_col in table.foreign_keys:
                if table.column(local_col) is None:
                    raise SchemaError(
                        f"foreign key {table.name}.{local_col} is not a column"
                    )
                target = self.table(remote_table)
                if target is None or target.column(remote_col) is None:
                    raise SchemaError(
                        f"foreign key target {remote_table}.{remote_col} not in catalog {self.db_id!r}"
                    )

    def table(self, name: str) -> TableDef | None:
        key = normalize_name(name)
        for table in self.tables:
            if normalize_name(table.name) == key:
                return table
        return None

    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def element_count(self, granularity: Granularity) -> int:
        if granularity == TABLE:
            return len(self.tables)
        return sum(len(t.columns) for t in self.tables)


@dataclass
class LinkingResult:
    """Set of linked tables, each with a (possibly empty) set of linked columns."""

    db_id: str
    entries: dict[str, set[str]] = field(default_factory=dict)

    @classmethod
    def from_entries(
        cls, catalog: SchemaCatalog, entries: Mapping[str, Iterable[str]]
    ) -> "LinkingResult":
        """Build a result validated against ``catalog``, canonicalizing names."""
        resolved: dict[str, set[str]] = {}
        for table_name, columns in entries.items():
            table = catalog.table(table_name)
            if table is None:
                raise SchemaError(f"unknown table {table_name!r} in {catalog.db_id!r}")
            cols: set[str] = set()
            for col_name in columns:
                col = table.column(col_name)
                if col is None:
                    raise SchemaError(
                        f"unknown column {table.name}.{col_name} in {catalog.db_id!r}"
                    )
                cols.add(col.name)
            if table.name in resolved:
                resolved[table.name] |= cols
            else:
                resolved[table.name] = cols
        return cls(db_id=catalog.db_id, entries=resolved)

    def tables(self) -> set[str]:
        return set(self.entries)

    def column_pairs(self) -> set[tuple[str, str]]:
        return {(t, c) for t, cols in self.entries.items() for c in cols}

    def elements(self, granularity: Granularity) -> set:
        return self.tables() if granularity == TABLE else self.column_pairs()

    def is_empty(self, granularity: Granularity) -> bool:
        return not self.elements(granularity)

    def to_file_entries(self, catalog: SchemaCatalog) -> dict[str, list[str] | None]:
        """Full table map in catalog order; unlinked tables map to ``None``."""
        if normalize_name(self.db_id) != normalize_name(catalog.db_id):
            raise SchemaError(f"result for {self.db_id!r} does not match catalog {catalog.db_id!r}")
        out: dict[str, list[str] | None] = {}
        for table in catalog.tables:
            if table.name not in self.entries:
                out[table.name] = None
                continue
            linked = self.entries[table.name]
            ordered = [c for c in table.column_names() if c in linked]
            out[table.name] = ordered
        return out


def contains(a: LinkingResult, b: LinkingResult) -> bool:
    """True iff every table of ``b`` is in ``a`` and every column of ``b``
    is in ``a``'s corresponding table."""
    _check_same_db(a, b)
    for table_name, columns in b.entries.items():
        if table_name not in a.entries:
            return False
        if not columns <= a.entries[table_name]:
            return False
    return True


def element_count(a: LinkingResult, granularity: Granularity) -> int:
    return len(a.elements(granularity))


def intersect(a: LinkingResult, b: LinkingResult, granularity: Granularity) -> int:
    _check_same_db(a, b)
    return len(a.elements(granularity) & b.elements(granularity))


def _check_same_db(a: LinkingResult, b: LinkingResult) -> None:
    if normalize_name(a.db_id) != normalize_name(b.db_id):
        raise SchemaError(f"mismatched db_id: {a.db_id!r} vs {b.db_id!r}")


@dataclass(frozen=True)
class QueryCase:
    query_id: str
    db_id: str
    question: str
    gold_sql: str | None = None
    gold_linking: LinkingResult | None = None

    def with_gold(self, gold: LinkingResult) -> "QueryCase":
        return replace(self, gold_linking=gold)


def load_catalogs(path: str | Path) -> list[SchemaCatalog]:
    """Load a Spider-convention tables file into catalogs.

    Records carry ``table_names_original``, ``column_names_original`` as
    ``[table_index, name]`` pairs (index -1 marks the ``*`` pseudo-column,
    which is skipped), parallel ``column_types``, ``primary_keys`` and
    ``foreign_keys`` as column indices.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        raise SchemaError(f"{path}: no databases")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(records, list) or not records:
        raise SchemaError(f"{path}: no databases")

    catalogs: list[SchemaCatalog] = []
    seen_ids: set[str] = set()
    for pos, record in enumerate(records):
        try:
            catalog = _catalog_from_record(record)
        except (KeyError, TypeError, IndexError, SchemaError) as exc:
            db = record.get("db_id", f"record {pos}") if isinstance(record, dict) else f"record {pos}"
            raise SchemaError(f"{path}: {db}: {exc}") from exc
        key = normalize_name(catalog.db_id)
        if key in seen_ids:
            raise SchemaError(f"{path}: duplicate db_id {catalog.db_id!r}")
        seen_ids.add(key)
        catalogs.append(catalog)
    return catalogs


def _catalog_from_record(record: dict) -> SchemaCatalog:
    db_id = str(record["db_id"])
    table_names = [str(n) for n in record["table_names_original"]]
    column_entries = record["column_names_original"]
    column_types = record.get("column_types", ["other"] * len(column_entries))
    sample_values = record.get("sample_values", [None] * len(column_entries))
    primary_keys = set(record.get("primary_keys", []))
    foreign_keys = record.get("foreign_keys", [])

    # column index -> (table index, ColumnDef); index -1 is the "*" row.
    columns_by_table: dict[int, list[ColumnDef]] = {i: [] for i in range(len(table_names))}
    column_owner: dict[int, tuple[int, str]] = {}
    pk_names: dict[int, set[str]] = {i: set() for i in range(len(table_names))}
    for col_index, entry in enumerate(column_entries):
        table_index, col_name = entry
        if table_index == -1:
            continue
        if not 0 <= table_index < len(table_names):
            raise SchemaError(f"column {col_name!r} references missing table index {table_index}")
        samples = sample_values[col_index] if col_index < len(sample_values) else None
        col = ColumnDef(
            name=str(col_name),
            value_type=_canonical_type(str(column_types[col_index])),
            sample_values=tuple(str(v) for v in samples) if samples else (),
        )
        column_owner[col_index] = (table_index, col.name)
        columns_by_table[table_index].append(col)
        if col_index in primary_keys:
            pk_names[table_index].add(col.name)

    fk_by_table: dict[int, list[tuple[str, str, str]]] = {i: [] for i in range(len(table_names))}
    for pair in foreign_keys:
        local_index, remote_index = pair
        if local_index not in column_owner or remote_index not in column_owner:
            raise SchemaError(f"foreign key {pair} references missing column index")
        local_table, local_col = column_owner[local_index]
        remote_table, remote_col = column_owner[remote_index]
        fk_by_table[local_table].append((local_col, table_names[remote_table], remote_col))

    tables = tuple(
        TableDef(
            name=table_names[i],
            columns=tuple(columns_by_table[i]),
            primary_key_columns=frozenset(pk_names[i]),
            foreign_keys=tuple(fk_by_table[i]),
        )
        for i in range(len(table_names))
    )
    return SchemaCatalog(db_id=db_id, tables=tables)


def catalogs_by_id(catalogs: Iterable[SchemaCatalog]) -> dict[str, SchemaCatalog]:
    return {normalize_name(c.db_id): c for c in catalogs}


def resolve_catalog(catalogs: Mapping[str, SchemaCatalog], db_id: str) -> SchemaCatalog:
    catalog = catalogs.get(normalize_name(db_id))
    if catalog is None:
        raise SchemaError(f"unknown db_id {db_id!r}")
    return catalog


def load_queries(
    path: str | Path, catalogs: Iterable[SchemaCatalog] | Mapping[str, SchemaCatalog]
) -> list[QueryCase]:
    """Load newline-delimited query records, binding each to a known catalog."""
    cases, errors = _load_query_records(path, catalogs)
    if errors:
        raise SchemaError(errors[0][1])
    return cases


def load_queries_lenient(
    path: str | Path, catalogs: Iterable[SchemaCatalog] | Mapping[str, SchemaCatalog]
) -> tuple[list[QueryCase], dict[str, str]]:
    """Like load_queries, but bad records are returned as per-query errors
    (keyed by query_id where one could be read) instead of aborting."""
    cases, errors = _load_query_records(path, catalogs)
    return cases, dict(errors)


def _load_query_records(
    path: str | Path, catalogs: Iterable[SchemaCatalog] | Mapping[str, SchemaCatalog]
) -> tuple[list[QueryCase], list[tuple[str, str]]]:
    if not isinstance(catalogs, Mapping):
        catalogs = catalogs_by_id(catalogs)
    path = Path(path)
    cases: list[QueryCase] = []
    errors: list[tuple[str, str]] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(_jsonl_lines(path), start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append((f"line {line_no}", f"{path}:{line_no}: malformed record: {exc}"))
            continue
        if not isinstance(record, dict):
            errors.append((f"line {line_no}", f"{path}:{line_no}: malformed record: expected object"))
            continue
        query_id = str(record.get("query_id", f"line {line_no}"))
        try:
            db_id = str(record["db_id"])
            question = str(record["question"])
        except KeyError as exc:
            errors.append((query_id, f"{path}:{line_no}: missing field {exc}"))
            continue
        if query_id in seen_ids:
            errors.append((query_id, f"{path}:{line_no}: duplicate query_id {query_id!r}"))
            continue
        seen_ids.add(query_id)
        try:
            catalog = resolve_catalog(catalogs, db_id)
        except SchemaError as exc:
            errors.append((query_id, f"{path}:{line_no}: {exc}"))
            continue
        gold_linking = None
        if record.get("gold_linking") is not None:
            try:
                gold_linking = linking_from_file_entries(catalog, record["gold_linking"])
            except SchemaError as exc:
                errors.append((query_id, f"{path}:{line_no}: gold_linking: {exc}"))
                continue
        gold_sql = record.get("gold_sql")
        cases.append(
            QueryCase(
                query_id=query_id,
                db_id=catalog.db_id,
                question=question,
                gold_sql=str(gold_sql) if gold_sql is not None else None,
                gold_linking=gold_linking,
            )
        )
    return cases, errors


def _jsonl_lines(path: Path) -> Iterator[str]:
    with path.open(encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if line:
                yield line


def linking_from_file_entries(
    catalog: SchemaCatalog | None, entries: Mapping[str, object], db_id: str | None = None
) -> LinkingResult:
    """Parse the on-disk table map. ``null`` and omitted tables mean not linked."""
    if not isinstance(entries, Mapping):
        raise SchemaError("linking must be a table-to-columns map")
    present: dict[str, list[str]] = {}
    for table_name, columns in entries.items():
        if columns is None:
            continue
        if not isinstance(columns, (list, tuple)):
            raise SchemaError(f"table {table_name!r}: expected null or a column list")
        present[str(table_name)] = [str(c) for c in columns]
    if catalog is not None:
        return LinkingResult.from_entries(catalog, present)
    if db_id is None:
        raise SchemaError("db_id required when no catalog is given")
    return LinkingResult(db_id=db_id, entries={t: set(cols) for t, cols in present.items()})


def write_linking_file(
    path: str | Path,
    results: Mapping[str, LinkingResult],
    catalogs: Mapping[str, SchemaCatalog],
) -> None:
    """Write one record per query, sorted by query_id, in the full-map format."""
    path = Path(path)
    lines = []
    for query_id in sorted(results):
        result = results[query_id]
        catalog = resolve_catalog(catalogs, result.db_id)
        record = {
            "query_id": query_id,
            "db_id": catalog.db_id,
            "linking": result.to_file_entries(catalog),
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_linking_file(
    path: str | Path, catalogs: Mapping[str, SchemaCatalog] | None = None
) -> dict[str, LinkingResult]:
    """Load a predictions/gold file back into results keyed by query_id."""
    path = Path(path)
    results: dict[str, LinkingResult] = {}
    for line_no, line in enumerate(_jsonl_lines(path), start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{line_no}: malformed record: {exc}") from exc
        query_id = str(record["query_id"])
        db_id = str(record["db_id"])
        if query_id in results:
            raise SchemaError(f"{path}:{line_no}: duplicate query_id {query_id!r}")
        catalog = resolve_catalog(catalogs, db_id) if catalogs is not None else None
        results[query_id] = linking_from_file_entries(catalog, record["linking"], db_id=db_id)
    return results
