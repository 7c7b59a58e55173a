"""Derive gold linking sets from gold SQL strings.

A lightweight tokenizer pass, not a SQL grammar: tables come from
FROM/JOIN targets anywhere in the token stream (subqueries included),
columns from qualified and unqualified identifier references resolved
against the referenced tables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .schema import LinkingResult, SchemaCatalog, normalize_name

_TOKEN_RE = re.compile(
    r"""
    (?P<string>'(?:[^']|'')*')
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<quoted>`[^`]+`|"[^"]+"|\[[^\]]+\])
  | (?P<word>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<punct>\S)
    """,
    re.VERBOSE,
)

_KEYWORDS = frozenset(
    """
    select from where group by having order limit offset distinct all
    join inner left right full outer cross natural on using as
    and or not in exists between like is null case when then else end
    union except intersect asc desc insert into values update set delete
    cast with
    """.split()
)

# keywords that may follow a table reference without being an alias
_CLAUSE_BREAKERS = _KEYWORDS


class GoldExtractionError(ValueError):
    """SQL yields no usable linking."""


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str


def _tokenize(sql: str) -> list[_Token]:
    tokens = []
    for match in _TOKEN_RE.finditer(sql):
        kind = match.lastgroup or "punct"
        text = match.group()
        if kind == "quoted":
            text = text[1:-1]
            kind = "word"
        tokens.append(_Token(kind, text))
    return tokens


def extract_gold_linking(
    sql: str, schema: SchemaCatalog
) -> tuple[LinkingResult, list[str]]:
    """Extract the referenced tables and columns of ``sql``.

    Returns the linking plus a list of warnings for identifiers that were
    dropped (unresolvable) or assigned ambiguously.
    """
    if not sql or not sql.strip():
        raise GoldExtractionError("empty SQL")
    tokens = _tokenize(sql)
    warnings: list[str] = []

    table_refs, alias_map, consumed = _collect_tables(tokens, schema, warnings)
    if not table_refs:
        raise GoldExtractionError("no tables extracted")

    entries: dict[str, set[str]] = {name: set() for name in table_refs}
    referenced = [schema.table(name) for name in table_refs]

    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind != "word" or i in consumed:
            i += 1
            continue
        lowered = tok.text.lower()
        if lowered in _KEYWORDS:
            i += 1
            continue
        # function call: identifier immediately followed by "("
        if i + 1 < n and tokens[i + 1].text == "(":
            i += 1
            continue
        # qualified reference: word "." word  (or word "." "*")
        if i + 2 < n and tokens[i + 1].text == "." and tokens[i + 2].kind == "word":
            qualifier, column_name = tok.text, tokens[i + 2].text
            _resolve_qualified(qualifier, column_name, alias_map, schema, entries, warnings)
            i += 3
            continue
        if i + 2 < n and tokens[i + 1].text == "." and tokens[i + 2].text == "*":
            i += 3
            continue
        _resolve_unqualified(tok.text, referenced, entries, warnings)
        i += 1

    result = LinkingResult.from_entries(schema, entries)
    return result, warnings


def _collect_tables(
    tokens: list[_Token], schema: SchemaCatalog, warnings: list[str]
) -> tuple[list[str], dict[str, str], set[int]]:
    """Scan FROM/JOIN targets; returns canonical table names, alias map, and
    the token indices consumed by table/alias positions."""
    table_refs: list[str] = []
    alias_map: dict[str, str] = {}
    consumed: set[int] = set()
    n = len(tokens)
    i = 0
    while i < n:
        tok = tokens[i]
        if tok.kind == "word" and tok.text.lower() in ("from", "join"):
            in_from = tok.text.lower() == "from"
            i += 1
            while i < n:
                if tokens[i].text == "(":
                    break  # subquery; its own FROM is scanned by the outer loop
                if tokens[i].kind != "word":
                    break
                i = _consume_table_ref(
                    tokens, i, schema, table_refs, alias_map, consumed, warnings
                )
                if in_from and i < n and tokens[i].text == ",":
                    i += 1
                    continue
                break
            continue
        i += 1
    return table_refs, alias_map, consumed


def _consume_table_ref(
    tokens: list[_Token],
    i: int,
    schema: SchemaCatalog,
    table_refs: list[str],
    alias_map: dict[str, str],
    consumed: set[int],
    warnings: list[str],
) -> int:
    name_tok = tokens[i]
    table = schema.table(name_tok.text)
    if table is None:
        # alias of an earlier target (self-joined subquery) or junk; drop it
        if normalize_name(name_tok.text) not in alias_map:
            warnings.append(f"unresolved table reference {name_tok.text!r}")
        consumed.add(i)
        return i + 1
    consumed.add(i)
    if table.name not in table_refs:
        table_refs.append(table.name)
    alias_map.setdefault(normalize_name(table.name), table.name)
    i += 1
    n = len(tokens)
    if i < n and tokens[i].kind == "word" and tokens[i].text.lower() == "as":
        consumed.add(i)
        i += 1
    if (
        i < n
        and tokens[i].kind == "word"
        and tokens[i].text.lower() not in _CLAUSE_BREAKERS
    ):
        alias_map[normalize_name(tokens[i].text)] = table.name
        consumed.add(i)
        i += 1
    return i


def _resolve_qualified(
    qualifier: str,
    column_name: str,
    alias_map: dict[str, str],
    schema: SchemaCatalog,
    entries: dict[str, set[str]],
    warnings: list[str],
) -> None:
    table_name = alias_map.get(normalize_name(qualifier))
    if table_name is None:
        warnings.append(f"unresolved qualifier {qualifier!r} for column {column_name!r}")
        return
    table = schema.table(table_name)
    col = table.column(column_name) if table else None
    if col is None:
        warnings.append(f"unknown column {qualifier}.{column_name}")
        return
    entries[table.name].add(col.name)


def _resolve_unqualified(
    name: str,
    referenced: list,
    entries: dict[str, set[str]],
    warnings: list[str],
) -> None:
    hits = []
    for table in referenced:
        col = table.column(name)
        if col is not None:
            hits.append((table.name, col.name))
    if not hits:
        warnings.append(f"unresolved identifier {name!r}")
        return
    if len(hits) > 1:
        tables = ", ".join(t for t, _ in hits)
        warnings.append(f"ambiguous column {name!r} assigned to {tables}")
    for table_name, col_name in hits:
        entries[table_name].add(col_name)
