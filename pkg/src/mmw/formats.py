"""Table serialization: delimited text, json-lines, human-readable.

Delimited format: UTF-8, comma separator, '"' quoting with "" escaping,
header row of `name:type` cells (a '?' suffix marks nullable attributes).
An unquoted empty field is null; an empty quoted field is empty text. The
stdlib csv module collapses exactly that distinction, so the splitter is
hand-rolled.

json-lines format: one flat JSON object per row, field order = schema
order. Decimals are emitted as raw numeric tokens with a forced '.' so a
reader can tell them from integers; numbers are parsed back with exact
decimal semantics.
"""

from __future__ import annotations

import json
import re
from decimal import Decimal
from typing import Callable, Iterable, Iterator, Optional

from mmw.relational import (
    Attribute,
    Kind,
    RelationSchema,
    Table,
    TIMESTAMP_RE,
    Value,
    canonical_text,
    is_identifier,
    kind_from_name,
    value_from_text,
)

Row = tuple[Value, ...]
Cell = tuple[str, bool]  # text, was_quoted


# --- delimited splitting / joining ------------------------------------------------


def split_delimited(text: str) -> list[list[Cell]]:
    """Parse delimited text into rows of (text, was_quoted) cells."""
    rows: list[list[Cell]] = []
    row: list[Cell] = []
    field: list[str] = []
    quoted = False
    in_quotes = False
    pos = 0
    length = len(text)

    def end_field() -> None:
        nonlocal field, quoted
        row.append(("".join(field), quoted))
        field = []
        quoted = False

    def end_row() -> None:
        nonlocal row
        end_field()
        rows.append(row)
        row = []

    while pos < length:
        ch = text[pos]
        if in_quotes:
            if ch == '"':
                if text.startswith('""', pos):
                    field.append('"')
                    pos += 2
                    continue
                in_quotes = False
                pos += 1
                continue
            field.append(ch)
            pos += 1
            continue
        if ch == '"':
            if field:
                raise ValueError(f"stray quote inside unquoted field at offset {pos}")
            in_quotes = True
            quoted = True
            pos += 1
            continue
        if ch == ",":
            end_field()
            pos += 1
            continue
        if ch == "\n":
            end_row()
            pos += 1
            continue
        if ch == "\r":
            if text.startswith("\r\n", pos):
                end_row()
                pos += 2
                continue
            raise ValueError(f"bare carriage return at offset {pos}")
        field.append(ch)
        pos += 1
    if in_quotes:
        raise ValueError("unterminated quoted field")
    if field or quoted or row:
        end_row()
    return rows


def _join_cell(text: str, force_quote: bool) -> str:
    if force_quote or any(ch in text for ch in ',"\n\r'):
        return '"' + text.replace('"', '""') + '"'
    return text


def join_delimited(rows: Iterable[Iterable[Cell]]) -> str:
    lines = []
    for row in rows:
        lines.append(",".join(_join_cell(text, quoted) for text, quoted in row))
    return "\n".join(lines) + "\n" if lines else ""


# --- header <-> schema -----------------------------------------------------------

_HEADER_CELL_RE = re.compile(r"([a-z][a-z0-9_]*):([a-z]+)(\?)?\Z")


def header_cells(schema: RelationSchema) -> list[Cell]:
    cells = []
    for attr in schema.attributes:
        suffix = "?" if attr.nullable else ""
        cells.append((f"{attr.name}:{attr.data_type.value}{suffix}", False))
    return cells


def schema_from_header(name: str, cells: list[Cell]) -> RelationSchema:
    attrs = []
    for text, _ in cells:
        match = _HEADER_CELL_RE.match(text)
        if not match:
            raise ValueError(f"malformed header cell {text!r}")
        attr_name, type_name, nullable = match.groups()
        attrs.append(Attribute(attr_name, kind_from_name(type_name), nullable=bool(nullable)))
    return RelationSchema(name, attrs)


# --- delimited table io ------------------------------------------------------------


def _cell_to_value(cell: Cell, attr: Attribute, position: str) -> Value:
    text, quoted = cell
    if not quoted and text == "":
        if attr.nullable:
            return Value.null()
        if attr.data_type is Kind.TEXT:
            return Value.text("")
        raise ValueError(f"{position}: empty field for non-nullable {attr.name!r}")
    try:
        return value_from_text(attr.data_type, text)
    except ValueError as exc:
        raise ValueError(f"{position}: {exc}") from None


def _value_to_cell(value: Value) -> Cell:
    if value.is_null:
        return ("", False)
    text = canonical_text(value)
    if value.kind is Kind.TEXT and text == "":
        return ("", True)  # quoted empty = empty text, not null
    return (text, False)


def render_csv(table: Table) -> str:
    rows: list[list[Cell]] = [header_cells(table.schema)]
    for row in table.rows:
        rows.append([_value_to_cell(value) for value in row])
    return join_delimited(rows)


def iter_csv_rows(
    name: str, text: str, row_filter: Optional[Callable[[Row], bool]] = None
) -> tuple[RelationSchema, Iterator[Row]]:
    """Streaming read: the filter runs while rows are decoded."""
    raw_rows = split_delimited(text)
    if not raw_rows:
        raise ValueError("missing header row")
    schema = schema_from_header(name, raw_rows[0])

    def generate() -> Iterator[Row]:
        for line_number, raw in enumerate(raw_rows[1:], start=2):
            if len(raw) != len(schema.attributes):
                raise ValueError(
                    f"line {line_number}: expected {len(schema.attributes)} fields, got {len(raw)}"
                )
            row = tuple(
                _cell_to_value(cell, attr, f"line {line_number}")
                for cell, attr in zip(raw, schema.attributes)
            )
            if row_filter is None or row_filter(row):
                yield row

    return schema, generate()


def parse_csv(text: str, name: str = "relation") -> Table:
    schema, rows = iter_csv_rows(name, text)
    return Table(schema, list(rows))


# --- json lines -------------------------------------------------------------------


def _jsonl_encode(value: Value) -> str:
    if value.is_null:
        return "null"
    if value.kind is Kind.BOOLEAN:
        return "true" if value.payload else "false"
    if value.kind is Kind.INTEGER:
        return str(value.payload)
    if value.kind is Kind.DECIMAL:
        text = canonical_text(value)
        return text if "." in text else text + ".0"
    return json.dumps(canonical_text(value), ensure_ascii=False)


def render_jsonl(table: Table) -> str:
    names = [json.dumps(attr.name, ensure_ascii=False) for attr in table.schema.attributes]
    lines = []
    for row in table.rows:
        fields = ",".join(
            f"{name}:{_jsonl_encode(value)}" for name, value in zip(names, row)
        )
        lines.append("{" + fields + "}")
    return "\n".join(lines) + "\n" if lines else ""


def _classify_scalar(raw: object) -> tuple[Kind, Value]:
    if isinstance(raw, bool):
        return Kind.BOOLEAN, Value.boolean(raw)
    if isinstance(raw, int):
        return Kind.INTEGER, Value.integer(raw)
    if isinstance(raw, Decimal):
        return Kind.DECIMAL, Value.decimal(raw)
    if isinstance(raw, str):
        if TIMESTAMP_RE.match(raw):
            return Kind.TIMESTAMP, Value.timestamp(raw)
        return Kind.TEXT, Value.text(raw)
    raise ValueError(f"unsupported field value {raw!r} (flat scalars only)")


def _widen_to_text(value: Value) -> Value:
    if value.is_null:
        return value
    if value.kind is Kind.TEXT:
        return value
    return Value.text(canonical_text(value))


def parse_jsonl(text: str, name: str = "relation") -> Table:
    """Schema inference over records: union of fields; a kind conflict widens
    the field to nullable text, a missing field makes it nullable."""
    records: list[dict[str, Optional[Value]]] = []
    kinds: dict[str, Optional[Kind]] = {}
    saw_null: dict[str, bool] = {}
    widened: set[str] = set()
    order: list[str] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_float=Decimal)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {line_number}: {exc}") from None
        if not isinstance(obj, dict):
            raise ValueError(f"line {line_number}: record is not an object")
        record: dict[str, Optional[Value]] = {}
        for field_name, raw in obj.items():
            if not is_identifier(field_name):
                raise ValueError(f"line {line_number}: invalid field name {field_name!r}")
            if field_name not in kinds:
                kinds[field_name] = None
                saw_null[field_name] = False
                order.append(field_name)
            if raw is None:
                saw_null[field_name] = True
                record[field_name] = Value.null()
                continue
            kind, value = _classify_scalar(raw)
            previous = kinds[field_name]
            if previous is None:
                kinds[field_name] = kind
            elif previous is not kind:
                kinds[field_name] = Kind.TEXT
                widened.add(field_name)
            record[field_name] = value
        records.append(record)

    attrs = []
    for field_name in order:
        kind = kinds[field_name] or Kind.TEXT
        nullable = (
            saw_null[field_name]
            or field_name in widened
            or any(field_name not in record for record in records)
        )
        attrs.append(Attribute(field_name, kind, nullable=nullable))
    schema = RelationSchema(name, attrs)

    rows = []
    for record in records:
        row = []
        for attr in schema.attributes:
            value = record.get(attr.name)
            if value is None:
                row.append(Value.null())
            elif attr.data_type is Kind.TEXT:
                row.append(_widen_to_text(value))
            else:
                row.append(value)
        rows.append(tuple(row))
    return Table(schema, rows)


# --- pretty ---------------------------------------------------------------------


def render_pretty(table: Table) -> str:
    """Aligned table for humans; explicitly non-contractual."""
    headers = [text for text, _ in header_cells(table.schema)]
    columns = [[header] for header in headers]
    for row in table.rows:
        for column, value in zip(columns, row):
            column.append(canonical_text(value))
    if not columns:
        return "(no columns)\n"
    widths = [max(len(cell) for cell in column) for column in columns]
    lines = [" | ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("-+-".join("-" * w for w in widths))
    for row_index in range(len(table.rows)):
        lines.append(
            " | ".join(
                column[row_index + 1].ljust(w) for column, w in zip(columns, widths)
            ).rstrip()
        )
    return "\n".join(lines) + "\n"
