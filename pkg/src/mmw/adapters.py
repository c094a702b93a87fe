"""Source adapters: in-memory tables, delimited-file directories, json-lines
documents.

Three shapes of heterogeneity (operational in-memory data, structured
tabular files, semi-structured documents) behind one snapshot interface.
Adapters read one consistent snapshot per call and report a fingerprint the
wrapper turns into its change epoch. Database-backed adapters can slot in
behind the same interface later.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Iterable, Optional

from mmw.errors import ConfigError, UnavailableError
from mmw.formats import iter_csv_rows, parse_jsonl
from mmw.relational import RelationSchema, Row, Table, conform, is_identifier

RowFilter = Optional[Callable[[Row], bool]]


class SourceAdapter(ABC):
    """Snapshot access to one data source."""

    kind = "source"

    @abstractmethod
    def relations(self) -> list[RelationSchema]:
        """Schemas of every relation the source currently offers."""

    @abstractmethod
    def load(self, relation: str, row_filter: RowFilter = None) -> Table:
        """One consistent snapshot of a relation, filtered while reading."""

    @abstractmethod
    def fingerprint(self) -> object:
        """Changes whenever the observable source content may have changed."""

    def location(self) -> str:
        return self.kind


class MemoryAdapter(SourceAdapter):
    """Declared schemas plus mutable in-memory rows (single-writer)."""

    kind = "memory"

    def __init__(self, schemas: Iterable[RelationSchema], rows: dict[str, list[Row]] | None = None):
        listed = list(schemas)
        self._schemas = {schema.name: schema for schema in listed}
        if len(self._schemas) != len(listed):
            raise ConfigError("duplicate relation names in memory adapter")
        self._rows: dict[str, list[Row]] = {name: [] for name in self._schemas}
        self._generation = 0
        self._lock = threading.Lock()
        for name, initial in (rows or {}).items():
            self.replace_rows(name, initial)

    def _schema(self, relation: str) -> RelationSchema:
        schema = self._schemas.get(relation)
        if schema is None:
            raise ConfigError(f"memory adapter has no relation {relation!r}")
        return schema

    def replace_rows(self, relation: str, rows: Iterable[Row]) -> None:
        schema = self._schema(relation)
        checked = []
        for row in rows:
            ok, violation = conform(tuple(row), schema)
            if not ok:
                raise ConfigError(f"row does not conform to {relation!r}: {violation}")
            checked.append(tuple(row))
        with self._lock:
            self._rows[relation] = checked
            self._generation += 1

    def insert(self, relation: str, row: Row) -> None:
        schema = self._schema(relation)
        ok, violation = conform(tuple(row), schema)
        if not ok:
            raise ConfigError(f"row does not conform to {relation!r}: {violation}")
        with self._lock:
            self._rows[relation].append(tuple(row))
            self._generation += 1

    def relations(self) -> list[RelationSchema]:
        return [self._schemas[name] for name in sorted(self._schemas)]

    def load(self, relation: str, row_filter: RowFilter = None) -> Table:
        schema = self._schema(relation)
        with self._lock:
            rows = list(self._rows[relation])
        if row_filter is not None:
            rows = [row for row in rows if row_filter(row)]
        return Table(schema, rows)

    def fingerprint(self) -> object:
        with self._lock:
            return self._generation


class _FileDirAdapter(SourceAdapter):
    suffix = ""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_dir():
            raise ConfigError(f"source directory {self.path} is not readable")

    def location(self) -> str:
        return str(self.path)

    def _files(self) -> list[Path]:
        try:
            files = sorted(p for p in self.path.iterdir() if p.suffix == self.suffix)
        except OSError as exc:
            raise UnavailableError(f"source unavailable: {exc}") from None
        for file in files:
            if not is_identifier(file.stem):
                raise ConfigError(
                    f"file name {file.name!r} is not a valid relation identifier"
                )
        return files

    def _file_for(self, relation: str) -> Path:
        for file in self._files():
            if file.stem == relation:
                return file
        raise ConfigError(f"source has no relation {relation!r}")

    def _read(self, file: Path) -> str:
        try:
            return file.read_text(encoding="utf-8")
        except OSError as exc:
            raise UnavailableError(f"source unavailable: {exc}") from None

    def fingerprint(self) -> object:
        try:
            entries = []
            for file in self._files():
                stat = file.stat()
                entries.append((file.name, stat.st_size, stat.st_mtime_ns))
            return tuple(entries)
        except OSError as exc:
            raise UnavailableError(f"source unavailable: {exc}") from None


class DelimitedDirAdapter(_FileDirAdapter):
    """One relation per .csv file; header row declares names and types."""

    kind = "delimited_dir"
    suffix = ".csv"

    def relations(self) -> list[RelationSchema]:
        schemas = []
        for file in self._files():
            text = self._read(file)
            try:
                schema, _ = iter_csv_rows(file.stem, text)
            except ValueError as exc:
                raise ConfigError(f"{file.name}: {exc}") from None
            schemas.append(schema)
        return schemas

    def load(self, relation: str, row_filter: RowFilter = None) -> Table:
        file = self._file_for(relation)
        text = self._read(file)
        try:
            schema, rows = iter_csv_rows(relation, text, row_filter)
            return Table(schema, list(rows))
        except ValueError as exc:
            raise ConfigError(f"{file.name}: {exc}") from None


class DocLinesAdapter(_FileDirAdapter):
    """One relation per .jsonl file; schema inferred from the records."""

    kind = "doc_lines"
    suffix = ".jsonl"

    def _parse(self, file: Path) -> Table:
        try:
            return parse_jsonl(self._read(file), file.stem)
        except ValueError as exc:
            raise ConfigError(f"{file.name}: {exc}") from None

    def relations(self) -> list[RelationSchema]:
        return [self._parse(file).schema for file in self._files()]

    def load(self, relation: str, row_filter: RowFilter = None) -> Table:
        table = self._parse(self._file_for(relation))
        if row_filter is None:
            return table
        return Table(table.schema, [row for row in table.rows if row_filter(row)])


ADAPTER_KINDS = {
    "memory": MemoryAdapter,
    "delimited_dir": DelimitedDirAdapter,
    "doc_lines": DocLinesAdapter,
}
