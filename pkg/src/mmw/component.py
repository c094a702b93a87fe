"""Shared component machinery: counters, access logging, lineage nodes.

Every data request against a component (served, denied or failed) produces
exactly one access-log entry. Entry timestamps are monotone per component.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Optional

from mmw.errors import AccessDeniedError, UnavailableError

# (allowed, matched_rule_description); None rule means the default applied.
AccessDecision = tuple[bool, Optional[str]]
AccessChecker = Callable[[str], AccessDecision]


@dataclass(frozen=True)
class AccessLogEntry:
    timestamp: str  # canonical UTC rendering
    component: str
    principal: str
    query: str
    row_count: int
    cache_hit: bool
    outcome: str  # "ok" | "denied" | "error"

    def to_obj(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "component": self.component,
            "principal": self.principal,
            "query": self.query,
            "row_count": self.row_count,
            "cache_hit": self.cache_hit,
            "outcome": self.outcome,
        }


@dataclass(frozen=True)
class LineageNode:
    """A served relation and the sources it derives from."""

    component: str
    kind: str  # wrapper | mediator | mask
    relation: str
    via_view: Optional[str] = None
    source: Optional[str] = None
    children: tuple["LineageNode", ...] = ()

    def to_obj(self) -> dict:
        obj: dict = {"component": self.component, "kind": self.kind, "relation": self.relation}
        if self.via_view is not None:
            obj["via_view"] = self.via_view
        if self.source is not None:
            obj["source"] = self.source
        if self.children:
            obj["children"] = [child.to_obj() for child in self.children]
        return obj

    @staticmethod
    def from_obj(obj: dict) -> "LineageNode":
        return LineageNode(
            obj["component"],
            obj["kind"],
            obj["relation"],
            obj.get("via_view"),
            obj.get("source"),
            tuple(LineageNode.from_obj(child) for child in obj.get("children", ())),
        )

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


COUNTER_NAMES = ("queries_served", "rows_returned", "cache_hits", "cache_misses", "errors")


class ComponentBase:
    """State shared by wrappers, mediators and masks."""

    kind = "component"

    def __init__(self, component_id: str):
        self.component_id = component_id
        self._lock = threading.Lock()
        self._counters = {name: 0 for name in COUNTER_NAMES}
        self._access_log: list[AccessLogEntry] = []
        self._log_path = None
        self._last_log_second = 0
        self._access_checker: Optional[AccessChecker] = None
        self._stopped = False

    # -- wiring (runtime hooks) ------------------------------------------

    def set_access_checker(self, checker: Optional[AccessChecker]) -> None:
        self._access_checker = checker

    def set_log_path(self, path) -> None:
        self._log_path = path

    def stop(self) -> None:
        self._stopped = True

    # -- request plumbing ---------------------------------------------------

    def _check_alive(self) -> None:
        if self._stopped:
            raise UnavailableError(
                f"component {self.component_id} is stopped", origin=self.component_id
            )

    def _authorize(self, principal: str) -> None:
        if self._access_checker is None:
            return
        allowed, rule = self._access_checker(principal)
        if not allowed:
            detail = f" (rule: {rule})" if rule else " (default deny)"
            raise AccessDeniedError(
                f"principal {principal!r} may not read from {self.component_id}{detail}",
                origin=self.component_id,
            )

    def _record(
        self, principal: str, query_text: str, rows: int, cache_hit: bool, outcome: str
    ) -> None:
        with self._lock:
            second = max(int(time.time()), self._last_log_second)
            self._last_log_second = second
            stamp = datetime.fromtimestamp(second, tz=timezone.utc).strftime(
                "%Y-%m-%dT%H:%M:%SZ"
            )
            entry = AccessLogEntry(
                stamp, self.component_id, principal, query_text, rows, cache_hit, outcome
            )
            self._access_log.append(entry)
            if outcome == "ok":
                self._counters["queries_served"] += 1
                self._counters["rows_returned"] += rows
            else:
                self._counters["errors"] += 1
            if self._log_path is not None:
                with open(self._log_path, "a", encoding="utf-8") as sink:
                    sink.write(json.dumps(entry.to_obj(), ensure_ascii=False) + "\n")

    def _count_cache(self, hit: bool) -> None:
        with self._lock:
            self._counters["cache_hits" if hit else "cache_misses"] += 1

    def _record_failure(self, principal: str, query_text: str, exc: Exception) -> None:
        """One log entry per failed request; stamps this component as origin
        when the failure arose here."""
        outcome = "denied" if isinstance(exc, AccessDeniedError) else "error"
        self._record(principal, query_text, 0, False, outcome)
        if getattr(exc, "origin", "") is None:
            exc.origin = self.component_id

    # -- public monitoring surface ----------------------------------------------

    def stats(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counters)

    @property
    def access_log(self) -> tuple[AccessLogEntry, ...]:
        with self._lock:
            return tuple(self._access_log)
