"""The wrapper component: one data source behind the universal interface.

A wrapper answers schema and query requests for exactly one source and is a
standalone quantum: it configures and serves with no other component
present. Each execute reads one consistent snapshot; selections that end up
directly above a scan run as row filters while the source is read, the rest
evaluates locally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from mmw.adapters import SourceAdapter
from mmw.component import ComponentBase, LineageNode
from mmw.errors import ConfigError, UnknownRelationError
from mmw.relational import ProductSchema, RelationSchema, Table, is_identifier
from mmw.query.ast import (
    Join,
    Project,
    QualifiedName,
    Query,
    Rename,
    Scan,
    Select,
    Union,
    namespaces,
)
from mmw.query.evaluate import eval_predicate, evaluate
from mmw.query.infer import infer_schema
from mmw.query.render import render_query
from mmw.planner import push_down_selects


@dataclass(frozen=True)
class WrapperConfig:
    component_id: str
    namespace: str
    adapter: SourceAdapter
    salt: str = ""

    def __post_init__(self):
        for name in (self.component_id, self.namespace):
            if not is_identifier(name):
                raise ConfigError(f"{name!r} is not a valid identifier")


class Wrapper(ComponentBase):
    kind = "wrapper"

    def __init__(self, config: WrapperConfig):
        super().__init__(config.component_id)
        self.config = config
        self.namespace = config.namespace
        self._epoch = 1
        self._last_fingerprint = config.adapter.fingerprint()

    @property
    def adapter(self) -> SourceAdapter:
        return self.config.adapter

    # -- schema ------------------------------------------------------------

    def get_schema(self) -> ProductSchema:
        self._check_alive()
        return ProductSchema(
            self.namespace,
            1,
            self.adapter.relations(),
            {"description": f"source {self.adapter.kind} via {self.component_id}"},
        )

    def environment(self) -> dict[QualifiedName, RelationSchema]:
        return {
            QualifiedName(self.namespace, schema.name): schema
            for schema in self.adapter.relations()
        }

    # -- data --------------------------------------------------------------

    def execute(self, q: Query, principal: str = "") -> Table:
        self._check_alive()
        query_text = _loggable(q)
        try:
            self._authorize(principal)
            foreign = namespaces(q) - {self.namespace}
            if foreign:
                raise UnknownRelationError(
                    f"foreign namespace {sorted(foreign)} (wrapper serves {self.namespace!r})",
                    origin=self.component_id,
                )
            env = self.environment()
            infer_schema(q, env)
            rewritten = push_down_selects(q, env)
            db = self._load_snapshot(rewritten, env)
            result = evaluate(rewritten, db, self.config.salt)
        except Exception as exc:
            self._record_failure(principal, query_text, exc)
            raise
        self._record(principal, query_text, len(result.rows), False, "ok")
        return result

    def _load_snapshot(self, q: Query, env) -> dict[QualifiedName, Table]:
        """Load every scanned relation once, filtering at read time when every
        occurrence of the relation carries a selection directly above it."""
        filters: dict[str, list] = {}

        def collect(node: Query, pending: Optional[object]) -> None:
            if isinstance(node, Scan):
                filters.setdefault(node.name.relation, []).append(pending)
            elif isinstance(node, Select):
                collect(node.child, node.predicate)
            elif isinstance(node, (Project, Rename)):
                collect(node.child, None)
            elif isinstance(node, (Join, Union)):
                collect(node.left, None)
                collect(node.right, None)

        collect(q, None)
        db: dict[QualifiedName, Table] = {}
        for relation, pendings in filters.items():
            schema = env[QualifiedName(self.namespace, relation)]
            row_filter = None
            if all(p is not None for p in pendings):
                index = {attr.name: i for i, attr in enumerate(schema.attributes)}
                disjuncts = list(pendings)
                salt = self.config.salt

                def row_filter(row, _disjuncts=disjuncts, _index=index, _salt=salt):
                    return any(
                        eval_predicate(p, row, _index, _salt) is True for p in _disjuncts
                    )

            db[QualifiedName(self.namespace, relation)] = self.adapter.load(
                relation, row_filter
            )
        return db

    # -- change signal --------------------------------------------------------

    def snapshot_epoch(self) -> int:
        self._check_alive()
        current = self.adapter.fingerprint()
        with self._lock:
            if current != self._last_fingerprint:
                self._last_fingerprint = current
                self._epoch += 1
            return self._epoch

    def epoch(self) -> int:
        return self.snapshot_epoch()

    # -- lineage ------------------------------------------------------------------

    def lineage(self, relation: str) -> LineageNode:
        self._check_alive()
        if relation not in {schema.name for schema in self.adapter.relations()}:
            raise UnknownRelationError(
                f"unknown relation {relation!r}", origin=self.component_id
            )
        return LineageNode(
            self.component_id,
            "wrapper",
            relation,
            source=f"{self.adapter.kind}:{self.adapter.location()}",
        )


def _loggable(q: Query) -> str:
    try:
        return render_query(q)
    except Exception:
        return "<unrenderable query>"
