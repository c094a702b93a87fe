"""The mediator component: transform and integrate downstream components.

A mediator binds downstream components under local aliases, declares views
over them, serves the derived product schema under its product name, and
executes queries by unfolding, planning and fetching. Results are cached
keyed by (canonical query text, freshness epoch), so a stale entry can never
be served: any downstream change moves the epoch and misses the cache.

Downstream bindings are fetched once at configure time; schema changes
require an explicit reconfiguration, which bumps the mediator's epoch.
"""

from __future__ import annotations

import dataclasses
import threading
from collections import OrderedDict
from typing import Mapping, Optional, Sequence, Union as TypingUnion

from mmw.component import ComponentBase, LineageNode
from mmw.errors import ConfigError, UnavailableError, UnknownRelationError
from mmw.planner import Placement, plan, execute_plan
from mmw.query.ast import QualifiedName, Query, rewrite_namespaces, scan_names
from mmw.query.infer import infer_schema
from mmw.query.render import render_query
from mmw.relational import ProductSchema, RelationSchema, Table, is_identifier
from mmw.views import ViewDeclaration, check_views, parse_view_source, unfold

ViewInput = TypingUnion[str, ViewDeclaration]


class Mediator(ComponentBase):
    kind = "mediator"

    def __init__(
        self,
        component_id: str,
        product: str,
        downstream: Mapping[str, object],
        views: Sequence[ViewInput] = (),
        version: int = 1,
        metadata: Optional[Mapping[str, str]] = None,
        cache_capacity: int = 64,
        salt: str = "",
        deny_raw_identifying: bool = False,
    ):
        super().__init__(component_id)
        if not is_identifier(component_id) or not is_identifier(product):
            raise ConfigError("component id and product must be valid identifiers")
        if product in downstream:
            raise ConfigError(
                f"downstream alias {product!r} collides with the product namespace"
            )
        for alias in downstream:
            if not is_identifier(alias):
                raise ConfigError(f"downstream alias {alias!r} is not a valid identifier")
        self.product = product
        self.namespace = product  # views are exposed under the product name
        self.version = version
        self.metadata = dict(metadata or {})
        self.downstream = dict(downstream)
        self.salt = salt
        self.deny_raw_identifying = deny_raw_identifying
        self.cache_capacity = cache_capacity
        self._cache: OrderedDict[tuple[str, int], Table] = OrderedDict()
        self._cache_lock = threading.Lock()
        self._generation = 0
        self._configure(views)

    # -- configuration ---------------------------------------------------------

    def _configure(self, views: Sequence[ViewInput]) -> None:
        declared: list[ViewDeclaration] = []
        for item in views:
            if isinstance(item, str):
                declared.extend(parse_view_source(item, self.product))
            else:
                if item.namespace != self.product:
                    item = dataclasses.replace(item, namespace=self.product)
                declared.append(item)
        env: dict[QualifiedName, RelationSchema] = {}
        for alias, binding in sorted(self.downstream.items()):
            try:
                downstream_product = binding.get_schema()
            except UnavailableError as exc:
                raise UnavailableError(
                    f"downstream {alias!r} unavailable during configuration: {exc.message}",
                    origin=getattr(binding, "component_id", alias),
                ) from None
            for relation in downstream_product.relations:
                env[QualifiedName(alias, relation.name)] = relation
        schemas = check_views(declared, env)
        relations = [schemas[view.qualified] for view in declared]
        if self.deny_raw_identifying:
            for relation in relations:
                for attr in relation.attributes:
                    if attr.identifying:
                        raise ConfigError(
                            f"view {relation.name!r} exposes identifying attribute "
                            f"{attr.name!r} raw; wrap it in hash() or redact()"
                        )
        self.views = tuple(declared)
        self._views_by_name = {view.name: view for view in declared}
        self._base_env = env
        self._product_schema = ProductSchema(self.product, self.version, relations, self.metadata)
        self._product_env = {
            QualifiedName(self.product, relation.name): relation for relation in relations
        }
        self._placement = Placement(self.downstream)
        self._generation += 1
        with self._cache_lock:
            self._cache.clear()

    def reconfigure(
        self,
        views: Optional[Sequence[ViewInput]] = None,
        version: Optional[int] = None,
        metadata: Optional[Mapping[str, str]] = None,
    ) -> None:
        """Replace views/version/metadata; bumps the epoch even when nothing
        downstream changed."""
        if version is not None:
            self.version = version
        if metadata is not None:
            self.metadata = dict(metadata)
        self._configure(views if views is not None else self.views)

    # -- serving ------------------------------------------------------------------

    def get_schema(self) -> ProductSchema:
        self._check_alive()
        return self._product_schema

    def epoch(self) -> int:
        self._check_alive()
        downstream_epochs = []
        for alias, binding in sorted(self.downstream.items()):
            try:
                downstream_epochs.append(binding.epoch())
            except UnavailableError as exc:
                raise UnavailableError(
                    f"downstream {alias!r} unavailable: {exc.message}",
                    origin=exc.origin or getattr(binding, "component_id", alias),
                ) from None
        return max(downstream_epochs, default=0) + self._generation

    def execute(self, q: Query, principal: str = "") -> Table:
        self._check_alive()
        query_text = _canonical(q)
        try:
            self._authorize(principal)
            result_schema = infer_schema(q, self._product_env)
            epoch = self.epoch()
            key = (query_text, epoch)
            with self._cache_lock:
                cached = self._cache.get(key)
                if cached is not None:
                    self._cache.move_to_end(key)
            if cached is not None:
                self._count_cache(True)
                self._record(principal, query_text, len(cached.rows), True, "ok")
                return cached
            self._count_cache(False)
            exec_plan = plan(q, self.views, self._placement, self._base_env)

            def fetch(step):
                binding = self._placement.binding(step.namespace)
                remote_namespace = getattr(binding, "namespace", step.namespace)
                translated = rewrite_namespaces(
                    step.query, {step.namespace: remote_namespace}
                )
                return binding.execute(translated, self.component_id)

            result = execute_plan(exec_plan, fetch, self.salt)
            # Client-facing schema comes from inference against the product
            # environment, not from plan internals.
            result = Table(result_schema, result.rows)
            if self.cache_capacity > 0:
                with self._cache_lock:
                    self._cache[key] = result
                    self._cache.move_to_end(key)
                    while len(self._cache) > self.cache_capacity:
                        self._cache.popitem(last=False)
        except Exception as exc:
            self._record_failure(principal, query_text, exc)
            raise
        self._record(principal, query_text, len(result.rows), False, "ok")
        return result

    # -- lineage --------------------------------------------------------------------

    def lineage(self, relation: str) -> LineageNode:
        self._check_alive()
        view = self._views_by_name.get(relation)
        if view is None:
            raise UnknownRelationError(
                f"unknown relation {relation!r} (declared views: "
                f"{sorted(self._views_by_name)})",
                origin=self.component_id,
            )
        unfolded = unfold(view.body, self.views)
        children: list[LineageNode] = []
        seen: set[QualifiedName] = set()
        for name in scan_names(unfolded):
            if name in seen:
                continue
            seen.add(name)
            binding = self.downstream.get(name.namespace)
            if binding is None:
                raise ConfigError(f"namespace {name.namespace!r} has no binding")
            child = binding.lineage(name.relation)
            children.append(dataclasses.replace(child, via_view=view.name))
        return LineageNode(
            self.component_id, "mediator", relation, children=tuple(children)
        )

    # -- cache introspection (monitoring only) ---------------------------------------

    def cache_info(self) -> dict[str, int]:
        with self._cache_lock:
            return {"entries": len(self._cache), "capacity": self.cache_capacity}


def _canonical(q: Query) -> str:
    try:
        return render_query(q)
    except Exception:
        return "<unrenderable query>"
