"""View declarations and the rewrites they induce.

A mediator's views map downstream relations to a global namespace; queries
posed against the global namespace are rewritten back down by unfolding.
Declarations arrive as ``CREATE VIEW name AS <query>`` text; files hold one
';'-terminated statement per view with '--' line comments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from mmw.errors import ConfigError, TypeCheckError, UnknownRelationError, ViewCycleError
from mmw.relational import ProductSchema, RelationSchema
from mmw.query.ast import (
    Join,
    Project,
    QualifiedName,
    Query,
    Rename,
    Scan,
    Select,
    Union,
    scan_names,
)
from mmw.query.infer import Environment, infer_schema
from mmw.query.parse import parse_view_statements


@dataclass(frozen=True)
class ViewDeclaration:
    """A named global relation defined by a query over downstream names."""

    namespace: str
    name: str
    body: Query

    @property
    def qualified(self) -> QualifiedName:
        return QualifiedName(self.namespace, self.name)


def parse_view_decl(text: str, namespace: str) -> ViewDeclaration:
    statements = parse_view_statements(text)
    if len(statements) != 1:
        raise ConfigError(f"expected exactly one view declaration, got {len(statements)}")
    name, body = statements[0]
    return ViewDeclaration(namespace, name, body)


def parse_view_source(text: str, namespace: str) -> list[ViewDeclaration]:
    return [ViewDeclaration(namespace, name, body) for name, body in parse_view_statements(text)]


def _view_map(views: Iterable[ViewDeclaration]) -> dict[QualifiedName, ViewDeclaration]:
    mapping: dict[QualifiedName, ViewDeclaration] = {}
    for view in views:
        if view.qualified in mapping:
            raise ConfigError(f"duplicate view name {view.qualified}")
        mapping[view.qualified] = view
    return mapping


def check_views(
    views: Sequence[ViewDeclaration], downstream: Environment
) -> dict[QualifiedName, RelationSchema]:
    """Acyclicity plus type checks; returns the schema of every view.

    Views may reference downstream relations and sibling views declared in
    any order; the dependency graph just has to be acyclic.
    """
    mapping = _view_map(views)
    order = _topological_order(mapping)
    env: dict[QualifiedName, RelationSchema] = dict(downstream)
    schemas: dict[QualifiedName, RelationSchema] = {}
    for qualified in order:
        view = mapping[qualified]
        try:
            schema = infer_schema(view.body, env)
        except (TypeCheckError, UnknownRelationError) as exc:
            raise type(exc)(f"view {qualified}: {exc.message}", origin=exc.origin) from None
        schema = schema.rename(view.name)
        env[qualified] = schema
        schemas[qualified] = schema
    return schemas


def _topological_order(
    mapping: dict[QualifiedName, ViewDeclaration]
) -> list[QualifiedName]:
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {qualified: WHITE for qualified in mapping}
    order: list[QualifiedName] = []

    def visit(qualified: QualifiedName, trail: list[QualifiedName]) -> None:
        colour[qualified] = GREY
        trail.append(qualified)
        for dependency in scan_names(mapping[qualified].body):
            if dependency not in mapping:
                continue  # downstream relation, not a view
            if colour[dependency] is GREY:
                cycle = trail[trail.index(dependency):] + [dependency]
                raise ViewCycleError([str(name) for name in cycle])
            if colour[dependency] is WHITE:
                visit(dependency, trail)
        trail.pop()
        colour[qualified] = BLACK
        order.append(qualified)

    for qualified in sorted(mapping, key=str):
        if colour[qualified] is WHITE:
            visit(qualified, [])
    return order


def unfold(q: Query, views: Iterable[ViewDeclaration]) -> Query:
    """Replace every scan of a view by the view's body until only base
    relations remain. Idempotent; preserves the inferred schema."""
    mapping = _view_map(views)

    def expand(node: Query, active: tuple[QualifiedName, ...]) -> Query:
        if isinstance(node, Scan):
            view = mapping.get(node.name)
            if view is None:
                return node
            if node.name in active:
                cycle = list(active[active.index(node.name):]) + [node.name]
                raise ViewCycleError([str(name) for name in cycle])
            return expand(view.body, active + (node.name,))
        if isinstance(node, Select):
            return Select(expand(node.child, active), node.predicate)
        if isinstance(node, Project):
            return Project(expand(node.child, active), node.items)
        if isinstance(node, Rename):
            return Rename(expand(node.child, active), node.mapping)
        if isinstance(node, Join):
            return Join(expand(node.left, active), expand(node.right, active), node.pairs)
        if isinstance(node, Union):
            return Union(expand(node.left, active), expand(node.right, active))
        raise TypeError(f"unknown query node {type(node).__name__}")

    return expand(q, ())


def derive_global_schema(
    views: Sequence[ViewDeclaration],
    downstream: Environment,
    product: str,
    version: int,
    metadata: Mapping[str, str] | None = None,
) -> ProductSchema:
    """One relation per view, typed through the unfolded body."""
    schemas = check_views(views, downstream)
    relations = [schemas[view.qualified] for view in views]
    return ProductSchema(product, version, relations, dict(metadata or {}))
