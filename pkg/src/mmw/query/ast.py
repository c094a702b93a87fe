"""Immutable algebra trees: queries, scalar expressions, predicates.

Trees are plain frozen dataclasses compared structurally; rewrites build new
trees. `Project` with ``items=None`` is the star projection (identity).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from mmw.relational import Value


@dataclass(frozen=True)
class QualifiedName:
    namespace: str
    relation: str

    def __str__(self) -> str:
        return f"{self.namespace}.{self.relation}"


class Expr:
    """Base class for scalar expressions."""

    __slots__ = ()


@dataclass(frozen=True)
class AttrRef(Expr):
    name: str


@dataclass(frozen=True)
class Literal(Expr):
    value: Value


@dataclass(frozen=True)
class HashCall(Expr):
    arg: Expr


@dataclass(frozen=True)
class RedactCall(Expr):
    pass


@dataclass(frozen=True)
class ConcatCall(Expr):
    left: Expr
    right: Expr


class Predicate:
    __slots__ = ()


class CompareOp(Enum):
    EQ = "="
    NE = "<>"
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


@dataclass(frozen=True)
class Comparison(Predicate):
    left: Expr
    op: CompareOp
    right: Expr


@dataclass(frozen=True)
class LogicalAnd(Predicate):
    left: Predicate
    right: Predicate


@dataclass(frozen=True)
class LogicalOr(Predicate):
    left: Predicate
    right: Predicate


@dataclass(frozen=True)
class LogicalNot(Predicate):
    child: Predicate


class Query:
    __slots__ = ()


@dataclass(frozen=True)
class Scan(Query):
    name: QualifiedName


@dataclass(frozen=True)
class Select(Query):
    child: Query
    predicate: Predicate


@dataclass(frozen=True)
class ProjectItem:
    expr: Expr
    name: str


@dataclass(frozen=True)
class Project(Query):
    """items=None projects every child attribute unchanged (``SELECT *``)."""

    child: Query
    items: Optional[tuple[ProjectItem, ...]]

    def __init__(self, child: Query, items: Optional[Iterable[ProjectItem]] = None):
        object.__setattr__(self, "child", child)
        object.__setattr__(self, "items", tuple(items) if items is not None else None)

    @property
    def is_star(self) -> bool:
        return self.items is None


@dataclass(frozen=True)
class Rename(Query):
    child: Query
    mapping: tuple[tuple[str, str], ...]

    def __init__(self, child: Query, mapping):
        object.__setattr__(self, "child", child)
        if isinstance(mapping, dict):
            mapping = tuple(sorted(mapping.items()))
        object.__setattr__(self, "mapping", tuple(tuple(pair) for pair in mapping))

    @property
    def mapping_dict(self) -> dict[str, str]:
        return dict(self.mapping)


@dataclass(frozen=True)
class Join(Query):
    """Inner equi-join; right join-key attributes are dropped from the output."""

    left: Query
    right: Query
    pairs: tuple[tuple[str, str], ...]

    def __init__(self, left: Query, right: Query, pairs):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "pairs", tuple(tuple(pair) for pair in pairs))


@dataclass(frozen=True)
class Union(Query):
    """Bag union: concatenation, no deduplication."""

    left: Query
    right: Query


def scan_names(q: Query) -> list[QualifiedName]:
    """Every relation scanned by q, in tree order (duplicates preserved)."""
    found: list[QualifiedName] = []

    def walk(node: Query) -> None:
        if isinstance(node, Scan):
            found.append(node.name)
        elif isinstance(node, (Select, Project, Rename)):
            walk(node.child)
        elif isinstance(node, (Join, Union)):
            walk(node.left)
            walk(node.right)
        else:
            raise TypeError(f"unknown query node {type(node).__name__}")

    walk(q)
    return found


def namespaces(q: Query) -> set[str]:
    return {name.namespace for name in scan_names(q)}


def rewrite_namespaces(q: Query, mapping: dict[str, str]) -> Query:
    """Rename scan namespaces (e.g. consumer alias -> producer namespace)."""

    def walk(node: Query) -> Query:
        if isinstance(node, Scan):
            target = mapping.get(node.name.namespace)
            if target is None:
                return node
            return Scan(QualifiedName(target, node.name.relation))
        if isinstance(node, Select):
            return Select(walk(node.child), node.predicate)
        if isinstance(node, Project):
            return Project(walk(node.child), node.items)
        if isinstance(node, Rename):
            return Rename(walk(node.child), node.mapping)
        if isinstance(node, Join):
            return Join(walk(node.left), walk(node.right), node.pairs)
        if isinstance(node, Union):
            return Union(walk(node.left), walk(node.right))
        raise TypeError(f"unknown query node {type(node).__name__}")

    return walk(q)


def predicate_attrs(predicate: Predicate) -> set[str]:
    found: set[str] = set()

    def walk_expr(expr: Expr) -> None:
        if isinstance(expr, AttrRef):
            found.add(expr.name)
        elif isinstance(expr, HashCall):
            walk_expr(expr.arg)
        elif isinstance(expr, ConcatCall):
            walk_expr(expr.left)
            walk_expr(expr.right)

    def walk(node: Predicate) -> None:
        if isinstance(node, Comparison):
            walk_expr(node.left)
            walk_expr(node.right)
        elif isinstance(node, (LogicalAnd, LogicalOr)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, LogicalNot):
            walk(node.child)

    walk(predicate)
    return found


def expr_attrs(expr: Expr) -> set[str]:
    if isinstance(expr, AttrRef):
        return {expr.name}
    if isinstance(expr, HashCall):
        return expr_attrs(expr.arg)
    if isinstance(expr, ConcatCall):
        return expr_attrs(expr.left) | expr_attrs(expr.right)
    return set()


def contains_hash_call(node) -> bool:
    """True if any expression in the subtree applies the salted hash."""
    if isinstance(node, HashCall):
        return True
    if isinstance(node, ConcatCall):
        return contains_hash_call(node.left) or contains_hash_call(node.right)
    if isinstance(node, (AttrRef, Literal, RedactCall)):
        return False
    if isinstance(node, Comparison):
        return contains_hash_call(node.left) or contains_hash_call(node.right)
    if isinstance(node, (LogicalAnd, LogicalOr)):
        return contains_hash_call(node.left) or contains_hash_call(node.right)
    if isinstance(node, LogicalNot):
        return contains_hash_call(node.child)
    if isinstance(node, Scan):
        return False
    if isinstance(node, Select):
        return contains_hash_call(node.child) or contains_hash_call(node.predicate)
    if isinstance(node, Project):
        if node.items is not None and any(contains_hash_call(item.expr) for item in node.items):
            return True
        return contains_hash_call(node.child)
    if isinstance(node, Rename):
        return contains_hash_call(node.child)
    if isinstance(node, (Join, Union)):
        return contains_hash_call(node.left) or contains_hash_call(node.right)
    raise TypeError(f"unknown node {type(node).__name__}")
