"""Seeded generators shared across the test suite.

Everything takes an explicit random.Random so failures reproduce from the
printed seed.
"""

from __future__ import annotations

import random
import string
from datetime import datetime, timezone
from decimal import Decimal

from mmw.relational import Attribute, Kind, RelationSchema, Table, Value
from mmw.query.ast import (
    AttrRef,
    Comparison,
    CompareOp,
    ConcatCall,
    HashCall,
    Join,
    Literal,
    LogicalAnd,
    LogicalNot,
    LogicalOr,
    Project,
    ProjectItem,
    QualifiedName,
    RedactCall,
    Scan,
    Select,
    Union,
)

VALUE_KINDS = (Kind.BOOLEAN, Kind.INTEGER, Kind.DECIMAL, Kind.TEXT, Kind.TIMESTAMP)


def random_identifier(rng: random.Random, prefix: str = "") -> str:
    body = "".join(rng.choice(string.ascii_lowercase + string.digits + "_") for _ in range(rng.randint(0, 5)))
    return (prefix or rng.choice(string.ascii_lowercase)) + body


def random_value(rng: random.Random, kind: Kind, nullable: bool = False) -> Value:
    if nullable and rng.random() < 0.2:
        return Value.null()
    if kind is Kind.BOOLEAN:
        return Value.boolean(rng.random() < 0.5)
    if kind is Kind.INTEGER:
        return Value.integer(rng.randint(-50, 50))
    if kind is Kind.DECIMAL:
        return Value.decimal(Decimal(rng.randint(-5000, 5000)) / 100)
    if kind is Kind.TEXT:
        length = rng.randint(0, 6)
        return Value.text("".join(rng.choice("abcxyz',\"\n ") for _ in range(length)))
    moment = datetime(2024, 1, 1, tzinfo=timezone.utc).timestamp() + rng.randint(0, 10_000_000)
    return Value.timestamp(datetime.fromtimestamp(moment, tz=timezone.utc))


def random_attribute(rng: random.Random, name: str, identifying_ok: bool = False) -> Attribute:
    kind = rng.choice(VALUE_KINDS)
    tags = ("identifying",) if identifying_ok and rng.random() < 0.2 else ()
    return Attribute(name, kind, nullable=rng.random() < 0.4, tags=tags)


def random_schema(rng: random.Random, name: str, attr_names: list[str]) -> RelationSchema:
    return RelationSchema(name, [random_attribute(rng, attr_name) for attr_name in attr_names])


def random_row(rng: random.Random, schema: RelationSchema) -> tuple[Value, ...]:
    return tuple(random_value(rng, attr.data_type, attr.nullable) for attr in schema.attributes)


def random_table(rng: random.Random, schema: RelationSchema, max_rows: int = 6) -> Table:
    return Table(schema, [random_row(rng, schema) for _ in range(rng.randint(0, max_rows))])


# --- grammar-shaped query generation -----------------------------------------
#
# Relations get globally unique attribute names plus a shared-kind "k*" key
# column, so random joins never collide and always have a joinable pair.


def make_environment(
    rng: random.Random,
    namespaces: tuple[str, ...] = ("w1", "w2"),
    relations_per_namespace: int = 2,
    identifying_ok: bool = False,
) -> dict[QualifiedName, RelationSchema]:
    env: dict[QualifiedName, RelationSchema] = {}
    serial = 0
    for namespace in namespaces:
        for rel_index in range(relations_per_namespace):
            attrs = [Attribute(f"k{serial}", Kind.INTEGER)]
            for _ in range(rng.randint(1, 3)):
                serial_name = f"c{serial}_{len(attrs)}"
                attrs.append(random_attribute(rng, serial_name, identifying_ok))
            name = f"r{rel_index}"
            env[QualifiedName(namespace, name)] = RelationSchema(name, attrs)
            serial += 1
    return env


def random_database(
    rng: random.Random,
    env: dict[QualifiedName, RelationSchema],
    max_rows: int = 6,
) -> dict[QualifiedName, Table]:
    # Key columns draw from a small domain so joins actually match.
    db = {}
    for qname, schema in env.items():
        rows = []
        for _ in range(rng.randint(0, max_rows)):
            row = []
            for attr in schema.attributes:
                if attr.name.startswith("k") and attr.data_type is Kind.INTEGER:
                    row.append(Value.integer(rng.randint(0, 3)))
                else:
                    row.append(random_value(rng, attr.data_type, attr.nullable))
            rows.append(tuple(row))
        db[qname] = Table(schema, rows)
    return db


def _random_literal_for(rng: random.Random, kind: Kind) -> Literal:
    return Literal(random_value(rng, kind))


def _random_comparison(rng: random.Random, schema: RelationSchema) -> Comparison:
    attr = rng.choice(schema.attributes)
    op = rng.choice(list(CompareOp))
    if rng.random() < 0.3:
        partners = [
            other
            for other in schema.attributes
            if other.data_type is attr.data_type and other.name != attr.name
        ]
        if partners:
            return Comparison(AttrRef(attr.name), op, AttrRef(rng.choice(partners).name))
    return Comparison(AttrRef(attr.name), op, _random_literal_for(rng, attr.data_type))


def random_predicate(rng: random.Random, schema: RelationSchema, depth: int = 2):
    if depth > 0 and rng.random() < 0.4:
        shape = rng.random()
        if shape < 0.4:
            return LogicalAnd(
                random_predicate(rng, schema, depth - 1), random_predicate(rng, schema, depth - 1)
            )
        if shape < 0.8:
            return LogicalOr(
                random_predicate(rng, schema, depth - 1), random_predicate(rng, schema, depth - 1)
            )
        return LogicalNot(random_predicate(rng, schema, depth - 1))
    return _random_comparison(rng, schema)


def _random_items(rng: random.Random, schema: RelationSchema):
    attrs = list(schema.attributes)
    rng.shuffle(attrs)
    picked = attrs[: rng.randint(1, len(attrs))]
    items = []
    names: set[str] = set()
    for position, attr in enumerate(picked):
        roll = rng.random()
        if roll < 0.70:
            item = ProjectItem(AttrRef(attr.name), attr.name)
        elif roll < 0.85:
            item = ProjectItem(HashCall(AttrRef(attr.name)), f"h{position}")
        elif roll < 0.92 and attr.data_type is Kind.TEXT:
            item = ProjectItem(ConcatCall(AttrRef(attr.name), AttrRef(attr.name)), f"cc{position}")
        else:
            item = ProjectItem(RedactCall(), f"red{position}")
        if item.name in names:
            continue
        names.add(item.name)
        items.append(item)
    if not items:
        items.append(ProjectItem(AttrRef(picked[0].name), picked[0].name))
    return items


def random_block(
    rng: random.Random,
    env: dict[QualifiedName, RelationSchema],
    namespaces: tuple[str, ...] | None = None,
    max_joins: int = 2,
):
    """A grammar-shaped Project(Select?(JoinTree)) over env relations."""
    from mmw.query.infer import infer_schema

    candidates = [
        qname for qname in env if namespaces is None or qname.namespace in namespaces
    ]
    from mmw.errors import TypeCheckError

    base = rng.choice(candidates)
    node = Scan(base)
    used = [base]
    for _ in range(rng.randint(0, max_joins)):
        remaining = [qname for qname in candidates if qname not in used]
        if not remaining:
            break
        nxt = rng.choice(remaining)
        current = infer_schema(node, env)
        key_left = [a.name for a in current.attributes if a.data_type is Kind.INTEGER]
        key_right = [a.name for a in env[nxt].attributes if a.data_type is Kind.INTEGER]
        if not key_left or not key_right:
            continue
        candidate = Join(node, Scan(nxt), [(rng.choice(key_left), rng.choice(key_right))])
        try:
            infer_schema(candidate, env)  # reject attribute collisions
        except TypeCheckError:
            continue
        node = candidate
        used.append(nxt)
    schema = infer_schema(node, env)
    if rng.random() < 0.6:
        node = Select(node, random_predicate(rng, schema))
    items = None if rng.random() < 0.25 else _random_items(rng, schema)
    return Project(node, items)


def random_query(
    rng: random.Random,
    env: dict[QualifiedName, RelationSchema],
    namespaces: tuple[str, ...] | None = None,
    allow_union: bool = True,
    max_joins: int = 2,
):
    from mmw.query.infer import infer_schema

    block = random_block(rng, env, namespaces, max_joins)
    if allow_union and rng.random() < 0.2:
        # A union branch with the same scans and items but its own predicate
        # keeps the two schemas identical.
        inner = block.child
        predicate_free = inner.child if isinstance(inner, Select) else inner
        schema = infer_schema(predicate_free, env)
        branch = predicate_free
        if rng.random() < 0.7:
            branch = Select(branch, random_predicate(rng, schema))
        return Union(block, Project(branch, block.items))
    return block
