"""Recursive-descent parser for the query and view-declaration surface.

Grammar:

    query  := SELECT items FROM qname (JOIN qname ON pair (AND pair)*)*
              (WHERE predicate)? (UNION query)?
    items  := '*' | item (',' item)*
    item   := expr (AS identifier)?
    pair   := identifier '=' identifier
    view   := CREATE VIEW identifier AS query

Keywords are case-insensitive, identifiers are not. Text literals are
single-quoted with '' escaping; '--' starts a line comment. View files hold
';'-terminated statements.
"""

from __future__ import annotations

from dataclasses import dataclass

from mmw.errors import QuerySyntaxError
from mmw.relational import Value, is_identifier
from mmw.query.ast import (
    AttrRef,
    Comparison,
    CompareOp,
    ConcatCall,
    Expr,
    HashCall,
    Join,
    Literal,
    LogicalAnd,
    LogicalNot,
    LogicalOr,
    Predicate,
    Project,
    ProjectItem,
    QualifiedName,
    Query,
    RedactCall,
    Scan,
    Select,
    Union,
)

KEYWORDS = {
    "SELECT",
    "FROM",
    "JOIN",
    "ON",
    "WHERE",
    "AND",
    "OR",
    "NOT",
    "UNION",
    "AS",
    "CREATE",
    "VIEW",
    "TRUE",
    "FALSE",
    "NULL",
    "TIMESTAMP",
}

_COMPARE_OPS = {op.value: op for op in CompareOp}


@dataclass(frozen=True)
class Token:
    type: str  # KW, IDENT, NUMBER, STRING, OP, EOF
    text: str
    line: int
    column: int


def _error(message: str, line: int, column: int, expected: tuple[str, ...] = ()) -> QuerySyntaxError:
    return QuerySyntaxError(message, line=line, column=column, expected=expected)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, column = 1, 1
    pos = 0
    length = len(source)

    def advance(count: int) -> None:
        nonlocal pos, line, column
        for _ in range(count):
            if source[pos] == "\n":
                line += 1
                column = 1
            else:
                column += 1
            pos += 1

    while pos < length:
        ch = source[pos]
        if ch in " \t\r\n":
            advance(1)
            continue
        if ch == "-" and source.startswith("--", pos):
            while pos < length and source[pos] != "\n":
                advance(1)
            continue
        start_line, start_column = line, column
        if ch == "'":
            advance(1)
            chunks: list[str] = []
            while True:
                if pos >= length:
                    raise _error("unterminated text literal", start_line, start_column)
                if source[pos] == "'":
                    if source.startswith("''", pos):
                        chunks.append("'")
                        advance(2)
                        continue
                    advance(1)
                    break
                chunks.append(source[pos])
                advance(1)
            tokens.append(Token("STRING", "".join(chunks), start_line, start_column))
            continue
        if ch.isdigit() or (ch == "-" and pos + 1 < length and source[pos + 1].isdigit()):
            end = pos + 1
            while end < length and source[end].isdigit():
                end += 1
            if end < length and source[end] == "." and end + 1 < length and source[end + 1].isdigit():
                end += 1
                while end < length and source[end].isdigit():
                    end += 1
            text = source[pos:end]
            advance(end - pos)
            tokens.append(Token("NUMBER", text, start_line, start_column))
            continue
        if ch.isalpha() or ch == "_":
            end = pos + 1
            while end < length and (source[end].isalnum() or source[end] == "_"):
                end += 1
            word = source[pos:end]
            advance(end - pos)
            if word.upper() in KEYWORDS:
                tokens.append(Token("KW", word.upper(), start_line, start_column))
            else:
                tokens.append(Token("IDENT", word, start_line, start_column))
            continue
        for op_text in ("<>", "<=", ">=", "=", "<", ">", ",", ".", "*", "(", ")", ";"):
            if source.startswith(op_text, pos):
                advance(len(op_text))
                tokens.append(Token("OP", op_text, start_line, start_column))
                break
        else:
            raise _error(f"unexpected character {ch!r}", start_line, start_column)
    tokens.append(Token("EOF", "", line, column))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.current
        if token.type != "EOF":
            self.pos += 1
        return token

    def at_keyword(self, *words: str) -> bool:
        return self.current.type == "KW" and self.current.text in words

    def at_op(self, *ops: str) -> bool:
        return self.current.type == "OP" and self.current.text in ops

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            raise self.unexpected((word,))
        return self.advance()

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise self.unexpected((f"'{op}'",))
        return self.advance()

    def expect_identifier(self) -> Token:
        if self.current.type != "IDENT":
            raise self.unexpected(("identifier",))
        token = self.advance()
        if not is_identifier(token.text):
            raise _error(
                f"invalid identifier {token.text!r} (lowercase snake case required)",
                token.line,
                token.column,
            )
        return token

    def unexpected(self, expected: tuple[str, ...]) -> QuerySyntaxError:
        token = self.current
        shown = token.text if token.type != "EOF" else "end of input"
        return _error(f"unexpected {shown!r}", token.line, token.column, expected)

    # --- query grammar ----------------------------------------------------

    def parse_query(self) -> Query:
        block = self.parse_block()
        if self.at_keyword("UNION"):
            self.advance()
            return Union(block, self.parse_query())
        return block

    def parse_block(self) -> Query:
        self.expect_keyword("SELECT")
        items = self.parse_items()
        self.expect_keyword("FROM")
        node: Query = Scan(self.parse_qualified_name())
        while self.at_keyword("JOIN"):
            self.advance()
            right = Scan(self.parse_qualified_name())
            self.expect_keyword("ON")
            pairs = [self.parse_join_pair()]
            while self.at_keyword("AND"):
                self.advance()
                pairs.append(self.parse_join_pair())
            node = Join(node, right, pairs)
        if self.at_keyword("WHERE"):
            self.advance()
            node = Select(node, self.parse_predicate())
        return Project(node, items)

    def parse_items(self):
        if self.at_op("*"):
            self.advance()
            return None
        items = [self.parse_item()]
        while self.at_op(","):
            self.advance()
            items.append(self.parse_item())
        return items

    def parse_item(self) -> ProjectItem:
        token = self.current
        expr = self.parse_expr()
        if self.at_keyword("AS"):
            self.advance()
            name = self.expect_identifier().text
        elif isinstance(expr, AttrRef):
            name = expr.name
        else:
            raise _error(
                "select item needs an output name", token.line, token.column, ("AS",)
            )
        return ProjectItem(expr, name)

    def parse_qualified_name(self) -> QualifiedName:
        namespace = self.expect_identifier().text
        self.expect_op(".")
        relation = self.expect_identifier().text
        return QualifiedName(namespace, relation)

    def parse_join_pair(self) -> tuple[str, str]:
        left = self.expect_identifier().text
        self.expect_op("=")
        right = self.expect_identifier().text
        return left, right

    # --- predicates ---------------------------------------------------------

    def parse_predicate(self) -> Predicate:
        node = self.parse_and()
        while self.at_keyword("OR"):
            self.advance()
            node = LogicalOr(node, self.parse_and())
        return node

    def parse_and(self) -> Predicate:
        node = self.parse_unary()
        while self.at_keyword("AND"):
            self.advance()
            node = LogicalAnd(node, self.parse_unary())
        return node

    def parse_unary(self) -> Predicate:
        if self.at_keyword("NOT"):
            self.advance()
            return LogicalNot(self.parse_unary())
        if self.at_op("("):
            self.advance()
            inner = self.parse_predicate()
            self.expect_op(")")
            return inner
        left = self.parse_expr()
        token = self.current
        if token.type != "OP" or token.text not in _COMPARE_OPS:
            raise self.unexpected(tuple(sorted(_COMPARE_OPS)))
        self.advance()
        right = self.parse_expr()
        return Comparison(left, _COMPARE_OPS[token.text], right)

    # --- expressions ----------------------------------------------------------

    def parse_expr(self) -> Expr:
        token = self.current
        if token.type == "NUMBER":
            self.advance()
            if "." in token.text:
                return Literal(Value.decimal(token.text))
            return Literal(Value.integer(int(token.text)))
        if token.type == "STRING":
            self.advance()
            return Literal(Value.text(token.text))
        if token.type == "KW":
            if token.text == "TRUE":
                self.advance()
                return Literal(Value.boolean(True))
            if token.text == "FALSE":
                self.advance()
                return Literal(Value.boolean(False))
            if token.text == "NULL":
                self.advance()
                return Literal(Value.null())
            if token.text == "TIMESTAMP":
                self.advance()
                text_token = self.current
                if text_token.type != "STRING":
                    raise self.unexpected(("text literal",))
                self.advance()
                try:
                    return Literal(Value.timestamp(text_token.text))
                except ValueError as exc:
                    raise _error(str(exc), text_token.line, text_token.column) from None
            raise self.unexpected(("expression",))
        if token.type == "IDENT":
            name_token = self.expect_identifier()
            if self.at_op("("):
                return self.parse_call(name_token)
            return AttrRef(name_token.text)
        raise self.unexpected(("expression",))

    def parse_call(self, name_token: Token) -> Expr:
        name = name_token.text
        self.expect_op("(")
        if name == "hash":
            arg = self.parse_expr()
            self.expect_op(")")
            return HashCall(arg)
        if name == "redact":
            self.expect_op(")")
            return RedactCall()
        if name == "concat":
            left = self.parse_expr()
            self.expect_op(",")
            right = self.parse_expr()
            self.expect_op(")")
            return ConcatCall(left, right)
        raise _error(
            f"unknown function {name!r}",
            name_token.line,
            name_token.column,
            ("hash", "redact", "concat"),
        )

    # --- view declarations ------------------------------------------------------

    def parse_view_statement(self) -> tuple[str, Query]:
        self.expect_keyword("CREATE")
        self.expect_keyword("VIEW")
        name = self.expect_identifier().text
        self.expect_keyword("AS")
        return name, self.parse_query()

    def expect_end(self) -> None:
        if self.current.type != "EOF":
            raise self.unexpected(("end of input",))


def parse_query(text: str) -> Query:
    parser = _Parser(tokenize(text))
    query = parser.parse_query()
    parser.expect_end()
    return query


def parse_view_statements(text: str) -> list[tuple[str, Query]]:
    """Parse a view-declaration source: ';'-terminated CREATE VIEW statements."""
    parser = _Parser(tokenize(text))
    statements: list[tuple[str, Query]] = []
    while parser.current.type != "EOF":
        statements.append(parser.parse_view_statement())
        if parser.at_op(";"):
            parser.advance()
        elif parser.current.type != "EOF":
            raise parser.unexpected(("';'",))
    return statements
