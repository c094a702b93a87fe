"""Newline-delimited JSON wire protocol.

One request per line, one response per line, UTF-8, connection reusable.
Requests: get_schema, exec_query (query text, principal, format), stats,
lineage, plus two extensions the runtime itself needs: epoch (cache
freshness) and materialize (remote refresh trigger). Every error response
carries one of the fixed codes and the id of the originating component.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from typing import Optional

from mmw.codec import (
    attribute_from_obj,
    attribute_to_obj,
    product_from_obj,
    product_to_obj,
    value_from_wire,
    value_to_wire,
)
from mmw.component import LineageNode
from mmw.errors import (
    AccessDeniedError,
    MeshError,
    ProtocolError,
    TypeCheckError,
    UnavailableError,
    UnknownRelationError,
)
from mmw.mask import FORMATS, Mask
from mmw.query.parse import parse_query
from mmw.query.render import render_query
from mmw.relational import RelationSchema, Table

logger = logging.getLogger(__name__)

WIRE_CODES = ("syntax", "type", "unknown_relation", "access_denied", "unavailable", "protocol")

_CODE_CLASSES = {
    "type": TypeCheckError,
    "unknown_relation": UnknownRelationError,
    "access_denied": AccessDeniedError,
    "unavailable": UnavailableError,
    "protocol": ProtocolError,
}


def error_to_obj(exc: Exception) -> dict:
    if isinstance(exc, MeshError):
        code = exc.code if exc.code in WIRE_CODES else "protocol"
        return {
            "type": "error",
            "code": code,
            "message": exc.message,
            "origin": exc.origin or "",
        }
    return {"type": "error", "code": "unavailable", "message": str(exc), "origin": ""}


def error_from_obj(obj: dict) -> MeshError:
    code = obj.get("code", "protocol")
    message = obj.get("message", "remote error")
    origin = obj.get("origin") or None
    cls = _CODE_CLASSES.get(code)
    if cls is not None:
        return cls(message, origin=origin)
    exc = MeshError(message, origin=origin)
    exc.code = code  # e.g. "syntax": positions live in the message text
    return exc


def table_response(table: Table) -> dict:
    return {
        "type": "table",
        "schema": [attribute_to_obj(attr) for attr in table.schema.attributes],
        "rows": [[value_to_wire(v) for v in row] for row in table.rows],
    }


def table_from_response(obj: dict, name: str = "result") -> Table:
    attrs = [attribute_from_obj(raw) for raw in obj.get("schema", ())]
    schema = RelationSchema(name, attrs)
    kinds = [attr.data_type for attr in attrs]
    rows = []
    for raw in obj.get("rows", ()):
        if len(raw) != len(kinds):
            raise ProtocolError(f"row arity {len(raw)} does not match schema")
        rows.append(tuple(value_from_wire(kind, cell) for kind, cell in zip(kinds, raw)))
    return Table(schema, rows)


def handle_request(component, request: dict) -> dict:
    """Dispatch one decoded request against a component; returns the response
    object (errors are raised, the server serializes them)."""
    if not isinstance(request, dict) or "type" not in request:
        raise ProtocolError("request must be an object with a 'type' field")
    request_type = request["type"]
    if request_type == "get_schema":
        return {
            "type": "schema",
            "component": component.component_id,
            "kind": component.kind,
            "schema": product_to_obj(component.get_schema()),
        }
    if request_type == "exec_query":
        if "query" not in request:
            raise ProtocolError("exec_query needs a 'query' field")
        q = parse_query(request["query"])
        principal = request.get("principal", "")
        format_tag = request.get("format", "table")
        if format_tag == "table":
            return table_response(component.execute(q, principal))
        if format_tag in FORMATS:
            if not isinstance(component, Mask):
                raise ProtocolError(
                    f"format {format_tag!r} requires a mask endpoint",
                    origin=component.component_id,
                )
            rendering = component.serve(q, format_tag, principal)
            return {"type": "rendering", "format": rendering.format, "data": rendering.text}
        raise ProtocolError(f"unknown format {format_tag!r}")
    if request_type == "stats":
        return {
            "type": "stats",
            "component": component.component_id,
            "counters": component.stats(),
        }
    if request_type == "lineage":
        if "relation" not in request:
            raise ProtocolError("lineage needs a 'relation' field")
        node = component.lineage(request["relation"])
        return {"type": "lineage", "root": node.to_obj()}
    if request_type == "epoch":
        return {"type": "epoch", "epoch": component.epoch()}
    if request_type == "materialize":
        if not isinstance(component, Mask):
            raise ProtocolError("materialize requires a mask endpoint")
        return {"type": "report", "report": component.materialize()}
    raise ProtocolError(f"unknown request type {request_type!r}")


class ProtocolServer:
    """Threaded TCP endpoint for one component."""

    def __init__(self, component, host: str, port: int):
        self.component = component

        class Handler(socketserver.StreamRequestHandler):
            def handle(handler) -> None:  # noqa: N805
                for raw_line in handler.rfile:
                    line = raw_line.decode("utf-8", errors="replace").strip()
                    if not line:
                        continue
                    try:
                        request = json.loads(line)
                    except json.JSONDecodeError as exc:
                        response = error_to_obj(ProtocolError(f"bad JSON: {exc}"))
                    else:
                        try:
                            response = handle_request(component, request)
                        except Exception as exc:  # serialized, connection stays up
                            if not isinstance(exc, MeshError):
                                logger.exception(
                                    "request failed on %s", component.component_id
                                )
                            response = error_to_obj(exc)
                            if not response.get("origin"):
                                response["origin"] = component.component_id
                    handler.wfile.write(
                        (json.dumps(response, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")
                    )
                    handler.wfile.flush()

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        try:
            self._server = Server((host, port), Handler)
        except OSError as exc:
            raise UnavailableError(
                f"cannot bind {host}:{port} for {component.component_id}: {exc}"
            ) from None
        self.host, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            name=f"endpoint-{component.component_id}",
            daemon=True,
        )
        self._thread.start()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


class ProtocolClient:
    """Line-oriented client; one in-flight request at a time."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._lock = threading.Lock()
        self._sock: Optional[socket.socket] = None
        self._reader = None

    def _connect(self) -> None:
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), self.timeout)
            self._reader = self._sock.makefile("rb")
        except OSError as exc:
            self._sock = None
            raise UnavailableError(f"cannot reach {self.host}:{self.port}: {exc}") from None

    def close(self) -> None:
        with self._lock:
            self._drop()

    def _drop(self) -> None:
        if self._reader is not None:
            try:
                self._reader.close()
            except OSError:
                pass
            self._reader = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def request(self, payload: dict) -> dict:
        """Send one request; raises the decoded error for error responses."""
        with self._lock:
            self._connect()
            try:
                self._sock.sendall(
                    (json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")
                )
                line = self._reader.readline()
            except OSError as exc:
                self._drop()
                raise UnavailableError(f"connection to {self.host}:{self.port} failed: {exc}") from None
            if not line:
                self._drop()
                raise UnavailableError(f"connection to {self.host}:{self.port} closed")
        try:
            response = json.loads(line.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad response line: {exc}") from None
        if isinstance(response, dict) and response.get("type") == "error":
            raise error_from_obj(response)
        return response


class TcpBinding:
    """Consumer-side view of a remote component, mirroring the in-process
    component surface used by mediators and masks."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._client = ProtocolClient(host, port, timeout)
        schema_obj = self._client.request({"type": "get_schema"})
        self.component_id = schema_obj.get("component", f"{host}:{port}")
        self.kind = schema_obj.get("kind", "component")
        self._product = product_from_obj(schema_obj["schema"])
        self.namespace = self._product.product

    def get_schema(self):
        obj = self._client.request({"type": "get_schema"})
        return product_from_obj(obj["schema"])

    def execute(self, q, principal: str = "") -> Table:
        response = self._client.request(
            {
                "type": "exec_query",
                "query": render_query(q),
                "principal": principal,
                "format": "table",
            }
        )
        return table_from_response(response)

    def epoch(self) -> int:
        return int(self._client.request({"type": "epoch"})["epoch"])

    def lineage(self, relation: str) -> LineageNode:
        response = self._client.request({"type": "lineage", "relation": relation})
        return LineageNode.from_obj(response["root"])

    def stats(self) -> dict:
        return self._client.request({"type": "stats"})["counters"]

    def serve_text(self, query_text: str, format_tag: str, principal: str = "") -> dict:
        return self._client.request(
            {
                "type": "exec_query",
                "query": query_text,
                "principal": principal,
                "format": format_tag,
            }
        )

    def materialize(self) -> dict:
        return self._client.request({"type": "materialize"})["report"]

    def close(self) -> None:
        self._client.close()
