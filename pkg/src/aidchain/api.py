"""HTTP/JSON API over a running node.

Endpoints (bodies JSON; see wire module for field conventions):

    GET  /v1/health                     liveness, height, pending count
    GET  /v1/actors/{address}           public actor record + next tx nonce
    POST /v1/actors                     register actor (organization-signed)
    POST /v1/txs                        submit signed transaction
    GET  /v1/balances/{address}         signed; own balance, org reads any
    GET  /v1/events?kind=&address=&from=&to=   public audit feed
    GET  /v1/blocks/{height}            public
    GET  /v1/txs/{hash}                 public
    POST /v1/settlements/{address}      settlement export (organization-signed)

Signed requests carry X-AN-Sender / X-AN-Nonce / X-AN-Signature; the
signature covers method, path, nonce and body, and nonces are strictly
increasing per sender.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from aidchain import keys, wire
from aidchain.errors import (
    AidchainError,
    BadNonce,
    BadSignature,
    ContractError,
    DecodeError,
    NotFound,
)
from aidchain.keys import address_to_hex, parse_address
from aidchain.node import Node

_STATUS = {
    "DecodeError": 400,
    "MalformedCall": 400,
    "BadFilter": 400,
    "BadSignature": 401,
    "Unauthorized": 403,
    "Forbidden": 403,
    "NotFound": 404,
    "BadNonce": 409,
    "DuplicateKey": 409,
    "SecondOrganization": 409,
    "NoRegisteredAccount": 422,
    "NoAllowances": 422,
    "MempoolFull": 503,
}


def _status_for(exc: AidchainError) -> int:
    if exc.code in _STATUS:
        return _STATUS[exc.code]
    if isinstance(exc, ContractError):
        return 422
    return 500


class ApiHandler(BaseHTTPRequestHandler):
    node: Node  # bound by serve()

    protocol_version = "HTTP/1.1"

    # -- plumbing -------------------------------------------------------------

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        # the console is served from another origin; auth is per-request
        # signatures, never ambient credentials, so a wildcard is safe
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _error(self, exc: AidchainError) -> None:
        payload = {"error": exc.code, "detail": exc.detail}
        if isinstance(exc, ContractError):
            payload = {"error": "ContractError", "reason": exc.code, "detail": exc.detail}
        if isinstance(exc, BadNonce):
            payload["expected"] = str(exc.expected)
        self._reply(_status_for(exc), payload)

    def _authenticated_sender(self, body: bytes, mutating: bool = True) -> bytes:
        """Verify the request envelope signature; returns the sender address.

        Mutating requests additionally consume a strictly-increasing per-sender
        nonce (replay protection); signed reads only need a valid signature, so
        they never race the counter of an in-flight submission.
        """
        sender_hex = self.headers.get(wire.SENDER_HEADER)
        nonce_raw = self.headers.get(wire.NONCE_HEADER)
        signature_hex = self.headers.get(wire.SIGNATURE_HEADER)
        if not (sender_hex and nonce_raw and signature_hex):
            raise BadSignature("missing signature headers")
        try:
            sender = parse_address(sender_hex)
            nonce = int(nonce_raw)
            signature = bytes.fromhex(signature_hex)
        except ValueError as exc:
            raise BadSignature(f"malformed signature headers: {exc}") from exc
        record = self.node.registry.get(sender)
        if record is None:
            raise BadSignature(f"unknown sender {sender_hex}")
        message = wire.canonical_request_bytes(self.command, self.path, nonce, body)
        keys.verify(record.public_key, message, signature)
        if mutating:
            self.node.check_api_nonce(sender, nonce)
        return sender

    # -- dispatch ----------------------------------------------------------------

    def do_GET(self):  # noqa: N802 - stdlib naming
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")

    def do_OPTIONS(self):  # noqa: N802 - CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header(
            "Access-Control-Allow-Headers",
            f"Content-Type, {wire.SENDER_HEADER}, {wire.NONCE_HEADER}, "
            f"{wire.SIGNATURE_HEADER}",
        )
        self.send_header("Access-Control-Max-Age", "600")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _dispatch(self, method: str) -> None:
        split = urlsplit(self.path)
        route = split.path
        query = {k: v[0] for k, v in parse_qs(split.query).items()}
        body = self._body()
        try:
            handler = self._route(method, route)
            if handler is None:
                raise NotFound(f"no route {method} {route}")
            handler(route, query, body)
        except AidchainError as exc:
            self._error(exc)
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            self._error(DecodeError(str(exc)))

    def _route(self, method: str, route: str):
        table = [
            ("GET", r"^/v1/health$", self._health),
            ("GET", r"^/v1/actors/(0x[0-9a-fA-F]{40})$", self._get_actor),
            ("POST", r"^/v1/actors$", self._register_actor),
            ("POST", r"^/v1/txs$", self._submit_tx),
            ("GET", r"^/v1/balances/(0x[0-9a-fA-F]{40})$", self._balance),
            ("GET", r"^/v1/events$", self._events),
            ("GET", r"^/v1/blocks/(\d+)$", self._block),
            ("GET", r"^/v1/txs/([0-9a-fA-F]{64})$", self._tx),
            ("POST", r"^/v1/settlements/(0x[0-9a-fA-F]{40})$", self._settlement),
        ]
        for verb, pattern, handler in table:
            if verb != method:
                continue
            match = re.match(pattern, route)
            if match:
                self._match = match
                return handler
        return None

    # -- endpoints ------------------------------------------------------------------

    def _health(self, route, query, body):
        self._reply(200, self.node.health())

    def _get_actor(self, route, query, body):
        address = parse_address(self._match.group(1))
        record = self.node.get_actor(address)
        self._reply(200, {
            "address": address_to_hex(record.address),
            "role": record.role,
            "display_name": record.display_name,
            "scheme": record.scheme,
            "public_key": record.public_key.hex(),
            "next_nonce": str(self.node.next_tx_nonce(address)),
        })

    def _register_actor(self, route, query, body):
        caller = self._authenticated_sender(body)
        payload = json.loads(body or b"{}")
        try:
            public_key = bytes.fromhex(payload["public_key"])
            role = payload["role"]
            display_name = payload.get("display_name", "")
        except (KeyError, ValueError) as exc:
            raise DecodeError(f"bad actor payload: {exc}") from exc
        record = self.node.register_actor(caller, public_key, role, display_name)
        self._reply(201, {
            "address": address_to_hex(record.address),
            "role": record.role,
            "display_name": record.display_name,
            "scheme": record.scheme,
        })

    def _submit_tx(self, route, query, body):
        caller = self._authenticated_sender(body)
        tx = wire.tx_from_json(json.loads(body or b"{}"))
        if tx.sender != caller:
            raise BadSignature("transaction sender differs from request sender")
        tx_hash = self.node.submit_transaction(tx)
        self._reply(202, {"tx_hash": tx_hash.hex()})

    def _balance(self, route, query, body):
        caller = self._authenticated_sender(body, mutating=False)
        subject = parse_address(self._match.group(1))
        amount = self.node.query_balance(caller, subject)
        self._reply(200, {
            "address": address_to_hex(subject),
            "amount": str(amount),
            "height": self.node.chain.height,
        })

    def _events(self, route, query, body):
        filters = wire.parse_event_filters(query)
        hits = self.node.query_events(
            kind=filters.get("kind"),
            address=filters.get("address"),
            from_height=filters.get("from_height"),
            to_height=filters.get("to_height"),
        )
        self._reply(200, {"events": [wire.event_to_json(ev, h) for h, ev in hits]})

    def _block(self, route, query, body):
        block = self.node.query_block(int(self._match.group(1)))
        self._reply(200, wire.block_to_json(block))

    def _tx(self, route, query, body):
        tx, height, index = self.node.query_tx(bytes.fromhex(self._match.group(1)))
        self._reply(200, wire.tx_to_json(tx, height=height, index=index))

    def _settlement(self, route, query, body):
        caller = self._authenticated_sender(body)
        recipient = parse_address(self._match.group(1))
        record = self.node.export_settlement(caller, recipient)
        self._reply(200, record.to_json())


class NodeServer:
    """Threaded HTTP server bound to one node; reads stay responsive while
    the commit pipeline works."""

    def __init__(self, node: Node, host: str = None, port: int = None):
        self.node = node
        handler = type("BoundApiHandler", (ApiHandler,), {"node": node})
        self.httpd = ThreadingHTTPServer(
            (host or node.config.listen_host, port if port is not None
             else node.config.listen_port),
            handler,
        )
        self._thread = None

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self.node.start()
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        name="api-server", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        self.node.stop()

    def serve_forever(self) -> None:
        self.node.start()
        try:
            self.httpd.serve_forever()
        finally:
            self.node.stop()
