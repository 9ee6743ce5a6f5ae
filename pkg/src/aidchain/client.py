"""HTTP client for the node API, with request signing and nonce recovery.

Request-envelope nonces use a monotonic clock so independent CLI invocations
stay fresh; transaction nonces are fetched from the node and refetched once
on a BadNonce reply (stale local view), then the call is re-signed.
"""

from __future__ import annotations

import json
import time
from typing import Optional

import requests

from aidchain import wire
from aidchain.chain import Transaction
from aidchain.contract import ContractCall
from aidchain.errors import AidchainError
from aidchain.keys import KeyPair, address_to_hex


class ApiError(AidchainError):
    """Error reply from the node, or transport failure talking to it."""

    code = "ApiError"

    def __init__(self, status: int, payload: dict):
        self.status = status
        self.payload = payload
        self.remote_code = payload.get("error", "ApiError")
        reason = payload.get("reason")
        detail = payload.get("detail", "")
        label = f"{self.remote_code}({reason})" if reason else self.remote_code
        super().__init__(f"{label}: {detail}" if detail else label)


class ApiClient:
    def __init__(self, base_url: str, pair: Optional[KeyPair] = None,
                 timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.pair = pair
        self.timeout = timeout
        self.session = requests.Session()

    # -- low level ------------------------------------------------------------

    def _request(self, method: str, path: str, payload: Optional[dict] = None,
                 signed: bool = False) -> dict:
        body = json.dumps(payload).encode("utf-8") if payload is not None else b""
        headers = {"Content-Type": "application/json"} if body else {}
        if signed:
            if self.pair is None:
                raise ApiError(0, {"error": "NoKey",
                                   "detail": "this operation requires a key file"})
            nonce = time.time_ns()
            message = wire.canonical_request_bytes(method, path, nonce, body)
            headers[wire.SENDER_HEADER] = address_to_hex(self.pair.address)
            headers[wire.NONCE_HEADER] = str(nonce)
            headers[wire.SIGNATURE_HEADER] = self.pair.sign(message).hex()
        try:
            response = self.session.request(method, self.base_url + path,
                                            data=body or None, headers=headers,
                                            timeout=self.timeout)
        except requests.RequestException as exc:
            raise ApiError(0, {"error": "Unreachable", "detail": str(exc)}) from exc
        try:
            parsed = response.json() if response.content else {}
        except ValueError:
            parsed = {"error": "BadResponse", "detail": response.text[:200]}
        if response.status_code >= 400:
            raise ApiError(response.status_code, parsed)
        return parsed

    # -- endpoints ---------------------------------------------------------------

    def health(self) -> dict:
        return self._request("GET", "/v1/health")

    def get_actor(self, address: str) -> dict:
        return self._request("GET", f"/v1/actors/{address}")

    def register_actor(self, public_key_hex: str, role: str, display_name: str) -> dict:
        return self._request("POST", "/v1/actors", {
            "public_key": public_key_hex,
            "role": role,
            "display_name": display_name,
        }, signed=True)

    def balance(self, address: str) -> dict:
        return self._request("GET", f"/v1/balances/{address}", signed=True)

    def events(self, kind: Optional[str] = None, address: Optional[str] = None,
               from_height: Optional[int] = None, to_height: Optional[int] = None) -> list:
        params = []
        if kind:
            params.append(f"kind={kind}")
        if address:
            params.append(f"address={address}")
        if from_height is not None:
            params.append(f"from={from_height}")
        if to_height is not None:
            params.append(f"to={to_height}")
        query = "?" + "&".join(params) if params else ""
        return self._request("GET", f"/v1/events{query}")["events"]

    def block(self, height: int) -> dict:
        return self._request("GET", f"/v1/blocks/{height}")

    def tx(self, tx_hash: str) -> dict:
        return self._request("GET", f"/v1/txs/{tx_hash}")

    def settle(self, recipient: str) -> dict:
        return self._request("POST", f"/v1/settlements/{recipient}", {}, signed=True)

    # -- transactions ---------------------------------------------------------------

    def next_nonce(self) -> int:
        record = self.get_actor(address_to_hex(self.pair.address))
        return int(record["next_nonce"])

    def submit_call(self, call: ContractCall, nonce: Optional[int] = None) -> str:
        """Sign and submit; one automatic retry with a fresh nonce."""
        if self.pair is None:
            raise ApiError(0, {"error": "NoKey",
                               "detail": "submitting transactions requires a key file"})
        if nonce is None:
            nonce = self.next_nonce()
        tx = Transaction.create(self.pair, nonce, call)
        try:
            return self._submit(tx)
        except ApiError as exc:
            if exc.remote_code != "BadNonce":
                raise
            fresh = int(exc.payload.get("expected", self.next_nonce()))
            return self._submit(Transaction.create(self.pair, fresh, call))

    def _submit(self, tx: Transaction) -> str:
        return self._request("POST", "/v1/txs", wire.tx_to_json(tx), signed=True)["tx_hash"]

    def wait_committed(self, tx_hash: str, attempts: int = 100,
                       interval: float = 0.05) -> dict:
        """Poll /v1/txs/{hash} until the transaction lands in a block."""
        last: Optional[ApiError] = None
        for _ in range(attempts):
            try:
                return self.tx(tx_hash)
            except ApiError as exc:
                if exc.status != 404:
                    raise
                last = exc
            time.sleep(interval)
        raise last
