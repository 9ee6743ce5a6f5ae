"""HTTP API: auth, endpoints, error mapping, end-to-end over a real socket."""

import json
import time

import pytest
import requests

from aidchain import wire
from aidchain.api import NodeServer
from aidchain.client import ApiClient, ApiError
from aidchain.contract import CallKind, ContractCall
from aidchain.keys import address_to_hex
from aidchain.node import Node


@pytest.fixture
def server(tmp_path, org_pair):
    node = Node.initialize(str(tmp_path / "node"), org_pair.public_key, "org")
    node.config.commit_interval = 0.01
    srv = NodeServer(node, host="127.0.0.1", port=0)  # ephemeral port
    srv.start()
    yield srv
    srv.stop()


@pytest.fixture
def org_client(server, org_pair):
    return ApiClient(server.address, org_pair)


@pytest.fixture
def recipient_client(server, recipient_pair):
    return ApiClient(server.address, recipient_pair)


def wait_height(client, height, attempts=200):
    for _ in range(attempts):
        if int(client.health()["height"]) >= height:
            return
        time.sleep(0.01)
    raise AssertionError(f"height {height} never reached")


# ---- health and public reads -------------------------------------------------


def test_health(server):
    payload = requests.get(server.address + "/v1/health", timeout=5).json()
    assert payload["status"] == "ok"
    assert payload["height"] == 0
    assert payload["pending"] == 0
    assert payload["mode"] == "dev"


def test_genesis_block_public(server):
    payload = requests.get(server.address + "/v1/blocks/0", timeout=5).json()
    assert payload["height"] == 0
    assert payload["parent_hash"] == "00" * 32
    assert payload["transactions"] == []


def test_unknown_routes_404(server):
    assert requests.get(server.address + "/v1/nope", timeout=5).status_code == 404
    assert requests.get(server.address + "/v1/blocks/99", timeout=5).status_code == 404
    missing = "ab" * 32
    assert requests.get(server.address + f"/v1/txs/{missing}", timeout=5).status_code == 404


def test_events_empty(org_client):
    assert org_client.events() == []


def test_bad_event_filter(server):
    response = requests.get(server.address + "/v1/events?kind=Bogus", timeout=5)
    assert response.status_code == 400
    assert response.json()["error"] == "BadFilter"


# ---- request authentication -----------------------------------------------------


def test_mutating_request_requires_signature(server, org_pair):
    body = json.dumps({"public_key": "ab" * 32, "role": "recipient",
                       "display_name": "x"}).encode()
    response = requests.post(server.address + "/v1/actors", data=body, timeout=5)
    assert response.status_code == 401
    assert response.json()["error"] == "BadSignature"


def test_forged_signature_rejected(server, org_pair, recipient_pair):
    path = "/v1/actors"
    body = json.dumps({"public_key": recipient_pair.public_key.hex(),
                       "role": "recipient", "display_name": "x"}).encode()
    nonce = time.time_ns()
    message = wire.canonical_request_bytes("POST", path, nonce, body)
    headers = {
        wire.SENDER_HEADER: address_to_hex(org_pair.address),
        wire.NONCE_HEADER: str(nonce),
        # signed by the wrong key
        wire.SIGNATURE_HEADER: recipient_pair.sign(message).hex(),
    }
    response = requests.post(server.address + path, data=body, headers=headers, timeout=5)
    assert response.status_code == 401


def test_replayed_request_rejected(server, org_pair, recipient_pair):
    path = "/v1/actors"
    body = json.dumps({"public_key": recipient_pair.public_key.hex(),
                       "role": "recipient", "display_name": "x"}).encode()
    nonce = time.time_ns()
    message = wire.canonical_request_bytes("POST", path, nonce, body)
    headers = {
        wire.SENDER_HEADER: address_to_hex(org_pair.address),
        wire.NONCE_HEADER: str(nonce),
        wire.SIGNATURE_HEADER: org_pair.sign(message).hex(),
    }
    first = requests.post(server.address + path, data=body, headers=headers, timeout=5)
    assert first.status_code == 201
    replay = requests.post(server.address + path, data=body, headers=headers, timeout=5)
    assert replay.status_code == 409
    assert replay.json()["error"] == "BadNonce"


def test_tampered_body_rejected(server, org_pair, recipient_pair):
    path = "/v1/actors"
    body = json.dumps({"public_key": recipient_pair.public_key.hex(),
                       "role": "recipient", "display_name": "x"}).encode()
    nonce = time.time_ns()
    message = wire.canonical_request_bytes("POST", path, nonce, body)
    headers = {
        wire.SENDER_HEADER: address_to_hex(org_pair.address),
        wire.NONCE_HEADER: str(nonce),
        wire.SIGNATURE_HEADER: org_pair.sign(message).hex(),
    }
    tampered = body.replace(b"recipient", b"organizat")
    response = requests.post(server.address + path, data=tampered, headers=headers,
                             timeout=5)
    assert response.status_code == 401


# ---- actor registration -----------------------------------------------------------


def test_register_and_fetch_actor(org_client, recipient_pair, server):
    record = org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    assert record["address"] == address_to_hex(recipient_pair.address)
    fetched = org_client.get_actor(record["address"])
    assert fetched["display_name"] == "alice"
    assert fetched["next_nonce"] == "0"
    assert fetched["scheme"] == "ed25519"


def test_register_requires_organization(recipient_client, org_client,
                                        recipient_pair, outsider_pair):
    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    with pytest.raises(ApiError) as err:
        recipient_client.register_actor(outsider_pair.public_key.hex(), "recipient", "eve")
    assert err.value.status == 403


# ---- transactions end to end ----------------------------------------------------------


def test_submit_and_commit_flow(org_client, recipient_client, org_pair, recipient_pair):
    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    tx_hash = org_client.submit_call(ContractCall(kind=CallKind.ADD_FUNDS, amount=1000))
    committed = org_client.wait_committed(tx_hash)
    assert committed["height"] >= 1
    org_client.submit_call(ContractCall(kind=CallKind.ADD_RECIPIENT,
                                        recipient=recipient_pair.address))
    tx2 = org_client.submit_call(ContractCall(kind=CallKind.SEND_ALLOWANCE,
                                              recipient=recipient_pair.address, amount=30))
    org_client.wait_committed(tx2)
    balance = recipient_client.balance(address_to_hex(recipient_pair.address))
    assert balance["amount"] == "30"


def test_contract_error_surfaced(org_client, org_pair):
    with pytest.raises(ApiError) as err:
        org_client.submit_call(ContractCall(kind=CallKind.SEND_ALLOWANCE,
                                            recipient=bytes(20), amount=5))
    assert err.value.status == 422
    assert err.value.payload["error"] == "ContractError"
    assert err.value.payload["reason"] == "NotARecipient"


def test_recipient_cannot_mutate(org_client, recipient_client, recipient_pair):
    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    with pytest.raises(ApiError) as err:
        recipient_client.submit_call(ContractCall(kind=CallKind.ADD_RECIPIENT,
                                                  recipient=recipient_pair.address))
    assert err.value.payload.get("reason") == "Unauthorized"


def test_stale_nonce_recovers(org_client, org_pair):
    h1 = org_client.submit_call(ContractCall(kind=CallKind.ADD_FUNDS, amount=1))
    org_client.wait_committed(h1)
    # deliberately stale: client refetches from the BadNonce reply and retries
    h2 = org_client.submit_call(ContractCall(kind=CallKind.ADD_FUNDS, amount=2), nonce=0)
    assert org_client.wait_committed(h2)["height"] >= 1


def test_tx_sender_must_match_envelope(server, org_client, org_pair, recipient_pair):
    from aidchain.chain import Transaction

    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    tx = Transaction.create(recipient_pair, 0,
                            ContractCall(kind=CallKind.ADD_FUNDS, amount=5))
    with pytest.raises(ApiError) as err:
        org_client._submit(tx)  # envelope signed by org, tx by recipient
    assert err.value.status == 401


# ---- balance visibility ------------------------------------------------------------------


def test_balance_visibility_rules(org_client, recipient_client, org_pair, recipient_pair):
    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    own = recipient_client.balance(address_to_hex(recipient_pair.address))
    assert own["amount"] == "0"
    with pytest.raises(ApiError) as err:
        recipient_client.balance(address_to_hex(org_pair.address))
    assert err.value.status == 403
    assert org_client.balance(address_to_hex(recipient_pair.address))["amount"] == "0"


def test_balance_requires_signature(server, org_pair):
    response = requests.get(
        server.address + f"/v1/balances/{address_to_hex(org_pair.address)}", timeout=5)
    assert response.status_code == 401


# ---- events and settlement over HTTP ---------------------------------------------------


def test_event_feed_and_settlement(org_client, recipient_pair, org_pair):
    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    recipient_hex = address_to_hex(recipient_pair.address)
    org_client.submit_call(ContractCall(kind=CallKind.ADD_FUNDS, amount=1000))
    org_client.submit_call(ContractCall(kind=CallKind.ADD_RECIPIENT,
                                        recipient=recipient_pair.address))
    org_client.submit_call(ContractCall(kind=CallKind.SEND_ALLOWANCE,
                                        recipient=recipient_pair.address, amount=30))
    org_client.submit_call(ContractCall(kind=CallKind.SEND_ALLOWANCE,
                                        recipient=recipient_pair.address, amount=20))
    last = org_client.submit_call(ContractCall(kind=CallKind.REGISTER_BANK_ACCOUNT,
                                               recipient=recipient_pair.address,
                                               account="IBAN-TEST-0001"))
    org_client.wait_committed(last)

    events = org_client.events()
    assert [e["kind"] for e in events] == [
        "FundsAdded", "AllowanceSent", "AllowanceSent", "BankAccountRegistered"]
    assert org_client.events(kind="AllowanceSent", address=recipient_hex)
    assert [e["amount"] for e in org_client.events(kind="AllowanceSent")] == ["30", "20"]

    settlement = org_client.settle(recipient_hex)
    assert settlement["total_amount"] == "50"
    assert len(settlement["tx_hashes"]) == 2
    assert settlement["account_digest"] == (
        "46b730bbb164ead60c713670c2420592308472346a353c6a93891f8df55a813a")
    # state, events and settlements carry only the digest (tx calldata is the
    # one openly recorded place the plaintext exists, as on any open chain)
    blob = json.dumps([org_client.events(), settlement,
                       org_client.balance(recipient_hex)])
    assert "IBAN-TEST-0001" not in blob


def test_settlement_requires_organization(org_client, recipient_client,
                                          recipient_pair):
    org_client.register_actor(recipient_pair.public_key.hex(), "recipient", "alice")
    with pytest.raises(ApiError) as err:
        recipient_client.settle(address_to_hex(recipient_pair.address))
    assert err.value.status == 403


def test_reads_responsive_while_pipeline_runs(org_client):
    for i in range(20):
        org_client.submit_call(ContractCall(kind=CallKind.ADD_FUNDS, amount=1 + i))
    # health and block queries answer while commits are in flight
    assert org_client.health()["status"] == "ok"
    assert org_client.block(0)["height"] == 0
    wait_height(org_client, 1)
