"""CLI: command surface, exit codes, JSON contract, offline verification."""

import json
import os

import pytest

from aidchain import keys
from aidchain.api import NodeServer
from aidchain.cli import main
from aidchain.node import Node


@pytest.fixture
def org_key_file(tmp_path, org_pair):
    path = tmp_path / "org.key"
    keys.save_key_file(str(path), org_pair, display_name="org")
    return str(path)


@pytest.fixture
def recipient_key_file(tmp_path, recipient_pair):
    path = tmp_path / "alice.key"
    keys.save_key_file(str(path), recipient_pair, display_name="alice")
    return str(path)


@pytest.fixture
def server(tmp_path, org_pair):
    node = Node.initialize(str(tmp_path / "node"), org_pair.public_key, "org")
    node.config.commit_interval = 0.01
    srv = NodeServer(node, host="127.0.0.1", port=0)
    srv.start()
    yield srv
    srv.stop()


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *args):
    code, out, err = run_cli(capsys, "--json", *args)
    assert code == 0, err
    return json.loads(out)  # must parse as a single document


# ---- keygen ------------------------------------------------------------------


def test_keygen_writes_0600_key(tmp_path, capsys):
    out_path = tmp_path / "new.key"
    payload = run_json(capsys, "keygen", "--out", str(out_path), "--name", "tester")
    assert payload["address"].startswith("0x")
    assert oct(os.stat(out_path).st_mode & 0o777) == "0o600"
    pair = keys.load_key_file(str(out_path))
    assert keys.address_to_hex(pair.address) == payload["address"]


def test_loose_key_permissions_rejected(tmp_path, capsys, server, org_key_file):
    os.chmod(org_key_file, 0o644)
    code, out, err = run_cli(capsys, "--node", server.address, "--key", org_key_file,
                             "funds", "add", "10")
    assert code == 1
    assert "chmod" in err


# ---- usage errors ----------------------------------------------------------------


def test_unknown_command_is_usage_error(capsys):
    code, out, err = run_cli(capsys, "frobnicate")
    assert code == 1


def test_mutating_command_without_key_is_usage_error(capsys, server):
    code, out, err = run_cli(capsys, "--node", server.address, "funds", "add", "5")
    assert code == 1
    assert "key" in err.lower()


def test_node_unreachable_is_api_error(capsys, org_key_file):
    code, out, err = run_cli(capsys, "--node", "http://127.0.0.1:1", "--key",
                             org_key_file, "balance")
    assert code == 2


# ---- end-to-end admin flow ----------------------------------------------------------


def test_full_admin_flow(capsys, server, org_key_file, recipient_key_file,
                         recipient_pair, org_pair):
    node_args = ("--node", server.address)
    org = node_args + ("--key", org_key_file)
    alice_hex = keys.address_to_hex(recipient_pair.address)

    record = run_json(capsys, *org, "actor-register", "--pubkey-file",
                      recipient_key_file, "--role", "recipient", "--name", "alice")
    assert record["address"] == alice_hex

    run_json(capsys, *org, "funds", "add", "1000")
    run_json(capsys, *org, "recipient", "add", alice_hex)
    sent = run_json(capsys, *org, "allowance", "send", "--to", alice_hex,
                    "--amount", "30")
    assert len(sent["tx_hash"]) == 64

    import time

    deadline = time.time() + 5
    while time.time() < deadline:
        code, out, _ = run_cli(capsys, "--json", *node_args, "--key",
                               recipient_key_file, "balance")
        payload = json.loads(out)
        if payload.get("amount") == "30":
            break
        time.sleep(0.05)
    else:
        raise AssertionError("allowance never showed in recipient balance")

    run_json(capsys, *org, "allowance", "send", "--to", alice_hex, "--amount", "20")
    run_json(capsys, *org, "bank-account", "register", "--to", alice_hex,
             "--account", "IBAN-TEST-0001")
    time.sleep(0.3)  # let the pipeline drain

    settlement = run_json(capsys, *org, "settle-export", alice_hex)
    assert settlement["total_amount"] == "50"
    assert len(settlement["tx_hashes"]) == 2

    events = run_json(capsys, *node_args, "events")["events"]
    assert [e["kind"] for e in events] == [
        "FundsAdded", "AllowanceSent", "AllowanceSent", "BankAccountRegistered"]

    block_payload = run_json(capsys, *node_args, "block", "1")
    assert block_payload["height"] == 1
    tx_payload = run_json(capsys, *node_args, "tx", sent["tx_hash"])
    assert tx_payload["call"]["kind"] == "send_allowance"
    assert tx_payload["height"] >= 1

    # human-readable (non-JSON) table also works
    code, out, err = run_cli(capsys, *node_args, "events")
    assert code == 0
    assert "AllowanceSent" in out


# ---- offline chain verification ---------------------------------------------------------


@pytest.fixture
def store_path(tmp_path, org_pair, recipient_pair):
    from aidchain.chain import Transaction
    from aidchain.contract import CallKind, ContractCall

    node = Node.initialize(str(tmp_path / "offline"), org_pair.public_key, "org")
    nonce = 0
    for amount in (100, 200, 300):
        node.submit_transaction(Transaction.create(
            org_pair, nonce, ContractCall(kind=CallKind.ADD_FUNDS, amount=amount)))
        nonce += 1
        node.commit_pending()
    return node.config.path("chain.dat")


def test_chain_verify_pristine(capsys, store_path):
    payload = run_json(capsys, "chain-verify", "--store", store_path)
    assert payload["height"] == 3
    assert len(payload["state_root"]) == 64


def test_chain_verify_detects_flip(capsys, store_path):
    data = bytearray(open(store_path, "rb").read())
    data[len(data) // 2] ^= 0x01
    with open(store_path, "wb") as fh:
        fh.write(data)
    code, out, err = run_cli(capsys, "chain-verify", "--store", store_path)
    assert code == 3
    assert "verification failed" in err


def test_chain_verify_missing_store_usage_error(capsys, tmp_path):
    code, out, err = run_cli(capsys, "chain-verify", "--store",
                             str(tmp_path / "missing.dat"))
    assert code == 1


# ---- simulate --------------------------------------------------------------------------


def test_simulate_scenario(capsys, tmp_path):
    scenario = tmp_path / "crash.scn"
    scenario.write_text(
        "authorities 4\nseed 11\nmax_rounds 10\nworkload 5\n"
        "fault 1 crash rounds 1-2\n")
    code, out, err = run_cli(capsys, "simulate", str(scenario))
    assert code == 0
    assert "safety=ok" in out
    assert "committed_height=" in out


def test_simulate_json_is_single_document(capsys, tmp_path):
    scenario = tmp_path / "clean.scn"
    scenario.write_text("authorities 4\nseed 3\nmax_rounds 8\nworkload 4\n")
    payload = run_json(capsys, "simulate", str(scenario))
    assert payload["safety"] == "ok"
    assert set(payload["final_heights"]) == {"0", "1", "2", "3"} or \
        set(payload["final_heights"]) == {0, 1, 2, 3}


def test_simulate_bad_scenario_usage_error(capsys, tmp_path):
    scenario = tmp_path / "bad.scn"
    scenario.write_text("authorities 4\nfault 9 crash rounds 0-1\n")
    code, out, err = run_cli(capsys, "simulate", str(scenario))
    assert code == 1


# ---- profile file -------------------------------------------------------------------------


def test_profile_from_env(capsys, tmp_path, server, org_key_file, monkeypatch):
    profile = tmp_path / "profile.json"
    profile.write_text(json.dumps({"node": server.address, "key": org_key_file,
                                   "json": True}))
    monkeypatch.setenv("AIDCHAIN_PROFILE", str(profile))
    code, out, err = run_cli(capsys, "balance")
    assert code == 0
    assert json.loads(out)["amount"] == "0"
