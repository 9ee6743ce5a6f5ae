"""Administrative command-line client.

Every networked command maps onto one node API endpoint; chain-verify and
simulate run offline. Exit codes: 0 success, 1 usage error, 2 node/API
error, 3 verification failure.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import click

from aidchain import consensus, keys
from aidchain.chain import Chain, GenesisParams, decode_block
from aidchain.client import ApiClient, ApiError
from aidchain.errors import AidchainError, ConfigInvalid, LedgerError, UnreadableLocation
from aidchain.store import ChainStore

PROFILE_ENV = "AIDCHAIN_PROFILE"
DEFAULT_NODE = "http://127.0.0.1:8545"


class VerificationFailure(AidchainError):
    code = "VerificationFailure"


@dataclass
class Profile:
    node: str = DEFAULT_NODE
    key: Optional[str] = None
    json_output: bool = False

    _pair: Optional[keys.KeyPair] = None

    def client(self, need_key: bool = False) -> ApiClient:
        return ApiClient(self.node, self.keypair() if (need_key or self.key) else None)

    def keypair(self) -> keys.KeyPair:
        if self._pair is None:
            if not self.key:
                raise click.UsageError("this command needs a key file (--key or profile)")
            self._pair = keys.load_key_file(self.key)
        return self._pair

    def emit(self, payload, table_lines) -> None:
        """JSON document or human table, per profile."""
        if self.json_output:
            click.echo(json.dumps(payload, indent=2, sort_keys=True))
        else:
            for line in table_lines:
                click.echo(line)


def load_profile(node, key, json_output, profile_path) -> Profile:
    profile = Profile()
    path = profile_path or os.environ.get(PROFILE_ENV)
    if path and os.path.exists(path):
        with open(path) as fh:
            stored = json.load(fh)
        profile.node = stored.get("node", profile.node)
        profile.key = stored.get("key", profile.key)
        profile.json_output = stored.get("json", profile.json_output)
    if node:
        profile.node = node
    if key:
        profile.key = key
    if json_output:
        profile.json_output = True
    return profile


def kv_lines(payload: dict) -> list:
    width = max((len(k) for k in payload), default=0)
    return [f"{k.ljust(width)}  {v}" for k, v in payload.items()]


@click.group()
@click.option("--node", help=f"node URL (default {DEFAULT_NODE})")
@click.option("--key", help="key file for signing")
@click.option("--json", "json_output", is_flag=True, help="machine-readable output")
@click.option("--profile", "profile_path", help=f"profile file (or ${PROFILE_ENV})")
@click.pass_context
def cli(ctx, node, key, json_output, profile_path):
    """Admin client for the allowance-distribution ledger."""
    ctx.obj = load_profile(node, key, json_output, profile_path)


# ---- keys ---------------------------------------------------------------------


@cli.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="key file to write")
@click.option("--name", default="", help="display name stored alongside the key")
@click.pass_obj
def keygen(profile: Profile, out, name):
    """Generate a signing key pair into a 0600 key file."""
    pair = keys.KeyPair.generate()
    keys.save_key_file(out, pair, display_name=name)
    payload = {
        "address": keys.address_to_hex(pair.address),
        "public_key": pair.public_key.hex(),
        "key_file": out,
    }
    profile.emit(payload, kv_lines(payload))


# ---- actors ----------------------------------------------------------------------


@cli.command("actor-register")
@click.option("--pubkey", help="raw public key, hex")
@click.option("--pubkey-file", type=click.Path(exists=True),
              help="key file whose public key to register")
@click.option("--role", type=click.Choice(["recipient", "observer"]), required=True)
@click.option("--name", default="", help="display name")
@click.pass_obj
def actor_register(profile: Profile, pubkey, pubkey_file, role, name):
    """Register an actor record (organization-signed)."""
    if bool(pubkey) == bool(pubkey_file):
        raise click.UsageError("give exactly one of --pubkey / --pubkey-file")
    if pubkey_file:
        with open(pubkey_file) as fh:
            pubkey = json.load(fh)["public_key"]
    record = profile.client(need_key=True).register_actor(pubkey, role, name)
    profile.emit(record, kv_lines(record))


# ---- recipient management -----------------------------------------------------------


@cli.group()
def recipient():
    """Authorize or deauthorize allowance recipients."""


@recipient.command("add")
@click.argument("address")
@click.pass_obj
def recipient_add(profile: Profile, address):
    from aidchain.contract import CallKind, ContractCall

    call = ContractCall(kind=CallKind.ADD_RECIPIENT, recipient=keys.parse_address(address))
    tx_hash = profile.client(need_key=True).submit_call(call)
    profile.emit({"tx_hash": tx_hash}, [f"tx_hash  {tx_hash}"])


@recipient.command("remove")
@click.argument("address")
@click.pass_obj
def recipient_remove(profile: Profile, address):
    from aidchain.contract import CallKind, ContractCall

    call = ContractCall(kind=CallKind.REMOVE_RECIPIENT, recipient=keys.parse_address(address))
    tx_hash = profile.client(need_key=True).submit_call(call)
    profile.emit({"tx_hash": tx_hash}, [f"tx_hash  {tx_hash}"])


# ---- funds and allowances -------------------------------------------------------------


@cli.group()
def funds():
    """Organization treasury operations."""


@funds.command("add")
@click.argument("amount", type=int)
@click.pass_obj
def funds_add(profile: Profile, amount):
    from aidchain.contract import CallKind, ContractCall

    call = ContractCall(kind=CallKind.ADD_FUNDS, amount=amount)
    tx_hash = profile.client(need_key=True).submit_call(call)
    profile.emit({"tx_hash": tx_hash}, [f"tx_hash  {tx_hash}"])


@cli.group()
def allowance():
    """Disbursements to recipients."""


@allowance.command("send")
@click.option("--to", "to_address", required=True, help="recipient address")
@click.option("--amount", type=int, required=True)
@click.pass_obj
def allowance_send(profile: Profile, to_address, amount):
    from aidchain.contract import CallKind, ContractCall

    call = ContractCall(kind=CallKind.SEND_ALLOWANCE,
                        recipient=keys.parse_address(to_address), amount=amount)
    tx_hash = profile.client(need_key=True).submit_call(call)
    profile.emit({"tx_hash": tx_hash}, [f"tx_hash  {tx_hash}"])


@cli.group("bank-account")
def bank_account():
    """Bank-account commitments; only the digest is stored on-chain."""


@bank_account.command("register")
@click.option("--to", "to_address", required=True, help="recipient address")
@click.option("--account", help="plaintext account; prompted securely when omitted")
@click.pass_obj
def bank_account_register(profile: Profile, to_address, account):
    from aidchain.contract import CallKind, ContractCall

    if account is None:
        account = click.prompt("bank account", hide_input=True)
    call = ContractCall(kind=CallKind.REGISTER_BANK_ACCOUNT,
                        recipient=keys.parse_address(to_address), account=account)
    tx_hash = profile.client(need_key=True).submit_call(call)
    profile.emit({"tx_hash": tx_hash}, [f"tx_hash  {tx_hash}"])


# ---- reads ------------------------------------------------------------------------------


@cli.command()
@click.argument("address", required=False)
@click.pass_obj
def balance(profile: Profile, address):
    """Balance of ADDRESS (default: your own)."""
    if address is None:
        address = keys.address_to_hex(profile.keypair().address)
    payload = profile.client(need_key=True).balance(address)
    profile.emit(payload, kv_lines(payload))


@cli.command()
@click.option("--kind", type=click.Choice(
    ["AllowanceSent", "FundsAdded", "BankAccountRegistered"]))
@click.option("--address", help="only events concerning this address")
@click.option("--from-height", type=int)
@click.option("--to-height", type=int)
@click.pass_obj
def events(profile: Profile, kind, address, from_height, to_height):
    """Audit feed from committed blocks, in chain order."""
    hits = profile.client().events(kind=kind, address=address,
                                   from_height=from_height, to_height=to_height)
    lines = [f"{e['height']:>6}  {e['kind']:<22} subject={e['subject']} "
             f"amount={e['amount']} tx={e['tx_hash'][:16]}" for e in hits]
    profile.emit({"events": hits}, lines or ["(no events)"])


@cli.command()
@click.argument("height", type=int)
@click.pass_obj
def block(profile: Profile, height):
    """Committed block at HEIGHT."""
    payload = profile.client().block(height)
    lines = kv_lines({k: payload[k] for k in
                      ("height", "hash", "parent_hash", "proposer", "state_root")})
    lines.append(f"transactions  {len(payload['transactions'])}")
    lines.append(f"votes         {len(payload['votes'])}")
    profile.emit(payload, lines)


@cli.command()
@click.argument("tx_hash")
@click.pass_obj
def tx(profile: Profile, tx_hash):
    """Committed transaction by hash, with inclusion metadata."""
    payload = profile.client().tx(tx_hash)
    flat = {
        "hash": payload["hash"],
        "sender": payload["sender"],
        "nonce": payload["nonce"],
        "call": payload["call"]["kind"],
        "height": payload["height"],
        "index": payload["index"],
    }
    profile.emit(payload, kv_lines(flat))


@cli.command("settle-export")
@click.argument("address")
@click.pass_obj
def settle_export(profile: Profile, address):
    """Export an off-chain settlement instruction for ADDRESS."""
    payload = profile.client(need_key=True).settle(address)
    lines = kv_lines({
        "recipient": payload["recipient"],
        "account_digest": payload["account_digest"],
        "total_amount": payload["total_amount"],
        "height": payload["height"],
    })
    lines.extend(f"tx  {h}" for h in payload["tx_hashes"])
    profile.emit(payload, lines)


# ---- offline commands ---------------------------------------------------------------------


@cli.command("chain-verify")
@click.option("--store", "store_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="chain store file")
@click.pass_obj
def chain_verify(profile: Profile, store_path):
    """Offline audit: strict load, full replay, every check enabled."""
    try:
        loaded = ChainStore(store_path).load(strict=True)
        params = GenesisParams.decode(loaded.genesis_params)
        blocks = [decode_block(p) for p in loaded.block_payloads]
        chain = Chain(params, blocks)
        result = chain.verify()
    except LedgerError as exc:
        raise VerificationFailure(str(exc)) from exc
    from aidchain.chain import state_root_of

    payload = {
        "store": store_path,
        "height": chain.height,
        "blocks": len(chain.blocks),
        "state_root": state_root_of(result.state).hex(),
        "events": len(result.events),
    }
    profile.emit(payload, kv_lines(payload))


@cli.command()
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace/--no-trace", default=True, help="print the full event trace")
@click.pass_obj
def simulate(profile: Profile, scenario_file, trace):
    """Run a consortium fault scenario and check safety."""
    with open(scenario_file) as fh:
        scenario = consensus.parse_scenario(fh.read())
    result = scenario.run()
    violation = consensus.check_safety(result)
    if profile.json_output:
        payload = {
            "final_heights": result.final_heights,
            "safety": "ok" if violation is None else {
                "height": violation.height, "nodes": violation.nodes},
            "rounds": len(result.outcomes),
            "trace": result.lines if trace else None,
        }
        click.echo(json.dumps(payload, indent=2))
    else:
        if trace:
            click.echo(result.render(), nl=False)
        click.echo(f"rounds={len(result.outcomes)} "
                   f"heights={sorted(set(result.final_heights.values()))}")
        click.echo("safety=ok" if violation is None
                   else f"safety=VIOLATION height={violation.height} nodes={violation.nodes}")
    if violation is not None:
        raise VerificationFailure(f"fork at height {violation.height}")


# ---- entry point ------------------------------------------------------------------------------


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except VerificationFailure as exc:
        click.echo(f"verification failed: {exc.detail}", err=True)
        return 3
    except (ConfigInvalid, UnreadableLocation) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ApiError as exc:
        click.echo(f"node error: {exc}", err=True)
        return 2
    except AidchainError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
