"""Node service entry point: initialize a data directory, run the server.

Configuration lives in <data>/config.json; flags override it, and
AIDCHAIN_DATA selects the default data directory.
"""

from __future__ import annotations

import json
import sys

import click

from aidchain import keys
from aidchain.api import NodeServer
from aidchain.errors import AidchainError
from aidchain.node import Node

DATA_ENV = "AIDCHAIN_DATA"


@click.group()
def nodectl():
    """Run and manage a ledger node."""


@nodectl.command()
@click.option("--data", envvar=DATA_ENV, required=True,
              type=click.Path(file_okay=False), help="data directory to create")
@click.option("--org-pubkey", help="organization public key, hex")
@click.option("--org-key-file", type=click.Path(exists=True),
              help="key file whose public key becomes the organization")
@click.option("--org-name", default="organization", help="organization display name")
@click.option("--authorities", default=1, show_default=True,
              help="consortium size (1 = dev mode)")
@click.option("--listen", default="127.0.0.1:8545", show_default=True,
              help="host:port for the API server")
def init(data, org_pubkey, org_key_file, org_name, authorities, listen):
    """Create genesis, the actor registry and the authority keys."""
    if bool(org_pubkey) == bool(org_key_file):
        raise click.UsageError("give exactly one of --org-pubkey / --org-key-file")
    if org_key_file:
        with open(org_key_file) as fh:
            org_pubkey = json.load(fh)["public_key"]
    host, _, port = listen.rpartition(":")
    node = Node.initialize(
        data_dir=data,
        organization_pubkey=bytes.fromhex(org_pubkey),
        organization_name=org_name,
        authorities=authorities,
        listen_host=host or "127.0.0.1",
        listen_port=int(port),
    )
    click.echo(f"initialized {data}")
    click.echo(f"mode          {node.config.mode}")
    click.echo(f"organization  {keys.address_to_hex(node.chain.params.organization)}")
    click.echo(f"genesis       {node.chain.tip.hash.hex()}")


@nodectl.command()
@click.option("--data", envvar=DATA_ENV, required=True,
              type=click.Path(exists=True, file_okay=False), help="data directory")
@click.option("--listen", help="host:port override")
def run(data, listen):
    """Serve the HTTP API until interrupted."""
    node = Node.open(data)
    host = port = None
    if listen:
        host, _, port_text = listen.rpartition(":")
        host = host or "127.0.0.1"
        port = int(port_text)
    server = NodeServer(node, host=host, port=port)
    click.echo(f"listening on {server.address} "
               f"(mode={node.config.mode}, height={node.chain.height})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        click.echo("shutting down")
        server.stop()


def main(argv=None) -> int:
    try:
        nodectl.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except AidchainError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
