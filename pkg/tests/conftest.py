import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import pytest

from aidchain import chain as chain_mod
from aidchain import keys

# deterministic identities used across the suite
ORG_SEED = bytes(range(32))
RECIPIENT_SEED = bytes(range(1, 33))
OUTSIDER_SEED = bytes(range(2, 34))


@pytest.fixture(scope="session")
def org_pair() -> keys.KeyPair:
    return keys.KeyPair.from_seed(ORG_SEED)


@pytest.fixture(scope="session")
def recipient_pair() -> keys.KeyPair:
    return keys.KeyPair.from_seed(RECIPIENT_SEED)


@pytest.fixture(scope="session")
def outsider_pair() -> keys.KeyPair:
    return keys.KeyPair.from_seed(OUTSIDER_SEED)


def authority_pairs(n: int) -> list:
    """Deterministic authority keys for tests: seeds 0xA0+i repeated."""
    return [keys.KeyPair.from_seed(bytes([0xA0 + i]) * 32) for i in range(n)]


def make_params(org_pair: keys.KeyPair, n_authorities: int = 1) -> chain_mod.GenesisParams:
    pairs = authority_pairs(n_authorities)
    return chain_mod.GenesisParams(
        organization_pubkey=org_pair.public_key,
        authorities=tuple((i, p.public_key) for i, p in enumerate(pairs)),
        quorum=chain_mod.quorum_for(n_authorities),
    )


@pytest.fixture
def dev_params(org_pair) -> chain_mod.GenesisParams:
    return make_params(org_pair, 1)
