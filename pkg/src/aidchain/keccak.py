"""Keccak-256 with backend selection.

Prefers the compiled kernel when the extension was built; falls back to the
pure-Python implementation. Set AIDCHAIN_KECCAK=pure to force the fallback
(used by the differential tests and the benchmark).
"""

import os

from aidchain import _keccak_py

if os.environ.get("AIDCHAIN_KECCAK") == "pure":
    _impl = _keccak_py
    BACKEND = "pure-python"
else:
    try:
        from aidchain import _keccak_c as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _keccak_py
        BACKEND = "pure-python"

keccak256 = _impl.keccak256

EMPTY_DIGEST = keccak256(b"")
ZERO_DIGEST = b"\x00" * 32
