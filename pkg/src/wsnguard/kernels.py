"""Kernel backend selection.

The compiled extension is preferred; set ``WSNGUARD_PURE=1`` to force the
pure-Python fallback (the test-suite runs both and checks they agree).
"""
from __future__ import annotations

import os

from . import _purecore

if os.environ.get("WSNGUARD_PURE", "") not in ("", "0"):
    _impl = _purecore
else:
    try:
        from . import _fastcore as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _purecore

BACKEND = "cython" if _impl is not _purecore else "python"

MASK64 = _purecore.MASK64
GOLDEN = _purecore.GOLDEN
FNV_OFFSET = _purecore.FNV_OFFSET
FNV_PRIME = _purecore.FNV_PRIME

mix64 = _impl.mix64
splitmix_next = _impl.splitmix_next
prf64 = _impl.prf64
crc32 = _impl.crc32
fnv1a64 = _impl.fnv1a64
keystream_xor = _impl.keystream_xor
