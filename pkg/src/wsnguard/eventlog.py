"""Append-only event log with a rolling FNV-1a-64 digest.

Records are ``(time, kind, fields)`` where ``fields`` is a tuple of ints and
floats. The canonical encoding of one record is::

    u64 time | u8 kind code | u32 field count | fields...

with each field tagged ``0x01`` + i64 (int) or ``0x02`` + f64 (float), all
little-endian. The digest is FNV-1a-64 over the concatenated encodings.
"""
from __future__ import annotations

import json
import struct
from bisect import bisect_left
from typing import Iterable, Iterator

from .kernels import FNV_OFFSET, fnv1a64

# code -> (name, field names); codes are part of the digest and must stay stable
RECORD_KINDS: dict[str, tuple[int, tuple[str, ...]]] = {
    "gen": (1, ("origin", "pid", "app_seq", "priority", "size")),
    "inject": (2, ("node", "pid", "dest")),
    "send": (3, ("node", "hop_dst", "pid", "origin", "attempt")),
    "loss": (4, ("node", "hop_dst", "pid")),
    "recv": (5, ("node", "hop_src", "pid", "origin", "dest")),
    "relay": (6, ("node", "hop_src", "pid", "origin")),
    "fwd": (7, ("node", "pid")),
    "deliver": (8, ("node", "pid", "origin", "app_seq", "latency", "size")),
    "dup": (9, ("node", "pid", "origin", "app_seq")),
    "drop": (10, ("node", "pid", "cause", "hop_src")),
    "tamper_notice": (11, ("node", "suspect", "pid", "origin")),
    "tamper": (12, ("node", "pid", "bit")),
    "attack_start": (13, ("node", "kind")),
    "attack_end": (14, ("node", "kind")),
    "telemetry": (15, ("node", "queue_frac")),
    "assess": (16, ("node", "label", "score")),
    "alert": (17, ("node", "label", "score", "n_actions")),
    "action": (18, ("kind", "target", "param")),
    "route": (19, ("node", "next_hop", "cost")),
    "unroutable": (20, ("node",)),
    "predict": (21, ("node", "risk")),
    "inflight": (22, ("node", "pid")),
    "run_end": (23, ("until",)),
}
KIND_BY_CODE = {code: name for name, (code, _) in RECORD_KINDS.items()}

DROP_CAUSES = (
    "link_error",
    "congestion",
    "rate_limited",
    "retry_exhausted",
    "attack_drop",
    "ttl_expired",
    "auth_fail",
    "crc_fail",
)
CAUSE_CODE = {c: i for i, c in enumerate(DROP_CAUSES)}

_HEAD = struct.Struct("<QBI")
_INT = struct.Struct("<Bq")
_FLT = struct.Struct("<Bd")


def encode_record(time: int, kind: str, fields: tuple) -> bytes:
    code = RECORD_KINDS[kind][0]
    parts = [_HEAD.pack(time, code, len(fields))]
    for f in fields:
        if isinstance(f, float):
            parts.append(_FLT.pack(2, f))
        else:
            parts.append(_INT.pack(1, int(f)))
    return b"".join(parts)


class CorruptLog(Exception):
    """The stored log does not match its digest or fails an accounting identity."""


class EventLog:
    """Time-ordered record store; the single source of truth for analytics."""

    def __init__(self) -> None:
        self.times: list[int] = []
        self.kinds: list[str] = []
        self.fields: list[tuple] = []
        self.digest = FNV_OFFSET
        self._listeners: list = []

    def __len__(self) -> int:
        return len(self.times)

    def subscribe(self, fn) -> None:
        self._listeners.append(fn)

    def append(self, time: int, kind: str, *fields) -> None:
        if self.times and time < self.times[-1]:
            raise ValueError(f"log time went backwards: {time} < {self.times[-1]}")
        self.times.append(time)
        self.kinds.append(kind)
        self.fields.append(fields)
        self.digest = fnv1a64(encode_record(time, kind, fields), self.digest)
        for fn in self._listeners:
            fn(time, kind, fields)

    def records(self) -> Iterator[tuple[int, str, tuple]]:
        return zip(self.times, self.kinds, self.fields)

    def of_kind(self, *kinds: str) -> Iterator[tuple[int, tuple]]:
        wanted = set(kinds)
        for t, k, f in zip(self.times, self.kinds, self.fields):
            if k in wanted:
                yield t, f

    def index_at(self, time: int) -> int:
        """Index of the first record with ``time >= time``."""
        return bisect_left(self.times, time)

    def slice(self, start: int, stop: int) -> list[tuple[int, str, tuple]]:
        """Records with ``start <= time < stop``."""
        i, j = self.index_at(start), self.index_at(stop)
        return list(zip(self.times[i:j], self.kinds[i:j], self.fields[i:j]))

    # -- persistence -------------------------------------------------------

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for t, k, f in self.records():
                fh.write(json.dumps([t, k, *f], separators=(",", ":")))
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "EventLog":
        log = cls()
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    t, k, *f = row
                    if k not in RECORD_KINDS:
                        raise ValueError(f"unknown record kind {k!r}")
                    log.append(int(t), k, *f)
                except (ValueError, TypeError) as exc:
                    raise CorruptLog(f"{path}:{lineno}: {exc}") from exc
        return log

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, str, tuple]]) -> "EventLog":
        log = cls()
        for t, k, f in records:
            log.append(t, k, *f)
        return log
