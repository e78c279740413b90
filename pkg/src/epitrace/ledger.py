"""Hash-chained audit ledger: every governed operation leaves exactly one entry.

Entries chain by SHA-256 over (sequence || previous hash || canonical content
JSON); verification recomputes every hash from genesis, so any byte of
tampering or reordering breaks the chain.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Any, Iterable

GENESIS_HASH = b"\x00" * 32


def canonical_content(content: dict[str, Any]) -> bytes:
    return json.dumps(content, sort_keys=True, separators=(",", ":")).encode("utf-8")


def entry_hash(sequence: int, previous_hash: bytes, content: dict[str, Any]) -> bytes:
    h = hashlib.sha256()
    h.update(struct.pack(">Q", sequence))
    h.update(previous_hash)
    h.update(canonical_content(content))
    return h.digest()


@dataclass(frozen=True, slots=True)
class LedgerEntry:
    sequence: int
    previous_hash: bytes
    hash: bytes
    content: dict[str, Any]


@dataclass
class AuditLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def append(self, content: dict[str, Any]) -> LedgerEntry:
        prev = self.entries[-1].hash if self.entries else GENESIS_HASH
        seq = len(self.entries)
        entry = LedgerEntry(sequence=seq, previous_hash=prev, hash=entry_hash(seq, prev, content), content=content)
        self.entries.append(entry)
        return entry

    def record(self, kind: str, minute: int, **fields: Any) -> LedgerEntry:
        content: dict[str, Any] = {"kind": kind, "minute": minute}
        content.update(fields)
        return self.append(content)

    def verify(self) -> bool:
        return verify_ledger(self.entries)

    def export_jsonl(self) -> str:
        lines = []
        for e in self.entries:
            lines.append(
                json.dumps(
                    {
                        "sequence": e.sequence,
                        "previous_hash": e.previous_hash.hex(),
                        "hash": e.hash.hex(),
                        "content": e.content,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")


def verify_ledger(entries: Iterable[LedgerEntry]) -> bool:
    prev = GENESIS_HASH
    for i, e in enumerate(entries):
        if e.sequence != i or e.previous_hash != prev:
            return False
        if entry_hash(e.sequence, e.previous_hash, e.content) != e.hash:
            return False
        prev = e.hash
    return True


def load_jsonl(text: str) -> list[LedgerEntry]:
    entries = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        entries.append(
            LedgerEntry(
                sequence=obj["sequence"],
                previous_hash=bytes.fromhex(obj["previous_hash"]),
                hash=bytes.fromhex(obj["hash"]),
                content=obj["content"],
            )
        )
    return entries
