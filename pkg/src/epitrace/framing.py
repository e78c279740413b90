"""Canonical length-prefixed binary framing for all inter-node messages.

Primitives: unsigned big-endian integers (u8/u32/u64) and u32-length-prefixed
byte strings. Every wire message in the repo (analysis-network fetch, votes,
requests, certificates, vault fragments) is a fixed concatenation of these,
so any two encoders produce identical bytes.
"""

from __future__ import annotations

import struct

from .errors import FramingError


class Reader:
    """Sequential decoder over one message buffer."""

    def __init__(self, data: bytes):
        self._data = data
        self._off = 0

    def u8(self) -> int:
        return self._unpack(">B", 1)

    def u32(self) -> int:
        return self._unpack(">I", 4)

    def u64(self) -> int:
        return self._unpack(">Q", 8)

    def raw(self, n: int) -> bytes:
        if self._off + n > len(self._data):
            raise FramingError("message truncated")
        out = self._data[self._off : self._off + n]
        self._off += n
        return out

    def lp_bytes(self) -> bytes:
        return self.raw(self.u32())

    def done(self) -> None:
        if self._off != len(self._data):
            raise FramingError(f"{len(self._data) - self._off} trailing bytes")

    def _unpack(self, fmt: str, size: int):
        if self._off + size > len(self._data):
            raise FramingError("message truncated")
        (val,) = struct.unpack_from(fmt, self._data, self._off)
        self._off += size
        return val


def u8(v: int) -> bytes:
    return struct.pack(">B", v)


def u32(v: int) -> bytes:
    return struct.pack(">I", v)


def u64(v: int) -> bytes:
    return struct.pack(">Q", v)


def lp_bytes(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


# -- vault fragment wire message ---------------------------------------------
# object-id (16 bytes) || fragment index (u8) || lp fragment || lp key share


def encode_fragment_message(object_id: bytes, index: int, fragment: bytes, key_share: bytes) -> bytes:
    if len(object_id) != 16:
        raise FramingError("object id must be 16 bytes")
    return object_id + u8(index) + lp_bytes(fragment) + lp_bytes(key_share)


def decode_fragment_message(data: bytes) -> tuple[bytes, int, bytes, bytes]:
    r = Reader(data)
    object_id = r.raw(16)
    index = r.u8()
    fragment = r.lp_bytes()
    key_share = r.lp_bytes()
    r.done()
    return object_id, index, fragment, key_share


# -- edge fetch request/response ----------------------------------------------
# request:  lp certificate (verbatim) || minute start (u64) || minute end (u64)
# response: entry count (u32) || [minute (u64) || station code (16 bytes ASCII)
#           || precision class (u8) || lp ciphertext] * count


def encode_fetch_request(cert_blob: bytes, minute_start: int, minute_end: int) -> bytes:
    return lp_bytes(cert_blob) + u64(minute_start) + u64(minute_end)


def decode_fetch_request(data: bytes) -> tuple[bytes, int, int]:
    r = Reader(data)
    cert_blob = r.lp_bytes()
    start = r.u64()
    end = r.u64()
    r.done()
    return cert_blob, start, end


def encode_fetch_response(entries: list[tuple[int, str, int, bytes]]) -> bytes:
    parts = [u32(len(entries))]
    for minute, code, class_value, ciphertext in entries:
        parts.append(u64(minute))
        parts.append(code.encode("ascii"))
        parts.append(u8(class_value))
        parts.append(lp_bytes(ciphertext))
    return b"".join(parts)


def decode_fetch_response(data: bytes) -> list[tuple[int, str, int, bytes]]:
    r = Reader(data)
    count = r.u32()
    out = []
    for _ in range(count):
        minute = r.u64()
        code = r.raw(16).decode("ascii")
        class_value = r.u8()
        out.append((minute, code, class_value, r.lp_bytes()))
    r.done()
    return out
