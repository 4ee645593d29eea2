"""Canonical value encoding and length-prefixed wire frames.

Value tags::

    0x00 nil      0x01 false    0x02 true
    0x03 int      8-byte big-endian two's complement
    0x04 string   4-byte length + UTF-8
    0x05 atom     4-byte length + UTF-8
    0x06 tuple    4-byte count + elements
    0x07 list     4-byte count + elements
    0x08 funcref  4-byte name length + UTF-8 name + 1-byte arity

A message is encoded as the tuple ``{mtype_atom, civ_or_nil, payload}`` and
a frame prepends a 4-byte big-endian length.
"""

from __future__ import annotations

import os
import struct

from ..lang.values import INT64_MAX, INT64_MIN, Atom, FuncRef
from ..messages import MESSAGE_TYPES, REVIVE, CivToken, Message

TAG_NIL = 0x00
TAG_FALSE = 0x01
TAG_TRUE = 0x02
TAG_INT = 0x03
TAG_STRING = 0x04
TAG_ATOM = 0x05
TAG_TUPLE = 0x06
TAG_LIST = 0x07
TAG_FUNCREF = 0x08

DEFAULT_MAX_FRAME = 16 * 1024 * 1024

_U32 = struct.Struct(">I")
_I64 = struct.Struct(">q")


class CodecError(Exception):
    pass


class OversizeFrame(CodecError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"frame of {size} bytes exceeds limit {limit}")
        self.size = size
        self.limit = limit


class MalformedFrame(CodecError):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"malformed frame at offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class NeedMoreBytes(CodecError):
    def __init__(self, needed: int):
        super().__init__(f"need {needed} more bytes")
        self.needed = needed


def max_frame_size() -> int:
    raw = os.environ.get("CHOREX_MAX_FRAME")
    return int(raw) if raw else DEFAULT_MAX_FRAME


# ------------------------------------------------------------------- values


def encode_value(v, out: bytearray) -> None:
    if v is None:
        out.append(TAG_NIL)
    elif v is False:
        out.append(TAG_FALSE)
    elif v is True:
        out.append(TAG_TRUE)
    elif isinstance(v, int):
        if not INT64_MIN <= v <= INT64_MAX:
            raise CodecError(f"integer {v} outside int64 range")
        out.append(TAG_INT)
        out += _I64.pack(v)
    elif isinstance(v, str):
        data = v.encode("utf-8")
        out.append(TAG_STRING)
        out += _U32.pack(len(data))
        out += data
    elif isinstance(v, Atom):
        data = v.name.encode("utf-8")
        out.append(TAG_ATOM)
        out += _U32.pack(len(data))
        out += data
    elif isinstance(v, (tuple, list)):
        out.append(TAG_TUPLE if isinstance(v, tuple) else TAG_LIST)
        out += _U32.pack(len(v))
        for item in v:
            encode_value(item, out)
    elif isinstance(v, FuncRef):
        if not 0 <= v.arity <= 255:
            raise CodecError(f"arity {v.arity} does not fit one byte")
        data = v.name.encode("utf-8")
        out.append(TAG_FUNCREF)
        out += _U32.pack(len(data))
        out += data
        out.append(v.arity)
    else:
        raise CodecError(f"cannot encode {type(v).__name__}")


def value_bytes(v) -> bytes:
    out = bytearray()
    encode_value(v, out)
    return bytes(out)


def _need(buf, pos: int, n: int) -> None:
    if pos + n > len(buf):
        raise MalformedFrame(pos, f"truncated: need {n} bytes, have {len(buf) - pos}")


def _text(buf, pos: int) -> tuple:
    _need(buf, pos, 4)
    (n,) = _U32.unpack_from(buf, pos)
    pos += 4
    _need(buf, pos, n)
    try:
        s = bytes(buf[pos:pos + n]).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFrame(pos, "invalid UTF-8") from exc
    return s, pos + n


def decode_value(buf, pos: int = 0) -> tuple:
    """Decode one value starting at ``pos``; return ``(value, next_pos)``."""
    _need(buf, pos, 1)
    tag = buf[pos]
    pos += 1
    if tag == TAG_NIL:
        return None, pos
    if tag == TAG_FALSE:
        return False, pos
    if tag == TAG_TRUE:
        return True, pos
    if tag == TAG_INT:
        _need(buf, pos, 8)
        return _I64.unpack_from(buf, pos)[0], pos + 8
    if tag == TAG_STRING:
        return _text(buf, pos)
    if tag == TAG_ATOM:
        name, pos = _text(buf, pos)
        return Atom(name), pos
    if tag in (TAG_TUPLE, TAG_LIST):
        _need(buf, pos, 4)
        (count,) = _U32.unpack_from(buf, pos)
        pos += 4
        if count > len(buf) - pos:
            # every element takes at least one byte
            raise MalformedFrame(pos, f"element count {count} exceeds remaining bytes")
        items = []
        for _ in range(count):
            item, pos = decode_value(buf, pos)
            items.append(item)
        return (tuple(items) if tag == TAG_TUPLE else items), pos
    if tag == TAG_FUNCREF:
        name, pos = _text(buf, pos)
        _need(buf, pos, 1)
        return FuncRef(name, buf[pos]), pos + 1
    raise MalformedFrame(pos - 1, f"unknown tag 0x{tag:02x}")


# ----------------------------------------------------------------- messages


def civ_to_value(civ: CivToken) -> tuple:
    return (civ.session, (civ.site, civ.epoch), Atom(civ.sender), Atom(civ.receiver))


def civ_from_value(v, offset: int = 0) -> CivToken:
    try:
        session, (site, epoch), sender, receiver = v
        if not (isinstance(session, str) and type(site) is int and type(epoch) is int
                and isinstance(sender, Atom) and isinstance(receiver, Atom)):
            raise TypeError
    except (TypeError, ValueError) as exc:
        raise MalformedFrame(offset, "bad CIV token shape") from exc
    return CivToken(session, site, epoch, sender.name, receiver.name)


def message_to_value(m: Message) -> tuple:
    payload = m.payload.to_value() if hasattr(m.payload, "to_value") else m.payload
    civ = None if m.civ is None else civ_to_value(m.civ)
    return (Atom(m.mtype), civ, payload)


def encode_message(m: Message) -> bytes:
    return value_bytes(message_to_value(m))


def decode_message(buf, pos: int = 0) -> tuple:
    """Decode a message body; control payloads stay as plain values."""
    v, end = decode_value(buf, pos)
    if not (isinstance(v, tuple) and len(v) == 3 and isinstance(v[0], Atom)):
        raise MalformedFrame(pos, "message is not a {type, civ, payload} tuple")
    mtype, civ_v, payload = v
    if mtype.name not in MESSAGE_TYPES:
        raise MalformedFrame(pos, f"unknown message type {mtype.name!r}")
    civ = None if civ_v is None else civ_from_value(civ_v, pos)
    try:
        return Message(mtype.name, civ, payload), end
    except ValueError as exc:
        raise MalformedFrame(pos, str(exc)) from exc


def encode_frame(m: Message, limit: int | None = None) -> bytes:
    body = encode_message(m)
    limit = max_frame_size() if limit is None else limit
    if len(body) > limit:
        raise OversizeFrame(len(body), limit)
    return _U32.pack(len(body)) + body


def decode_frame(buf, limit: int | None = None) -> Message:
    """Decode exactly one complete frame.

    Raises :class:`NeedMoreBytes` when ``buf`` holds only part of a frame.
    """
    msg, used = split_frame(buf, limit)
    if used != len(buf):
        raise MalformedFrame(used, f"{len(buf) - used} trailing bytes after frame")
    return msg


def split_frame(buf, limit: int | None = None) -> tuple:
    """Decode the first frame in ``buf``; return ``(message, bytes_consumed)``."""
    limit = max_frame_size() if limit is None else limit
    if len(buf) < 4:
        raise NeedMoreBytes(4 - len(buf))
    (n,) = _U32.unpack_from(buf, 0)
    if n > limit:
        raise OversizeFrame(n, limit)
    if len(buf) < 4 + n:
        raise NeedMoreBytes(4 + n - len(buf))
    body = memoryview(buf)[4:4 + n]
    msg, end = decode_message(body)
    if end != n:
        raise MalformedFrame(4 + end, "frame length disagrees with message body")
    return msg, 4 + n


class FrameReader:
    """Incremental decoder for a byte stream carrying back-to-back frames."""

    def __init__(self, limit: int | None = None):
        self._buf = bytearray()
        self._limit = limit

    def feed(self, data: bytes) -> list:
        self._buf += data
        out = []
        while True:
            try:
                msg, used = split_frame(self._buf, self._limit)
            except NeedMoreBytes:
                return out
            del self._buf[:used]
            out.append(msg)
