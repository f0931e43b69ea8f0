"""Framed wire protocol shared by the TCP and WebSocket transports.

TCP frames are a 4-byte big-endian payload length followed by a UTF-8 JSON
document; WebSocket carries the identical JSON documents, one per text frame,
with no length prefix. Every message is {"type": ..., "id"?: ..., "body": ...}
with "id" present on requests and echoed on their responses. The canonical
serialization is compact JSON (no spaces) with keys in the order type, id,
body; see docs/protocol.md for one example per message type.
"""

from __future__ import annotations

import json
import struct

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 16 * 1024 * 1024
HEADER_SIZE = 4
DEFAULT_TCP_PORT = 7462
DEFAULT_WS_PORT = 7463
WS_PATH = "/ws"

MESSAGE_TYPES = frozenset(
    {
        "hello",
        "snapshot_request",
        "snapshot",
        "scene_op",
        "scene_diff",
        "robot_state",
        "planners_request",
        "planners",
        "plan_request",
        "plan_response",
        "execute_request",
        "execute_status",
        "mirror_set",
        "ik_request",
        "ik_response",
        "error",
    }
)


class ProtocolError(Exception):
    pass


class OversizeMessage(ProtocolError):
    pass


class FrameTooLong(ProtocolError):
    """Declared frame length exceeds the limit; connection-fatal."""


class MalformedJson(ProtocolError):
    """Payload is not a valid JSON message object; connection-fatal."""


class UnknownType(ProtocolError):
    """Message type outside the protocol set; the message is rejected but the
    connection stays usable."""


def message(type_: str, body: dict | None = None, id: int | None = None) -> dict:
    msg = {"type": type_}
    if id is not None:
        msg["id"] = id
    msg["body"] = body if body is not None else {}
    return msg


def hello(client_name: str) -> dict:
    return message("hello", {"client_name": client_name, "protocol_version": PROTOCOL_VERSION})


def error_message(code: str, human_text: str, id: int | None = None) -> dict:
    return message("error", {"code": code, "human_text": human_text}, id=id)


def encode_message(msg: dict) -> bytes:
    """Canonical JSON bytes of a message: compact separators, keys in the
    order type, id, body."""
    ordered = {"type": msg["type"]}
    if "id" in msg and msg["id"] is not None:
        ordered["id"] = msg["id"]
    ordered["body"] = msg.get("body", {})
    return json.dumps(ordered, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_frame(msg: dict) -> bytes:
    payload = encode_message(msg)
    if len(payload) > MAX_FRAME_BYTES:
        raise OversizeMessage(f"{len(payload)} bytes exceeds the {MAX_FRAME_BYTES} byte limit")
    return struct.pack(">I", len(payload)) + payload


def validate_message(msg) -> dict:
    """Shape-check a decoded message. Raises MalformedJson for structural
    problems and UnknownType for types outside the protocol set."""
    if not isinstance(msg, dict):
        raise MalformedJson("message is not a JSON object")
    mtype = msg.get("type")
    if not isinstance(mtype, str):
        raise MalformedJson("message has no string 'type'")
    if "body" in msg and not isinstance(msg["body"], dict):
        raise MalformedJson("'body' must be an object")
    if "id" in msg and msg["id"] is not None and not isinstance(msg["id"], int):
        raise MalformedJson("'id' must be an integer")
    if mtype not in MESSAGE_TYPES:
        raise UnknownType(mtype)
    return msg


class FrameDecoder:
    """Incremental frame decoder tolerant of arbitrary fragmentation: any split
    of the byte stream yields the same message sequence."""

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[dict]:
        self._buffer.extend(data)
        out = []
        while True:
            if len(self._buffer) < HEADER_SIZE:
                return out
            (length,) = struct.unpack_from(">I", self._buffer)
            if length > MAX_FRAME_BYTES:
                raise FrameTooLong(f"declared frame of {length} bytes")
            if len(self._buffer) < HEADER_SIZE + length:
                return out
            payload = bytes(self._buffer[HEADER_SIZE : HEADER_SIZE + length])
            del self._buffer[: HEADER_SIZE + length]
            out.append(decode_payload(payload))


def decode_payload(payload: bytes) -> dict:
    """Parse one JSON message payload (shared by TCP frames and WS frames)."""
    try:
        msg = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from None
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise MalformedJson("payload is not a message object")
    return msg


def decode_frames(data: bytes) -> list[dict]:
    """Decode a complete byte string of concatenated frames."""
    decoder = FrameDecoder()
    out = decoder.feed(data)
    if decoder._buffer:
        raise MalformedJson(f"{len(decoder._buffer)} trailing bytes")
    return out
