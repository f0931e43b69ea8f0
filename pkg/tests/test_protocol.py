import json
import struct

import numpy as np
import pytest

from motionlab.protocol import (
    MAX_FRAME_BYTES,
    MESSAGE_TYPES,
    FrameDecoder,
    FrameTooLong,
    MalformedJson,
    OversizeMessage,
    UnknownType,
    decode_frames,
    encode_frame,
    encode_message,
    error_message,
    hello,
    message,
    validate_message,
)


def sample_messages():
    """One representative message per protocol type."""
    pose = {"position": [0.1, 0.2, 0.3], "orientation": [1.0, 0.0, 0.0, 0.0]}
    obj = {"id": "b1", "shape": {"kind": "box", "half_extents": [0.1, 0.1, 0.1]}, "pose": pose}
    return [
        hello("console"),
        message("snapshot_request", id=1),
        message("snapshot", {"objects": [obj], "robot_state": {"group": "default", "positions": [0, 0]}, "version": 3}, id=1),
        message("scene_op", {"op": "add", "object": obj}),
        message("scene_diff", {"from_version": 3, "to_version": 4, "ops": [{"op": "remove", "id": "b1"}]}),
        message("robot_state", {"group": "default", "positions": [0.5, -0.5]}),
        message("planners_request", id=2),
        message("planners", {"planner_ids": ["rrt_connect", "prm"]}, id=2),
        message("plan_request", {"group": "default", "start": [0, 0], "goal": {"joint": [1, 1]}, "planner_id": "prm", "num_attempts": 1, "max_planning_time": 5.0}, id=3),
        message("plan_response", {"status": "SUCCESS", "waypoint_count": 2, "planning_time": 0.1, "path": [[0, 0], [1, 1]], "trajectory": None}, id=3),
        message("execute_request", {"command": "start", "trajectory_id": 7}, id=4),
        message("execute_status", {"status": "executing", "progress": 0.5, "trajectory_id": 7}, id=4),
        message("mirror_set", {"enabled": True}, id=5),
        message("ik_request", {"target": pose, "seed": [0, 0]}, id=6),
        message("ik_response", {"success": True, "positions": [0.3, 0.4]}, id=6),
        error_message("bad_request", "nope", id=9),
    ]


def test_every_type_has_a_sample():
    assert {m["type"] for m in sample_messages()} == set(MESSAGE_TYPES)


def test_round_trip_every_type():
    for msg in sample_messages():
        decoded = decode_frames(encode_frame(msg))
        assert decoded == [msg]
        validate_message(decoded[0])


def test_frame_layout_prefix_is_payload_byte_count():
    # byte-count the canonical serialization and check the big-endian prefix
    msg = hello("ui")
    payload = encode_message(msg)
    expected = json.dumps(
        {"type": "hello", "body": {"client_name": "ui", "protocol_version": 1}},
        separators=(",", ":"),
    ).encode()
    assert payload == expected
    frame = encode_frame(msg)
    assert frame[:4] == struct.pack(">I", len(payload))
    assert frame[4:] == payload
    assert len(payload) == 65  # frozen from the canonical serialization above


def test_canonical_key_order():
    msg = {"body": {"x": 1}, "id": 4, "type": "error"}
    payload = encode_message(msg).decode()
    assert payload.startswith('{"type":"error","id":4,"body":')


def test_empty_body_round_trip():
    msg = message("planners_request", id=1)
    assert decode_frames(encode_frame(msg)) == [msg]


def test_oversize_message_rejected():
    big = message("scene_op", {"blob": "x" * (MAX_FRAME_BYTES + 1)})
    with pytest.raises(OversizeMessage):
        encode_frame(big)


def test_frame_too_long_rejected():
    decoder = FrameDecoder()
    with pytest.raises(FrameTooLong):
        decoder.feed(struct.pack(">I", MAX_FRAME_BYTES + 1))


def test_malformed_json_fatal():
    payload = b"{not json"
    frame = struct.pack(">I", len(payload)) + payload
    with pytest.raises(MalformedJson):
        decode_frames(frame)


def test_non_object_payload_rejected():
    payload = b'[1,2,3]'
    frame = struct.pack(">I", len(payload)) + payload
    with pytest.raises(MalformedJson):
        decode_frames(frame)


def test_unknown_type_is_nonfatal_validation_error():
    msg = message("telepathy", {"x": 1})
    decoded = decode_frames(encode_frame(msg))
    assert decoded == [msg]  # framing layer passes it through
    with pytest.raises(UnknownType):
        validate_message(decoded[0])


def test_two_frames_in_one_read():
    msgs = sample_messages()[:2]
    blob = b"".join(encode_frame(m) for m in msgs)
    decoder = FrameDecoder()
    assert decoder.feed(blob) == msgs


def test_one_byte_at_a_time():
    msg = hello("drip")
    frame = encode_frame(msg)
    decoder = FrameDecoder()
    out = []
    for i in range(len(frame)):
        out.extend(decoder.feed(frame[i : i + 1]))
    assert out == [msg]


def test_fragmentation_invariance_fuzz():
    """Any split of the byte stream yields the same message sequence."""
    msgs = sample_messages()
    blob = b"".join(encode_frame(m) for m in msgs)
    rng = np.random.default_rng(1234)
    for _ in range(2000):
        n_cuts = int(rng.integers(0, 12))
        cuts = sorted(int(c) for c in rng.integers(0, len(blob) + 1, n_cuts))
        decoder = FrameDecoder()
        out = []
        prev = 0
        for cut in cuts + [len(blob)]:
            out.extend(decoder.feed(blob[prev:cut]))
            prev = cut
        assert out == msgs


def test_validate_rejects_bad_shapes():
    with pytest.raises(MalformedJson):
        validate_message([])
    with pytest.raises(MalformedJson):
        validate_message({"type": 5})
    with pytest.raises(MalformedJson):
        validate_message({"type": "hello", "body": 3})
    with pytest.raises(MalformedJson):
        validate_message({"type": "hello", "id": "x", "body": {}})
