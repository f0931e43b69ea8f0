"""A complete operator session against an in-process server: snapshot, scene
edits, a plan request, and mock execution, all over the TCP protocol.
"""

import asyncio
import time

import numpy as np

from motionlab import protocol, samples
from motionlab.scene import PlanningScene
from motionlab.server import PlanningServer


async def request(reader, writer, decoder, msg, want, timeout=30.0):
    writer.write(protocol.encode_frame(msg))
    await writer.drain()
    return await wait_for(reader, decoder, want, timeout)


async def wait_for(reader, decoder, want, timeout=30.0):
    deadline = time.monotonic() + timeout
    while True:
        data = await asyncio.wait_for(reader.read(65536), timeout=deadline - time.monotonic())
        for msg in decoder.feed(data):
            if msg["type"] == want:
                return msg
            if msg["type"] == "error":
                raise RuntimeError(msg["body"])


async def main():
    model = samples.two_link_planar()
    server = PlanningServer(model, PlanningScene(model), tcp_port=0, ws_port=0, seed=0)
    await server.start()
    print(f"server up: tcp={server.tcp_port} ws={server.ws_port}")

    reader, writer = await asyncio.open_connection("127.0.0.1", server.tcp_port)
    decoder = protocol.FrameDecoder()
    writer.write(protocol.encode_frame(protocol.hello("demo")))

    snap = await request(reader, writer, decoder, protocol.message("snapshot_request", id=1), "snapshot")
    print("snapshot: version", snap["body"]["version"], "objects", len(snap["body"]["objects"]))

    # drop the corridor pillar into the scene; the ack is the broadcast diff
    writer.write(protocol.encode_frame(protocol.message("scene_op", {
        "op": "add", "object": {
            "id": "pillar", "shape": {"kind": "sphere", "radius": 0.35},
            "pose": {"position": [0.5433537535613657, 1.398091506193838, 0.0],
                      "orientation": [1, 0, 0, 0]}}})))
    diff = await wait_for(reader, decoder, "scene_diff")
    print("scene_diff:", [op["op"] for op in diff["body"]["ops"]],
          "-> version", diff["body"]["to_version"])

    planners = await request(reader, writer, decoder, protocol.message("planners_request", id=2), "planners")
    print("planners:", planners["body"]["planner_ids"])

    response = await request(reader, writer, decoder, protocol.message("plan_request", {
        "group": "default", "start": [0.0, 0.0], "goal": {"joint": [2.4, 0.0]},
        "planner_id": "rrt_connect", "num_attempts": 3, "max_planning_time": 5.0,
        "seed": 7}, id=3), "plan_response")
    body = response["body"]
    print(f"plan: {body['status']} with {body['waypoint_count']} waypoints "
          f"in {body['planning_time']:.2f} s")

    # execute on the mock robot and watch the state stream come back
    writer.write(protocol.encode_frame(protocol.message(
        "execute_request", {"command": "start", "trajectory_id": body["trajectory_id"]}, id=4)))
    states = 0
    t0 = time.monotonic()
    while True:
        data = await reader.read(65536)
        done = False
        for msg in decoder.feed(data):
            if msg["type"] == "robot_state":
                states += 1
            elif msg["type"] == "execute_status" and msg["body"]["status"] == "done":
                done = True
        if done:
            break
    print(f"executed in {time.monotonic() - t0:.2f} s wall, "
          f"{states} robot_state updates streamed")

    writer.close()
    await server.stop()


if __name__ == "__main__":
    asyncio.run(main())
