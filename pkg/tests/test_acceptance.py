"""Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL
line per criterion on the terminal (run with `pytest tests/test_acceptance.py`).
"""

import asyncio
import json
import sys
import time

import numpy as np
import pytest

from motionlab import protocol, samples
from motionlab.cli import main as cli_main
from motionlab.geometry import segment_valid, shape_distance
from motionlab.kinematics import forward_kinematics, inverse_kinematics, jacobian
from motionlab.planning import JointGoal, MotionPlanRequest, plan
from motionlab.robot import joint_space
from motionlab.scene import PlanningScene, SceneDiff, SceneReplica, load_scene, structurally_equal
from motionlab.server import PlanningServer
from motionlab.shapes import contains_world
from motionlab.transforms import orientation_error

from tests.test_kinematics import numeric_jacobian
from tests.test_geometry import random_pose, random_shape
from tests.test_server import Client


REPORT_LINES: list[str] = []


def report(name: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
    REPORT_LINES.append(line)
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def test_kinematics_jacobian_and_fk():
    """Jacobian vs central differences, 100 random configs per bundled URDF,
    max entry error < 1e-5; 2-link FK closed forms exact to 1e-12; < 5 s."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for name in samples.URDF_NAMES:
        model = samples.load_sample_model(name)
        space = joint_space(model, "default")
        for _ in range(100):
            q = space.lower + (space.upper - space.lower) * rng.uniform(size=space.n)
            err = np.max(np.abs(jacobian(model, "default", q) - numeric_jacobian(model, "default", q)))
            worst = max(worst, float(err))
    two_link = samples.two_link_planar()
    fk_cases = [
        ([0.0, 0.0], [2.0, 0.0, 0.0]),
        ([np.pi / 2, 0.0], [0.0, 2.0, 0.0]),
        ([np.pi / 2, -np.pi / 2], [1.0, 1.0, 0.0]),
    ]
    fk_worst = 0.0
    for q, expected in fk_cases:
        tip, _ = forward_kinematics(two_link, "default", q)
        fk_worst = max(fk_worst, float(np.max(np.abs(tip.position - expected))))
    elapsed = time.perf_counter() - t0
    report(
        "kinematics: jacobian vs finite differences + closed-form FK",
        worst < 1e-5 and fk_worst < 1e-12 and elapsed < 5.0,
        f"jac err {worst:.2e}, fk err {fk_worst:.2e}, {elapsed:.1f}s",
    )


def test_ik_contract():
    """200 FK-generated reachable targets on the 6-DOF arm: success >= 95%
    with restarts, every success re-verified by FK; < 30 s."""
    t0 = time.perf_counter()
    model = samples.six_dof_arm()
    space = joint_space(model, "default")
    rng = np.random.default_rng(202)
    successes = 0
    violations = 0
    for _ in range(200):
        target, _ = forward_kinematics(model, "default", space.sample(rng))
        result = inverse_kinematics(
            model, "default", target, space.sample(rng), restarts=10, rng=rng
        )
        if result.success:
            successes += 1
            tip, _ = forward_kinematics(model, "default", result.positions)
            pos_err = float(np.linalg.norm(tip.position - target.position))
            rot_err = float(np.linalg.norm(orientation_error(target.orientation, tip.orientation)))
            if pos_err >= 1e-4 or rot_err >= 1e-3:
                violations += 1
    elapsed = time.perf_counter() - t0
    report(
        "ik: success rate and FK re-verification",
        successes >= 190 and violations == 0 and elapsed < 30.0,
        f"{successes}/200 success, {violations} tolerance violations, {elapsed:.1f}s",
    )


def test_collision_sampling_oracle():
    """1,000 random shape pairs vs the dense containment oracle (1e4 volume
    samples): sign agreement >= 99.9%, disagreements confined to |d| < 1e-3;
    < 60 s. Pairs are resampled away from the near-touching band (|d| < 0.02)
    where any volumetric oracle is blind."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    disagreements = []
    for _ in range(1000):
        while True:
            a, b = random_shape(rng), random_shape(rng)
            pose_a, pose_b = random_pose(rng), random_pose(rng)
            d = shape_distance(a, pose_a, b, pose_b)
            if abs(d) >= 0.02:
                break
        points = pose_a.apply(a.sample_volume(rng, 10_000))
        oracle_hit = bool(contains_world(b, pose_b, points).any())
        if (d < 0) != oracle_hit:
            disagreements.append(d)
    elapsed = time.perf_counter() - t0
    confined = all(abs(d) < 1e-3 for d in disagreements)
    report(
        "collision: sign agreement with sampling oracle",
        len(disagreements) <= 1 and confined and elapsed < 60.0,
        f"{1000 - len(disagreements)}/1000 agree, {elapsed:.1f}s",
    )


def test_planner_soundness_and_completeness_proxy():
    """Blocked corridor, 100 seeded runs per planner: >= 95 successes within
    5 s each, every success passes the independent half-step validity sweep;
    < 15 min total."""
    t0 = time.perf_counter()
    model = samples.two_link_planar()
    scene = load_scene(samples.scene_path("blocked_corridor"), model)
    objects = list(scene.objects.values())
    start = np.array([0.0, 0.0])
    goal = np.array([2.4, 0.0])
    results = {}
    for planner_id in ("rrt_connect", "prm"):
        wins = 0
        unsound = 0
        for seed in range(100):
            request = MotionPlanRequest(
                group="default", start=start, goal=JointGoal(goal),
                planner_id=planner_id, seed=seed, max_planning_time=5.0,
                edge_step=0.05,
            )
            t_run = time.perf_counter()
            response = plan(request, scene, model)
            run_time = time.perf_counter() - t_run
            if response.status == "SUCCESS" and run_time <= 5.0:
                wins += 1
                # independent sweep at half the planning edge step
                for q_a, q_b in zip(response.path, response.path[1:]):
                    if not segment_valid(model, "default", q_a, q_b, objects, 0.025):
                        unsound += 1
                        break
        results[planner_id] = (wins, unsound)
    elapsed = time.perf_counter() - t0
    ok = all(w >= 95 and u == 0 for w, u in results.values()) and elapsed < 900.0
    report(
        "planners: completeness proxy + post-hoc soundness",
        ok,
        ", ".join(f"{p}: {w}/100 sound" for p, (w, u) in results.items()) + f", {elapsed:.0f}s",
    )


def test_sync_convergence_three_clients():
    """Three protocol clients driving 1,000 interleaved scene_ops (resizes
    journaled as remove+add); every replica structurally equals the server
    scene at quiescence; diffs touch only modified ids; < 60 s."""
    t0 = time.perf_counter()

    async def drive():
        model = samples.two_link_planar()
        server = PlanningServer(model, PlanningScene(model), tcp_port=0, ws_port=0)
        await server.start()
        clients = [await Client.connect(server.tcp_port, f"c{i}") for i in range(3)]
        replicas = []
        for client in clients:
            await client.send(protocol.message("snapshot_request", id=1))
            snap = await client.recv_type("snapshot")
            replica = SceneReplica()
            replica.apply_snapshot(snap["body"])
            replicas.append(replica)

        rng = np.random.default_rng(404)
        ids = []
        counter = 0
        journal_websites = []
        resize_seen = False
        for step in range(1000):
            actor = clients[int(rng.integers(0, 3))]
            kind = int(rng.integers(0, 4)) if ids else 0
            if kind == 0:
                oid = f"obj{counter}"
                counter += 1
                ids.append(oid)
                body = {"op": "add", "object": {
                    "id": oid,
                    "shape": {"kind": "sphere", "radius": float(rng.uniform(0.05, 0.3))},
                    "pose": {"position": [float(v) for v in rng.uniform(-1, 1, 3)],
                              "orientation": [1.0, 0.0, 0.0, 0.0]}}}
            elif kind == 1:
                body = {"op": "set_pose", "id": ids[int(rng.integers(0, len(ids)))],
                        "pose": {"position": [float(v) for v in rng.uniform(-1, 1, 3)],
                                  "orientation": [1.0, 0.0, 0.0, 0.0]}}
            elif kind == 2:
                body = {"op": "resize", "id": ids[int(rng.integers(0, len(ids)))],
                        "shape": {"kind": "box",
                                   "half_extents": [float(v) for v in rng.uniform(0.05, 0.3, 3)]}}
            else:
                body = {"op": "remove", "id": ids.pop(int(rng.integers(0, len(ids))))}
            await actor.send(protocol.message("scene_op", body))
            if step % 100 == 0:
                await asyncio.sleep(0)  # let the server interleave

        # quiescence, then fold every pending diff into each replica
        await asyncio.sleep(0.5)
        foreign = 0
        for client, replica in zip(clients, replicas):
            while True:
                try:
                    msg = await client.recv(timeout=0.3)
                except (TimeoutError, asyncio.TimeoutError):
                    break
                if msg["type"] != "scene_diff":
                    continue
                diff = SceneDiff.from_dict(msg["body"])
                window_ids = set()
                for entry in server.scene._journal:
                    if diff.from_version < entry.to_version <= diff.to_version:
                        for op in entry.ops:
                            window_ids.add(op.object.id if op.kind == "add" else op.id)
                for op in diff.ops:
                    oid = op.object.id if op.kind == "add" else op.id
                    if oid not in window_ids:
                        foreign += 1
                kinds = [op.kind for op in diff.ops]
                if "remove" in kinds and "add" in kinds:
                    resize_seen = True
                replica.apply_diff(diff)
        converged = all(structurally_equal(r, server.scene) for r in replicas)

        # one isolated resize must arrive journaled as remove followed by add
        watcher = clients[0]
        await watcher.send(protocol.message("scene_op", {
            "op": "add", "object": {
                "id": "probe", "shape": {"kind": "sphere", "radius": 0.1},
                "pose": {"position": [0, 0, 0], "orientation": [1, 0, 0, 0]}}}))
        await watcher.recv_type("scene_diff")
        await watcher.send(protocol.message("scene_op", {
            "op": "resize", "id": "probe",
            "shape": {"kind": "sphere", "radius": 0.2}}))
        msg = await watcher.recv_type("scene_diff")
        resize_ops = [op["op"] for op in msg["body"]["ops"]]
        await server.stop()
        return converged, foreign, resize_ops, resize_seen

    converged, foreign, resize_ops, _ = asyncio.run(drive())
    elapsed = time.perf_counter() - t0
    report(
        "sync: three-client convergence over 1,000 interleaved ops",
        converged and foreign == 0 and resize_ops == ["remove", "add"] and elapsed < 60.0,
        f"converged={converged}, foreign ids={foreign}, resize journaled as {resize_ops}, {elapsed:.1f}s",
    )


def test_protocol_fuzz():
    """1e4 random fragmentation splits leave decoded sequences invariant;
    round-trip equality for every message type."""
    from tests.test_protocol import sample_messages

    t0 = time.perf_counter()
    msgs = sample_messages()
    ok_roundtrip = all(protocol.decode_frames(protocol.encode_frame(m)) == [m] for m in msgs)
    blob = b"".join(protocol.encode_frame(m) for m in msgs)
    rng = np.random.default_rng(505)
    ok_fragment = True
    for _ in range(10_000):
        cuts = sorted(int(c) for c in rng.integers(0, len(blob) + 1, int(rng.integers(0, 10))))
        decoder = protocol.FrameDecoder()
        out = []
        prev = 0
        for cut in cuts + [len(blob)]:
            out.extend(decoder.feed(blob[prev:cut]))
            prev = cut
        if out != msgs:
            ok_fragment = False
            break
    elapsed = time.perf_counter() - t0
    report(
        "protocol: round-trip + 1e4-split fragmentation invariance",
        ok_roundtrip and ok_fragment,
        f"{elapsed:.1f}s",
    )


def test_scenario_replay_table_rearrangement(tmp_path):
    """Fig.-7-style replay: a headless protocol client builds the table scene,
    plans to an empty spot (joint goal), rearranges, plans to a box top (pose
    goal); both succeed and pass post-hoc validity. The same scene also plans
    via the cmd_plan batch path."""
    t0 = time.perf_counter()
    model = samples.six_dof_arm()
    table_doc = json.loads(samples.scene_path("table").read_text())

    async def drive():
        server = PlanningServer(model, PlanningScene(model, "default"), tcp_port=0, ws_port=0)
        await server.start()
        operator = await Client.connect(server.tcp_port, "operator")
        # build the table scene object by object over the wire
        for obj in table_doc["objects"]:
            await operator.send(protocol.message("scene_op", {"op": "add", "object": obj}))
            await operator.recv_type("scene_diff")
        home = table_doc["robot_state"]["positions"]
        await operator.send(protocol.message("robot_state", {"group": "default", "positions": home}))

        # goal 1: an empty spot on the table, resolved to joints over the wire
        await operator.send(protocol.message("ik_request", {
            "target": {"position": [0.30, 0.30, 0.20], "orientation": [1, 0, 0, 0]},
            "orientation_weight": 0.0}, id=1))
        ik = await operator.recv_type("ik_response", timeout=30.0)
        assert ik["body"]["success"], "empty-spot IK failed"
        empty_spot = ik["body"]["positions"]

        await operator.send(protocol.message("plan_request", {
            "group": "default", "start": home, "goal": {"joint": empty_spot},
            "planner_id": "rrt_connect", "num_attempts": 3,
            "max_planning_time": 20.0, "edge_step": 0.05, "seed": 7}, id=2))
        plan1 = await operator.recv_type("plan_response", timeout=60.0)
        objects_before = [o for o in server.scene.objects.values()]

        # rearrangement: shift the small box across the table
        await operator.send(protocol.message("scene_op", {
            "op": "set_pose", "id": "box_small",
            "pose": {"position": [0.30, 0.30, 0.045], "orientation": [1, 0, 0, 0]}}))
        await operator.recv_type("scene_diff")

        # goal 2: hover above the tall box, as a pose goal
        await operator.send(protocol.message("plan_request", {
            "group": "default", "start": plan1["body"]["path"][-1],
            "goal": {"pose": {"position": [0.55, 0.12, 0.33], "orientation": [1, 0, 0, 0]},
                      "orientation_weight": 0.0, "position_tolerance": 1e-3},
            "planner_id": "rrt_connect", "num_attempts": 3,
            "max_planning_time": 20.0, "edge_step": 0.05, "seed": 8}, id=3))
        plan2 = await operator.recv_type("plan_response", timeout=60.0)
        objects_after = [o for o in server.scene.objects.values()]
        await server.stop()
        return plan1["body"], plan2["body"], objects_before, objects_after

    body1, body2, objects1, objects2 = asyncio.run(drive())
    ok1 = body1["status"] == "SUCCESS"
    ok2 = body2["status"] == "SUCCESS"
    sound1 = ok1 and all(
        segment_valid(model, "default", np.asarray(a), np.asarray(b), objects1, 0.025)
        for a, b in zip(body1["path"], body1["path"][1:])
    )
    sound2 = ok2 and all(
        segment_valid(model, "default", np.asarray(a), np.asarray(b), objects2, 0.025)
        for a, b in zip(body2["path"], body2["path"][1:])
    )

    # the same first plan through the batch CLI
    out = tmp_path / "resp.json"
    goal_text = ",".join(str(v) for v in body1["path"][-1])
    code = cli_main([
        "plan", "--urdf", str(samples.urdf_path("six_dof_arm")),
        "--scene", str(samples.scene_path("table")),
        "--goal-joints", goal_text, "--seed", "7", "--attempts", "3",
        "--max-time", "20", "--output", str(out),
    ])
    cmd_ok = code == 0 and json.loads(out.read_text())["status"] == "SUCCESS"
    elapsed = time.perf_counter() - t0
    report(
        "scenario: table rearrangement replay (protocol driver + cmd_plan)",
        ok1 and ok2 and sound1 and sound2 and cmd_ok,
        f"plan1={body1['status']}, plan2={body2['status']}, cmd_plan={'ok' if cmd_ok else 'fail'}, {elapsed:.0f}s",
    )
