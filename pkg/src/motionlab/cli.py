"""Operator command line: run the server, batch-plan headlessly, validate
scenes, and replay trajectories as a table or SVG plot.

Exit codes: 0 success, 1 domain failure (failed plan, scene violation),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import signal
import sys
from pathlib import Path

import numpy as np

from . import protocol
from .geometry import robot_in_collision
from .planning import (
    SUCCESS,
    JointGoal,
    MotionPlanRequest,
    PoseGoal,
    Trajectory,
)
from .robot import UrdfError, parse_urdf_file
from .scene import PlanningScene, load_scene
from .seeding import env_seed
from .server import PlanningServer
from .shapes import InvalidShape
from .transforms import Pose


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UrdfError, InvalidShape, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionlab",
        description="Interactive motion planning server and batch tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the planning server until interrupted")
    serve.add_argument("--urdf", required=True, help="robot description file")
    serve.add_argument("--scene", help="initial scene JSON")
    serve.add_argument("--tcp-port", type=int, default=protocol.DEFAULT_TCP_PORT)
    serve.add_argument("--ws-port", type=int, default=protocol.DEFAULT_WS_PORT)
    serve.add_argument("--static-dir", help="directory of web console assets to serve over HTTP")
    serve.add_argument("--log-level", default="info")
    serve.add_argument("--mirror-source", help="trajectory JSON replayed when mirror mode is on")
    serve.add_argument("--playback-rate", type=float, default=1.0)
    serve.set_defaults(func=cmd_serve)

    plan_cmd = sub.add_parser("plan", help="plan one request headlessly and write the result")
    plan_cmd.add_argument("--urdf", required=True)
    plan_cmd.add_argument("--scene", help="scene JSON (omit for an empty scene)")
    plan_cmd.add_argument("--group", default="default")
    plan_cmd.add_argument("--start", help="comma-separated joint values (default: scene robot state)")
    goal = plan_cmd.add_mutually_exclusive_group(required=True)
    goal.add_argument("--goal-joints", help="comma-separated joint values")
    goal.add_argument("--goal-pose", help="x,y,z or x,y,z,qw,qx,qy,qz target pose")
    plan_cmd.add_argument("--position-only", action="store_true",
                          help="ignore orientation for --goal-pose")
    plan_cmd.add_argument("--planner", default="rrt_connect", choices=["rrt_connect", "prm"])
    plan_cmd.add_argument("--attempts", type=int, default=3)
    plan_cmd.add_argument("--max-time", type=float, default=5.0)
    plan_cmd.add_argument("--edge-step", type=float, default=0.05)
    plan_cmd.add_argument("--shortcut-iterations", type=int, default=100)
    plan_cmd.add_argument("--seed", type=int)
    plan_cmd.add_argument("--output", help="write the full plan response JSON here")
    plan_cmd.add_argument("--trajectory-out", help="write the trajectory JSON here")
    plan_cmd.set_defaults(func=cmd_plan)

    check = sub.add_parser("scene-check", help="validate a scene against a robot")
    check.add_argument("--scene", required=True)
    check.add_argument("--urdf", required=True)
    check.add_argument("--group", default="default")
    check.set_defaults(func=cmd_scene_check)

    replay = sub.add_parser("replay", help="print a trajectory as a table or SVG")
    replay.add_argument("trajectory", help="trajectory JSON file")
    replay.add_argument("--svg", help="write a joint-position-vs-time SVG here")
    replay.set_defaults(func=cmd_replay)
    return parser


def _load_model(path: str):
    return parse_urdf_file(path, cylinders_as_capsules=True)


def _load_scene(args, model) -> PlanningScene:
    if getattr(args, "scene", None):
        return load_scene(args.scene, model, getattr(args, "group", "default"))
    return PlanningScene(model, getattr(args, "group", "default"))


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def cmd_serve(args) -> int:
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO))
    try:
        model = _load_model(args.urdf)
        scene = _load_scene(args, model)
    except (UrdfError, InvalidShape, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    server = PlanningServer(
        model,
        scene,
        tcp_port=args.tcp_port,
        ws_port=args.ws_port,
        static_dir=args.static_dir,
        seed=env_seed(0),
        mirror_source=args.mirror_source,
        playback_rate=args.playback_rate,
    )

    async def run():
        await server.start()
        print(f"listening: tcp={server.tcp_port} ws={server.ws_port}", flush=True)
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, stop.set)
            except NotImplementedError:
                pass
        try:
            await stop.wait()
        finally:
            await server.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    return 0


def cmd_plan(args) -> int:
    model = _load_model(args.urdf)
    scene = _load_scene(args, model)
    start = (
        _parse_vector(args.start)
        if args.start
        else scene.robot_state.positions
    )
    if args.goal_joints:
        goal = JointGoal(_parse_vector(args.goal_joints))
    else:
        values = _parse_vector(args.goal_pose)
        if len(values) == 3:
            pose = Pose(position=values)
        elif len(values) == 7:
            pose = Pose(position=values[:3], orientation=values[3:])
        else:
            print("error: --goal-pose needs 3 or 7 values", file=sys.stderr)
            return 2
        weight = 0.0 if (args.position_only or len(values) == 3) else 1.0
        goal = PoseGoal(pose=pose, orientation_weight=weight, position_tolerance=1e-3)
    seed = args.seed if args.seed is not None else env_seed(0)
    request = MotionPlanRequest(
        group=args.group,
        start=start,
        goal=goal,
        planner_id=args.planner,
        num_attempts=args.attempts,
        max_planning_time=args.max_time,
        edge_step=args.edge_step,
        shortcut_iterations=args.shortcut_iterations,
        seed=seed,
    )
    from .planning import plan

    response = plan(request, scene, model)
    doc = response.to_dict()
    print(
        f"status={response.status} planning_time={response.planning_time:.3f}s "
        f"waypoints={response.waypoint_count}"
    )
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2) + "\n")
    if args.trajectory_out and response.trajectory is not None:
        Path(args.trajectory_out).write_text(
            json.dumps(response.trajectory.to_dict(), indent=2) + "\n"
        )
    return 0 if response.status == SUCCESS else 1


def cmd_scene_check(args) -> int:
    model = _load_model(args.urdf)
    try:
        scene = load_scene(args.scene, model, args.group)
    except InvalidShape as exc:
        print(f"scene invariant violation: {exc}")
        return 1
    report = robot_in_collision(
        model, args.group, scene.robot_state.positions, scene.objects.values()
    )
    status = "robot collision-free" if not report.in_collision else "ROBOT IN COLLISION"
    print(f"{len(scene.objects)} objects, {status}")
    if report.in_collision:
        for contact in report.contacts:
            print(f"  contact: {contact.first} <-> {contact.second} depth {contact.penetration_depth:.4f} m")
        return 1
    if np.isfinite(report.min_clearance):
        print(f"  min clearance {report.min_clearance:.4f} m")
    return 0


def cmd_replay(args) -> int:
    doc = json.loads(Path(args.trajectory).read_text())
    trajectory = Trajectory.from_dict(doc)
    n = len(trajectory.points[0].positions) if trajectory.points else 0
    header = "time_s " + " ".join(f"q{i}" for i in range(n))
    print(header)
    for p in trajectory.points:
        print(
            f"{p.time_from_start:7.3f} "
            + " ".join(f"{v: .4f}" for v in p.positions)
        )
    if args.svg:
        Path(args.svg).write_text(_trajectory_svg(trajectory))
        print(f"wrote {args.svg}")
    return 0


def _trajectory_svg(trajectory: Trajectory, width=640, height=360, margin=40) -> str:
    pts = trajectory.points
    duration = max(trajectory.duration, 1e-9)
    all_values = np.array([p.positions for p in pts])
    lo = float(all_values.min())
    hi = float(all_values.max())
    span = max(hi - lo, 1e-9)
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]

    def sx(t):
        return margin + (t / duration) * (width - 2 * margin)

    def sy(v):
        return height - margin - ((v - lo) / span) * (height - 2 * margin)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width - margin}" y="{height - margin + 16}" font-size="11" text-anchor="end">t = {duration:.2f} s</text>',
        f'<text x="{margin}" y="{margin - 8}" font-size="11">joint position (rad)</text>',
    ]
    for j in range(all_values.shape[1]):
        path = " ".join(f"{sx(p.time_from_start):.1f},{sy(p.positions[j]):.1f}" for p in pts)
        color = colors[j % len(colors)]
        lines.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        lines.append(
            f'<text x="{width - margin + 4}" y="{sy(pts[-1].positions[j]):.1f}" font-size="10" fill="{color}">q{j}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    raise SystemExit(main())
