"""Planning server: session handling over TCP and WebSocket, the authoritative
scene, planning workers, trajectory execution streaming, and mirror mode.

All scene mutations run on the event loop (single writer); planning runs on a
small thread pool against an immutable snapshot of the object set taken when
the request arrives, so edits during planning never affect an in-flight plan.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
import mimetypes
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http import HTTPStatus
from pathlib import Path

import numpy as np

from . import protocol
from .executor import Busy, MirrorSource, TrajectoryExecutor
from .kinematics import IkParams, inverse_kinematics
from .planning import (
    PLANNER_IDS,
    SUCCESS,
    MotionPlanRequest,
    MotionPlanResponse,
    PLANNING_FAILED,
    Trajectory,
    plan,
)
from .robot import DimensionMismatch, RobotModel, UnknownGroup, clamp_to_limits
from .scene import (
    CollisionObject,
    DuplicateId,
    PlanningScene,
    UnknownId,
    VersionEvicted,
)
from .shapes import InvalidShape, shape_from_dict
from .transforms import Pose

log = logging.getLogger("motionlab.server")

OUTBOUND_QUEUE_LIMIT = 1000
TRAJECTORY_CACHE = 64
IK_DRAG_RESTARTS = 3


@dataclass(eq=False)
class Session:
    id: int
    send_raw: object  # async callable(message dict)
    client_name: str = ""
    ready: bool = False
    last_acked_version: int = 0
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(OUTBOUND_QUEUE_LIMIT))
    closed: bool = False
    plan_cancel: object = None
    writer_task: object = None


class PlanningServer:
    def __init__(
        self,
        model: RobotModel,
        scene: PlanningScene,
        *,
        tcp_port: int = protocol.DEFAULT_TCP_PORT,
        ws_port: int = protocol.DEFAULT_WS_PORT,
        static_dir: str | Path | None = None,
        planner_workers: int = 2,
        seed: int | None = None,
        mirror_source: str | Path | None = None,
        playback_rate: float = 1.0,
    ):
        self.model = model
        self.scene = scene
        self.tcp_port = tcp_port
        self.ws_port = ws_port
        self.static_dir = Path(static_dir) if static_dir else None
        self.seed = 0 if seed is None else int(seed)
        self.executor = TrajectoryExecutor(playback_rate=playback_rate)
        self.mirror_source_path = mirror_source
        self._sessions: dict[int, Session] = {}
        self._session_ids = itertools.count(1)
        self._plan_seeds = itertools.count(0)
        self._trajectory_ids = itertools.count(1)
        self._trajectories: OrderedDict[int, Trajectory] = OrderedDict()
        self._pool = ThreadPoolExecutor(max_workers=planner_workers)
        self._tcp_server = None
        self._ws_server = None
        self._tasks: set[asyncio.Task] = set()
        self._mirror_task: asyncio.Task | None = None

    # -- lifecycle -----------------------------------------------------------

    async def start(self):
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, host="0.0.0.0", port=self.tcp_port
        )
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]

        import websockets.asyncio.server as ws_server

        self._ws_server = await ws_server.serve(
            self._handle_ws,
            host="0.0.0.0",
            port=self.ws_port,
            process_request=self._process_http,
            max_size=protocol.MAX_FRAME_BYTES,
        )
        self.ws_port = next(iter(self._ws_server.sockets)).getsockname()[1]
        log.info("listening: tcp=%d ws=%d", self.tcp_port, self.ws_port)

    async def stop(self):
        for session in list(self._sessions.values()):
            await self._close_session(
                session, protocol.error_message("server_shutdown", "server is shutting down")
            )
        for task in list(self._tasks):
            task.cancel()
        if self._mirror_task is not None:
            self._mirror_task.cancel()
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        self._pool.shutdown(wait=False, cancel_futures=True)

    async def serve_forever(self):
        await self.start()
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()

    def _spawn(self, coro) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    # -- transports -----------------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        async def send_raw(msg: dict):
            writer.write(protocol.encode_frame(msg))
            await writer.drain()

        session = self._register(send_raw)
        decoder = protocol.FrameDecoder()
        try:
            while not session.closed:
                data = await reader.read(65536)
                if not data:
                    break
                try:
                    messages = decoder.feed(data)
                except protocol.ProtocolError as exc:
                    await self._close_session(
                        session, protocol.error_message("bad_frame", str(exc))
                    )
                    break
                for msg in messages:
                    await self._dispatch(session, msg)
                    if session.closed:
                        break
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            await self._close_session(session)
            writer.close()

    async def _handle_ws(self, websocket):
        async def send_raw(msg: dict):
            await websocket.send(protocol.encode_message(msg).decode("utf-8"))

        session = self._register(send_raw)
        try:
            async for text in websocket:
                if isinstance(text, bytes):
                    text = text.decode("utf-8")
                try:
                    msg = protocol.decode_payload(text.encode("utf-8"))
                except protocol.ProtocolError as exc:
                    await self._close_session(
                        session, protocol.error_message("bad_frame", str(exc))
                    )
                    break
                await self._dispatch(session, msg)
                if session.closed:
                    break
        except Exception:
            pass
        finally:
            await self._close_session(session)
            try:
                await websocket.close()
            except Exception:
                pass

    async def _process_http(self, connection, request):
        """Serve the web console and the robot model over plain HTTP on the
        WebSocket port; the /ws path upgrades to the message stream."""
        path = request.path.split("?", 1)[0]
        if path == protocol.WS_PATH:
            return None
        if path == "/robot.json":
            import json

            return _http_response(json.dumps(self.model.to_dict()).encode(), "application/json")
        if self.static_dir is not None:
            rel = path.lstrip("/") or "index.html"
            candidate = (self.static_dir / rel).resolve()
            if candidate.is_file() and str(candidate).startswith(str(self.static_dir.resolve())):
                ctype = mimetypes.guess_type(candidate.name)[0] or "application/octet-stream"
                return _http_response(candidate.read_bytes(), ctype)
        return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")

    def _register(self, send_raw) -> Session:
        session = Session(id=next(self._session_ids), send_raw=send_raw)
        self._sessions[session.id] = session
        session.writer_task = self._spawn(self._writer_loop(session))
        return session

    async def _writer_loop(self, session: Session):
        try:
            while True:
                msg = await session.queue.get()
                if msg is None:
                    break
                await session.send_raw(msg)
        except (asyncio.CancelledError, ConnectionResetError, BrokenPipeError):
            pass
        except Exception:
            log.exception("writer for session %d failed", session.id)

    def _enqueue(self, session: Session, msg: dict):
        if session.closed:
            return
        try:
            session.queue.put_nowait(msg)
        except asyncio.QueueFull:
            # back-pressure overflow: the session is dropped
            log.warning("session %d outbound queue overflow, dropping", session.id)
            session.closed = True
            self._sessions.pop(session.id, None)
            if session.writer_task is not None:
                session.writer_task.cancel()

    async def _close_session(self, session: Session, final_msg: dict | None = None):
        if session.closed:
            return
        session.closed = True
        self._sessions.pop(session.id, None)
        if session.plan_cancel is not None:
            session.plan_cancel.set()
        if final_msg is not None:
            try:
                await session.send_raw(final_msg)
            except Exception:
                pass
        if session.writer_task is not None:
            session.writer_task.cancel()

    # -- message dispatch ------------------------------------------------------

    async def _dispatch(self, session: Session, msg: dict):
        try:
            protocol.validate_message(msg)
        except protocol.UnknownType as exc:
            self._enqueue(
                session,
                protocol.error_message("unknown_type", f"unknown message type {exc}", msg.get("id")),
            )
            return
        except protocol.MalformedJson as exc:
            await self._close_session(session, protocol.error_message("bad_message", str(exc)))
            return

        mtype = msg["type"]
        mid = msg.get("id")
        body = msg.get("body", {})

        if mtype == "hello":
            version = body.get("protocol_version")
            if version != protocol.PROTOCOL_VERSION:
                await self._close_session(
                    session,
                    protocol.error_message(
                        "protocol_version",
                        f"server speaks protocol {protocol.PROTOCOL_VERSION}, client sent {version}",
                        mid,
                    ),
                )
                return
            session.client_name = str(body.get("client_name", ""))
            session.ready = True
            return
        if not session.ready:
            await self._close_session(
                session, protocol.error_message("hello_required", "first message must be hello", mid)
            )
            return

        try:
            handler = {
                "snapshot_request": self._on_snapshot_request,
                "scene_op": self._on_scene_op,
                "robot_state": self._on_robot_state,
                "planners_request": self._on_planners_request,
                "plan_request": self._on_plan_request,
                "execute_request": self._on_execute_request,
                "mirror_set": self._on_mirror_set,
                "ik_request": self._on_ik_request,
            }.get(mtype)
            if handler is None:
                self._enqueue(
                    session,
                    protocol.error_message("unhandled", f"server does not accept {mtype}", mid),
                )
                return
            await handler(session, mid, body)
        except (DuplicateId, UnknownId, InvalidShape, UnknownGroup, DimensionMismatch, ValueError, KeyError) as exc:
            self._enqueue(
                session, protocol.error_message(_error_code(exc), f"{exc}", mid)
            )

    async def _on_snapshot_request(self, session: Session, mid, body):
        snapshot = self.scene.snapshot()
        session.last_acked_version = snapshot["version"]
        self._enqueue(session, protocol.message("snapshot", snapshot, id=mid))

    async def _on_scene_op(self, session: Session, mid, body):
        op = body.get("op")
        if op == "add":
            self.scene.add_object(CollisionObject.from_dict(body["object"]))
        elif op == "set_pose":
            self.scene.set_pose(body["id"], Pose.from_dict(body["pose"]))
        elif op == "resize":
            self.scene.resize_object(body["id"], shape_from_dict(body["shape"]))
        elif op == "remove":
            self.scene.remove_object(body["id"])
        else:
            raise ValueError(f"unknown scene op {op!r}")
        self._broadcast_scene_diffs()

    def _broadcast_scene_diffs(self):
        """Send every ready session its personal catch-up diff, so each
        scene_diff's from_version equals that receiver's known version."""
        for session in list(self._sessions.values()):
            if not session.ready:
                continue
            try:
                diff = self.scene.journal_since(session.last_acked_version)
            except VersionEvicted:
                snapshot = self.scene.snapshot()
                session.last_acked_version = snapshot["version"]
                self._enqueue(session, protocol.message("snapshot", snapshot))
                continue
            if diff.from_version == diff.to_version:
                continue
            session.last_acked_version = diff.to_version
            self._enqueue(session, protocol.message("scene_diff", diff.to_dict()))

    async def _on_robot_state(self, session: Session, mid, body):
        if self.executor.state.mirror_enabled:
            self._enqueue(
                session,
                protocol.error_message(
                    "mirror_enabled", "mirror mode is on; client joint states are ignored", mid
                ),
            )
            return
        positions = np.asarray(body["positions"], dtype=float)
        clamped = clamp_to_limits(self.model, self.scene.group, positions)
        if not np.allclose(clamped, positions):
            self._enqueue(
                session,
                protocol.error_message("clamped", "joint state clamped to limits", mid),
            )
        self._set_robot_state(clamped, exclude_session=session.id)

    def _set_robot_state(self, positions, exclude_session: int | None = None):
        self.scene.set_robot_state(positions)
        state_msg = protocol.message("robot_state", self.scene.robot_state.to_dict())
        for other in list(self._sessions.values()):
            if other.ready and other.id != exclude_session:
                self._enqueue(other, state_msg)

    async def _on_planners_request(self, session: Session, mid, body):
        self._enqueue(session, protocol.message("planners", {"planner_ids": list(PLANNER_IDS)}, id=mid))

    async def _on_plan_request(self, session: Session, mid, body):
        request = MotionPlanRequest.from_dict(body)
        self.model.group(request.group)  # UnknownGroup -> error reply
        if request.planner_id not in PLANNER_IDS:
            raise ValueError(f"unknown planner_id {request.planner_id!r}")
        if request.seed is None:
            request.seed = self.seed + next(self._plan_seeds)
        if session.plan_cancel is not None:
            session.plan_cancel.set()
        cancel = session.plan_cancel = _ThreadEvent()
        objects = list(self.scene.objects.values())  # immutable snapshot

        loop = asyncio.get_running_loop()

        def work() -> MotionPlanResponse:
            return plan(request, objects, self.model, should_stop=cancel.is_set)

        self._spawn(self._finish_plan(session, mid, loop.run_in_executor(self._pool, work), cancel))

    async def _finish_plan(self, session: Session, mid, future, cancel):
        try:
            response = await future
        except Exception as exc:  # worker crash: report, keep the session
            log.exception("planning worker failed")
            response = MotionPlanResponse(status=PLANNING_FAILED, detail=f"worker error: {exc}")
        if cancel.is_set() and response.status != SUCCESS:
            response = MotionPlanResponse(status=PLANNING_FAILED, detail="superseded or cancelled")
        body = response.to_dict()
        if response.status == SUCCESS:
            trajectory_id = next(self._trajectory_ids)
            self._trajectories[trajectory_id] = response.trajectory
            while len(self._trajectories) > TRAJECTORY_CACHE:
                self._trajectories.popitem(last=False)
            body["trajectory_id"] = trajectory_id
        self._enqueue(session, protocol.message("plan_response", body, id=mid))

    async def _on_execute_request(self, session: Session, mid, body):
        command = body.get("command", "start")
        if command == "stop":
            if self.executor.busy:
                self.executor.abort()
                self._enqueue(session, protocol.message("execute_status", {"status": "aborted"}, id=mid))
            else:
                self._enqueue(session, protocol.error_message("not_executing", "nothing to stop", mid))
            return
        trajectory_id = body.get("trajectory_id")
        trajectory = self._trajectories.get(trajectory_id)
        if trajectory is None:
            raise ValueError(f"unknown trajectory_id {trajectory_id!r}")
        if self.executor.busy:
            self._enqueue(
                session, protocol.error_message("busy", "an execution is already running", mid)
            )
            return
        self._enqueue(
            session,
            protocol.message(
                "execute_status", {"status": "accepted", "trajectory_id": trajectory_id}, id=mid
            ),
        )
        self._spawn(self._run_execution(session, mid, trajectory_id, trajectory))

    async def _run_execution(self, session: Session, mid, trajectory_id: int, trajectory):
        last_progress = -1.0

        def on_state(positions):
            self._set_robot_state(positions)

        def on_progress(fraction):
            nonlocal last_progress
            if fraction - last_progress >= 0.02 or fraction >= 1.0:
                last_progress = fraction
                self._enqueue(
                    session,
                    protocol.message(
                        "execute_status",
                        {"status": "executing", "progress": fraction, "trajectory_id": trajectory_id},
                        id=mid,
                    ),
                )

        try:
            await self.executor.execute(trajectory_id, trajectory, on_state, on_progress)
        except Busy:
            self._enqueue(session, protocol.error_message("busy", "executor busy", mid))
            return
        except Exception as exc:
            status = "aborted"
            self._enqueue(
                session,
                protocol.message(
                    "execute_status",
                    {"status": status, "trajectory_id": trajectory_id, "detail": str(exc)},
                    id=mid,
                ),
            )
            return
        self._enqueue(
            session,
            protocol.message(
                "execute_status", {"status": "done", "trajectory_id": trajectory_id}, id=mid
            ),
        )

    async def _on_mirror_set(self, session: Session, mid, body):
        enabled = bool(body.get("enabled"))
        self.executor.state.mirror_enabled = enabled
        self._enqueue(session, protocol.message("mirror_set", {"enabled": enabled}, id=mid))
        if enabled and self.mirror_source_path and self._mirror_task is None:
            source = MirrorSource(self.mirror_source_path)
            self._mirror_task = self._spawn(self._run_mirror(source))
        if not enabled and self._mirror_task is not None:
            self._mirror_task.cancel()
            self._mirror_task = None

    async def _run_mirror(self, source: MirrorSource):
        try:
            await source.run(lambda positions: self._set_robot_state(positions))
        except asyncio.CancelledError:
            pass
        finally:
            self._mirror_task = None

    async def _on_ik_request(self, session: Session, mid, body):
        group = body.get("group", self.scene.group)
        target = Pose.from_dict(body["target"])
        seed = body.get("seed")
        if seed is None:
            seed = self.scene.robot_state.positions
        params = IkParams(orientation_weight=body.get("orientation_weight", 1.0))
        rng = np.random.default_rng([self.seed, 0x1C])
        loop = asyncio.get_running_loop()

        def work():
            return inverse_kinematics(
                self.model, group, target, np.asarray(seed, dtype=float), params,
                restarts=IK_DRAG_RESTARTS, rng=rng,
            )

        result = await loop.run_in_executor(self._pool, work)
        self._enqueue(session, protocol.message("ik_response", result.to_dict(), id=mid))


class _ThreadEvent:
    """Tiny cancel flag readable from worker threads."""

    def __init__(self):
        self._flag = False

    def set(self):
        self._flag = True

    def is_set(self) -> bool:
        return self._flag


def _error_code(exc) -> str:
    return {
        DuplicateId: "duplicate_id",
        UnknownId: "unknown_id",
        InvalidShape: "invalid_shape",
        UnknownGroup: "unknown_group",
        DimensionMismatch: "dimension_mismatch",
    }.get(type(exc), "bad_request")


def _http_response(body: bytes, content_type: str):
    from websockets.datastructures import Headers
    from websockets.http11 import Response

    headers = Headers()
    headers["Content-Type"] = content_type
    headers["Content-Length"] = str(len(body))
    return Response(HTTPStatus.OK, "OK", headers, body)
