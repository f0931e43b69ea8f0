"""Sampling-based motion planning over a scene snapshot: RRT-Connect and a
k-nearest PRM, random shortcutting, and trapezoidal time parameterization.

Both planners are deterministic given a seed and report paths whose every
consecutive pair passes the discretized edge check at the request's edge_step.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from .geometry import DEFAULT_EDGE_STEP, CollisionChecker
from .kinematics import IkParams, inverse_kinematics
from .robot import JointSpace, RobotModel, clamp_to_limits, wrap_angle
from .transforms import Pose

PLANNER_IDS = ("rrt_connect", "prm")

SUCCESS = "SUCCESS"
INVALID_START_STATE = "INVALID_START_STATE"
INVALID_GOAL_STATE = "INVALID_GOAL_STATE"
GOAL_UNREACHABLE_IK = "GOAL_UNREACHABLE_IK"
TIMED_OUT = "TIMED_OUT"
PLANNING_FAILED = "PLANNING_FAILED"

DEFAULT_ACCELERATION = 2.0  # rad/s^2 (URDF carries no acceleration data)
POSE_GOAL_IK_ATTEMPTS = 10


class MissingVelocityLimit(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class JointGoal:
    positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float).reshape(-1))

    def to_dict(self):
        return {"joint": [float(v) for v in self.positions]}


@dataclass(frozen=True)
class PoseGoal:
    pose: Pose
    position_tolerance: float = 1e-4
    orientation_tolerance: float = 1e-3
    orientation_weight: float = 1.0

    def to_dict(self):
        return {
            "pose": self.pose.to_dict(),
            "position_tolerance": self.position_tolerance,
            "orientation_tolerance": self.orientation_tolerance,
            "orientation_weight": self.orientation_weight,
        }


def goal_from_dict(d: dict):
    if "joint" in d:
        return JointGoal(d["joint"])
    if "pose" in d:
        return PoseGoal(
            pose=Pose.from_dict(d["pose"]),
            position_tolerance=d.get("position_tolerance", 1e-4),
            orientation_tolerance=d.get("orientation_tolerance", 1e-3),
            orientation_weight=d.get("orientation_weight", 1.0),
        )
    raise ValueError("goal needs a 'joint' or 'pose' field")


@dataclass(eq=False)
class MotionPlanRequest:
    group: str
    start: np.ndarray
    goal: JointGoal | PoseGoal
    planner_id: str = "rrt_connect"
    num_attempts: int = 1
    max_planning_time: float = 5.0
    edge_step: float = DEFAULT_EDGE_STEP
    shortcut_iterations: int = 100
    seed: int | None = None

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float).reshape(-1)
        if self.num_attempts < 1:
            raise ValueError("num_attempts must be >= 1")
        if self.max_planning_time <= 0.0:
            raise ValueError("max_planning_time must be positive")
        if self.shortcut_iterations < 0:
            raise ValueError("shortcut_iterations must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "start": [float(v) for v in self.start],
            "goal": self.goal.to_dict(),
            "planner_id": self.planner_id,
            "num_attempts": self.num_attempts,
            "max_planning_time": self.max_planning_time,
            "edge_step": self.edge_step,
            "shortcut_iterations": self.shortcut_iterations,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "MotionPlanRequest":
        return MotionPlanRequest(
            group=d["group"],
            start=d["start"],
            goal=goal_from_dict(d["goal"]),
            planner_id=d.get("planner_id", "rrt_connect"),
            num_attempts=d.get("num_attempts", 1),
            max_planning_time=d.get("max_planning_time", 5.0),
            edge_step=d.get("edge_step", DEFAULT_EDGE_STEP),
            shortcut_iterations=d.get("shortcut_iterations", 100),
            seed=d.get("seed"),
        )


@dataclass(eq=False)
class TrajectoryPoint:
    time_from_start: float
    positions: np.ndarray
    velocities: np.ndarray

    def to_dict(self):
        return {
            "time_from_start": self.time_from_start,
            "positions": [float(v) for v in self.positions],
            "velocities": [float(v) for v in self.velocities],
        }


@dataclass(eq=False)
class Trajectory:
    group: str
    points: list

    @property
    def duration(self) -> float:
        return self.points[-1].time_from_start if self.points else 0.0

    def sample(self, t: float) -> np.ndarray:
        """Positions at time t, linearly interpolated between knots and clamped
        to the trajectory's time range."""
        pts = self.points
        if t <= pts[0].time_from_start:
            return pts[0].positions.copy()
        if t >= pts[-1].time_from_start:
            return pts[-1].positions.copy()
        for a, b in zip(pts, pts[1:]):
            if t <= b.time_from_start:
                span = b.time_from_start - a.time_from_start
                u = (t - a.time_from_start) / span
                return a.positions + u * (b.positions - a.positions)
        return pts[-1].positions.copy()

    def to_dict(self) -> dict:
        return {"group": self.group, "points": [p.to_dict() for p in self.points]}

    @staticmethod
    def from_dict(d: dict) -> "Trajectory":
        return Trajectory(
            group=d["group"],
            points=[
                TrajectoryPoint(
                    time_from_start=p["time_from_start"],
                    positions=np.asarray(p["positions"], dtype=float),
                    velocities=np.asarray(p["velocities"], dtype=float),
                )
                for p in d["points"]
            ],
        )


@dataclass(eq=False)
class MotionPlanResponse:
    status: str
    path: list | None = None
    trajectory: Trajectory | None = None
    planning_time: float = 0.0
    waypoint_count: int = 0
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "path": None if self.path is None else [[float(v) for v in q] for q in self.path],
            "trajectory": None if self.trajectory is None else self.trajectory.to_dict(),
            "planning_time": self.planning_time,
            "waypoint_count": self.waypoint_count,
            "detail": self.detail,
        }

    @staticmethod
    def from_dict(d: dict) -> "MotionPlanResponse":
        return MotionPlanResponse(
            status=d["status"],
            path=None
            if d.get("path") is None
            else [np.asarray(q, dtype=float) for q in d["path"]],
            trajectory=None
            if d.get("trajectory") is None
            else Trajectory.from_dict(d["trajectory"]),
            planning_time=d.get("planning_time", 0.0),
            waypoint_count=d.get("waypoint_count", 0),
            detail=d.get("detail", ""),
        )


# ---------------------------------------------------------------------------
# planners

class _Tree:
    def __init__(self, root: np.ndarray):
        self.nodes = [np.asarray(root, dtype=float)]
        self.parents = [-1]

    def nearest(self, q: np.ndarray, space: JointSpace) -> int:
        stacked = np.stack(self.nodes)
        d = stacked - q
        if space.wraps.any():
            d = np.where(space.wraps, wrap_angle(d), d)
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def add(self, q: np.ndarray, parent: int) -> int:
        self.nodes.append(q)
        self.parents.append(parent)
        return len(self.nodes) - 1

    def path_to_root(self, index: int) -> list[np.ndarray]:
        out = []
        while index >= 0:
            out.append(self.nodes[index])
            index = self.parents[index]
        return out


_TRAPPED, _ADVANCED, _REACHED = 0, 1, 2


def rrt_connect(
    space: JointSpace,
    start: np.ndarray,
    goal: np.ndarray,
    state_valid,
    edge_valid,
    *,
    step: float = 0.3,
    max_iterations: int = 5000,
    rng: np.random.Generator | None = None,
    should_stop=None,
) -> list[np.ndarray] | None:
    """Bidirectional RRT alternating extend/connect with tree swap."""
    rng = rng if rng is not None else np.random.default_rng(0)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if space.distance(start, goal) == 0.0:
        return [start]
    if edge_valid(start, goal):
        return [start, goal]

    def extend(tree: _Tree, target: np.ndarray):
        near_idx = tree.nearest(target, space)
        near = tree.nodes[near_idx]
        dist = space.distance(near, target)
        if dist <= step:
            q_new = target
            status = _REACHED
        else:
            q_new = space.interpolate(near, target, step / dist)
            status = _ADVANCED
        if not state_valid(q_new) or not edge_valid(near, q_new):
            return _TRAPPED, -1
        return status, tree.add(q_new, near_idx)

    tree_a, tree_b = _Tree(start), _Tree(goal)
    a_is_start = True
    for _ in range(max_iterations):
        if should_stop is not None and should_stop():
            return None
        q_rand = space.sample(rng)
        status, new_idx = extend(tree_a, q_rand)
        if status != _TRAPPED:
            q_new = tree_a.nodes[new_idx]
            status_b, idx_b = extend(tree_b, q_new)
            while status_b == _ADVANCED:
                status_b, idx_b = extend(tree_b, q_new)
            if status_b == _REACHED:
                part_a = tree_a.path_to_root(new_idx)[::-1]
                part_b = tree_b.path_to_root(idx_b)
                path = part_a + part_b[1:] if a_is_start else part_b[::-1] + part_a[::-1][1:]
                return path
        tree_a, tree_b = tree_b, tree_a
        a_is_start = not a_is_start
    return None


def prm(
    space: JointSpace,
    start: np.ndarray,
    goal: np.ndarray,
    state_valid,
    edge_valid,
    *,
    num_samples: int = 500,
    k_neighbors: int = 10,
    rng: np.random.Generator | None = None,
    should_stop=None,
) -> list[np.ndarray] | None:
    """k-nearest probabilistic roadmap with lazy edge validation during the
    graph search. Roadmap construction is seed-deterministic."""
    rng = rng if rng is not None else np.random.default_rng(0)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if space.distance(start, goal) == 0.0:
        return [start]
    if edge_valid(start, goal):
        return [start, goal]

    nodes = [start, goal]
    budget = 20 * num_samples
    while len(nodes) < num_samples + 2 and budget > 0:
        budget -= 1
        if should_stop is not None and budget % 64 == 0 and should_stop():
            return None
        q = space.sample(rng)
        if state_valid(q):
            nodes.append(q)

    stacked = np.stack(nodes)
    n = len(nodes)
    neighbors: list[np.ndarray] = []
    for i in range(n):
        diff = stacked - stacked[i]
        if space.wraps.any():
            diff = np.where(space.wraps, wrap_angle(diff), diff)
        dists = np.einsum("ij,ij->i", diff, diff)
        order = np.argsort(dists, kind="stable")
        neighbors.append(order[1 : k_neighbors + 1])

    adjacency: dict[int, list[int]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in neighbors[i]:
            j = int(j)
            if j not in adjacency[i]:
                adjacency[i].append(j)
            if i not in adjacency[j]:
                adjacency[j].append(i)

    edge_status: dict[tuple[int, int], bool] = {}

    def edge_key(i, j):
        return (i, j) if i < j else (j, i)

    def search() -> list[int] | None:
        # Dijkstra over edges not yet known invalid
        dist = {0: 0.0}
        prev: dict[int, int] = {}
        heap = [(0.0, 0)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == 1:
                path = [1]
                while path[-1] != 0:
                    path.append(prev[path[-1]])
                return path[::-1]
            for v in adjacency[u]:
                if edge_status.get(edge_key(u, v)) is False:
                    continue
                nd = d + space.distance(nodes[u], nodes[v])
                if nd < dist.get(v, np.inf) - 1e-15:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        return None

    while True:
        if should_stop is not None and should_stop():
            return None
        index_path = search()
        if index_path is None:
            return None
        ok = True
        for u, v in zip(index_path, index_path[1:]):
            if should_stop is not None and should_stop():
                return None
            key = edge_key(u, v)
            status = edge_status.get(key)
            if status is None:
                status = edge_valid(nodes[u], nodes[v])
                edge_status[key] = status
            if not status:
                ok = False
                break
        if ok:
            return [nodes[i] for i in index_path]


def path_length(space: JointSpace, path) -> float:
    return float(sum(space.distance(a, b) for a, b in zip(path, path[1:])))


def shortcut(
    path: list[np.ndarray],
    edge_valid,
    iterations: int = 100,
    rng: np.random.Generator | None = None,
) -> list[np.ndarray]:
    """Randomly splice out waypoint subsequences whose direct edge is valid.
    Endpoints are preserved; on any internal failure the input is returned."""
    if iterations <= 0 or len(path) <= 2:
        return list(path)
    rng = rng if rng is not None else np.random.default_rng(0)
    out = list(path)
    for _ in range(iterations):
        if len(out) <= 2:
            break
        i = int(rng.integers(0, len(out) - 2))
        j = int(rng.integers(i + 2, len(out)))
        if edge_valid(out[i], out[j]):
            out = out[: i + 1] + out[j:]
    for a, b in zip(out, out[1:]):
        if not edge_valid(a, b):
            return list(path)
    return out


# ---------------------------------------------------------------------------
# time parameterization

def _trapezoid(distance: float, v_max: float, accel: float) -> tuple[float, float, float]:
    """Durations (t_accel, t_cruise, total) for a rest-to-rest trapezoid."""
    if distance <= 0.0:
        return 0.0, 0.0, 0.0
    if distance <= v_max * v_max / accel:
        t_acc = np.sqrt(distance / accel)
        return t_acc, 0.0, 2.0 * t_acc
    t_acc = v_max / accel
    t_cruise = (distance - v_max * t_acc) / v_max
    return t_acc, t_cruise, 2.0 * t_acc + t_cruise


def time_parameterize(
    path,
    model: RobotModel,
    group: str,
    *,
    acceleration: float = DEFAULT_ACCELERATION,
) -> Trajectory:
    """Trapezoidal profile per segment over the normalized path parameter,
    with the most velocity-constrained joint binding. Knot positions at
    waypoint times equal the waypoints exactly; boundary velocities are zero.
    """
    if len(path) == 0:
        raise ValueError("path must be nonempty")
    space = JointSpace(model, group)
    if np.any(~np.isfinite(space.max_velocity)) or np.any(space.max_velocity <= 0.0):
        raise MissingVelocityLimit(group)

    points = [TrajectoryPoint(0.0, np.asarray(path[0], dtype=float), np.zeros(space.n))]
    t0 = 0.0
    for q0, q1 in zip(path, path[1:]):
        q0 = np.asarray(q0, dtype=float)
        q1 = np.asarray(q1, dtype=float)
        delta = space.difference(q0, q1)
        moving = np.abs(delta) > 0.0
        if not moving.any():
            continue
        # path-parameter limits: s' <= min(v_j / |d_j|), s'' <= min(a / |d_j|)
        s_vel = float(np.min(space.max_velocity[moving] / np.abs(delta[moving])))
        s_acc = float(np.min(acceleration / np.abs(delta[moving])))
        t_acc, t_cruise, total = _trapezoid(1.0, s_vel, s_acc)
        peak = s_acc * t_acc  # path-parameter peak velocity

        def emit(dt: float, s: float, s_dot: float, positions=None):
            points.append(
                TrajectoryPoint(
                    t0 + dt,
                    q0 + s * delta if positions is None else positions,
                    s_dot * delta,
                )
            )

        s_at_acc = 0.5 * s_acc * t_acc * t_acc
        if t_cruise > 0.0:
            emit(t_acc, s_at_acc, peak)
            emit(t_acc + t_cruise, s_at_acc + peak * t_cruise, peak)
        else:
            emit(t_acc, s_at_acc, peak)
        emit(total, 1.0, 0.0, positions=q1.copy())
        t0 += total
    return Trajectory(group=group, points=points)


# ---------------------------------------------------------------------------
# top-level planning

def _resolve_pose_goal(model, group, goal: PoseGoal, start, checker, rng):
    params = IkParams(
        position_tolerance=goal.position_tolerance,
        orientation_tolerance=goal.orientation_tolerance,
        orientation_weight=goal.orientation_weight,
    )
    space = JointSpace(model, group)
    reachable = None
    for attempt in range(POSE_GOAL_IK_ATTEMPTS):
        seed = start if attempt == 0 else space.sample(rng)
        result = inverse_kinematics(model, group, goal.pose, seed, params)
        if not result.success:
            continue
        reachable = result.positions
        if checker.state_valid(result.positions):
            return result.positions, None
    if reachable is None:
        return None, GOAL_UNREACHABLE_IK
    return None, INVALID_GOAL_STATE


def plan(
    request: MotionPlanRequest,
    scene,
    model: RobotModel,
    *,
    self_collision: bool = False,
    padding: float = 0.0,
    should_stop=None,
) -> MotionPlanResponse:
    """Plan over an immutable scene snapshot. `scene` is a PlanningScene or an
    iterable of collision objects. Outcomes are encoded in the response status;
    this function does not raise for planning-level failures."""
    objects = list(scene.objects.values()) if hasattr(scene, "objects") else list(scene)
    try:
        return _plan(request, objects, model, self_collision, padding, should_stop)
    except Exception as exc:  # crash isolation: workers report, never propagate
        return MotionPlanResponse(status=PLANNING_FAILED, detail=f"{type(exc).__name__}: {exc}")


def _plan(request, objects, model, self_collision, padding, should_stop):
    group = request.group
    model.group(group)  # raises UnknownGroup early
    checker = CollisionChecker(
        model, group, objects, self_collision=self_collision, padding=padding
    )
    space = checker.space
    seed = request.seed if request.seed is not None else 0

    start = clamp_to_limits(model, group, request.start)
    if not checker.state_valid(start):
        return MotionPlanResponse(status=INVALID_START_STATE, detail="start state in collision")

    if isinstance(request.goal, PoseGoal):
        ik_rng = np.random.default_rng([seed, 0xA11CE])
        goal, failure = _resolve_pose_goal(
            model, group, request.goal, start, checker, ik_rng
        )
        if failure is not None:
            return MotionPlanResponse(status=failure, detail="pose goal could not be resolved")
    else:
        goal = clamp_to_limits(model, group, request.goal.positions)
        if not checker.state_valid(goal):
            return MotionPlanResponse(status=INVALID_GOAL_STATE, detail="goal state in collision")

    # plan against half the requested resolution: shortcutting pulls paths
    # taut against obstacles, and edges that merely pass at edge_step can
    # graze into collision under a finer audit. Checking at edge_step/2 makes
    # the half-step soundness sweep a subset of what was already verified.
    check_step = request.edge_step / 2.0

    def edge_valid(q_a, q_b):
        return checker.edge_valid(q_a, q_b, check_step)

    deadline = time.monotonic() + request.max_planning_time

    def stop():
        if should_stop is not None and should_stop():
            return True
        return time.monotonic() > deadline

    t_begin = time.perf_counter()
    path = None
    timed_out = False
    for attempt in range(request.num_attempts):
        if should_stop is not None and should_stop():
            break
        if time.monotonic() > deadline:
            timed_out = True
            break
        rng = np.random.default_rng([seed, attempt])
        if request.planner_id == "rrt_connect":
            path = rrt_connect(
                space, start, goal, checker.state_valid, edge_valid, rng=rng, should_stop=stop
            )
        elif request.planner_id == "prm":
            path = prm(
                space, start, goal, checker.state_valid, edge_valid, rng=rng, should_stop=stop
            )
        else:
            return MotionPlanResponse(
                status=PLANNING_FAILED, detail=f"unknown planner {request.planner_id!r}"
            )
        if path is not None:
            break
    if path is None:
        elapsed = time.perf_counter() - t_begin
        status = TIMED_OUT if (timed_out or time.monotonic() > deadline) else PLANNING_FAILED
        return MotionPlanResponse(status=status, planning_time=elapsed, detail="no path found")

    if request.shortcut_iterations > 0:
        path = shortcut(
            path, edge_valid, request.shortcut_iterations, np.random.default_rng([seed, 0x5C])
        )
    trajectory = time_parameterize(path, model, group)
    elapsed = time.perf_counter() - t_begin
    return MotionPlanResponse(
        status=SUCCESS,
        path=[np.asarray(q, dtype=float) for q in path],
        trajectory=trajectory,
        planning_time=elapsed,
        waypoint_count=len(path),
    )
