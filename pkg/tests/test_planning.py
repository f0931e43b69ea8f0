import numpy as np
import pytest

from motionlab import samples
from motionlab.geometry import CollisionChecker, segment_valid
from motionlab.planning import (
    GOAL_UNREACHABLE_IK,
    INVALID_GOAL_STATE,
    INVALID_START_STATE,
    SUCCESS,
    JointGoal,
    MissingVelocityLimit,
    MotionPlanRequest,
    MotionPlanResponse,
    PoseGoal,
    Trajectory,
    path_length,
    plan,
    prm,
    rrt_connect,
    shortcut,
    time_parameterize,
)
from motionlab.robot import joint_space
from motionlab.scene import CollisionObject, PlanningScene
from motionlab.shapes import Sphere
from motionlab.transforms import Pose

P = Pose.from_xyz


def corridor_objects():
    return [CollisionObject(id="pillar", shape=Sphere(0.35), pose=P(0.5433537535613657, 1.398091506193838, 0.0))]


@pytest.fixture()
def corridor(two_link):
    checker = CollisionChecker(two_link, "default", corridor_objects())
    return checker


START = np.array([0.0, 0.0])
GOAL = np.array([2.4, 0.0])


def posthoc_valid(model, path, objects, step):
    return all(segment_valid(model, "default", a, b, objects, step) for a, b in zip(path, path[1:]))


class TestRrtConnect:
    def test_identical_start_goal(self, two_link, corridor):
        space = joint_space(two_link, "default")
        path = rrt_connect(space, START, START, corridor.state_valid, corridor.edge_valid)
        assert len(path) == 1

    def test_free_space_direct(self, two_link):
        checker = CollisionChecker(two_link, "default", [])
        space = joint_space(two_link, "default")
        path = rrt_connect(space, START, GOAL, checker.state_valid, checker.edge_valid)
        assert path is not None
        assert np.array_equal(path[0], START)
        assert np.array_equal(path[-1], GOAL)

    def test_blocked_corridor_posthoc_validity(self, two_link, corridor):
        space = joint_space(two_link, "default")
        assert not corridor.edge_valid(START, GOAL)  # direct interpolation blocked
        path = rrt_connect(
            space, START, GOAL, corridor.state_valid,
            lambda a, b: corridor.edge_valid(a, b, 0.05),
            rng=np.random.default_rng(4),
        )
        assert path is not None
        assert posthoc_valid(two_link, path, corridor_objects(), 0.05)

    def test_endpoints_exact(self, two_link, corridor):
        space = joint_space(two_link, "default")
        path = rrt_connect(
            space, START, GOAL, corridor.state_valid,
            lambda a, b: corridor.edge_valid(a, b, 0.05),
            rng=np.random.default_rng(1),
        )
        assert np.array_equal(path[0], START)
        assert np.array_equal(path[-1], GOAL)


class TestPrm:
    def test_identical_start_goal(self, two_link, corridor):
        space = joint_space(two_link, "default")
        path = prm(space, START, START, corridor.state_valid, corridor.edge_valid)
        assert len(path) == 1

    def test_seed_determinism(self, two_link, corridor):
        space = joint_space(two_link, "default")
        paths = [
            prm(
                space, START, GOAL, corridor.state_valid,
                lambda a, b: corridor.edge_valid(a, b, 0.05),
                rng=np.random.default_rng(9),
            )
            for _ in range(2)
        ]
        assert paths[0] is not None
        assert len(paths[0]) == len(paths[1])
        for a, b in zip(*paths):
            assert np.array_equal(a, b)

    def test_blocked_corridor(self, two_link, corridor):
        space = joint_space(two_link, "default")
        path = prm(
            space, START, GOAL, corridor.state_valid,
            lambda a, b: corridor.edge_valid(a, b, 0.05),
            rng=np.random.default_rng(2),
        )
        assert path is not None
        assert posthoc_valid(two_link, path, corridor_objects(), 0.05)


class TestShortcut:
    def test_two_waypoints_unchanged(self, two_link):
        checker = CollisionChecker(two_link, "default", [])
        path = [START, GOAL]
        assert shortcut(path, checker.edge_valid, 50) == path

    def test_collinear_collapse(self, two_link):
        checker = CollisionChecker(two_link, "default", [])
        path = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([2.0, 0.0])]
        out = shortcut(path, checker.edge_valid, 50, np.random.default_rng(0))
        assert len(out) == 2

    def test_length_never_increases(self, two_link, rng):
        checker = CollisionChecker(two_link, "default", [])
        space = joint_space(two_link, "default")
        for _ in range(10):
            path = [space.sample(rng) for _ in range(6)]
            before = path_length(space, path)
            out = shortcut(path, checker.edge_valid, 10, np.random.default_rng(1))
            after = path_length(space, out)
            assert after <= before + 1e-12
            assert np.array_equal(out[0], path[0])
            assert np.array_equal(out[-1], path[-1])

    def test_detour_shrinks(self, two_link):
        checker = CollisionChecker(two_link, "default", [])
        space = joint_space(two_link, "default")
        path = [
            np.array([0.0, 0.0]),
            np.array([1.5, 2.0]),
            np.array([-1.0, 2.5]),
            np.array([2.0, 0.5]),
            np.array([2.4, 0.0]),
        ]
        out = shortcut(path, checker.edge_valid, 50, np.random.default_rng(3))
        assert path_length(space, out) < path_length(space, path)

    def test_output_valid_in_clutter(self, two_link, corridor, rng):
        space = joint_space(two_link, "default")
        path = rrt_connect(
            space, START, GOAL, corridor.state_valid,
            lambda a, b: corridor.edge_valid(a, b, 0.05),
            rng=np.random.default_rng(7),
        )
        out = shortcut(path, lambda a, b: corridor.edge_valid(a, b, 0.05), 100,
                       np.random.default_rng(8))
        assert posthoc_valid(two_link, out, corridor_objects(), 0.05)


class TestTimeParameterize:
    def test_single_waypoint(self, two_link):
        traj = time_parameterize([np.zeros(2)], two_link, "default")
        assert len(traj.points) == 1
        assert traj.points[0].time_from_start == 0.0
        assert np.allclose(traj.points[0].velocities, 0.0)

    def test_trapezoid_closed_form(self, two_link):
        # dq=(1, 0), vmax=1.5 from the urdf... use a unit-vmax joint via scaling:
        # distance 1 rad at vmax 1.5, accel 2: v^2/a = 1.125 > 1 -> triangular
        path = [np.zeros(2), np.array([1.0, 0.0])]
        traj = time_parameterize(path, two_link, "default", acceleration=2.0)
        expected = 2 * np.sqrt(1.0 / 2.0)  # triangular: 2*sqrt(D/a)
        assert traj.duration == pytest.approx(expected, abs=1e-12)
        assert np.allclose(traj.points[-1].positions, [1.0, 0.0])
        assert np.allclose(traj.points[0].velocities, 0.0)
        assert np.allclose(traj.points[-1].velocities, 0.0)

    def test_trapezoid_with_cruise(self, two_link):
        # distance 3 rad: vmax reached (vmax^2/a = 1.125 < 3)
        path = [np.zeros(2), np.array([3.0, 0.0])]
        traj = time_parameterize(path, two_link, "default", acceleration=2.0)
        v = 1.5
        expected = 3.0 / v + v / 2.0
        assert traj.duration == pytest.approx(expected, abs=1e-12)

    def test_velocity_limits_respected_densely(self, two_link, rng):
        space = joint_space(two_link, "default")
        path = [space.sample(rng) for _ in range(5)]
        traj = time_parameterize(path, two_link, "default")
        ts = np.arange(0.0, traj.duration, 0.001)
        prev = traj.sample(0.0)
        for t in ts[1:]:
            cur = traj.sample(t)
            vel = np.abs(cur - prev) / 0.001
            assert np.all(vel <= space.max_velocity + 1e-9)
            prev = cur

    def test_knot_positions_equal_waypoints_exactly(self, two_link, rng):
        space = joint_space(two_link, "default")
        path = [space.sample(rng) for _ in range(4)]
        traj = time_parameterize(path, two_link, "default")
        knots = {tuple(p.positions) for p in traj.points}
        for q in path:
            assert tuple(q) in knots

    def test_times_strictly_increasing(self, two_link, rng):
        space = joint_space(two_link, "default")
        path = [space.sample(rng) for _ in range(6)]
        traj = time_parameterize(path, two_link, "default")
        times = [p.time_from_start for p in traj.points]
        assert times[0] == 0.0
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_doubling_vmax_never_slower(self, rng):
        from motionlab.robot import parse_urdf, serialize_urdf
        import re

        base = samples.urdf_path("two_link_planar").read_text()
        fast_text = base.replace('velocity="1.5"', 'velocity="3.0"')
        slow = samples.two_link_planar()
        fast = parse_urdf(fast_text, cylinders_as_capsules=True)
        for _ in range(10):
            path = [rng.uniform(-2.5, 2.5, 2) for _ in range(4)]
            t_slow = time_parameterize(path, slow, "default").duration
            t_fast = time_parameterize(path, fast, "default").duration
            assert t_fast <= t_slow + 1e-12

    def test_wire_roundtrip(self, two_link, rng):
        space = joint_space(two_link, "default")
        path = [space.sample(rng) for _ in range(3)]
        traj = time_parameterize(path, two_link, "default")
        again = Trajectory.from_dict(traj.to_dict())
        assert again.duration == traj.duration
        for a, b in zip(traj.points, again.points):
            assert np.array_equal(a.positions, b.positions)
            assert np.array_equal(a.velocities, b.velocities)


class TestPlan:
    def scene(self, model, objects=()):
        scene = PlanningScene(model)
        for obj in objects:
            scene.add_object(obj)
        return scene

    def test_free_space_joint_goal(self, two_link):
        request = MotionPlanRequest(
            group="default", start=START, goal=JointGoal([np.pi / 2, 0.0]), seed=0
        )
        response = plan(request, self.scene(two_link), two_link)
        assert response.status == SUCCESS
        assert np.array_equal(response.path[0], START)
        assert np.array_equal(response.path[-1], [np.pi / 2, 0.0])
        assert response.waypoint_count == len(response.path)
        assert response.trajectory is not None

    def test_start_in_collision(self, two_link):
        request = MotionPlanRequest(group="default", start=START, goal=JointGoal([2.4, 0.0]))
        scene = self.scene(
            two_link, [CollisionObject(id="blob", shape=Sphere(0.4), pose=P(1.0, 0.0, 0.0))]
        )
        response = plan(request, scene, two_link)
        assert response.status == INVALID_START_STATE
        assert response.path is None

    def test_goal_in_collision(self, two_link):
        request = MotionPlanRequest(group="default", start=[np.pi / 2, 0.0], goal=JointGoal([0.0, 0.0]))
        scene = self.scene(
            two_link, [CollisionObject(id="blob", shape=Sphere(0.4), pose=P(1.0, 0.0, 0.0))]
        )
        response = plan(request, scene, two_link)
        assert response.status == INVALID_GOAL_STATE

    def test_pose_goal_beyond_reach(self, two_link):
        request = MotionPlanRequest(
            group="default",
            start=START,
            goal=PoseGoal(pose=P(5.0, 0.0, 0.0), orientation_weight=0.0),
        )
        response = plan(request, self.scene(two_link), two_link)
        assert response.status == GOAL_UNREACHABLE_IK

    def test_pose_goal_success(self, two_link):
        request = MotionPlanRequest(
            group="default",
            start=START,
            goal=PoseGoal(pose=P(1.0, 1.0, 0.0), orientation_weight=0.0, position_tolerance=1e-3),
            seed=0,
        )
        response = plan(request, self.scene(two_link), two_link)
        assert response.status == SUCCESS
        from motionlab.kinematics import forward_kinematics

        tip, _ = forward_kinematics(two_link, "default", response.path[-1])
        assert np.linalg.norm(tip.position - [1, 1, 0]) < 1e-3

    @pytest.mark.parametrize("planner_id", ["rrt_connect", "prm"])
    def test_corridor_both_planners(self, two_link, planner_id):
        request = MotionPlanRequest(
            group="default", start=START, goal=JointGoal(GOAL),
            planner_id=planner_id, seed=5, max_planning_time=5.0,
        )
        scene = self.scene(two_link, corridor_objects())
        response = plan(request, scene, two_link)
        assert response.status == SUCCESS
        assert posthoc_valid(two_link, response.path, corridor_objects(), 0.025)

    def test_seeded_determinism_bit_for_bit(self, two_link):
        request = MotionPlanRequest(
            group="default", start=START, goal=JointGoal(GOAL), planner_id="rrt_connect",
            seed=11, max_planning_time=5.0,
        )
        scene = self.scene(two_link, corridor_objects())
        a = plan(request, scene, two_link).to_dict()
        b = plan(request, scene, two_link).to_dict()
        a.pop("planning_time")
        b.pop("planning_time")
        assert a == b

    def test_unknown_planner_reports_failure(self, two_link):
        request = MotionPlanRequest(group="default", start=START, goal=JointGoal(GOAL), planner_id="astar")
        response = plan(request, self.scene(two_link), two_link)
        assert response.status == "PLANNING_FAILED"

    def test_status_invariant(self, two_link):
        ok = plan(
            MotionPlanRequest(group="default", start=START, goal=JointGoal([1.0, 1.0]), seed=0),
            self.scene(two_link), two_link,
        )
        assert (ok.status == SUCCESS) == (ok.path is not None and ok.trajectory is not None)
        assert ok.waypoint_count == len(ok.path)

    def test_missing_velocity_limit_error(self):
        # hand-built model sidestepping the parser's velocity validation
        from motionlab.robot import Group, Joint, JointLimits, Link, RobotModel

        model = RobotModel(
            name="broken",
            links=(Link("a"), Link("b")),
            joints=(
                Joint(
                    name="j1",
                    type="revolute",
                    parent="a",
                    child="b",
                    origin=Pose.identity(),
                    axis=np.array([0.0, 0.0, 1.0]),
                    limits=JointLimits(lower=-1.0, upper=1.0, max_velocity=-1.0),
                ),
            ),
            root_link="a",
            groups={"default": Group("default", "a", "b", ("j1",), ("j1",))},
        )
        with pytest.raises(MissingVelocityLimit):
            time_parameterize([np.zeros(1), np.ones(1)], model, "default")
