"""Plan through the blocked corridor with both planners, shortcut the path,
time-parameterize it, and write a joint-position-vs-time SVG.
"""

import numpy as np

from motionlab import samples
from motionlab.cli import _trajectory_svg
from motionlab.planning import JointGoal, MotionPlanRequest, path_length, plan
from motionlab.robot import joint_space
from motionlab.scene import load_scene

arm = samples.two_link_planar()
scene = load_scene(samples.scene_path("blocked_corridor"), arm)
space = joint_space(arm, "default")

start = np.array([0.0, 0.0])
goal = np.array([2.4, 0.0])

# The sphere "pillar" blocks the straight-line sweep from start to goal; the
# arm has to fold its elbow to duck underneath.
for planner_id in ("rrt_connect", "prm"):
    request = MotionPlanRequest(
        group="default", start=start, goal=JointGoal(goal),
        planner_id=planner_id, seed=7, max_planning_time=5.0,
    )
    response = plan(request, scene, arm)
    print(f"{planner_id}: {response.status}, {response.waypoint_count} waypoints, "
          f"length {path_length(space, response.path):.2f} rad, "
          f"planned in {response.planning_time * 1000:.0f} ms")

    trajectory = response.trajectory
    print(f"  trajectory: {len(trajectory.points)} knots over {trajectory.duration:.2f} s "
          f"(velocity-limited trapezoids per segment)")

# Shortcutting matters: replan without it and compare joint-space length.
raw = plan(
    MotionPlanRequest(group="default", start=start, goal=JointGoal(goal),
                      planner_id="rrt_connect", seed=7, shortcut_iterations=0),
    scene, arm,
)
cut = plan(
    MotionPlanRequest(group="default", start=start, goal=JointGoal(goal),
                      planner_id="rrt_connect", seed=7, shortcut_iterations=200),
    scene, arm,
)
print(f"\nshortcutting: {path_length(space, raw.path):.2f} rad -> "
      f"{path_length(space, cut.path):.2f} rad")

with open("corridor_trajectory.svg", "w") as fh:
    fh.write(_trajectory_svg(cut.trajectory))
print("wrote corridor_trajectory.svg")
