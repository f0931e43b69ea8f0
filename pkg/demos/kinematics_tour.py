"""Forward kinematics, the geometric Jacobian, and damped-least-squares IK
on the bundled arms.
"""

import numpy as np

from motionlab import samples
from motionlab.kinematics import IkParams, forward_kinematics, inverse_kinematics, jacobian
from motionlab.transforms import Pose

# A planar two-link arm: both links 1 m, revolute about z.
arm = samples.two_link_planar()
print("joints:", [j.name for j in arm.joints], "group:", arm.groups["default"].joints)

# Straight out along +x the tip sits at (2, 0, 0); bend the elbow back by 90
# degrees and it lands on (1, 1, 0).
for q in ([0.0, 0.0], [np.pi / 2, 0.0], [np.pi / 2, -np.pi / 2]):
    tip, _ = forward_kinematics(arm, "default", q)
    print(f"q={np.round(q, 3)} -> tip {np.round(tip.position, 6)}")

# The Jacobian's linear block is z x (tip - joint origin) per revolute joint.
J = jacobian(arm, "default", [0.0, 0.0])
print("jacobian at home:\n", np.round(J, 6))

# Drag the end-effector to (1, 1): position-only IK (orientation weight 0).
result = inverse_kinematics(
    arm, "default", Pose.from_xyz(1.0, 1.0, 0.0), seed=[0.1, 0.1],
    params=IkParams(orientation_weight=0.0),
)
print(f"IK success={result.success} q={np.round(result.positions, 5)} "
      f"pos_err={result.position_error:.2e} in {result.iterations} iterations")

# Full-pose IK on the six-axis arm, seeded far from the answer. Restarts kick
# in when the first descent stalls against a joint limit.
six = samples.six_dof_arm()
rng = np.random.default_rng(3)
from motionlab.robot import joint_space

space = joint_space(six, "default")
goal_q = space.sample(rng)
target, _ = forward_kinematics(six, "default", goal_q)
result = inverse_kinematics(six, "default", target, space.sample(rng), restarts=10, rng=rng)
tip, _ = forward_kinematics(six, "default", result.positions)
print(f"6-dof IK success={result.success}, reached within "
      f"{np.linalg.norm(tip.position - target.position):.2e} m of the target")
