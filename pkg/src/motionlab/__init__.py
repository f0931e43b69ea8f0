"""Interactive motion planning: URDF kinematics, collision checking,
sampling-based planners, and a synchronized planning-scene server."""

from .transforms import Pose
from .shapes import Box, Capsule, Cylinder, InvalidShape, Sphere
from .robot import (
    DanglingReference,
    DimensionMismatch,
    JointSpace,
    JointState,
    KinematicLoop,
    MalformedXml,
    MissingLimit,
    RobotModel,
    UnknownGroup,
    clamp_to_limits,
    joint_chain,
    parse_urdf,
    parse_urdf_file,
    serialize_urdf,
)
from .kinematics import IkParams, IkResult, forward_kinematics, inverse_kinematics, jacobian
from .geometry import (
    CollisionChecker,
    CollisionReport,
    robot_in_collision,
    segment_valid,
    shape_distance,
)
from .scene import (
    CollisionObject,
    DuplicateId,
    PlanningScene,
    SceneDiff,
    SceneReplica,
    UnknownId,
    VersionEvicted,
    load_scene,
    save_scene,
)
from .planning import (
    JointGoal,
    MotionPlanRequest,
    MotionPlanResponse,
    PoseGoal,
    Trajectory,
    plan,
    prm,
    rrt_connect,
    shortcut,
    time_parameterize,
)

__version__ = "0.1.0"
