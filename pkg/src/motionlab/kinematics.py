"""Forward kinematics, geometric Jacobian, and damped-least-squares IK.

All operations are pure functions over an immutable RobotModel and are safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .robot import JointState, RobotModel, _as_positions, clamp_to_limits, joint_chain
from .transforms import (
    Pose,
    orientation_error,
    quat_from_axis_angle,
    quat_multiply,
    quat_rotate,
)

__all__ = [
    "JointState",
    "IkParams",
    "IkResult",
    "forward_kinematics",
    "link_poses_full",
    "jacobian",
    "inverse_kinematics",
    "chain_reach",
]


def forward_kinematics(
    model: RobotModel, group: str, q, base: Pose | None = None
) -> tuple[Pose, dict[str, Pose]]:
    """World pose of the group's tip link and of every link along the chain.

    q covers the group's actuated joints in base-to-tip order; fixed joints in
    the chain are composed in automatically.
    """
    q = _as_positions(model, group, q)
    g = model.group(group)
    pose = base if base is not None else Pose.identity()
    per_link = {g.base_link: pose}
    idx = 0
    for joint in joint_chain(model, group, include_fixed=True):
        pose = pose.compose(joint.origin)
        if joint.is_actuated:
            pose = pose.compose(_joint_motion(joint, q[idx]))
            idx += 1
        per_link[joint.child] = pose
    return per_link[g.tip_link], per_link


def _joint_motion(joint, value: float) -> Pose:
    if joint.type == "prismatic":
        return Pose(position=value * joint.axis)
    return Pose(orientation=quat_from_axis_angle(joint.axis, value))


@lru_cache(maxsize=64)
def _chain_cache(model: RobotModel, group: str):
    """Flattened chain data for the tight FK/Jacobian loop: per chain joint the
    origin translation/rotation, axis, and kind."""
    entries = []
    for joint in joint_chain(model, group, include_fixed=True):
        entries.append(
            (
                joint.origin.position,
                joint.origin.orientation,
                joint.axis,
                joint.type,
                joint.is_actuated,
            )
        )
    return tuple(entries)


def _fk_arrays(model: RobotModel, group: str, q: np.ndarray):
    """Tip position/quaternion plus per-actuated-joint world origins and axes,
    in one pass over raw arrays (no Pose allocation)."""
    p = np.zeros(3)
    rot = np.array([1.0, 0.0, 0.0, 0.0])
    origins = []
    axes = []
    kinds = []
    idx = 0
    for o_pos, o_quat, axis, jtype, actuated in _chain_cache(model, group):
        p = p + quat_rotate(rot, o_pos)
        rot = quat_multiply(rot, o_quat)
        if actuated:
            world_axis = quat_rotate(rot, axis)
            origins.append(p)
            axes.append(world_axis)
            kinds.append(jtype)
            value = q[idx]
            idx += 1
            if jtype == "prismatic":
                p = p + value * world_axis
            else:
                rot = quat_multiply(rot, quat_from_axis_angle(axis, value))
    return p, rot, origins, axes, kinds


def _jacobian_from_arrays(p_tip, origins, axes, kinds) -> np.ndarray:
    n = len(origins)
    J = np.zeros((6, n))
    for i in range(n):
        ax, ay, az = axes[i]
        if kinds[i] == "prismatic":
            J[0, i] = ax
            J[1, i] = ay
            J[2, i] = az
        else:
            rx = p_tip[0] - origins[i][0]
            ry = p_tip[1] - origins[i][1]
            rz = p_tip[2] - origins[i][2]
            J[0, i] = ay * rz - az * ry
            J[1, i] = az * rx - ax * rz
            J[2, i] = ax * ry - ay * rx
            J[3, i] = ax
            J[4, i] = ay
            J[5, i] = az
    return J


def link_poses_full(model: RobotModel, group: str, q, base: Pose | None = None) -> dict[str, Pose]:
    """World poses of every link in the model. Joints outside the group are
    held at zero (or at their lower limit if zero is out of range)."""
    q = _as_positions(model, group, q)
    values = {name: q[i] for i, name in enumerate(model.group(group).joints)}
    for joint in model.joints:
        if joint.is_actuated and joint.name not in values:
            lo = joint.limits.lower
            up = joint.limits.upper
            v = 0.0
            if lo is not None and not (lo <= 0.0 <= up):
                v = lo
            values[joint.name] = v

    poses = {model.root_link: base if base is not None else Pose.identity()}
    remaining = list(model.joints)
    while remaining:
        progressed = False
        rest = []
        for joint in remaining:
            if joint.parent in poses:
                pose = poses[joint.parent].compose(joint.origin)
                if joint.is_actuated:
                    pose = pose.compose(_joint_motion(joint, values[joint.name]))
                poses[joint.child] = pose
                progressed = True
            else:
                rest.append(joint)
        remaining = rest
        if not progressed:
            break
    return poses


def jacobian(model: RobotModel, group: str, q) -> np.ndarray:
    """Geometric Jacobian of the tip (6 x n): rows 0-2 linear, 3-5 angular.

    Revolute column i is (z_i x (p_tip - p_i); z_i); prismatic is (z_i; 0),
    with z_i the joint axis and p_i the joint origin, both in world frame.
    """
    q = _as_positions(model, group, q)
    g = model.group(group)
    pose = Pose.identity()
    origins = []
    axes = []
    kinds = []
    idx = 0
    for joint in joint_chain(model, group, include_fixed=True):
        pose = pose.compose(joint.origin)
        if joint.is_actuated:
            origins.append(pose.position)
            axes.append(pose.rotate(joint.axis))
            kinds.append(joint.type)
            pose = pose.compose(_joint_motion(joint, q[idx]))
            idx += 1
    p_tip = pose.position

    n = len(origins)
    J = np.zeros((6, n))
    for i in range(n):
        if kinds[i] == "prismatic":
            J[:3, i] = axes[i]
        else:
            J[:3, i] = np.cross(axes[i], p_tip - origins[i])
            J[3:, i] = axes[i]
    return J


@dataclass(frozen=True)
class IkParams:
    max_iterations: int = 200
    position_tolerance: float = 1e-4
    orientation_tolerance: float = 1e-3
    damping: float = 0.05
    step_scale: float = 0.5
    orientation_weight: float = 1.0
    max_step: float = 0.5  # per-iteration joint change cap, rad (or m)

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.damping <= 0.0:
            raise ValueError("damping must be positive")
        if not 0.0 < self.step_scale <= 1.0:
            raise ValueError("step_scale must be in (0, 1]")
        if self.orientation_weight < 0.0:
            raise ValueError("orientation_weight must be nonnegative")
        if self.max_step <= 0.0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True, eq=False)
class IkResult:
    success: bool
    positions: np.ndarray
    position_error: float
    orientation_error: float
    iterations: int
    reason: str | None = None  # "no_convergence" | "unreachable" on failure

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "positions": [float(v) for v in self.positions],
            "position_error": self.position_error,
            "orientation_error": self.orientation_error,
            "iterations": self.iterations,
            "reason": self.reason,
        }


def chain_reach(model: RobotModel, group: str) -> tuple[np.ndarray, float]:
    """Anchor point (first actuated joint origin, world frame) and an upper
    bound on how far the tip can get from it."""
    pose = Pose.identity()
    anchor = None
    reach = 0.0
    for joint in joint_chain(model, group, include_fixed=True):
        pose = pose.compose(joint.origin)
        if anchor is None:
            if joint.is_actuated:
                anchor = pose.position.copy()
        else:
            reach += float(np.linalg.norm(joint.origin.position))
        if anchor is not None and joint.type == "prismatic":
            reach += max(abs(joint.limits.lower), abs(joint.limits.upper))
    if anchor is None:
        anchor = pose.position.copy()
    return anchor, reach


def inverse_kinematics(
    model: RobotModel,
    group: str,
    target: Pose,
    seed,
    params: IkParams | None = None,
    *,
    restarts: int = 0,
    rng: np.random.Generator | None = None,
) -> IkResult:
    """Damped least squares: dq = J^T (J J^T + damping^2 I)^-1 e, stepped by
    step_scale and clamped to limits each iteration. The error stacks the
    position error with orientation_weight times the rotation-vector error;
    weight zero solves position-only IK.

    On failure returns the best state seen (reason "no_convergence"), or
    rejects immediately with reason "unreachable" if the target position lies
    beyond the chain's reach. restarts > 0 retries from uniform random in-limit
    seeds.
    """
    params = params or IkParams()

    anchor, reach = chain_reach(model, group)
    if np.linalg.norm(target.position - anchor) > reach + params.position_tolerance:
        q0 = clamp_to_limits(model, group, seed)
        pos_err, rot_err = _pose_errors(model, group, q0, target)
        return IkResult(False, q0, pos_err, rot_err, 0, reason="unreachable")

    best = _solve_dls(model, group, target, seed, params)
    if best.success or restarts <= 0:
        return best
    if rng is None:
        rng = np.random.default_rng(0)
    from .robot import JointSpace

    space = JointSpace(model, group)
    for _ in range(restarts):
        attempt = _solve_dls(model, group, target, space.sample(rng), params)
        if attempt.success:
            return attempt
        if attempt.position_error < best.position_error:
            best = attempt
    return best


def _pose_errors(model, group, q, target: Pose) -> tuple[float, float]:
    tip, _ = forward_kinematics(model, group, q)
    e_pos = target.position - tip.position
    e_rot = orientation_error(target.orientation, tip.orientation)
    return float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_rot))


def _solve_dls(model, group, target: Pose, seed, params: IkParams) -> IkResult:
    from .robot import joint_space
    from .transforms import quat_conjugate, rotation_vector

    w = params.orientation_weight
    space = joint_space(model, group)
    q = space.clamp(_as_positions(model, group, seed))
    t_pos = target.position
    t_quat = target.orientation

    def evaluate(state):
        p, rot, origins, axes, kinds = _fk_arrays(model, group, state)
        e_pos = t_pos - p
        e_rot = rotation_vector(quat_multiply(t_quat, quat_conjugate(rot)))
        pos_err = float(np.linalg.norm(e_pos))
        rot_err = float(np.linalg.norm(e_rot))
        cost = pos_err * pos_err + (w * rot_err) ** 2
        return p, origins, axes, kinds, e_pos, e_rot, pos_err, rot_err, cost

    p, origins, axes, kinds, e_pos, e_rot, pos_err, rot_err, cost = evaluate(q)
    boost = 1.0
    for it in range(params.max_iterations + 1):
        if pos_err < params.position_tolerance and (
            w == 0.0 or rot_err < params.orientation_tolerance
        ):
            return IkResult(True, q, pos_err, rot_err, it)
        if it == params.max_iterations:
            break

        J = _jacobian_from_arrays(p, origins, axes, kinds)
        if w == 0.0:
            J_eff = J[:3]
            e = e_pos
        else:
            # scale the angular rows consistently with the weighted residual
            J_eff = np.vstack([J[:3], w * J[3:]])
            e = np.concatenate([e_pos, w * e_rot])
        eye = np.eye(J_eff.shape[0])
        # error-proportional damping: heavy far away, ~damping/100 at the end,
        # so convergence stays quadratic near singular wrists
        lam2_base = cost + (0.01 * params.damping) ** 2

        # grow damping until the (scaled, step-capped, clamped) update reduces
        # the weighted residual; stalling ends the solve early
        improved = False
        for _ in range(8):
            lam2 = lam2_base * boost
            J_w = J_eff
            for _active_pass in range(2):
                dq = params.step_scale * (
                    J_w.T @ np.linalg.solve(J_w @ J_w.T + lam2 * eye, e)
                )
                # joints pinned at a limit and pushing outward contribute
                # nothing: drop their columns so the rest compensate
                pinned = ((q >= space.upper - 1e-12) & (dq > 0)) | (
                    (q <= space.lower + 1e-12) & (dq < 0)
                )
                if not pinned.any():
                    break
                J_w = J_w.copy()
                J_w[:, pinned] = 0.0
            biggest = float(np.max(np.abs(dq)))
            if biggest > params.max_step:
                dq *= params.max_step / biggest
            candidate = space.clamp(q + dq)
            trial = evaluate(candidate)
            if trial[-1] < cost:
                q = candidate
                p, origins, axes, kinds, e_pos, e_rot, pos_err, rot_err, cost = trial
                boost = max(1.0, boost / 9.0)
                improved = True
                break
            boost *= 9.0
        if not improved:
            return IkResult(False, q, pos_err, rot_err, it, reason="no_convergence")

    return IkResult(False, q, pos_err, rot_err, params.max_iterations, reason="no_convergence")
