// Quaternion / pose math matching the server's conventions:
// quaternions are [w, x, y, z], poses compose as world = parent ∘ child.

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface PoseData {
  position: Vec3;
  orientation: Quat;
}

export const IDENTITY: PoseData = { position: [0, 0, 0], orientation: [1, 0, 0, 0] };

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatConjugate(q: Quat): Quat {
  return [q[0], -q[1], -q[2], -q[3]];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const half = angle / 2;
  const s = Math.sin(half);
  return [Math.cos(half), s * axis[0], s * axis[1], s * axis[2]];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const [vx, vy, vz] = v;
  const tx = 2 * (y * vz - z * vy);
  const ty = 2 * (z * vx - x * vz);
  const tz = 2 * (x * vy - y * vx);
  return [
    vx + w * tx + (y * tz - z * ty),
    vy + w * ty + (z * tx - x * tz),
    vz + w * tz + (x * ty - y * tx),
  ];
}

export function composePose(a: PoseData, b: PoseData): PoseData {
  const rotated = quatRotate(a.orientation, b.position);
  return {
    position: [
      a.position[0] + rotated[0],
      a.position[1] + rotated[1],
      a.position[2] + rotated[2],
    ],
    orientation: quatMultiply(a.orientation, b.orientation),
  };
}

export function rotationVector(q: Quat): Vec3 {
  let [w, x, y, z] = q;
  if (w < 0) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
  const s = Math.hypot(x, y, z);
  if (s < 1e-12) return [2 * x, 2 * y, 2 * z];
  const angle = 2 * Math.atan2(s, w);
  return [(angle / s) * x, (angle / s) * y, (angle / s) * z];
}

export function vecAdd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vecScale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vecDistance(a: Vec3, b: Vec3): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

export function clampPose(pose: PoseData): PoseData {
  return { position: [...pose.position], orientation: quatNormalize(pose.orientation) };
}
