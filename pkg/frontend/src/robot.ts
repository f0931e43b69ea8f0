// Robot model mirror: parsed from the server's /robot.json document, with
// enough forward kinematics to render ghosts and previews locally.

import {
  IDENTITY,
  PoseData,
  Quat,
  Vec3,
  composePose,
  quatFromAxisAngle,
} from "./math";
import type { ShapeData } from "./protocol";

export interface JointInfo {
  name: string;
  type: "revolute" | "prismatic" | "continuous" | "fixed";
  parent: string;
  child: string;
  origin: PoseData;
  axis: Vec3;
  limits: { lower: number | null; upper: number | null; max_velocity: number } | null;
}

export interface LinkGeometry {
  shape: ShapeData;
  origin: PoseData;
}

export interface RobotModelData {
  name: string;
  root_link: string;
  links: { name: string; collision_geometries: { shape: ShapeData; origin: PoseData }[] }[];
  joints: JointInfo[];
  groups: Record<string, { base_link: string; tip_link: string; chain: string[]; joints: string[] }>;
}

export class RobotModel {
  readonly data: RobotModelData;
  private jointsByName = new Map<string, JointInfo>();
  private geometryByLink = new Map<string, LinkGeometry[]>();

  constructor(data: RobotModelData) {
    this.data = data;
    for (const joint of data.joints) this.jointsByName.set(joint.name, joint);
    for (const link of data.links) {
      this.geometryByLink.set(
        link.name,
        link.collision_geometries.map((g) => ({ shape: g.shape, origin: g.origin })),
      );
    }
  }

  get name(): string {
    return this.data.name;
  }

  group(name = "default") {
    const group = this.data.groups[name];
    if (!group) throw new Error(`unknown group ${name}`);
    return group;
  }

  joint(name: string): JointInfo {
    const joint = this.jointsByName.get(name);
    if (!joint) throw new Error(`unknown joint ${name}`);
    return joint;
  }

  actuatedJoints(group = "default"): JointInfo[] {
    return this.group(group).joints.map((n) => this.joint(n));
  }

  linkGeometry(link: string): LinkGeometry[] {
    return this.geometryByLink.get(link) ?? [];
  }

  jointLimits(group = "default"): { lower: number[]; upper: number[] } {
    const lower: number[] = [];
    const upper: number[] = [];
    for (const joint of this.actuatedJoints(group)) {
      lower.push(joint.limits?.lower ?? -Math.PI);
      upper.push(joint.limits?.upper ?? Math.PI);
    }
    return { lower, upper };
  }

  clamp(group: string, q: number[]): number[] {
    const { lower, upper } = this.jointLimits(group);
    return q.map((v, i) => {
      const joint = this.actuatedJoints(group)[i];
      if (joint.type === "continuous") {
        if (v > Math.PI || v <= -Math.PI) {
          return Math.PI - ((Math.PI - v) % (2 * Math.PI) + 2 * Math.PI) % (2 * Math.PI);
        }
        return v;
      }
      return Math.min(Math.max(v, lower[i]), upper[i]);
    });
  }

  /** World pose of every link along the group chain plus the tip. */
  forwardKinematics(
    group: string,
    q: number[],
    base: PoseData = IDENTITY,
  ): { tip: PoseData; perLink: Map<string, PoseData> } {
    const g = this.group(group);
    const perLink = new Map<string, PoseData>();
    let pose = base;
    perLink.set(g.base_link, pose);
    let idx = 0;
    for (const jointName of g.chain) {
      const joint = this.joint(jointName);
      pose = composePose(pose, joint.origin);
      if (joint.type !== "fixed") {
        const value = q[idx++] ?? 0;
        pose = composePose(pose, jointMotion(joint, value));
      }
      perLink.set(joint.child, pose);
    }
    return { tip: perLink.get(g.tip_link)!, perLink };
  }

  static async fetch(baseUrl = ""): Promise<RobotModel> {
    const response = await fetch(`${baseUrl}/robot.json`);
    if (!response.ok) throw new Error(`robot model fetch failed: ${response.status}`);
    return new RobotModel((await response.json()) as RobotModelData);
  }
}

function jointMotion(joint: JointInfo, value: number): PoseData {
  if (joint.type === "prismatic") {
    return {
      position: [joint.axis[0] * value, joint.axis[1] * value, joint.axis[2] * value],
      orientation: [1, 0, 0, 0] as Quat,
    };
  }
  return { position: [0, 0, 0], orientation: quatFromAxisAngle(joint.axis, value) };
}
