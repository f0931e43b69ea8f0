// Message shapes for the WebSocket transport: one JSON document per text
// frame, bodies identical to the TCP protocol (see docs/protocol.md).

import type { PoseData } from "./math";

export interface Message {
  type: string;
  id?: number;
  body: Record<string, unknown>;
}

export interface ShapeData {
  kind: "box" | "sphere" | "cylinder" | "capsule";
  half_extents?: [number, number, number];
  radius?: number;
  half_length?: number;
}

export interface ObjectData {
  id: string;
  shape: ShapeData;
  pose: PoseData;
}

export interface JointStateData {
  group: string;
  positions: number[];
}

export interface SceneOpData {
  op: "add" | "set_pose" | "remove";
  object?: ObjectData;
  id?: string;
  pose?: PoseData;
}

export interface SceneDiffData {
  from_version: number;
  to_version: number;
  ops: SceneOpData[];
  robot_state?: JointStateData;
}

export interface SnapshotData {
  objects: ObjectData[];
  robot_state: JointStateData;
  version: number;
}

export interface TrajectoryPointData {
  time_from_start: number;
  positions: number[];
  velocities: number[];
}

export interface TrajectoryData {
  group: string;
  points: TrajectoryPointData[];
}

export interface PlanResponseData {
  status: string;
  path: number[][] | null;
  trajectory: TrajectoryData | null;
  planning_time: number;
  waypoint_count: number;
  detail: string;
  trajectory_id?: number;
}

export interface IkResponseData {
  success: boolean;
  positions: number[];
  position_error: number;
  orientation_error: number;
  iterations: number;
  reason: string | null;
}

export const PROTOCOL_VERSION = 1;

export function hello(clientName: string): Message {
  return {
    type: "hello",
    body: { client_name: clientName, protocol_version: PROTOCOL_VERSION },
  };
}

export function message(type: string, body: Record<string, unknown> = {}, id?: number): Message {
  return id === undefined ? { type, body } : { type, id, body };
}

export function encode(msg: Message): string {
  return JSON.stringify(msg);
}

export function decode(text: string): Message {
  const parsed = JSON.parse(text);
  if (typeof parsed !== "object" || parsed === null || typeof parsed.type !== "string") {
    throw new Error("not a protocol message");
  }
  return parsed as Message;
}
