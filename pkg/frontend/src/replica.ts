// Client-side scene mirror fed by snapshot + scene_diff messages, with
// optimistic pose overlays for in-flight drags (last server echo wins).

import type { PoseData } from "./math";
import type { JointStateData, ObjectData, SceneDiffData, SnapshotData } from "./protocol";

export type ReplicaListener = (replica: SceneReplica) => void;

export class SceneReplica {
  objects = new Map<string, ObjectData>();
  robotState: JointStateData | null = null;
  version = -1;
  /** poses applied locally that have not been echoed back yet */
  private optimistic = new Map<string, PoseData>();
  private listeners: ReplicaListener[] = [];

  onChange(listener: ReplicaListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this);
  }

  applySnapshot(snapshot: SnapshotData): void {
    this.objects = new Map(snapshot.objects.map((o) => [o.id, o]));
    this.robotState = snapshot.robot_state;
    this.version = snapshot.version;
    this.optimistic.clear();
    this.notify();
  }

  /** Returns false when the diff does not chain onto our version and a fresh
   * snapshot is needed. */
  applyDiff(diff: SceneDiffData): boolean {
    if (diff.from_version !== this.version) return false;
    for (const op of diff.ops) {
      if (op.op === "add" && op.object) {
        this.objects.set(op.object.id, op.object);
        this.optimistic.delete(op.object.id);
      } else if (op.op === "set_pose" && op.id && op.pose) {
        const existing = this.objects.get(op.id);
        if (existing) this.objects.set(op.id, { ...existing, pose: op.pose });
        // the echo settles the object: drop any stale optimistic pose
        this.optimistic.delete(op.id);
      } else if (op.op === "remove" && op.id) {
        this.objects.delete(op.id);
        this.optimistic.delete(op.id);
      }
    }
    if (diff.robot_state) this.robotState = diff.robot_state;
    this.version = diff.to_version;
    this.notify();
    return true;
  }

  setRobotState(state: JointStateData): void {
    this.robotState = state;
    this.notify();
  }

  /** Record a local drag before the server confirms it. */
  applyOptimisticPose(id: string, pose: PoseData): void {
    this.optimistic.set(id, pose);
    this.notify();
  }

  /** Pose to render: the optimistic overlay when present, else authoritative. */
  displayedPose(id: string): PoseData | undefined {
    return this.optimistic.get(id) ?? this.objects.get(id)?.pose;
  }

  hasPendingEdits(): boolean {
    return this.optimistic.size > 0;
  }

  objectList(): ObjectData[] {
    return [...this.objects.values()];
  }
}
