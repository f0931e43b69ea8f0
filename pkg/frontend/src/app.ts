// Console controller: wires the protocol client, the scene replica, the
// dashboard, and a viewer port together. Everything here is DOM-free so the
// integration tests drive the exact code the browser runs.

import { ConsoleClient } from "./client";
import { Dashboard } from "./dashboard";
import { IDENTITY, PoseData, Vec3 } from "./math";
import {
  IkResponseData,
  Message,
  ObjectData,
  SceneDiffData,
  ShapeData,
  SnapshotData,
} from "./protocol";
import { SceneReplica } from "./replica";
import { RobotModel } from "./robot";
import { DragThrottle } from "./throttle";

export type RobotGhost = "live" | "start" | "goal" | "preview";

/** What the 3D layer must provide; the three.js viewer and the test stub both
 * implement this. */
export interface ViewerPort {
  syncObjects(replica: SceneReplica, selection: string | null): void;
  setRobotConfig(ghost: RobotGhost, q: number[] | null): void;
  setRobotBase(pose: PoseData): void;
  showToast(text: string): void;
  spawnPoint(): Vec3;
}

export const DEFAULT_SPAWN_SIZE = 0.2;

let spawnCounter = 0;

export function defaultShape(kind: ShapeData["kind"]): ShapeData {
  const half = DEFAULT_SPAWN_SIZE / 2;
  switch (kind) {
    case "box":
      return { kind: "box", half_extents: [half, half, half] };
    case "sphere":
      return { kind: "sphere", radius: half };
    case "cylinder":
      return { kind: "cylinder", radius: half / 2, half_length: half };
    case "capsule":
      return { kind: "capsule", radius: half / 2, half_length: half };
  }
}

export function scaledShape(shape: ShapeData, factors: Vec3): ShapeData {
  const [fx, fy, fz] = factors;
  if (shape.kind === "box") {
    const [hx, hy, hz] = shape.half_extents!;
    return { kind: "box", half_extents: [hx * fx, hy * fy, hz * fz] };
  }
  if (shape.kind === "sphere") {
    return { kind: "sphere", radius: shape.radius! * fx };
  }
  // cylinder / capsule: radial scale from x, length scale from z
  return { kind: shape.kind, radius: shape.radius! * fx, half_length: shape.half_length! * fz };
}

export class ConsoleApp {
  replica = new SceneReplica();
  dashboard = new Dashboard();
  selection: string | null = null;
  robotBase: PoseData = IDENTITY;
  ikBusy = false;

  private throttles = new Map<string, DragThrottle<PoseData>>();

  constructor(
    public client: ConsoleClient,
    public model: RobotModel,
    public viewer: ViewerPort,
    private now: () => number = () =>
      typeof performance !== "undefined" ? performance.now() : Date.now(),
  ) {
    client.on("scene_diff", (msg) => this.onSceneDiff(msg));
    client.on("robot_state", (msg) => {
      this.replica.setRobotState(msg.body as unknown as SnapshotData["robot_state"]);
    });
    client.on("execute_status", (msg) => this.dashboard.handleExecuteStatus(msg));
    client.on("error", (msg) => {
      const body = msg.body as { code: string; human_text: string };
      if (msg.id === undefined) this.viewer.showToast(`${body.code}: ${body.human_text}`);
    });
    this.replica.onChange(() => this.viewer.syncObjects(this.replica, this.selection));
    this.replica.onChange(() => {
      if (this.replica.robotState) {
        this.viewer.setRobotConfig("live", this.clamp(this.replica.robotState.positions));
      }
    });
  }

  static async boot(
    client: ConsoleClient,
    model: RobotModel,
    viewer: ViewerPort,
  ): Promise<ConsoleApp> {
    const app = new ConsoleApp(client, model, viewer);
    await app.refreshSnapshot();
    await app.dashboard.refreshPlanners(client);
    return app;
  }

  clamp(q: number[]): number[] {
    return this.model.clamp(this.dashboard.group, q);
  }

  async refreshSnapshot(): Promise<void> {
    const reply = await this.client.request("snapshot_request");
    this.replica.applySnapshot(reply.body as unknown as SnapshotData);
  }

  private onSceneDiff(msg: Message): void {
    const applied = this.replica.applyDiff(msg.body as unknown as SceneDiffData);
    if (!applied) void this.refreshSnapshot();  // version gap: resync
  }

  // -- object toolbar --------------------------------------------------------

  select(id: string | null): void {
    this.selection = id;
    this.viewer.syncObjects(this.replica, this.selection);
  }

  spawn(kind: ShapeData["kind"]): string {
    const id = `${kind}_${Date.now().toString(36)}_${spawnCounter++}`;
    const object: ObjectData = {
      id,
      shape: defaultShape(kind),
      pose: { position: this.viewer.spawnPoint(), orientation: [1, 0, 0, 0] },
    };
    this.client.publish("scene_op", { op: "add", object });
    return id;
  }

  /** Per-axis scale entry for the selected object (sends a resize). */
  scaleSelected(factors: Vec3): void {
    if (!this.selection) return;
    const object = this.replica.objects.get(this.selection);
    if (!object) return;
    this.client.publish("scene_op", {
      op: "resize",
      id: object.id,
      shape: scaledShape(object.shape, factors),
    });
  }

  deleteSelected(): void {
    if (!this.selection) return;
    this.client.publish("scene_op", { op: "remove", id: this.selection });
    this.selection = null;
  }

  // -- transform gizmo -------------------------------------------------------

  private throttleFor(id: string): DragThrottle<PoseData> {
    let throttle = this.throttles.get(id);
    if (!throttle) {
      throttle = new DragThrottle<PoseData>(
        (pose) => this.client.publish("scene_op", { op: "set_pose", id, pose }),
        30,
        this.now,
      );
      this.throttles.set(id, throttle);
    }
    return throttle;
  }

  dragMove(id: string, pose: PoseData): void {
    this.replica.applyOptimisticPose(id, pose);
    this.throttleFor(id).update(pose);
  }

  dragEnd(id: string, pose: PoseData): void {
    this.replica.applyOptimisticPose(id, pose);
    this.throttleFor(id).finish(pose);  // exact final pose always sent
  }

  /** Uniform scale via handle drag sends one resize on release only. */
  uniformScaleEnd(id: string, factor: number): void {
    const object = this.replica.objects.get(id);
    if (!object) return;
    this.client.publish("scene_op", {
      op: "resize",
      id,
      shape: scaledShape(object.shape, [factor, factor, factor]),
    });
  }

  // -- robot posing ----------------------------------------------------------

  setJoint(index: number, value: number): void {
    const current = this.replica.robotState?.positions ?? this.zeros();
    const q = [...current];
    q[index] = value;
    this.publishRobotState(q);
  }

  publishRobotState(q: number[]): void {
    const clamped = this.clamp(q);
    this.replica.setRobotState({ group: this.dashboard.group, positions: clamped });
    this.client.publish("robot_state", { group: this.dashboard.group, positions: clamped });
  }

  private zeros(): number[] {
    return this.model.actuatedJoints(this.dashboard.group).map(() => 0);
  }

  /** End-effector drag: resolve the target over the wire; apply on success,
   * snap back with the residual on failure. Returns the applied state. */
  async dragEndEffector(
    target: PoseData,
    orientationWeight = 1.0,
  ): Promise<{ applied: boolean; result: IkResponseData }> {
    this.ikBusy = true;
    try {
      const reply = await this.client.request("ik_request", {
        target,
        seed: this.replica.robotState?.positions,
        orientation_weight: orientationWeight,
      });
      const result = reply.body as unknown as IkResponseData;
      if (result.success) {
        this.publishRobotState(result.positions);
        return { applied: true, result };
      }
      this.viewer.showToast(
        `unreachable (${result.reason ?? "no convergence"}, ` +
          `residual ${result.position_error.toFixed(4)} m)`,
      );
      // snap back: re-render the authoritative state
      if (this.replica.robotState) {
        this.viewer.setRobotConfig("live", this.clamp(this.replica.robotState.positions));
      }
      return { applied: false, result };
    } finally {
      this.ikBusy = false;
    }
  }

  // -- dashboard shortcuts ----------------------------------------------------

  setStartFromCurrent(): void {
    if (this.replica.robotState) this.dashboard.setStart(this.replica.robotState.positions);
    this.viewer.setRobotConfig("start", this.dashboard.start && this.clamp(this.dashboard.start));
  }

  setGoalFromCurrent(): void {
    if (this.replica.robotState) this.dashboard.setGoal(this.replica.robotState.positions);
    this.viewer.setRobotConfig("goal", this.dashboard.goal && this.clamp(this.dashboard.goal));
  }

  async plan() {
    const response = await this.dashboard.plan(this.client);
    if (response.status !== "SUCCESS") this.viewer.setRobotConfig("preview", null);
    return response;
  }

  stopReplay(): void {
    this.dashboard.stopReplay();
    this.viewer.setRobotConfig("preview", null);  // freeze and hide the cyan ghost
  }

  /** Render-loop hook: advances the looping preview. */
  tick(dt: number): void {
    if (!this.dashboard.preview.playing) return;
    const q = this.dashboard.preview.advance(dt);
    // never render outside joint limits
    if (q) this.viewer.setRobotConfig("preview", this.clamp(q));
  }

  // -- robot placement ---------------------------------------------------------

  placeRobot(groundPoint: Vec3): void {
    this.robotBase = { position: [groundPoint[0], groundPoint[1], groundPoint[2]], orientation: [1, 0, 0, 0] };
    this.viewer.setRobotBase(this.robotBase);
  }
}
