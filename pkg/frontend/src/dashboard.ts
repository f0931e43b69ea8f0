// Planning dashboard state: start/goal capture, planner selection, request
// dispatch, response feedback, and preview playback control.

import { ConsoleClient } from "./client";
import type { Message, PlanResponseData, TrajectoryData } from "./protocol";
import { PreviewClock } from "./trajectory";

export interface PlanSummary {
  status: string;
  planningTime: number;
  waypointCount: number;
  detail: string;
}

export type DashboardListener = (dashboard: Dashboard) => void;

export class Dashboard {
  group = "default";
  start: number[] | null = null;
  goal: number[] | null = null;
  plannerIds: string[] = [];
  plannerId = "rrt_connect";
  numAttempts = 3;
  maxPlanningTime = 5.0;
  lastResponse: PlanSummary | null = null;
  trajectory: TrajectoryData | null = null;
  trajectoryId: number | null = null;
  preview = new PreviewClock();
  executing = false;
  executeProgress = 0;
  mirrorEnabled = false;
  planning = false;

  private listeners: DashboardListener[] = [];

  onChange(listener: DashboardListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this);
  }

  setStart(q: number[]): void {
    this.start = [...q];
    this.notify();
  }

  setGoal(q: number[]): void {
    this.goal = [...q];
    this.notify();
  }

  async refreshPlanners(client: ConsoleClient): Promise<string[]> {
    const reply = await client.request("planners_request");
    this.plannerIds = (reply.body as { planner_ids: string[] }).planner_ids;
    if (!this.plannerIds.includes(this.plannerId) && this.plannerIds.length) {
      this.plannerId = this.plannerIds[0];
    }
    this.notify();
    return this.plannerIds;
  }

  /** Send the plan request; on success the preview starts automatically. */
  async plan(client: ConsoleClient): Promise<PlanResponseData> {
    if (!this.start || !this.goal) throw new Error("set start and goal states first");
    this.planning = true;
    this.notify();
    try {
      const reply = await client.request(
        "plan_request",
        {
          group: this.group,
          start: this.start,
          goal: { joint: this.goal },
          planner_id: this.plannerId,
          num_attempts: this.numAttempts,
          max_planning_time: this.maxPlanningTime,
        },
        (this.maxPlanningTime + 30) * 1000,
      );
      const body = reply.body as unknown as PlanResponseData;
      this.lastResponse = {
        status: body.status,
        planningTime: body.planning_time,
        waypointCount: body.waypoint_count,
        detail: body.detail,
      };
      if (body.status === "SUCCESS" && body.trajectory) {
        this.trajectory = body.trajectory;
        this.trajectoryId = body.trajectory_id ?? null;
        this.preview.start(body.trajectory);
      } else {
        this.trajectory = null;
        this.trajectoryId = null;
        this.preview.stop();
      }
      return body;
    } finally {
      this.planning = false;
      this.notify();
    }
  }

  stopReplay(): void {
    this.preview.stop();
    this.notify();
  }

  /** Execute the last planned trajectory on the (mock) robot. Progress and
   * completion arrive on the execute_status stream. */
  async execute(client: ConsoleClient): Promise<void> {
    if (this.trajectoryId === null) throw new Error("nothing planned");
    this.executing = true;
    this.executeProgress = 0;
    this.notify();
    await client.request("execute_request", {
      command: "start",
      trajectory_id: this.trajectoryId,
    });
  }

  handleExecuteStatus(msg: Message): void {
    const body = msg.body as { status: string; progress?: number };
    if (body.status === "executing") {
      this.executing = true;
      this.executeProgress = body.progress ?? 0;
    } else if (body.status === "done") {
      this.executing = false;
      this.executeProgress = 1;
    } else if (body.status === "aborted") {
      this.executing = false;
    }
    this.notify();
  }

  async setMirror(client: ConsoleClient, enabled: boolean): Promise<void> {
    const reply = await client.request("mirror_set", { enabled });
    this.mirrorEnabled = Boolean((reply.body as { enabled: boolean }).enabled);
    this.notify();
  }

  statusLine(): string {
    if (this.planning) return "planning...";
    if (!this.lastResponse) return "no plan yet";
    const r = this.lastResponse;
    if (r.status === "SUCCESS") {
      return `SUCCESS: ${r.planningTime.toFixed(3)} s, ${r.waypointCount} waypoints`;
    }
    return `${r.status}${r.detail ? `: ${r.detail}` : ""}`;
  }
}
