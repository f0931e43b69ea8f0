// Trajectory playback: linear interpolation between knots and a looping
// preview clock driven by the render loop.

import type { TrajectoryData } from "./protocol";

export function trajectoryDuration(trajectory: TrajectoryData): number {
  const points = trajectory.points;
  return points.length ? points[points.length - 1].time_from_start : 0;
}

export function sampleTrajectory(trajectory: TrajectoryData, t: number): number[] {
  const points = trajectory.points;
  if (points.length === 0) return [];
  if (t <= points[0].time_from_start) return [...points[0].positions];
  const last = points[points.length - 1];
  if (t >= last.time_from_start) return [...last.positions];
  for (let i = 1; i < points.length; i++) {
    const b = points[i];
    if (t <= b.time_from_start) {
      const a = points[i - 1];
      const span = b.time_from_start - a.time_from_start;
      const u = span > 0 ? (t - a.time_from_start) / span : 0;
      return a.positions.map((v, j) => v + u * (b.positions[j] - v));
    }
  }
  return [...last.positions];
}

/** Looping preview playhead; `advance` is fed frame deltas by the caller. */
export class PreviewClock {
  playing = false;
  t = 0;
  trajectory: TrajectoryData | null = null;

  start(trajectory: TrajectoryData): void {
    this.trajectory = trajectory;
    this.t = 0;
    this.playing = true;
  }

  stop(): void {
    this.playing = false;
    this.t = 0;
  }

  pause(): void {
    this.playing = false;
  }

  get duration(): number {
    return this.trajectory ? trajectoryDuration(this.trajectory) : 0;
  }

  advance(dt: number): number[] | null {
    if (!this.trajectory) return null;
    if (this.playing) {
      const duration = this.duration;
      this.t += dt;
      if (duration > 0) {
        this.t = this.t % duration;  // loop until explicitly stopped
      } else {
        this.t = 0;
      }
    }
    return sampleTrajectory(this.trajectory, this.t);
  }

  sampleAt(t: number): number[] | null {
    if (!this.trajectory) return null;
    const clamped = Math.min(Math.max(t, 0), this.duration);
    this.t = clamped;
    return sampleTrajectory(this.trajectory, clamped);
  }
}
