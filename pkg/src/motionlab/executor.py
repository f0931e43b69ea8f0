"""Mock trajectory executor and the mirror joint-state source.

The executor replays a trajectory in real time (scaled by playback_rate),
reporting interpolated joint states at a fixed rate, and is the seam where a
real-robot adapter would plug in: anything with the same `execute` contract
can replace it.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass
from pathlib import Path

from .planning import Trajectory

EXECUTOR_RATE_HZ = 50.0


class Busy(RuntimeError):
    pass


class Aborted(RuntimeError):
    pass


@dataclass
class ExecutorState:
    mode: str = "idle"  # "idle" | "executing"
    trajectory_id: int | None = None
    elapsed: float = 0.0
    mirror_enabled: bool = False
    playback_rate: float = 1.0


class TrajectoryExecutor:
    """Single active execution at a time; concurrent requests are rejected."""

    def __init__(self, *, playback_rate: float = 1.0, rate_hz: float = EXECUTOR_RATE_HZ):
        self.state = ExecutorState(playback_rate=playback_rate)
        self._rate_hz = rate_hz
        self._abort: asyncio.Event | None = None

    @property
    def busy(self) -> bool:
        return self.state.mode == "executing"

    def abort(self):
        if self._abort is not None:
            self._abort.set()

    async def execute(self, trajectory_id: int, trajectory: Trajectory, on_state, on_progress):
        """Replay the trajectory, calling on_state(positions) at the replay
        rate (knot positions land exactly on their knot times) and
        on_progress(fraction) as it advances. Raises Busy / Aborted."""
        if self.busy:
            raise Busy("an execution is already running")
        self.state.mode = "executing"
        self.state.trajectory_id = trajectory_id
        self.state.elapsed = 0.0
        self._abort = asyncio.Event()
        rate = self.state.playback_rate
        duration = trajectory.duration
        loop = asyncio.get_running_loop()
        started = loop.time()
        try:
            # visit the uniform grid plus every knot time so published states
            # hit the waypoints exactly
            times = sorted(
                {round(k / self._rate_hz, 9) for k in range(int(duration * self._rate_hz) + 1)}
                | {p.time_from_start for p in trajectory.points}
            )
            if not times or times[-1] < duration:
                times.append(duration)
            for t in times:
                wall_target = started + t / rate if rate > 0 else started
                delay = wall_target - loop.time()
                if delay > 0:
                    try:
                        await asyncio.wait_for(self._abort.wait(), timeout=delay)
                    except asyncio.TimeoutError:
                        pass
                if self._abort.is_set():
                    raise Aborted(f"execution of trajectory {trajectory_id} aborted")
                self.state.elapsed = t
                on_state(trajectory.sample(t))
                if duration > 0:
                    on_progress(min(t / duration, 1.0))
                else:
                    on_progress(1.0)
        finally:
            self.state.mode = "idle"
            self.state.trajectory_id = None
            self.state.elapsed = 0.0
            self._abort = None


class MirrorSource:
    """Scripted stand-in for a physical robot's joint-state stream: replays a
    recorded trajectory file (wire Trajectory JSON), honoring its timestamps.
    A hardware adapter would implement the same `run` contract."""

    def __init__(self, path: str | Path, *, rate: float = 1.0):
        doc = json.loads(Path(path).read_text())
        self.trajectory = Trajectory.from_dict(doc)
        self.rate = rate

    async def run(self, on_state):
        loop = asyncio.get_running_loop()
        started = loop.time()
        for point in self.trajectory.points:
            delay = started + point.time_from_start / self.rate - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            on_state(point.positions)
