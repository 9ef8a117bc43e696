"""Simulated differential-drive robot.

Kinematics are heading-first Euler: the heading is advanced before the
position uses it, so with zero bias a straight drive keeps theta exactly 0
and with bias b the heading after driving distance d is exactly b*d (each
step adds b*v*dt). Wheel bias models the paper-motivating fact that two
motors with the same part number never quite match.
"""

from __future__ import annotations

import math
from collections import deque

from ..config import SimConfig
from ..errors import QueueFull
from ..model import DriveCommand, FieldLayout, RobotState, Telemetry


class RobotAgent:
    def __init__(self, robot_id: str, layout: FieldLayout, seed: int,
                 wheel_bias: float = 0.0, cfg: SimConfig | None = None):
        self.robot_id = robot_id
        self.layout = layout
        self.seed = seed
        self.wheel_bias = wheel_bias
        self.cfg = cfg or SimConfig()
        self.x = 0.0
        self.y = 0.0
        self.theta = 0.0
        self.battery = 100.0
        self.tick = 0
        self.queue: deque[DriveCommand] = deque()
        self.current: DriveCommand | None = None
        self.remaining_ticks = 0
        self.connected = True
        self.peer_id = ""

    def enqueue(self, command: DriveCommand) -> None:
        if len(self.queue) >= self.cfg.queue_depth:
            raise QueueFull(f"robot {self.robot_id} queue at "
                            f"{self.cfg.queue_depth}")
        self.queue.append(command)

    def factory_reset(self) -> None:
        self.x = self.y = self.theta = 0.0
        self.battery = 100.0
        self.queue.clear()
        self.current = None
        self.remaining_ticks = 0
        self.connected = True

    def step(self, robot_state: RobotState,
             dt: float | None = None) -> Telemetry:
        """One simulation tick. Commands only execute while the robot is
        Active; telemetry ticks regardless."""
        dt = self.cfg.dt if dt is None else dt
        self.tick += 1
        moving = False
        if robot_state == RobotState.ACTIVE:
            if self.current is None and self.queue:
                self.current = self.queue.popleft()
                self.remaining_ticks = self.current.duration_ticks
            if self.current is not None:
                c = self.current
                moving = c.v != 0.0 or c.omega != 0.0
                self.theta += (c.omega + self.wheel_bias * c.v) * dt
                nx = self.x + c.v * math.cos(self.theta) * dt
                ny = self.y + c.v * math.sin(self.theta) * dt
                nx = min(max(nx, 0.0), self.layout.width_m)
                ny = min(max(ny, 0.0), self.layout.height_m)
                if not self.layout.is_obstacle(nx, ny):
                    self.x, self.y = nx, ny
                self.remaining_ticks -= 1
                if self.remaining_ticks <= 0:
                    self.current = None
        drain = (self.cfg.drive_drain_per_s if moving
                 else self.cfg.idle_drain_per_s)
        self.battery = max(self.battery - drain * dt, 0.0)
        return Telemetry(robot_id=self.robot_id, tick=self.tick, x=self.x,
                         y=self.y, theta=self.theta,
                         battery_pct=self.battery, state=robot_state.value)
