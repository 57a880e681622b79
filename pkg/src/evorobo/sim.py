"""Discrete-time 2D simulation of a Khepera-like differential-drive robot.

Everything that runs per time step is vectorized over a batch of robots so a
whole generation of epochs can be stepped in lockstep. The scalar helpers
(`step_kinematics`, `sense`, `update_energy`, `run_epoch`) are thin wrappers
over the batched kernels.

Units are millimeters, radians and simulation steps. Sensor and motor values
are normalized: motors in [-1, 1], sensors in [0, 1].
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import yaml

# Khepera-like geometry.
ROBOT_RADIUS = 27.5
WHEEL_BASE = 52.0
MAX_SPEED = 80.0  # mm/s at |motor| = 1
DT = 0.1  # s

SENSOR_ANGLES = np.deg2rad([90.0, 45.0, 10.0, -10.0, -45.0, -90.0, -150.0, 150.0])
N_SENSORS = len(SENSOR_ANGLES)
IR_RANGE = 50.0
IR_HALF_CONE = math.radians(15.0)
_CONE_OFFSETS = np.array([-IR_HALF_CONE, 0.0, IR_HALF_CONE])
LIGHT_D0 = 200.0

START_CLEARANCE = 30.0
WALL_THICKNESS = 20.0

# Column layout of a sensor frame row.
ACTIVE = slice(0, 8)
PASSIVE = slice(8, 16)
ENERGY = 16
FRAME_SIZE = 17


class ConfigurationError(ValueError):
    """Raised for invalid arenas, start poses or experiment settings."""


def wrap_angle(theta):
    """Wrap an angle (or array of angles) into [-pi, pi); in-range values pass through untouched."""
    if isinstance(theta, np.ndarray):
        inside = (theta >= -np.pi) & (theta < np.pi)
        return np.where(inside, theta, (theta + np.pi) % (2 * np.pi) - np.pi)
    if -math.pi <= theta < math.pi:
        return theta
    return (theta + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pose position must be finite")
        object.__setattr__(self, "theta", float(wrap_angle(float(self.theta))))


@dataclass(frozen=True)
class MotorCommand:
    left: float
    right: float

    def __post_init__(self):
        object.__setattr__(self, "left", float(min(1.0, max(-1.0, self.left))))
        object.__setattr__(self, "right", float(min(1.0, max(-1.0, self.right))))


@dataclass(frozen=True)
class Light:
    x: float
    y: float
    intensity: float = 1.0


@dataclass(frozen=True)
class Disc:
    x: float
    y: float
    radius: float = 80.0


@dataclass(frozen=True)
class Arena:
    """Walled rectangular arena with optional light and recharge disc.

    ``obstacles`` holds interior axis-aligned rectangles as
    ``(xmin, ymin, xmax, ymax)``; the four boundary walls are added
    automatically by `rects`.
    """

    width: float = 1000.0
    height: float = 800.0
    obstacles: tuple[tuple[float, float, float, float], ...] = ()
    light: Light | None = None
    recharge: Disc | None = None
    grid: tuple[int, int] = (10, 8)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError("arena dimensions must be positive")
        object.__setattr__(self, "obstacles", tuple(tuple(map(float, r)) for r in self.obstacles))
        for r in self.obstacles:
            if r[0] >= r[2] or r[1] >= r[3]:
                raise ConfigurationError(f"degenerate obstacle {r}")
        if self.recharge is not None and not self.disc_fits(self.recharge.x, self.recharge.y):
            raise ConfigurationError("recharge area must lie inside the arena")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ConfigurationError("grid must have at least one cell")

    def disc_fits(self, x, y, radius=None) -> bool:
        r = self.recharge.radius if radius is None else radius
        return r <= x <= self.width - r and r <= y <= self.height - r

    @property
    def walls(self) -> tuple[tuple[float, float, float, float], ...]:
        w, h, t = self.width, self.height, WALL_THICKNESS
        return (
            (-t, -t, 0.0, h + t),
            (w, -t, w + t, h + t),
            (-t, -t, w + t, 0.0),
            (-t, h, w + t, h + t),
        )

    @property
    def rects(self) -> np.ndarray:
        return np.array(self.walls + self.obstacles, dtype=float)

    def scaled(self, factor: float) -> "Arena":
        """Arena with dimensions (and obstacle positions) scaled; discs keep their radius."""
        obstacles = []
        for xmin, ymin, xmax, ymax in self.obstacles:
            cx, cy = (xmin + xmax) / 2, (ymin + ymax) / 2
            hw, hh = (xmax - xmin) / 2, (ymax - ymin) / 2
            obstacles.append((cx * factor - hw, cy * factor - hh, cx * factor + hw, cy * factor + hh))
        light = replace(self.light, x=self.light.x * factor, y=self.light.y * factor) if self.light else None
        recharge = (replace(self.recharge, x=self.recharge.x * factor, y=self.recharge.y * factor)
                    if self.recharge else None)
        grid = (max(1, round(self.grid[0] * factor)), max(1, round(self.grid[1] * factor)))
        return Arena(self.width * factor, self.height * factor, tuple(obstacles), light, recharge, grid)

    def to_dict(self) -> dict:
        d = {
            "width": self.width,
            "height": self.height,
            "obstacles": [list(r) for r in self.obstacles],
            "grid": list(self.grid),
        }
        if self.light:
            d["light"] = {"x": self.light.x, "y": self.light.y, "intensity": self.light.intensity}
        if self.recharge:
            d["recharge"] = {"x": self.recharge.x, "y": self.recharge.y, "radius": self.recharge.radius}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Arena":
        known = {"width", "height", "obstacles", "light", "recharge", "grid"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown arena keys: {sorted(unknown)}")
        light = Light(**d["light"]) if d.get("light") else None
        recharge = Disc(**d["recharge"]) if d.get("recharge") else None
        return cls(
            width=float(d.get("width", 1000.0)),
            height=float(d.get("height", 800.0)),
            obstacles=tuple(tuple(r) for r in d.get("obstacles", ())),
            light=light,
            recharge=recharge,
            grid=tuple(d.get("grid", (10, 8))),
        )


def load_arena(path) -> Arena:
    """Read an arena description (YAML keys: width, height, obstacles, light, recharge, grid)."""
    with open(path) as f:
        return Arena.from_dict(yaml.safe_load(f) or {})


def save_arena(arena: Arena, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(arena.to_dict(), f, sort_keys=False)


@dataclass(frozen=True)
class EnergyModel:
    """Accumulator with linear drain and time-proportional recharge.

    Energy is tracked internally as an integer number of ticks so that
    "empty after exactly 285 steps" holds without round-off.
    """

    drain_steps: int = 285
    recharge_steps: int = 100
    drain_while_recharging: bool = True
    recharge_slowdown: int = 1

    @property
    def drain(self) -> Fraction:
        return Fraction(1, self.drain_steps)

    @property
    def gain(self) -> Fraction:
        """Net per-step energy change inside the recharge area."""
        g = Fraction(1, self.recharge_steps)
        if self.drain_while_recharging:
            g -= self.drain
        return g / self.recharge_slowdown

    @property
    def capacity(self) -> int:
        return math.lcm(self.drain.denominator, self.gain.denominator)

    @property
    def drain_ticks(self) -> int:
        return int(self.drain * self.capacity)

    @property
    def gain_ticks(self) -> int:
        return int(self.gain * self.capacity)

    def update_ticks(self, ticks: np.ndarray, inside: np.ndarray) -> np.ndarray:
        return np.where(inside, np.minimum(self.capacity, ticks + self.gain_ticks), ticks - self.drain_ticks)

    def slower(self, factor: int = 2) -> "EnergyModel":
        return replace(self, recharge_slowdown=self.recharge_slowdown * factor)


DEFAULT_ENERGY = EnergyModel()


@dataclass(frozen=True)
class RobotState:
    pose: Pose
    energy: Fraction = Fraction(1)
    collided: bool = False
    elapsed_steps: int = 0


@dataclass(frozen=True)
class SensorFrame:
    ir_active: np.ndarray
    ir_passive: np.ndarray
    energy_level: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.ir_active, self.ir_passive, [self.energy_level]])

    @classmethod
    def from_array(cls, row) -> "SensorFrame":
        row = np.asarray(row, dtype=float)
        return cls(row[ACTIVE].copy(), row[PASSIVE].copy(), float(row[ENERGY]))


@dataclass(frozen=True)
class StepRecord:
    step: int
    v: float
    delta_v: float
    pose: Pose
    in_recharge: bool
    selected_behavior: int | None
    energy: float
    left: float
    right: float
    reached: bool = False


TERMINATIONS = ("collision", "energy_exhausted", "step_limit")


@dataclass
class EpochTrace:
    """Per-step columns of one epoch.

    Columns are numpy arrays of equal length (one entry per executed step).
    ``x, y, theta`` are the pose after the step; ``disp`` is the distance the
    robot center travelled during the step; ``behavior`` is -1 when no
    supervisor selection took place.
    """

    start_pose: Pose
    termination: str
    left: np.ndarray
    right: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    disp: np.ndarray
    energy: np.ndarray
    in_recharge: np.ndarray
    behavior: np.ndarray
    reached: np.ndarray
    call_counts: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.left)

    @property
    def v(self) -> np.ndarray:
        return (self.left + self.right) / 2

    @property
    def delta_v(self) -> np.ndarray:
        return np.abs(self.left - self.right) / 2

    @property
    def steps(self) -> list[StepRecord]:
        v, dv = self.v, self.delta_v
        return [
            StepRecord(
                step=i + 1,
                v=float(v[i]),
                delta_v=float(dv[i]),
                pose=Pose(float(self.x[i]), float(self.y[i]), float(self.theta[i])),
                in_recharge=bool(self.in_recharge[i]),
                selected_behavior=int(self.behavior[i]) if self.behavior[i] >= 0 else None,
                energy=float(self.energy[i]),
                left=float(self.left[i]),
                right=float(self.right[i]),
                reached=bool(self.reached[i]),
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_commands(cls, commands, start: Pose = Pose(0.0, 0.0, 0.0), termination="step_limit",
                      in_recharge=None, **columns) -> "EpochTrace":
        """Build a trace from motor commands by integrating kinematics in free space.

        Handy for exercising fitness functions without an arena.
        """
        cmds = np.asarray(commands, dtype=float).reshape(-1, 2)
        n = len(cmds)
        x, y, th = np.empty(n), np.empty(n), np.empty(n)
        disp = np.empty(n)
        px, py, pt = start.x, start.y, start.theta
        for i, (l, r) in enumerate(cmds):
            nx, ny, nt = _integrate(px, py, pt, l, r, DT)
            disp[i] = math.hypot(nx - px, ny - py)
            px, py, pt = float(nx), float(ny), float(nt)
            x[i], y[i], th[i] = px, py, pt
        rech = np.zeros(n, bool) if in_recharge is None else np.asarray(in_recharge, bool)
        base = dict(
            energy=np.ones(n), in_recharge=rech, behavior=np.full(n, -1),
            reached=np.zeros(n, bool),
        )
        base.update(columns)
        return cls(start, termination, cmds[:, 0].copy(), cmds[:, 1].copy(), x, y, th, disp, **base)


# ---------------------------------------------------------------------------
# Kernels (scalar or array inputs)


def _integrate(x, y, theta, left, right, dt):
    vl = np.asarray(left, dtype=float) * MAX_SPEED
    vr = np.asarray(right, dtype=float) * MAX_SPEED
    v = (vl + vr) / 2
    omega = (vr - vl) / WHEEL_BASE
    straight = np.abs(omega) < 1e-12
    safe = np.where(straight, 1.0, omega)
    dth = omega * dt
    radius = v / safe
    th1 = theta + dth
    nx = np.where(straight, x + v * dt * np.cos(theta), x + radius * (np.sin(th1) - np.sin(theta)))
    ny = np.where(straight, y + v * dt * np.sin(theta), y - radius * (np.cos(th1) - np.cos(theta)))
    return nx, ny, wrap_angle(np.asarray(th1, dtype=float))


def step_kinematics(pose: Pose, cmd: MotorCommand, dt: float = DT) -> Pose:
    """Exact differential-drive update with zero inertia."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, y, th = _integrate(pose.x, pose.y, pose.theta, cmd.left, cmd.right, dt)
    return Pose(float(x), float(y), float(th))


def ray_distances(ox, oy, angle, rects: np.ndarray) -> np.ndarray:
    """Distance along rays to the nearest rectangle (inf if none).

    ``ox, oy, angle`` broadcast together; result has their broadcast shape.
    A ray starting inside a rectangle has distance 0.
    """
    dx = np.cos(angle)[..., None]
    dy = np.sin(angle)[..., None]
    ox = np.asarray(ox)[..., None]
    oy = np.asarray(oy)[..., None]
    dx = np.where(dx == 0, 1e-300, dx)
    dy = np.where(dy == 0, 1e-300, dy)
    tx1 = (rects[:, 0] - ox) / dx
    tx2 = (rects[:, 2] - ox) / dx
    ty1 = (rects[:, 1] - oy) / dy
    ty2 = (rects[:, 3] - oy) / dy
    t_enter = np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2))
    t_exit = np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2))
    t0 = np.maximum(t_enter, 0.0)
    d = np.where(t_exit >= t0, t0, np.inf)
    return d.min(axis=-1)


def ir_falloff(d):
    """Active IR reading for an obstacle at distance ``d`` from the sensor."""
    return np.clip(1.0 - np.asarray(d, dtype=float) / IR_RANGE, 0.0, 1.0)


def light_falloff(d, cos_angle, intensity=1.0):
    """Passive reading for a light at distance ``d`` seen at ``cos_angle`` off-axis."""
    d = np.asarray(d, dtype=float)
    return np.clip(intensity * np.maximum(cos_angle, 0.0) / (1.0 + (d / LIGHT_D0) ** 2), 0.0, 1.0)


def sense_batch(x, y, theta, rects, light_xy=None, intensity=1.0, energy=None) -> np.ndarray:
    """Sensor frames for N robots as an (N, 17) array.

    ``light_xy`` is None (no light) or an (N, 2) array of per-robot light
    positions; ``energy`` an (N,) array of fractions (defaults to 1).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    out = np.zeros((n, FRAME_SIZE))
    heading = theta[:, None] + SENSOR_ANGLES
    sx = x[:, None] + ROBOT_RADIUS * np.cos(heading)
    sy = y[:, None] + ROBOT_RADIUS * np.sin(heading)
    # Only robots with some rectangle within sensing range need ray casting.
    near = np.flatnonzero(clearance(x, y, rects) < IR_RANGE)
    if near.size:
        rays = heading[near, :, None] + _CONE_OFFSETS
        d = ray_distances(sx[near, :, None], sy[near, :, None], rays, rects).min(axis=-1)
        out[near, ACTIVE] = ir_falloff(d)
    if light_xy is not None:
        wx = light_xy[:, 0:1] - sx
        wy = light_xy[:, 1:2] - sy
        dist = np.hypot(wx, wy)
        cos_a = np.where(dist > 0, (wx * np.cos(heading) + wy * np.sin(heading)) / np.where(dist > 0, dist, 1),
                         1.0)
        out[:, PASSIVE] = light_falloff(dist, cos_a, intensity)
    out[:, ENERGY] = 1.0 if energy is None else energy
    return out


def collides(x, y, rects, radius=ROBOT_RADIUS) -> np.ndarray:
    """True where a robot body circle touches or overlaps any rectangle."""
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    cx = np.clip(x, rects[:, 0], rects[:, 2])
    cy = np.clip(y, rects[:, 1], rects[:, 3])
    return ((x - cx) ** 2 + (y - cy) ** 2 <= radius**2).any(axis=-1)


def clearance(x, y, rects) -> np.ndarray:
    """Gap between the robot body and the nearest rectangle."""
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    cx = np.clip(x, rects[:, 0], rects[:, 2])
    cy = np.clip(y, rects[:, 1], rects[:, 3])
    return np.sqrt((x - cx) ** 2 + (y - cy) ** 2).min(axis=-1) - ROBOT_RADIUS


# ---------------------------------------------------------------------------
# Scalar API


def sense(state: RobotState, arena: Arena) -> SensorFrame:
    if state.collided:
        raise ValueError("cannot sense from a collided state")
    p = state.pose
    light = None
    intensity = 1.0
    if arena.light is not None:
        light = np.array([[arena.light.x, arena.light.y]])
        intensity = arena.light.intensity
    row = sense_batch(np.array([p.x]), np.array([p.y]), np.array([p.theta]), arena.rects,
                      light, intensity, np.array([float(state.energy)]))[0]
    return SensorFrame.from_array(row)


def in_recharge(pose: Pose, arena: Arena) -> bool:
    """Whether the robot center lies in the (closed) recharge disc."""
    if arena.recharge is None:
        raise ValueError("arena has no recharge area")
    r = arena.recharge
    return (pose.x - r.x) ** 2 + (pose.y - r.y) ** 2 <= r.radius**2


def update_energy(state: RobotState, arena: Arena, model: EnergyModel = DEFAULT_ENERGY) -> RobotState:
    inside = arena.recharge is not None and in_recharge(state.pose, arena)
    e = Fraction(state.energy)
    e = min(Fraction(1), e + model.gain) if inside else e - model.drain
    return replace(state, energy=e)


def random_pose(arena: Arena, rng: np.random.Generator, clearance_mm: float = START_CLEARANCE,
                max_tries: int = 10000) -> Pose:
    """Uniform collision-free pose keeping ``clearance_mm`` from every obstacle and wall."""
    rects = arena.rects
    lo = ROBOT_RADIUS + clearance_mm
    if arena.width <= 2 * lo or arena.height <= 2 * lo:
        raise ConfigurationError("arena too small for start poses")
    for _ in range(max_tries):
        x = rng.uniform(lo, arena.width - lo)
        y = rng.uniform(lo, arena.height - lo)
        if clearance(x, y, rects) >= clearance_mm:
            return Pose(float(x), float(y), float(rng.uniform(-math.pi, math.pi)))
    raise ConfigurationError("could not find a collision-free start pose")


def random_disc_center(arena: Arena, radius: float, rng: np.random.Generator) -> tuple[float, float]:
    """Uniform disc placement fully inside the arena, not overlapping obstacles."""
    obstacles = np.array(arena.obstacles, dtype=float).reshape(-1, 4)
    for _ in range(10000):
        x = rng.uniform(radius, arena.width - radius)
        y = rng.uniform(radius, arena.height - radius)
        if len(obstacles) == 0 or clearance(x, y, obstacles) + ROBOT_RADIUS > radius:
            return float(x), float(y)
    raise ConfigurationError("could not place recharge area")


# ---------------------------------------------------------------------------
# Epoch execution


class Stepper(Protocol):
    """Batched controller: maps sensor frames of live robots to motor speeds."""

    def reset(self, n: int) -> None: ...

    def act(self, frames: np.ndarray, rows: np.ndarray, rngs: Sequence[np.random.Generator]
            ) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]: ...


def simulate(
    controller: Stepper,
    arena: Arena,
    starts: Sequence[Pose],
    max_steps: int,
    rngs: Sequence[np.random.Generator],
    energy: EnergyModel | None = None,
    lights: np.ndarray | None = None,
    recharges: np.ndarray | None = None,
    reach_radius: float | None = None,
    n_behaviors: int = 0,
) -> list[EpochTrace]:
    """Run one epoch for each start pose, all robots stepped in lockstep.

    Each step: sense -> controller -> kinematics -> collision check -> energy
    update. ``lights`` and ``recharges`` give per-robot (N, 2) positions that
    override the arena's; with ``reach_radius`` set, a robot reaching its
    light is recorded and relocated to a fresh random pose.
    """
    n = len(starts)
    if max_steps < 1:
        raise ConfigurationError("max_steps must be positive")
    rects = arena.rects
    x = np.array([p.x for p in starts], dtype=float)
    y = np.array([p.y for p in starts], dtype=float)
    th = np.array([p.theta for p in starts], dtype=float)
    if n and collides(x, y, rects).any():
        raise ConfigurationError("start pose intersects an obstacle")

    intensity = arena.light.intensity if arena.light else 1.0
    if lights is None and arena.light is not None:
        lights = np.tile([arena.light.x, arena.light.y], (n, 1))
    if recharges is None and arena.recharge is not None:
        recharges = np.tile([arena.recharge.x, arena.recharge.y], (n, 1))
    radius2 = arena.recharge.radius**2 if arena.recharge else 0.0
    if reach_radius is not None and lights is None:
        raise ConfigurationError("light reaching requires a light")

    cap = energy.capacity if energy else 1
    ticks = np.full(n, cap, dtype=np.int64)

    shape = (max_steps, n)
    rec = {k: np.zeros(shape) for k in ("left", "right", "x", "y", "theta", "disp", "energy")}
    rec_in = np.zeros(shape, bool)
    rec_reach = np.zeros(shape, bool)
    rec_beh = np.full(shape, -1, dtype=np.int64)
    counts = np.zeros((n, n_behaviors), dtype=np.int64)
    length = np.full(n, max_steps)
    term = ["step_limit"] * n
    alive = np.ones(n, bool)

    controller.reset(n)
    for t in range(max_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        frames = sense_batch(x[idx], y[idx], th[idx], rects,
                             None if lights is None else lights[idx], intensity,
                             ticks[idx] / cap if energy else None)
        left, right, sel = controller.act(frames, idx, rngs)
        left = np.clip(left, -1.0, 1.0)
        right = np.clip(right, -1.0, 1.0)
        nx, ny, nth = _integrate(x[idx], y[idx], th[idx], left, right, DT)
        rec["disp"][t, idx] = np.hypot(nx - x[idx], ny - y[idx])
        x[idx], y[idx], th[idx] = nx, ny, nth
        hit = collides(nx, ny, rects)
        if recharges is not None:
            inside = (nx - recharges[idx, 0]) ** 2 + (ny - recharges[idx, 1]) ** 2 <= radius2
        else:
            inside = np.zeros(idx.size, bool)
        if energy is not None:
            ticks[idx] = energy.update_ticks(ticks[idx], inside)
        rec["left"][t, idx] = left
        rec["right"][t, idx] = right
        rec["x"][t, idx] = nx
        rec["y"][t, idx] = ny
        rec["theta"][t, idx] = nth
        rec["energy"][t, idx] = ticks[idx] / cap
        rec_in[t, idx] = inside
        if sel is not None:
            rec_beh[t, idx] = sel
            np.add.at(counts, (idx, sel), 1)

        dead = ticks[idx] <= 0 if energy is not None else np.zeros(idx.size, bool)
        for j in np.flatnonzero(hit | dead):
            r = idx[j]
            alive[r] = False
            length[r] = t + 1
            term[r] = "collision" if hit[j] else "energy_exhausted"

        if reach_radius is not None:
            live = ~(hit | dead)
            reached = live & (np.hypot(nx - lights[idx, 0], ny - lights[idx, 1]) <= reach_radius)
            for j in np.flatnonzero(reached):
                r = idx[j]
                rec_reach[t, r] = True
                p = random_pose(arena, rngs[r])
                x[r], y[r], th[r] = p.x, p.y, p.theta

    traces = []
    for r in range(n):
        k = length[r]
        traces.append(EpochTrace(
            start_pose=starts[r],
            termination=term[r],
            left=rec["left"][:k, r].copy(),
            right=rec["right"][:k, r].copy(),
            x=rec["x"][:k, r].copy(),
            y=rec["y"][:k, r].copy(),
            theta=rec["theta"][:k, r].copy(),
            disp=rec["disp"][:k, r].copy(),
            energy=rec["energy"][:k, r].copy(),
            in_recharge=rec_in[:k, r].copy(),
            behavior=rec_beh[:k, r].copy(),
            reached=rec_reach[:k, r].copy(),
            call_counts=counts[r].copy() if n_behaviors else None,
            meta={
                "light": None if lights is None else tuple(map(float, lights[r])),
                "recharge": None if recharges is None else tuple(map(float, recharges[r])),
            },
        ))
    return traces


def run_epoch(controller: Stepper, arena: Arena, start: Pose, max_steps: int,
              energy_enabled: bool = False, rng: np.random.Generator | None = None,
              energy: EnergyModel = DEFAULT_ENERGY, **kwargs) -> EpochTrace:
    """Single-robot epoch; see `simulate` for the step loop."""
    rng = np.random.default_rng() if rng is None else rng
    return simulate(controller, arena, [start], max_steps, [rng],
                    energy=energy if energy_enabled else None, **kwargs)[0]


TRACE_COLUMNS = ("step", "x", "y", "theta", "v", "delta_v", "energy", "in_recharge", "behavior_idx")


def write_trace_csv(trace: EpochTrace, path) -> None:
    v, dv = trace.v, trace.delta_v
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_COLUMNS)
        for i in range(len(trace)):
            w.writerow([i + 1, repr(float(trace.x[i])), repr(float(trace.y[i])), repr(float(trace.theta[i])),
                        repr(float(v[i])), repr(float(dv[i])), repr(float(trace.energy[i])),
                        int(trace.in_recharge[i]), int(trace.behavior[i])])


def read_trace_csv(path) -> list[dict]:
    with open(Path(path), newline="") as f:
        return list(csv.DictReader(f))
