"""Fitness functions computed from epoch traces.

Every function takes the traces of one evaluation (one per epoch) and
returns a `FitnessValue` whose total is the sum of its per-epoch values.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .sim import EpochTrace


@dataclass(frozen=True)
class FitnessValue:
    total: float
    per_epoch: tuple[float, ...]

    @classmethod
    def of(cls, per_epoch) -> "FitnessValue":
        per_epoch = tuple(float(v) for v in per_epoch)
        return cls(float(sum(per_epoch)), per_epoch)


def step_rewards(trace: EpochTrace, gated: bool = False) -> np.ndarray:
    """Per-step |V| (1 - sqrt(dV)); with ``gated`` only steps with left + right > 0 count."""
    r = np.abs(trace.v) * (1.0 - np.sqrt(trace.delta_v))
    if gated:
        r = np.where(trace.left + trace.right > 0, r, 0.0)
    return r


def fitness_obstacle_original(traces: Sequence[EpochTrace]) -> FitnessValue:
    return FitnessValue.of(step_rewards(t).sum() for t in traces)


def fitness_obstacle_gated(traces: Sequence[EpochTrace]) -> FitnessValue:
    return FitnessValue.of(step_rewards(t, gated=True).sum() for t in traces)


def fitness_light_following(traces: Sequence[EpochTrace]) -> FitnessValue:
    """Number of light reach events (the simulator relocates the robot after each)."""
    return FitnessValue.of(int(t.reached.sum()) for t in traces)


def fitness_stop(traces: Sequence[EpochTrace]) -> FitnessValue:
    """Negated distance travelled by the center of mass; spinning in place is optimal."""
    return FitnessValue.of(-t.disp.sum() for t in traces)


def visited_cells(trace: EpochTrace, width: float, height: float, grid: tuple[int, int]) -> set[tuple[int, int]]:
    nx, ny = grid
    cx = np.clip((trace.x / width * nx).astype(int), 0, nx - 1)
    cy = np.clip((trace.y / height * ny).astype(int), 0, ny - 1)
    cells = set(zip(cx.tolist(), cy.tolist()))
    s = trace.start_pose
    cells.add((min(max(int(s.x / width * nx), 0), nx - 1), min(max(int(s.y / height * ny), 0), ny - 1)))
    return cells


def fitness_area_sweeping(traces: Sequence[EpochTrace], width: float = 1000.0, height: float = 800.0,
                          grid: tuple[int, int] = (10, 8)) -> FitnessValue:
    """Distinct grid cells visited by the robot center, unioned over epochs.

    Per-epoch values are the cells first visited in that epoch, so they sum
    to the union.
    """
    seen: set = set()
    per_epoch = []
    for t in traces:
        new = visited_cells(t, width, height, grid) - seen
        per_epoch.append(len(new))
        seen |= new
    return FitnessValue.of(per_epoch)


def fitness_energy(traces: Sequence[EpochTrace]) -> FitnessValue:
    """Gated forward-motion reward, earned only outside the recharge area."""
    return FitnessValue.of(np.where(t.in_recharge, 0.0, step_rewards(t, gated=True)).sum() for t in traces)


FITNESS_FUNCTIONS: dict[str, Callable] = {
    "obstacle_original": fitness_obstacle_original,
    "obstacle_gated": fitness_obstacle_gated,
    "light_following": fitness_light_following,
    "stop": fitness_stop,
    "area_sweeping": fitness_area_sweeping,
    "energy": fitness_energy,
}


def get_fitness(name: str, arena=None) -> Callable[[Sequence[EpochTrace]], FitnessValue]:
    try:
        fn = FITNESS_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown fitness {name!r}; choose from {sorted(FITNESS_FUNCTIONS)}") from None
    if name == "area_sweeping" and arena is not None:
        return partial(fn, width=arena.width, height=arena.height, grid=arena.grid)
    return fn


def sustainable_rate(drain_steps: int = 285, recharge_steps: int = 100, drain_while_recharging: bool = True,
                     slowdown: int = 1) -> float:
    """Long-run best per-step energy fitness of an ideal drive/recharge cycle.

    Driving costs 1/drain_steps per step and recharging restores the net
    rate; the fraction of time spent driving is the sustainable per-step
    reward (travel to the area ignored).
    """
    drain = 1 / drain_steps
    gain = (1 / recharge_steps - (drain if drain_while_recharging else 0.0)) / slowdown
    return gain / (gain + drain)
