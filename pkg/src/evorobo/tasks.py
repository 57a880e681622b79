"""Tasks bind a fitness function to its epoch protocol, and evaluate genotypes in batch."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .controllers import BehaviorLibrary, ControllerSpec, build_controller
from .evolution import Evaluation
from .fitness import get_fitness
from .nets import Genotype
from .sim import (
    DEFAULT_ENERGY,
    Arena,
    ConfigurationError,
    Disc,
    EnergyModel,
    EpochTrace,
    random_disc_center,
    random_pose,
    simulate,
)


@dataclass(frozen=True)
class Task:
    fitness: str
    steps: dict
    energy: bool = False
    randomize_recharge: bool = False
    randomize_light: bool = False
    reach_radius: float | None = None
    inputs: tuple[str, ...] = ("ir_active", "ir_passive", "all")


TASKS = {
    "obstacle_original": Task("obstacle_original", {"full": 500, "desk": 300}, inputs=("ir_active", "all")),
    "obstacle_gated": Task("obstacle_gated", {"full": 500, "desk": 300}, inputs=("ir_active", "all")),
    "light_following": Task("light_following", {"full": 500, "desk": 300}, randomize_light=True,
                            reach_radius=100.0, inputs=("ir_passive", "all")),
    "stop": Task("stop", {"full": 500, "desk": 300}),
    "area_sweeping": Task("area_sweeping", {"full": 500, "desk": 300}, inputs=("ir_active", "all")),
    "energy": Task("energy", {"full": 1000, "desk": 1000}, energy=True, randomize_recharge=True,
                   inputs=("all",)),
}

LIGHT_MARGIN = 60.0


def get_task(name: str) -> Task:
    try:
        return TASKS[name]
    except KeyError:
        raise ConfigurationError(f"unknown fitness suite {name!r}; choose from {sorted(TASKS)}") from None


def check_compatible(task: Task, spec: ControllerSpec, library: BehaviorLibrary | None = None) -> None:
    """Reject controller/task pairings that cannot work before anything is simulated."""
    if spec.inputs not in task.inputs:
        raise ConfigurationError(
            f"fitness {task.fitness!r} needs inputs from {task.inputs}, controller uses {spec.inputs!r}")
    if spec.kind == "supervisor":
        if library is None:
            raise ConfigurationError("supervisor controllers need a behavior library")
        if spec.net.n_outputs != len(library):
            raise ConfigurationError("supervisor outputs must match the library size")


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed from non-negative integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0] >> 1)


def epoch_rng(eval_seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(eval_seed), int(epoch)]))


class Evaluator:
    """Fitness of genotypes under one task, arena and controller encoding.

    All epochs of all genotypes in a call are simulated as one batch; each
    epoch draws its start pose (and light / recharge placement) from its own
    RNG stream derived from the individual's evaluation seed, so results do
    not depend on batch composition.
    """

    def __init__(self, spec: ControllerSpec, task: Task, arena: Arena, *, epochs: int, steps: int,
                 run_seed: int = 0, library: BehaviorLibrary | None = None,
                 energy: EnergyModel = DEFAULT_ENERGY):
        check_compatible(task, spec, library)
        if task.randomize_recharge and arena.recharge is None:
            arena = replace(arena, recharge=Disc(arena.width / 2, arena.height / 2))
        self.spec = spec
        self.task = task
        self.arena = arena
        self.epochs = epochs
        self.steps = steps
        self.run_seed = run_seed
        self.library = library
        self.energy = energy
        self.fitness_fn = get_fitness(task.fitness, arena)

    def seed_for(self, generation: int, index: int) -> int:
        return derive_seed(self.run_seed, generation, index)

    def __call__(self, genotypes: Sequence[Genotype], generation: int) -> Evaluation:
        seeds = [self.seed_for(generation, i) for i in range(len(genotypes))]
        return self.evaluate(genotypes, seeds)

    def _layout(self, eval_seed: int, epochs: int):
        arena = self.arena
        out = []
        for e in range(epochs):
            rng = epoch_rng(eval_seed, e)
            light = recharge = None
            if self.task.randomize_recharge:
                recharge = random_disc_center(arena, arena.recharge.radius, rng)
                light = recharge
            elif arena.recharge is not None:
                recharge = (arena.recharge.x, arena.recharge.y)
            if self.task.randomize_light:
                light = random_disc_center(arena, LIGHT_MARGIN, rng)
            elif light is None and arena.light is not None:
                light = (arena.light.x, arena.light.y)
            start = random_pose(arena, rng)
            out.append((rng, start, light, recharge))
        return out

    def traces(self, genotypes: Sequence[Genotype], seeds: Sequence[int], epochs: int | None = None,
               steps: int | None = None) -> list[list[EpochTrace]]:
        epochs = self.epochs if epochs is None else epochs
        steps = self.steps if steps is None else steps
        layouts = [item for s in seeds for item in self._layout(s, epochs)]
        rngs = [lay[0] for lay in layouts]
        starts = [lay[1] for lay in layouts]
        lights = None
        if any(lay[2] is not None for lay in layouts):
            lights = np.array([lay[2] for lay in layouts], dtype=float)
        recharges = None
        if any(lay[3] is not None for lay in layouts):
            recharges = np.array([lay[3] for lay in layouts], dtype=float)
        weights = np.repeat(np.array([g.weights for g in genotypes]), epochs, axis=0)
        controller = build_controller(self.spec, weights, self.library)
        n_beh = len(self.library) if self.spec.kind == "supervisor" else 0
        flat = simulate(controller, self.arena, starts, steps, rngs,
                        energy=self.energy if self.task.energy else None,
                        lights=lights, recharges=recharges, reach_radius=self.task.reach_radius,
                        n_behaviors=n_beh)
        return [flat[i * epochs:(i + 1) * epochs] for i in range(len(genotypes))]

    def evaluate(self, genotypes: Sequence[Genotype], seeds: Sequence[int], epochs: int | None = None,
                 steps: int | None = None) -> Evaluation:
        if not genotypes:
            return Evaluation(np.zeros(0), [])
        grouped = self.traces(genotypes, seeds, epochs, steps)
        fitness = np.empty(len(genotypes))
        info = []
        for i, (traces, seed) in enumerate(zip(grouped, seeds)):
            fv = self.fitness_fn(traces)
            fitness[i] = fv.total
            d = {
                "seed": int(seed),
                "per_epoch": list(fv.per_epoch),
                "terminations": [t.termination for t in traces],
                "steps": int(sum(len(t) for t in traces)),
            }
            if traces and traces[0].call_counts is not None:
                d["call_counts"] = np.sum([t.call_counts for t in traces], axis=0).astype(int).tolist()
            info.append(d)
        return Evaluation(fitness, info)
