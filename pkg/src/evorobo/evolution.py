"""(mu, lambda) evolution strategy with intermediate crossover and self-adaptive mutation.

The strategy knows nothing about robots: fitness comes from an ``evaluate``
callback ``evaluate(genotypes, generation) -> Evaluation | array``, called
once per generation with all offspring so the caller can batch the work.
Generation 0 is the evaluation of the initial population.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .nets import Genotype, NetworkSpec, weight_count

log = logging.getLogger(__name__)

SIGMA_MIN = 1e-6

PROFILES = {
    "full": dict(mu=30, lam=150, generations=250, epochs_per_eval=10),
    "desk": dict(mu=5, lam=25, generations=40, epochs_per_eval=3),
}


@dataclass(frozen=True)
class EvolutionConfig:
    mu: int = 30
    lam: int = 150
    generations: int = 250
    weight_bounds: tuple[float, float] = (-1.0, 1.0)
    epochs_per_eval: int = 10
    sigma_init: float | None = None
    seed: int = 0

    def __post_init__(self):
        lo, hi = map(float, self.weight_bounds)
        object.__setattr__(self, "weight_bounds", (lo, hi))
        if lo >= hi:
            raise ValueError("weight bounds must satisfy lo < hi")
        if self.mu < 1 or self.lam < self.mu or self.lam % self.mu:
            raise ValueError("lambda must be a positive multiple of mu")
        if self.generations < 0 or self.epochs_per_eval < 1:
            raise ValueError("generations must be >= 0 and epochs_per_eval >= 1")
        if self.sigma_init is None:
            object.__setattr__(self, "sigma_init", 0.3 * (hi - lo) / 2)
        if self.sigma_init <= 0:
            raise ValueError("sigma_init must be positive")

    @property
    def offspring_per_parent(self) -> int:
        return self.lam // self.mu

    @classmethod
    def profile(cls, name: str, **overrides) -> "EvolutionConfig":
        return cls(**{**PROFILES[name], **overrides})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weight_bounds"] = list(self.weight_bounds)
        return d


@dataclass
class Evaluation:
    fitness: np.ndarray
    info: list[dict] | None = None


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    std: float
    best_genotype: Genotype
    best_info: dict = field(default_factory=dict)


def init_population(config: EvolutionConfig, spec: NetworkSpec | int, rng: np.random.Generator) -> list[Genotype]:
    n = spec if isinstance(spec, int) else weight_count(spec)
    lo, hi = config.weight_bounds
    return [Genotype(rng.uniform(lo, hi, n), np.full(n, config.sigma_init)) for _ in range(config.mu)]


def intermediate_crossover(p1: Genotype, p2: Genotype, rng=None) -> Genotype:
    """Gene-wise arithmetic mean of two parents (weights and step sizes)."""
    if len(p1) != len(p2):
        raise ValueError("parents differ in length")
    return Genotype((p1.weights + p2.weights) / 2, (p1.sigmas + p2.sigmas) / 2)


def learning_rates(n: int) -> tuple[float, float]:
    """Schwefel's (global, per-gene) log-normal learning rates."""
    return 1 / math.sqrt(2 * n), 1 / math.sqrt(2 * math.sqrt(n))


def self_adaptive_mutate(g: Genotype, bounds, rng, tau_global: float | None = None,
                         tau: float | None = None) -> Genotype:
    n = len(g)
    tg, tl = learning_rates(n)
    tg = tg if tau_global is None else tau_global
    tl = tl if tau is None else tau
    lo, hi = bounds
    common = rng.standard_normal()
    sigmas = g.sigmas * np.exp(tg * common + tl * rng.standard_normal(n))
    sigmas = np.clip(sigmas, SIGMA_MIN, hi - lo)
    weights = np.clip(g.weights + sigmas * rng.standard_normal(n), lo, hi)
    return Genotype(weights, sigmas)


def _evaluate(evaluate: Callable, genotypes: list[Genotype], generation: int) -> Evaluation:
    try:
        res = evaluate(genotypes, generation)
    except Exception:
        log.exception("batch evaluation failed in generation %d; retrying individually", generation)
        fit, info = [], []
        for g in genotypes:
            try:
                r = evaluate([g], generation)
                r = r if isinstance(r, Evaluation) else Evaluation(np.asarray(r, float))
                fit.append(float(r.fitness[0]))
                info.append(r.info[0] if r.info else {})
            except Exception:
                log.exception("evaluation failed; fitness set to 0")
                fit.append(0.0)
                info.append({"failed": True})
        res = Evaluation(np.array(fit), info)
    if not isinstance(res, Evaluation):
        res = Evaluation(np.asarray(res, dtype=float))
    fitness = np.asarray(res.fitness, dtype=float).copy()
    if fitness.shape != (len(genotypes),):
        raise ValueError("evaluate returned the wrong number of fitness values")
    bad = ~np.isfinite(fitness)
    if bad.any():
        log.warning("%d non-finite fitness values set to 0", int(bad.sum()))
        fitness[bad] = 0.0
    return Evaluation(fitness, res.info or [{} for _ in genotypes])


def _stats(generation: int, genotypes, ev: Evaluation) -> GenerationStats:
    f = ev.fitness
    b = int(np.argmax(f))
    return GenerationStats(generation, float(f[b]), float(f.mean()), float(f.std()),
                           genotypes[b].copy(), dict(ev.info[b]))


def make_offspring(parents: Sequence[Genotype], config: EvolutionConfig, rng) -> list[Genotype]:
    offspring = []
    for _ in range(config.lam):
        if len(parents) > 1:
            i, j = rng.choice(len(parents), 2, replace=False)
        else:
            i = j = 0
        child = intermediate_crossover(parents[i], parents[j])
        offspring.append(self_adaptive_mutate(child, config.weight_bounds, rng))
    return offspring


def select(offspring: Sequence[Genotype], fitness: np.ndarray, mu: int) -> list[Genotype]:
    """Top-mu offspring by fitness; ties keep offspring order."""
    order = np.argsort(-fitness, kind="stable")[:mu]
    return [offspring[i] for i in order]


def es_generation(parents: Sequence[Genotype], evaluate: Callable, config: EvolutionConfig, rng,
                  generation: int = 1) -> tuple[list[Genotype], GenerationStats]:
    """One comma-selection generation: parents are always discarded."""
    if len(parents) != config.mu:
        raise ValueError(f"expected {config.mu} parents, got {len(parents)}")
    offspring = make_offspring(parents, config, rng)
    ev = _evaluate(evaluate, offspring, generation)
    return select(offspring, ev.fitness, config.mu), _stats(generation, offspring, ev)


@dataclass
class EvolutionResult:
    parents: list[Genotype]
    generation: int
    rng_state: dict
    initial: GenerationStats
    history: list[GenerationStats] = field(default_factory=list)

    @property
    def best(self) -> GenerationStats:
        """Best individual seen, initial population included."""
        return max([self.initial, *self.history], key=lambda s: s.best)


def run_evolution(config: EvolutionConfig, spec: NetworkSpec | int, evaluate: Callable, *,
                  resume: EvolutionResult | None = None, until: int | None = None,
                  callback: Callable[[EvolutionResult], None] | None = None) -> EvolutionResult:
    """Run generations up to ``until`` (default ``config.generations``).

    With ``resume`` the run continues from a checkpointed state and produces
    exactly what an uninterrupted run would have.
    """
    until = config.generations if until is None else until
    if resume is None:
        rng = np.random.default_rng(config.seed)
        pop = init_population(config, spec, rng)
        ev = _evaluate(evaluate, pop, 0)
        state = EvolutionResult(pop, 0, rng.bit_generator.state, _stats(0, pop, ev))
    else:
        state = EvolutionResult(list(resume.parents), resume.generation, resume.rng_state,
                                resume.initial, list(resume.history))
    rng = np.random.default_rng()
    rng.bit_generator.state = state.rng_state
    while state.generation < until:
        g = state.generation + 1
        parents, stats = es_generation(state.parents, evaluate, config, rng, g)
        state.parents = parents
        state.generation = g
        state.history.append(stats)
        state.rng_state = rng.bit_generator.state
        log.info("gen %d best %.4f mean %.4f", g, stats.best, stats.mean)
        if callback is not None:
            callback(state)
    return state


# ---------------------------------------------------------------------------
# Persistence


def _g2d(g: Genotype) -> dict:
    return {"weights": g.weights.tolist(), "sigmas": g.sigmas.tolist()}


def _d2g(d: dict) -> Genotype:
    return Genotype(np.array(d["weights"], dtype=float), np.array(d["sigmas"], dtype=float))


def _s2d(s: GenerationStats) -> dict:
    return {"generation": s.generation, "best": s.best, "mean": s.mean, "std": s.std,
            "best_genotype": _g2d(s.best_genotype), "best_info": s.best_info}


def _d2s(d: dict) -> GenerationStats:
    return GenerationStats(d["generation"], d["best"], d["mean"], d["std"], _d2g(d["best_genotype"]),
                           d.get("best_info", {}))


def save_checkpoint(result: EvolutionResult, path, **extra) -> None:
    """Population, step sizes, RNG state and history as JSON (floats round-trip exactly)."""
    data = {
        "generation": result.generation,
        "rng_state": result.rng_state,
        "parents": [_g2d(g) for g in result.parents],
        "initial": _s2d(result.initial),
        "history": [_s2d(s) for s in result.history],
        **extra,
    }
    Path(path).write_text(json.dumps(data, default=_json_default))


def load_checkpoint(path) -> tuple[EvolutionResult, dict]:
    data = json.loads(Path(path).read_text())
    result = EvolutionResult(
        parents=[_d2g(d) for d in data.pop("parents")],
        generation=data.pop("generation"),
        rng_state=data.pop("rng_state"),
        initial=_d2s(data.pop("initial")),
        history=[_d2s(d) for d in data.pop("history")],
    )
    return result, data


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def write_log(result: EvolutionResult, path) -> None:
    """CSV with one row per generation (0 = initial population)."""
    rows = ["generation,best,mean,std,best_epochs"]
    for s in [result.initial, *result.history]:
        epochs = " ".join(repr(float(v)) for v in s.best_info.get("per_epoch", []))
        rows.append(f"{s.generation},{s.best!r},{s.mean!r},{s.std!r},{epochs}")
    Path(path).write_text("\n".join(rows) + "\n")


def read_log(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    out = []
    for line in lines[1:]:
        g, b, m, s, e = line.split(",", 4)
        out.append({"generation": int(g), "best": float(b), "mean": float(m), "std": float(s),
                    "best_epochs": [float(v) for v in e.split()]})
    return out


def with_seed(config: EvolutionConfig, seed: int) -> EvolutionConfig:
    return replace(config, seed=int(seed))
