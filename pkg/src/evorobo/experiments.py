"""Configuration-driven experiment runs: evolution, sensitivity, generalization, replay.

Experiment config (YAML, ``schema_version: 1``)::

    schema_version: 1
    experiment: obstacle-sc          # id used in output files
    fitness: obstacle_gated          # see evorobo.tasks.TASKS
    arena: arenas/desk.yaml          # path (relative to the config) or inline mapping
    profile: desk                    # desk | full: evolution defaults and epoch length
    runs: 5
    epoch_steps: 300                 # optional, defaults from task and profile
    reach_radius: 100                # optional, light-following reach distance in mm
    controller:
      kind: symbolic                 # classical | symbolic | supervisor
      actions: degraded              # symbolic only: full | degraded | [FORWARD, ...]
      hidden: [14]
      recurrent: false
      inputs: ir_active              # ir_active | ir_passive | all
    library: lib/manifest.txt        # supervisor only
    extra_behaviors: [random, crash] # optional hand-coded additions to the library
    replication: 1
    energy: {drain_while_recharging: true}
    variant: null                    # larger_arena | with_obstacles | slow_recharge
    evolution: {mu: 5, lam: 25, generations: 40, epochs_per_eval: 3, seed: 1,
                weight_bounds: [-1, 1]}

Run directory layout: ``summary.json`` and ``config.yaml`` at the top, then
``run_XXX/`` with ``evolution.csv``, ``best.gen``, ``checkpoint.json`` and,
for supervisors, ``calls.csv``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .controllers import (
    USELESS_BEHAVIORS,
    BehaviorLibrary,
    ControllerSpec,
    load_library,
    parse_actions,
)
from .controllers import INPUT_WIDTH
from .evolution import (
    EvolutionConfig,
    EvolutionResult,
    load_checkpoint,
    read_log,
    run_evolution,
    save_checkpoint,
    write_log,
)
from .nets import Genotype, NetworkSpec, load_genotype, save_genotype
from .sim import (
    DEFAULT_ENERGY,
    Arena,
    ConfigurationError,
    EnergyModel,
    load_arena,
    write_trace_csv,
)
from .tasks import Evaluator, Task, check_compatible, derive_seed, get_task

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
VARIANTS = ("identity", "larger_arena", "with_obstacles", "slow_recharge")


@dataclass
class ExperimentConfig:
    experiment: str
    fitness: str
    arena: Arena
    controller: ControllerSpec
    evolution: EvolutionConfig
    runs: int = 10
    profile: str = "full"
    epoch_steps: int | None = None
    library: BehaviorLibrary | None = None
    library_path: str | None = None
    energy: EnergyModel = DEFAULT_ENERGY
    variant: str | None = None
    extra_behaviors: tuple[str, ...] = ()
    replication: int = 1
    reach_radius: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.variant is not None and self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        check_compatible(get_task(self.fitness), self.controller, self.library)

    @property
    def task(self) -> Task:
        task = get_task(self.fitness)
        if self.reach_radius is not None:
            task = replace(task, reach_radius=float(self.reach_radius))
        return task

    @property
    def steps(self) -> int:
        if self.epoch_steps is not None:
            return self.epoch_steps
        return self.task.steps.get(self.profile, self.task.steps["full"])

    def environment(self, variant: str | None = None) -> tuple[Arena, EnergyModel]:
        return apply_variant(self.arena, self.energy, variant if variant is not None else self.variant)

    def evaluator(self, run_seed: int = 0, variant: str | None = None) -> Evaluator:
        arena, energy = self.environment(variant)
        return Evaluator(self.controller, self.task, arena, epochs=self.evolution.epochs_per_eval,
                         steps=self.steps, run_seed=run_seed, library=self.library, energy=energy)


def apply_variant(arena: Arena, energy: EnergyModel, variant: str | None) -> tuple[Arena, EnergyModel]:
    """Generalization environments: 3x larger arena, added obstacles, or 2x slower recharge."""
    if variant in (None, "identity"):
        return arena, energy
    if variant == "larger_arena":
        return arena.scaled(3), energy
    if variant == "with_obstacles":
        w, h = arena.width, arena.height
        extra = (
            (0.30 * w - 30, 0.35 * h - 60, 0.30 * w + 30, 0.35 * h + 60),
            (0.55 * w - 60, 0.70 * h - 30, 0.55 * w + 60, 0.70 * h + 30),
            (0.75 * w - 30, 0.30 * h - 60, 0.75 * w + 30, 0.30 * h + 60),
        )
        return replace(arena, obstacles=arena.obstacles + extra), energy
    if variant == "slow_recharge":
        return arena, energy.slower(2)
    raise ConfigurationError(f"unknown variant {variant!r}")


def controller_from_dict(d: dict, n_library: int | None = None) -> ControllerSpec:
    kind = d.get("kind", "classical")
    inputs = d.get("inputs", "all" if kind == "supervisor" else "ir_active")
    actions = parse_actions(d.get("actions")) if kind == "symbolic" else None
    if kind == "classical":
        n_out = 2
    elif kind == "symbolic":
        n_out = 2 * len(actions)
    else:
        if n_library is None:
            raise ConfigurationError("supervisor controller needs a library")
        n_out = n_library
    recurrent = bool(d.get("recurrent", False))
    hidden = tuple(d.get("hidden", [5] if recurrent else []))
    net = NetworkSpec(INPUT_WIDTH[inputs], hidden, n_out, recurrent)
    return ControllerSpec(kind, net, actions, inputs)


def config_from_dict(raw: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    base_dir = Path(base_dir)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version}")
    arena_src = raw.get("arena", {})
    if isinstance(arena_src, (str, Path)):
        path = base_dir / arena_src
        if not path.exists():
            raise ConfigurationError(f"arena file {path} not found")
        arena = load_arena(path)
    else:
        arena = Arena.from_dict(arena_src)

    library = None
    library_path = raw.get("library")
    if library_path:
        manifest = base_dir / library_path
        if not manifest.exists():
            raise ConfigurationError(f"library manifest {manifest} not found")
        library = load_library(manifest)
        library_path = str(manifest.resolve())
    extra = tuple(raw.get("extra_behaviors", ()))
    replication = int(raw.get("replication", 1))
    if extra:
        if library is None:
            raise ConfigurationError("extra behaviors need a supervisor library")
        library = library.extended(extra, replication)

    profile = raw.get("profile", "full")
    evo = dict(raw.get("evolution", {}))
    if "weight_bounds" in evo:
        evo["weight_bounds"] = tuple(evo["weight_bounds"])
    evolution = EvolutionConfig.profile(profile, **evo)
    controller = controller_from_dict(raw.get("controller", {}), len(library) if library else None)
    return ExperimentConfig(
        experiment=str(raw.get("experiment", "experiment")),
        fitness=raw["fitness"],
        arena=arena,
        controller=controller,
        evolution=evolution,
        runs=int(raw.get("runs", 10)),
        profile=profile,
        epoch_steps=raw.get("epoch_steps"),
        library=library,
        library_path=library_path,
        energy=EnergyModel(**raw.get("energy", {})),
        variant=raw.get("variant"),
        extra_behaviors=extra,
        replication=replication,
        reach_radius=raw.get("reach_radius"),
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as f:
        raw = yaml.safe_load(f)
    return config_from_dict(raw, path.parent)


def config_to_dict(config: ExperimentConfig) -> dict:
    """Self-contained form of a config (arena inline, library as absolute path)."""
    c = config.controller
    d = {
        "schema_version": SCHEMA_VERSION,
        "experiment": config.experiment,
        "fitness": config.fitness,
        "arena": config.arena.to_dict(),
        "profile": config.profile,
        "runs": config.runs,
        "epoch_steps": config.steps,
        "controller": {
            "kind": c.kind,
            "inputs": c.inputs,
            "hidden": list(c.net.hidden_sizes),
            "recurrent": c.net.recurrent,
        },
        "energy": {
            "drain_steps": config.energy.drain_steps,
            "recharge_steps": config.energy.recharge_steps,
            "drain_while_recharging": config.energy.drain_while_recharging,
            "recharge_slowdown": config.energy.recharge_slowdown,
        },
        "evolution": config.evolution.to_dict(),
    }
    if c.actions is not None:
        d["controller"]["actions"] = [a.name for a in c.actions]
    if config.library_path:
        d["library"] = config.library_path
    if config.extra_behaviors:
        d["extra_behaviors"] = list(config.extra_behaviors)
        d["replication"] = config.replication
    if config.variant:
        d["variant"] = config.variant
    if config.reach_radius is not None:
        d["reach_radius"] = config.reach_radius
    return d


# ---------------------------------------------------------------------------
# Runs


@dataclass
class RunRecord:
    index: int
    seed: int
    result: EvolutionResult

    @property
    def best_fitness(self) -> float:
        return self.result.best.best

    @property
    def best_genotype(self) -> Genotype:
        return self.result.best.best_genotype

    @property
    def history(self) -> list[float]:
        return [s.best for s in self.result.history]


@dataclass
class RunSummary:
    experiment: str
    runs: list[RunRecord]
    behavior_names: list[str] | None = None

    @property
    def best_fitness(self) -> np.ndarray:
        return np.array([r.best_fitness for r in self.runs])

    @property
    def mean(self) -> float:
        return float(self.best_fitness.mean())

    @property
    def std(self) -> float:
        return float(self.best_fitness.std())

    def call_report(self) -> list[list[dict]]:
        """Per run, per generation: behavior calls of the generation's best, per 10000 steps."""
        out = []
        for r in self.runs:
            rows = []
            for s in [r.result.initial, *r.result.history]:
                counts = s.best_info.get("call_counts")
                if counts is None:
                    continue
                total = sum(counts)
                rows.append({
                    "generation": s.generation,
                    "counts": list(counts),
                    "per_10000": [10000 * c / total if total else 0.0 for c in counts],
                    "total": total,
                })
            out.append(rows)
        return out

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "behaviors": self.behavior_names,
            "runs": [
                {
                    "run": r.index,
                    "seed": r.seed,
                    "best_fitness": r.best_fitness,
                    "best_generation": r.result.best.generation,
                    "best_eval_seed": r.result.best.best_info.get("seed"),
                    "initial_best": r.result.initial.best,
                    "history": r.history,
                }
                for r in self.runs
            ],
            "mean_best": self.mean,
            "std_best": self.std,
        }


def run_seed(config: ExperimentConfig, index: int) -> int:
    return derive_seed(config.evolution.seed, index)


def _genotype_meta(config: ExperimentConfig) -> dict:
    meta = config.controller.meta()
    meta["fitness"] = config.fitness
    if config.library_path:
        meta["library"] = config.library_path
    return meta


def write_run(run_dir: Path, config: ExperimentConfig, record: RunRecord) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    res = record.result
    write_log(res, run_dir / "evolution.csv")
    save_genotype(run_dir / "best.gen", config.controller.net, record.best_genotype,
                  config.evolution.weight_bounds, **_genotype_meta(config),
                  eval_seed=res.best.best_info.get("seed", 0))
    save_checkpoint(res, run_dir / "checkpoint.json", run_seed=record.seed)
    if config.controller.kind == "supervisor":
        names = config.library.names
        lines = ["generation," + ",".join(names)]
        for s in [res.initial, *res.history]:
            counts = s.best_info.get("call_counts", [0] * len(names))
            lines.append(f"{s.generation}," + ",".join(str(c) for c in counts))
        (run_dir / "calls.csv").write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunSummary:
    """Run ``config.runs`` independent evolutions (run i seeded from the master seed and i)."""
    records = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.yaml").write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False))
    for i in range(config.runs):
        seed = run_seed(config, i)
        evo = replace(config.evolution, seed=seed)
        res = run_evolution(evo, config.controller.net, config.evaluator(seed))
        rec = RunRecord(i, seed, res)
        records.append(rec)
        log.info("%s run %d: best %.3f", config.experiment, i, rec.best_fitness)
        if out is not None:
            write_run(out / f"run_{i:03d}", config, rec)
    summary = RunSummary(config.experiment, records,
                         config.library.names if config.controller.kind == "supervisor" else None)
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    return summary


def sensitivity_experiment(config: ExperimentConfig, extra: Sequence[str] = USELESS_BEHAVIORS,
                           replication: int = 1, out_dir=None) -> RunSummary:
    """Add hand-coded behaviors to a supervisor's library, resize its output layer, and run."""
    if config.controller.kind != "supervisor":
        raise ConfigurationError("sensitivity analysis needs a supervisor config")
    if not extra:
        return run_experiment(config, out_dir)
    library = config.library.extended(extra, replication)
    net = replace(config.controller.net, n_outputs=len(library))
    cfg = replace(config, library=library, controller=replace(config.controller, net=net),
                  extra_behaviors=tuple(config.extra_behaviors) + tuple(extra), replication=replication)
    summary = run_experiment(cfg, out_dir)
    if out_dir is not None:
        write_call_report(summary, Path(out_dir) / "calls_report.csv")
    return summary


def write_call_report(summary: RunSummary, path) -> None:
    names = summary.behavior_names or []
    lines = ["run,generation,total_steps," + ",".join(names)]
    for r, rows in zip(summary.runs, summary.call_report()):
        for row in rows:
            lines.append(f"{r.index},{row['generation']},{row['total']}," +
                         ",".join(f"{v:.1f}" for v in row["per_10000"]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_run_dir(path) -> tuple[ExperimentConfig, list[Path]]:
    path = Path(path)
    config = load_config(path / "config.yaml")
    runs = sorted(p for p in path.glob("run_*") if p.is_dir())
    return config, runs


def stats(run_dirs: Sequence) -> dict:
    """Recompute per-experiment aggregates from the persisted per-run evolution logs."""
    report = {}
    for d in run_dirs:
        d = Path(d)
        bests = []
        for run in sorted(p for p in d.glob("run_*") if p.is_dir()):
            rows = read_log(run / "evolution.csv")
            bests.append(max(r["best"] for r in rows))
        if not bests:
            raise ConfigurationError(f"{d}: no run directories")
        arr = np.array(bests)
        report[str(d)] = {"runs": len(bests), "best": bests, "mean_best": float(arr.mean()),
                          "std_best": float(arr.std())}
    return report


@dataclass
class GeneralizationReport:
    variant: str
    original: np.ndarray  # (runs, n_evals)
    modified: np.ndarray
    continued: list[EvolutionResult] | None = None

    @property
    def relative_change(self) -> np.ndarray:
        o = self.original.mean(axis=1)
        m = self.modified.mean(axis=1)
        return (m - o) / np.where(o != 0, np.abs(o), 1.0)

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "original": self.original.tolist(),
            "modified": self.modified.tolist(),
            "relative_change": self.relative_change.tolist(),
            "mean_relative_change": float(self.relative_change.mean()),
        }
        if self.continued:
            d["continued_best"] = [[s.best for s in r.history] for r in self.continued]
        return d


def generalization_experiment(run_dir, variant: str, n_evals: int = 5, continue_generations: int = 0,
                              seed: int = 12345, out_path=None) -> GeneralizationReport:
    """Re-evaluate each run's best genotype in a modified environment.

    Both environments are evaluated with the same evaluation seeds. With
    ``continue_generations`` > 0, evolution resumes from each run's
    checkpoint in the new environment.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    config, runs = load_run_dir(run_dir)
    if not runs:
        raise ConfigurationError(f"{run_dir}: no runs to generalize")
    base = config.evaluator(0, "identity")
    moved = config.evaluator(0, variant)
    original, modified, continued = [], [], []
    seeds = [derive_seed(seed, k) for k in range(n_evals)]
    for run in runs:
        net, genotype, _, _ = load_genotype(run / "best.gen")
        if net != config.controller.net:
            raise ConfigurationError(f"{run}: genotype does not match the configured controller")
        original.append(base.evaluate([genotype] * n_evals, seeds).fitness)
        modified.append(moved.evaluate([genotype] * n_evals, seeds).fitness)
        if continue_generations > 0:
            state, extra = load_checkpoint(run / "checkpoint.json")
            if len(state.parents[0]) != len(genotype):
                raise ConfigurationError(f"{run}: checkpoint does not match the arena/controller")
            ev = config.evaluator(extra["run_seed"], variant)
            evo = replace(config.evolution, seed=extra["run_seed"])
            continued.append(run_evolution(evo, config.controller.net, ev, resume=state,
                                           until=state.generation + continue_generations))
    report = GeneralizationReport(variant, np.array(original), np.array(modified), continued or None)
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report


def replay(genotype_path, config: ExperimentConfig, seed: int, out_dir=None, arena: Arena | None = None,
           epochs: int | None = None, steps: int | None = None):
    """One evaluation of a stored genotype; writes per-epoch trace CSVs and behavior call counts.

    Returns ``(fitness, traces)``.
    """
    net, genotype, _, meta = load_genotype(genotype_path)
    if net != config.controller.net:
        raise ConfigurationError(
            f"genotype is a {net.describe()}, config expects {config.controller.net.describe()}")
    kind = meta.get("controller")
    if kind is not None and kind != config.controller.kind:
        raise ConfigurationError(f"genotype is a {kind} controller, config expects {config.controller.kind}")
    if arena is not None:
        config = replace(config, arena=arena)
    ev = config.evaluator(0)
    traces = ev.traces([genotype], [seed], epochs, steps)[0]
    fitness = ev.fitness_fn(traces)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, t in enumerate(traces):
            write_trace_csv(t, out / f"trace_epoch{k:02d}.csv")
        if traces[0].call_counts is not None:
            total = np.sum([t.call_counts for t in traces], axis=0)
            lines = ["behavior,calls"] + [f"{n},{int(c)}" for n, c in zip(config.library.names, total)]
            (out / "calls.csv").write_text("\n".join(lines) + "\n")
        (out / "fitness.json").write_text(json.dumps(
            {"seed": seed, "total": fitness.total, "per_epoch": list(fitness.per_epoch)}, indent=2) + "\n")
    return fitness, traces


# ---------------------------------------------------------------------------
# Behavior library pipeline


def select_genotype(config: ExperimentConfig, candidates: Sequence[Genotype], epochs: int = 10,
                    seed: int = 0) -> tuple[int, np.ndarray]:
    """Index of the candidate with the best fitness on fresh, shared evaluation seeds.

    Best-ever genotypes are picked on a handful of noisy epochs and tend to
    be lucky rather than good; re-scoring on common unseen epochs removes
    that bias.
    """
    evaluator = config.evaluator(derive_seed(seed, 0xB1))
    scores = evaluator.evaluate(list(candidates), [derive_seed(seed, 0xB2)] * len(candidates), epochs=epochs).fitness
    return int(np.argmax(scores)), scores


def select_champion(config: ExperimentConfig, record: RunRecord, epochs: int = 10) -> Genotype:
    """A run's most reliable genotype among its best-ever and per-generation bests.

    Candidates are re-scored with `select_genotype` on seeds derived from the
    run seed, so the choice never reuses the epochs that made them look good.
    """
    res = record.result
    candidates = [record.best_genotype] + [s.best_genotype for s in res.history]
    idx, _ = select_genotype(config, candidates, epochs, record.seed)
    return candidates[idx]


def build_library(raw: dict, out_dir, base_dir=".") -> BehaviorLibrary:
    """Evolve each listed behavior ``runs`` times and keep the most reliable genotype.

    ``raw`` holds shared settings (``profile``, ``runs``, ``arena``,
    ``evolution``, ``select_epochs``) plus a ``behaviors`` list of ``{name,
    fitness, controller}`` entries (each may override the shared settings)
    or ``{name, rule}`` for hand-coded entries. The best-ever and final best
    genotype of every run are re-scored with `select_genotype` over
    ``select_epochs`` fresh epochs and the top scorer is kept.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shared = {k: v for k, v in raw.items() if k not in ("behaviors", "select_epochs")}
    select_epochs = int(raw.get("select_epochs", 10))
    lines = []
    for k, entry in enumerate(raw["behaviors"]):
        name = entry["name"]
        if "rule" in entry:
            lines.append(f"{name} rule:{entry['rule']}")
            continue
        sub = {**shared, **{key: v for key, v in entry.items() if key != "name"}, "experiment": name}
        evo = dict(shared.get("evolution", {}))
        evo.update(entry.get("evolution", {}))
        evo["seed"] = derive_seed(int(evo.get("seed", 0)), k)
        sub["evolution"] = evo
        config = config_from_dict(sub, base_dir)
        summary = run_experiment(config, out / name)
        candidates = [g for r in summary.runs for g in (r.best_genotype, r.result.history[-1].best_genotype)]
        idx, scores = select_genotype(config, candidates, select_epochs, evo["seed"])
        log.info("library %s: selected candidate %d scoring %.3f over %d epochs",
                 name, idx, scores[idx], select_epochs)
        save_genotype(out / f"{name}.gen", config.controller.net, candidates[idx],
                      config.evolution.weight_bounds, **_genotype_meta(config))
        lines.append(f"{name} {name}.gen")
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return load_library(manifest)
