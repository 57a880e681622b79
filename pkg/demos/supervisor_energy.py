"""Build a behavior library, then evolve a symbolic supervisor for the energy task.

The library (obstacle avoidance, light following, stop, area sweeping) is
written to runs/library unless it already exists. The supervisor's best
genotype of each run is then replayed for ten fresh 1000-step epochs, and the
script reports energy deaths and how often each behavior was chosen.
Takes several minutes.

    python demos/supervisor_energy.py
"""
from collections import Counter
from pathlib import Path

import yaml

from evorobo.experiments import build_library, load_config, run_experiment

ROOT = Path(__file__).resolve().parent.parent
manifest = ROOT / "runs" / "library" / "manifest.txt"
if not manifest.exists():
    raw = yaml.safe_load((ROOT / "configs" / "library_desk.yaml").read_text())
    build_library(raw, manifest.parent, ROOT / "configs")

config = load_config(ROOT / "configs" / "energy_ss.yaml")
summary = run_experiment(config)
check = config.evaluator(0)
for run in summary.runs:
    res = check.evaluate([run.best_genotype], [2024], epochs=10, steps=1000)
    info = res.info[0]
    ends = Counter(info["terminations"])
    calls = dict(zip(config.library.names, info["call_counts"]))
    print(f"run {run.index}: initial best {run.result.initial.best:6.0f}  best {run.best_fitness:6.0f}  "
          f"replay {res.fitness[0]:6.0f}  {dict(ends)}")
    print(f"        calls {calls}")
