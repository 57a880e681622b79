"""Symbolic versus classical obstacle avoidance at desk scale.

Evolves the degraded symbolic controller (FORWARD, LEFT, RIGHT) and a classical
8-20-2 network under the gated fitness, five runs each, and prints mean and
spread of the best fitness. Takes about a minute.

    python demos/table1_desk.py
"""
from pathlib import Path

from evorobo.experiments import load_config, run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

for name in ("obstacle_sc.yaml", "obstacle_cc.yaml"):
    summary = run_experiment(load_config(CONFIGS / name))
    bests = ", ".join(f"{b:.0f}" for b in summary.best_fitness)
    print(f"{summary.experiment:12s} {summary.mean:7.1f} +- {summary.std:5.1f}   [{bests}]")
