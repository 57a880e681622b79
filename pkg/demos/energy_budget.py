"""The energy accumulator in numbers.

Prints the single-life bound, the parked refill time and the best
drive/recharge cycle over one 1000-step epoch, all from the integer-tick
energy model the simulator uses.

    python demos/energy_budget.py
"""
import math

from evorobo.controllers import make_rule
from evorobo.fitness import sustainable_rate
from evorobo.sim import DEFAULT_ENERGY as E, Arena, Disc, Pose, run_epoch

far = Arena(4000, 800, recharge=Disc(3900, 700))
life = run_epoch(make_rule("full_forward"), far, Pose(100, 400, 0), 1000, energy_enabled=True)
print(f"never recharging: dies after {len(life)} steps ({life.termination})")

refill = math.ceil(1 / (1 / E.recharge_steps - 1 / E.drain_steps))
print(f"parked on the disc: empty to full in {refill} steps (drain continues while recharging)")

drive = math.ceil(E.capacity / E.drain_ticks) - 1
back = math.ceil(drive * E.drain_ticks / E.gain_ticks)
print(f"best cycle: drive {drive} steps, recharge {back} steps -> {drive / (drive + back):.3f} of steps pay")
print(f"ideal sustainable share: {sustainable_rate():.3f}")
print(f"without drain while recharging it would be {sustainable_rate(drain_while_recharging=False):.3f}")
