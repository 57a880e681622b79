"""Why the ungated obstacle fitness is broken.

A hand-coded policy that alternates full-speed forward and backward steps
never moves more than one step from its start, yet the ungated reward pays it
the maximum on every step. Gating the reward on forward motion halves it.

    python demos/loophole.py
"""
from evorobo.controllers import make_rule
from evorobo.fitness import fitness_obstacle_gated, fitness_obstacle_original
from evorobo.sim import Arena, Pose, run_epoch

STEPS = 500

arena = Arena(1000, 800, obstacles=((300, 300, 400, 400),))
trace = run_epoch(make_rule("oscillate_fb"), arena, Pose(150, 150, 0.7), STEPS)

print(f"epoch ended by {trace.termination} after {len(trace)} steps")
print(f"max distance from start: {max(abs(x - 150) for x in trace.x):.1f} mm in x")
print(f"ungated fitness: {fitness_obstacle_original([trace]).total:.1f} (maximum is {STEPS})")
print(f"gated fitness:   {fitness_obstacle_gated([trace]).total:.1f}")
