"""Controller encodings: classical, symbolic and supervisor, plus hand-coded rules.

All steppers follow the batched `evorobo.sim.Stepper` protocol: ``reset(n)``
at epoch start, then ``act(frames, rows, rngs)`` once per step for the live
robots ``rows``; ``frames`` holds one 17-column sensor row per live robot.

Hand-coded rules (sensor indices 0..5 run left-90 to right-90 across the
front, 6 and 7 are rear-right and rear-left):

``stop_rule``       (0, 0).
``full_forward``    (1, 1).
``oscillate_fb``    (1, 1) and (-1, -1) on alternate calls.
``random``          both wheels i.i.d. uniform in [-1, 1].
``crash``           full speed ahead when the strongest obstacle reading is in
                    front (or nothing is sensed), otherwise spin toward it.
``light_avoiding``  spin away from a light seen in front, else full ahead.
``stick_to_walls``  right-hand wall following.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from .nets import Genotype, Network, NetworkSpec, load_genotype, weight_count
from .sim import ConfigurationError, MotorCommand, SensorFrame


class Action(IntEnum):
    FORWARD = 0
    RIGHT = 1
    LEFT = 2
    BACKWARD = 3


FULL_ACTIONS = (Action.FORWARD, Action.RIGHT, Action.LEFT, Action.BACKWARD)
DEGRADED_ACTIONS = (Action.FORWARD, Action.RIGHT, Action.LEFT)

# (left, right) wheel signs per action.
_WHEEL_SIGNS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])

INPUT_SLICES = {
    "ir_active": slice(0, 8),
    "ir_passive": slice(8, 16),
    "all": slice(0, 17),
}
INPUT_WIDTH = {"ir_active": 8, "ir_passive": 8, "all": 17}


def parse_actions(actions) -> tuple[Action, ...]:
    if actions in (None, "full"):
        return FULL_ACTIONS
    if actions == "degraded":
        return DEGRADED_ACTIONS
    return tuple(a if isinstance(a, Action) else Action[str(a).upper()] for a in actions)


def decode_symbolic(outputs, action_set=FULL_ACTIONS) -> tuple[Action, float]:
    """Argmax over the first k outputs picks the action; output ``i + k`` is its parameter.

    Ties go to the lowest index.
    """
    o = np.asarray(outputs, dtype=float)
    k = len(action_set)
    if o.shape != (2 * k,):
        raise ValueError(f"expected {2 * k} outputs for {k} actions")
    i = int(np.argmax(o[:k]))
    return action_set[i], float(o[i + k])


def action_to_motors(action: Action, parameter: float) -> MotorCommand:
    p = min(1.0, max(0.0, float(parameter)))
    sl, sr = _WHEEL_SIGNS[int(action)]
    return MotorCommand(sl * p, sr * p)


def classical_to_motors(outputs) -> MotorCommand:
    o = np.asarray(outputs, dtype=float)
    return MotorCommand(2 * o[0] - 1, 2 * o[1] - 1)


def symbolic_motors(outputs: np.ndarray, action_set) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized `decode_symbolic` + `action_to_motors` over rows."""
    k = len(action_set)
    i = np.argmax(outputs[:, :k], axis=1)
    p = outputs[np.arange(len(outputs)), i + k]
    signs = _WHEEL_SIGNS[np.asarray(action_set, dtype=int)[i]]
    return signs[:, 0] * p, signs[:, 1] * p, i


@dataclass(frozen=True)
class ControllerSpec:
    """Network topology plus output encoding and input wiring."""

    kind: str
    net: NetworkSpec
    actions: tuple[Action, ...] | None = None
    inputs: str = "ir_active"

    def __post_init__(self):
        if self.kind not in ("classical", "symbolic", "supervisor"):
            raise ConfigurationError(f"unknown controller kind {self.kind!r}")
        if self.inputs not in INPUT_SLICES:
            raise ConfigurationError(f"unknown input selection {self.inputs!r}")
        if self.net.n_inputs != INPUT_WIDTH[self.inputs]:
            raise ConfigurationError(
                f"{self.inputs} provides {INPUT_WIDTH[self.inputs]} inputs, net expects {self.net.n_inputs}")
        if self.kind == "symbolic":
            object.__setattr__(self, "actions", parse_actions(self.actions))
            if self.net.n_outputs != 2 * len(self.actions):
                raise ConfigurationError("symbolic controller needs 2 outputs per action")
        elif self.kind == "classical" and self.net.n_outputs != 2:
            raise ConfigurationError("classical controller needs 2 outputs")

    def meta(self) -> dict:
        d = {"controller": self.kind, "inputs": self.inputs}
        if self.actions is not None:
            d["actions"] = [a.name for a in self.actions]
        return d

    @classmethod
    def from_meta(cls, net: NetworkSpec, meta: dict) -> "ControllerSpec":
        actions = meta.get("actions")
        return cls(
            kind=meta.get("controller", "classical"),
            net=net,
            actions=tuple(actions.split()) if isinstance(actions, str) else actions,
            inputs=meta.get("inputs", "ir_active"),
        )


class NetController:
    """Classical or symbolic network controller.

    ``weights`` is one flat vector (shared by all robots) or an ``(N, W)``
    array with one row per robot.
    """

    def __init__(self, spec: ControllerSpec, weights):
        if spec.kind == "supervisor":
            raise ConfigurationError("use Supervisor for supervisor specs")
        self.spec = spec
        self.net = Network(spec.net, weights)
        self.cols = INPUT_SLICES[spec.inputs]

    def reset(self, n: int) -> None:
        self.net.reset(n)

    def act(self, frames, rows, rngs):
        out = self.net(frames[:, self.cols], rows)
        if self.spec.kind == "classical":
            return 2 * out[:, 0] - 1, 2 * out[:, 1] - 1, None
        left, right, _ = symbolic_motors(out, self.spec.actions)
        return left, right, None


# ---------------------------------------------------------------------------
# Hand-coded rules


class Rule:
    name = ""

    def reset(self, n: int) -> None:
        pass

    def act(self, frames, rows, rngs):
        raise NotImplementedError


class _Constant(Rule):
    def __init__(self, name, left, right):
        self.name, self.left, self.right = name, left, right

    def act(self, frames, rows, rngs):
        n = len(frames)
        return np.full(n, self.left), np.full(n, self.right), None


class OscillateFB(Rule):
    name = "oscillate_fb"

    def reset(self, n):
        self.calls = np.zeros(n, dtype=np.int64)

    def act(self, frames, rows, rngs):
        s = np.where(self.calls[rows] % 2 == 0, 1.0, -1.0)
        self.calls[rows] += 1
        return s, s.copy(), None


class RandomRule(Rule):
    name = "random"

    def act(self, frames, rows, rngs):
        m = np.array([rngs[r].uniform(-1.0, 1.0, 2) for r in rows]).reshape(-1, 2)
        return m[:, 0], m[:, 1], None


class Crash(Rule):
    name = "crash"

    def act(self, frames, rows, rngs):
        a = frames[:, 0:8]
        i = np.argmax(a, axis=1)
        none = a.max(axis=1) <= 0
        left_side = np.isin(i, (0, 1, 7))
        right_side = np.isin(i, (4, 5, 6))
        left = np.where(left_side, -0.5, np.where(right_side, 0.5, 1.0))
        right = np.where(left_side, 0.5, np.where(right_side, -0.5, 1.0))
        left[none] = 1.0
        right[none] = 1.0
        return left, right, None


class LightAvoiding(Rule):
    name = "light_avoiding"

    def act(self, frames, rows, rngs):
        p = frames[:, 8:16]
        front = p[:, 1:5].max(axis=1)
        rear = p[:, 6:8].max(axis=1)
        lsum = p[:, [0, 1, 2, 7]].sum(axis=1)
        rsum = p[:, [3, 4, 5, 6]].sum(axis=1)
        flee = (front >= rear) & (p.max(axis=1) > 0.02)
        turn_right = lsum >= rsum
        left = np.where(flee, np.where(turn_right, 0.5, -0.5), 1.0)
        right = np.where(flee, np.where(turn_right, -0.5, 0.5), 1.0)
        return left, right, None


class StickToWalls(Rule):
    name = "stick_to_walls"

    def act(self, frames, rows, rngs):
        a = frames[:, 0:8]
        front = a[:, 2:4].max(axis=1)
        right = a[:, 4:6].max(axis=1)
        left = np.ones(len(a))
        rgt = np.ones(len(a))
        close = right > 0.5
        search = right <= 0.05
        left[close], rgt[close] = 0.6, 1.0
        left[search], rgt[search] = 1.0, 0.6
        blocked = front > 0.2
        left[blocked], rgt[blocked] = -0.5, 0.5
        return left, rgt, None


HAND_CODED = {
    "stop_rule": lambda: _Constant("stop_rule", 0.0, 0.0),
    "full_forward": lambda: _Constant("full_forward", 1.0, 1.0),
    "oscillate_fb": OscillateFB,
    "random": RandomRule,
    "crash": Crash,
    "light_avoiding": LightAvoiding,
    "stick_to_walls": StickToWalls,
}
USELESS_BEHAVIORS = ("random", "light_avoiding", "crash", "stick_to_walls")


def make_rule(name: str) -> Rule:
    try:
        return HAND_CODED[name]()
    except KeyError:
        raise ConfigurationError(f"unknown hand-coded behavior {name!r}") from None


def hand_coded_behavior(name: str, frame: SensorFrame, rng: np.random.Generator | None = None,
                        step: int = 0) -> MotorCommand:
    """Motor command of a hand-coded rule for one frame; ``step`` counts prior calls."""
    rule = make_rule(name)
    rule.reset(1)
    if isinstance(rule, OscillateFB):
        rule.calls[0] = step
    rngs = [rng if rng is not None else np.random.default_rng()]
    left, right, _ = rule.act(frame.as_array()[None, :], np.zeros(1, dtype=int), rngs)
    return MotorCommand(float(left[0]), float(right[0]))


# ---------------------------------------------------------------------------
# Behavior library and supervisor


@dataclass
class Behavior:
    """A library entry: a hand-coded rule or a frozen evolved controller."""

    name: str
    rule: str | None = None
    spec: ControllerSpec | None = None
    genotype: Genotype | None = None
    source: str | None = None

    def __post_init__(self):
        if (self.rule is None) == (self.spec is None):
            raise ConfigurationError(f"behavior {self.name!r} needs exactly one of rule or evolved spec")
        if self.rule is not None and self.rule not in HAND_CODED:
            raise ConfigurationError(f"unknown hand-coded behavior {self.rule!r}")
        if self.spec is not None:
            if self.spec.kind == "supervisor":
                raise ConfigurationError("nested supervisors are not supported")
            if self.genotype is None or len(self.genotype) != weight_count(self.spec.net):
                raise ConfigurationError(f"behavior {self.name!r}: genotype does not match its network")

    def stepper(self):
        if self.rule is not None:
            return make_rule(self.rule)
        return NetController(self.spec, self.genotype.weights.copy())


@dataclass
class BehaviorLibrary:
    entries: list[Behavior] = field(default_factory=list)

    def __post_init__(self):
        names = [b.name for b in self.entries]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate behavior names in {names}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.entries]

    def extended(self, rules: Sequence[str], replication: int = 1) -> "BehaviorLibrary":
        """Copy with hand-coded ``rules`` appended ``replication`` times."""
        extra = []
        for k in range(replication):
            for r in rules:
                name = r if replication == 1 else f"{r}_{k}"
                extra.append(Behavior(name, rule=r))
        return BehaviorLibrary(list(self.entries) + extra)


def load_library(manifest) -> BehaviorLibrary:
    """Read a manifest: one ``name source`` line per behavior, in supervisor-output order.

    ``source`` is ``rule:<name>`` or a genotype file path (relative to the
    manifest). Blank lines and ``#`` comments are ignored.
    """
    manifest = Path(manifest)
    entries = []
    for line in manifest.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, source = line.split(None, 1)
        if source.startswith("rule:"):
            entries.append(Behavior(name, rule=source[5:].strip()))
            continue
        path = (manifest.parent / source).resolve()
        net, genotype, _, meta = load_genotype(path)
        entries.append(Behavior(name, spec=ControllerSpec.from_meta(net, meta), genotype=genotype,
                                source=source))
    return BehaviorLibrary(entries)


def save_manifest(library: BehaviorLibrary, path) -> None:
    lines = []
    for b in library.entries:
        if b.rule is not None:
            lines.append(f"{b.name} rule:{b.rule}")
        else:
            if b.source is None:
                raise ValueError(f"evolved behavior {b.name!r} has no genotype file")
            lines.append(f"{b.name} {b.source}")
    Path(path).write_text("\n".join(lines) + "\n")


def supervisor_step(outputs: np.ndarray, steppers, frames: np.ndarray, rows: np.ndarray, rngs,
                    counts: np.ndarray | None = None):
    """Select the argmax behavior per row and run only that behavior for one step.

    Returns ``(left, right, selected)``. ``counts``, when given, is an
    ``(N, k)`` tally incremented in place.
    """
    sel = np.argmax(outputs, axis=1)
    left = np.zeros(len(rows))
    right = np.zeros(len(rows))
    for b in np.unique(sel):
        m = sel == b
        lb, rb, _ = steppers[b].act(frames[m], rows[m], rngs)
        left[m], right[m] = lb, rb
    if counts is not None:
        np.add.at(counts, (rows, sel), 1)
    return left, right, sel


class Supervisor:
    """Network that picks one library behavior per step from the full sensor frame."""

    def __init__(self, spec: ControllerSpec, weights, library: BehaviorLibrary):
        if spec.kind != "supervisor":
            raise ConfigurationError("Supervisor needs a supervisor spec")
        if spec.net.n_outputs != len(library):
            raise ConfigurationError(
                f"supervisor has {spec.net.n_outputs} outputs for {len(library)} behaviors")
        self.spec = spec
        self.library = library
        self.net = Network(spec.net, weights)
        self.cols = INPUT_SLICES[spec.inputs]
        self.steppers = [b.stepper() for b in library.entries]

    def reset(self, n: int) -> None:
        self.net.reset(n)
        for s in self.steppers:
            s.reset(n)

    def act(self, frames, rows, rngs):
        out = self.net(frames[:, self.cols], rows)
        return supervisor_step(out, self.steppers, frames, rows, rngs)


def build_controller(spec: ControllerSpec, weights, library: BehaviorLibrary | None = None):
    if spec.kind == "supervisor":
        if library is None:
            raise ConfigurationError("supervisor controller needs a behavior library")
        return Supervisor(spec, weights, library)
    return NetController(spec, weights)
