"""Fixed-topology MLP and Elman networks driven by a flat weight vector.

Weight layout, per layer, is a row-major ``(n_out, n_in + 1)`` matrix whose
last column is the bias. For an Elman net the ``(hidden, hidden)`` context
matrix follows the input-to-hidden matrix. All units are logistic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class NetworkSpec:
    n_inputs: int
    hidden_sizes: tuple[int, ...] = ()
    n_outputs: int = 2
    recurrent: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.n_inputs < 1 or self.n_outputs < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"invalid layer sizes in {self}")
        if self.recurrent and len(self.hidden_sizes) != 1:
            raise ValueError("an Elman network needs exactly one hidden layer")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.n_inputs, *self.hidden_sizes, self.n_outputs)

    @property
    def context_size(self) -> int:
        return self.hidden_sizes[0] if self.recurrent else 0

    def describe(self) -> str:
        arch = "-".join(map(str, self.sizes))
        return f"Elman {arch}" if self.recurrent else f"MLP {arch}"


def weight_count(spec: NetworkSpec) -> int:
    s = spec.sizes
    n = sum((a + 1) * b for a, b in zip(s[:-1], s[1:]))
    return n + spec.context_size**2


@dataclass
class Genotype:
    """Network weights plus one self-adaptive mutation step size per weight."""

    weights: np.ndarray
    sigmas: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.weights.shape != self.sigmas.shape or self.weights.ndim != 1:
            raise ValueError("weights and sigmas must be 1-D arrays of equal length")

    def __len__(self) -> int:
        return len(self.weights)

    def copy(self) -> "Genotype":
        return Genotype(self.weights.copy(), self.sigmas.copy(), dict(self.meta))


def unpack(spec: NetworkSpec, weights: np.ndarray):
    """Split flat weights (shape ``(W,)`` or ``(B, W)``) into layer matrices.

    Returns ``(layers, context)`` where ``layers`` is a list of
    ``(A, b)`` with ``A`` of shape ``(B, n_out, n_in)`` and ``b`` of shape
    ``(B, n_out)``; ``context`` is ``(B, h, h)`` or None.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    if w.shape[1] != weight_count(spec):
        raise ValueError(f"{spec.describe()} expects {weight_count(spec)} weights, got {w.shape[1]}")
    layers = []
    context = None
    pos = 0
    sizes = spec.sizes
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        m = w[:, pos:pos + b * (a + 1)].reshape(-1, b, a + 1)
        pos += b * (a + 1)
        layers.append((m[:, :, :a], m[:, :, a]))
        if k == 0 and spec.recurrent:
            context = w[:, pos:pos + b * b].reshape(-1, b, b)
            pos += b * b
    return layers, context


def forward(spec: NetworkSpec, genotype, inputs, state=None):
    """One forward pass for a single network.

    ``genotype`` is a `Genotype` or a flat weight vector; ``state`` holds the
    previous hidden activations of an Elman net (zeros when None). Returns
    ``(outputs, new_state)``; the state is passed through unchanged for MLPs.
    """
    weights = genotype.weights if isinstance(genotype, Genotype) else genotype
    x = np.asarray(inputs, dtype=float)
    if x.shape != (spec.n_inputs,):
        raise ValueError(f"expected {spec.n_inputs} inputs, got shape {x.shape}")
    net = Network(spec, weights)
    net.reset(1)
    if state is not None and spec.recurrent:
        net.state[0] = state
    out = net(x[None, :], np.zeros(1, dtype=int))[0]
    return out, (net.state[0].copy() if spec.recurrent else state)


class Network:
    """Batched evaluator.

    Holds either one shared weight vector or one per robot; hidden state
    (Elman) is kept per robot and addressed through ``rows``.
    """

    def __init__(self, spec: NetworkSpec, weights):
        self.spec = spec
        self.layers, self.context = unpack(spec, weights)
        self.shared = self.layers[0][0].shape[0] == 1
        self.state = None

    def reset(self, n: int) -> None:
        if self.spec.recurrent:
            self.state = np.zeros((n, self.spec.context_size))

    def __call__(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        h = x
        for k, (a, b) in enumerate(self.layers):
            if self.shared:
                z = h @ a[0].T + b[0]
                if k == 0 and self.context is not None:
                    z += self.state[rows] @ self.context[0].T
            else:
                z = np.einsum("noi,ni->no", a[rows], h) + b[rows]
                if k == 0 and self.context is not None:
                    z += np.einsum("noi,ni->no", self.context[rows], self.state[rows])
            h = logistic(z)
            if k == 0 and self.context is not None:
                self.state[rows] = h
        return h


# ---------------------------------------------------------------------------
# Genotype files

_HEADER = "# evorobo genotype v1"


def save_genotype(path, spec: NetworkSpec, genotype: Genotype, bounds=(-1.0, 1.0), **meta) -> None:
    """Write a genotype as text: header lines, then weights and sigmas at 17 significant digits.

    Extra ``meta`` entries (controller kind, action set, input slice) are
    stored as ``key value...`` header lines.
    """
    lines = [
        _HEADER,
        f"n_inputs {spec.n_inputs}",
        "hidden_sizes " + " ".join(map(str, spec.hidden_sizes)),
        f"n_outputs {spec.n_outputs}",
        f"recurrent {int(spec.recurrent)}",
        f"bounds {bounds[0]!r} {bounds[1]!r}",
    ]
    for key, value in meta.items():
        if isinstance(value, (list, tuple)):
            value = " ".join(map(str, value))
        lines.append(f"{key} {value}")
    lines.append("weights")
    lines.append(" ".join(f"{w:.17g}" for w in genotype.weights))
    lines.append("sigmas")
    lines.append(" ".join(f"{s:.17g}" for s in genotype.sigmas))
    Path(path).write_text("\n".join(lines) + "\n")


def load_genotype(path):
    """Read a genotype file; returns ``(spec, genotype, bounds, meta)``."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != _HEADER:
        raise ValueError(f"{path}: not a genotype file")
    header = {}
    i = 1
    while text[i].strip() != "weights":
        key, _, value = text[i].strip().partition(" ")
        header[key] = value.strip()
        i += 1
    weights = np.array(text[i + 1].split(), dtype=float)
    if text[i + 2].strip() != "sigmas":
        raise ValueError(f"{path}: missing sigmas section")
    sigmas = np.array(text[i + 3].split(), dtype=float)
    spec = NetworkSpec(
        n_inputs=int(header.pop("n_inputs")),
        hidden_sizes=tuple(int(h) for h in header.pop("hidden_sizes", "").split()),
        n_outputs=int(header.pop("n_outputs")),
        recurrent=bool(int(header.pop("recurrent", "0"))),
    )
    lo, hi = (float(v) for v in header.pop("bounds", "-1 1").split())
    genotype = Genotype(weights, sigmas)
    if len(genotype) != weight_count(spec):
        raise ValueError(f"{path}: {len(genotype)} weights for {spec.describe()}")
    return spec, genotype, (lo, hi), header
