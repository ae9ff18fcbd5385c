"""Funnel-shaped sinusoidal coordinate networks.

Seven affine layers by default: six with sine activation, then a linear
output. The first layer is wider than the rest by the ratio fr (the funnel),
and its weights carry the frequency scale w0 baked in at init. Later sine
layers store weights in the conventional pre-scale parameterization and the
forward pass multiplies their pre-activations by w0, which keeps hidden
pre-activation statistics near unit scale at init.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArchitectureSpec:
    """Output widths per affine layer; the last entry is the output size."""

    widths: tuple[int, ...]
    in_dim: int
    w0: float = 20.0
    fr: float = 2.2

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("need at least one sine layer plus the linear output")
        if any(w < 1 for w in self.widths) or self.in_dim < 1:
            raise ValueError(f"widths and in_dim must be positive: {self}")
        if self.w0 <= 0:
            raise ValueError(f"w0 must be positive, got {self.w0}")

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.widths)

    @property
    def n_params(self) -> int:
        total = 0
        fan = self.in_dim
        for w in self.widths:
            total += (fan + 1) * w
            fan = w
        return total


class FunnelNetwork:
    """Weights and biases of one block's network, with the forward pass."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], w0: float = 1.0):
        if len(weights) != len(biases) or len(weights) < 2:
            raise ValueError("need matching weight/bias lists, two layers minimum")
        fan = weights[0].shape[1]
        for w, b in zip(weights, biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0] or w.shape[1] != fan:
                raise ValueError("inconsistent layer shapes")
            fan = w.shape[0]
        self.weights = weights
        self.biases = biases
        self.w0 = float(w0)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def spec(self) -> ArchitectureSpec:
        return ArchitectureSpec(self.widths, self.in_dim, self.w0)

    def layer_scale(self, layer: int) -> float:
        """Pre-activation multiplier: 1 for the pre-scaled first layer, w0 for later sine layers."""
        return 1.0 if layer == 0 else self.w0

    def forward(self, coords: np.ndarray) -> np.ndarray:
        """Evaluate on a (batch, in_dim) array; returns (batch, out_dim)."""
        coords = np.asarray(coords)
        if coords.ndim != 2 or coords.shape[1] != self.in_dim:
            raise ValueError(
                f"coords must be (batch, {self.in_dim}), got {coords.shape}"
            )
        a = coords
        last = self.n_layers - 1
        for layer in range(last):
            u = a @ self.weights[layer].T + self.biases[layer]
            s = self.layer_scale(layer)
            a = np.sin(u if s == 1.0 else s * u)
        return a @ self.weights[last].T + self.biases[last]

    def param_arrays(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...] as live views."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def to_flat(self) -> np.ndarray:
        """Concatenate all parameters: per layer, weights row-major then bias."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ascontiguousarray(w).ravel())
            parts.append(b)
        return np.concatenate(parts)

    def astype(self, dtype) -> "FunnelNetwork":
        return FunnelNetwork(
            [w.astype(dtype) for w in self.weights],
            [b.astype(dtype) for b in self.biases],
            self.w0,
        )


def from_flat(spec: ArchitectureSpec, flat: np.ndarray) -> FunnelNetwork:
    """Rebuild a network from the flat layout produced by to_flat."""
    if flat.size != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {flat.size}")
    weights, biases, pos = [], [], 0
    fan = spec.in_dim
    for w in spec.widths:
        weights.append(flat[pos : pos + w * fan].reshape(w, fan))
        pos += w * fan
        biases.append(flat[pos : pos + w])
        pos += w
        fan = w
    return FunnelNetwork(weights, biases, spec.w0)


def init(spec: ArchitectureSpec, seed: int) -> FunnelNetwork:
    """Deterministic init.

    First layer: uniform in [-1/in_dim, 1/in_dim], then scaled by w0 (stored
    post-scale). Every later layer: uniform in +-sqrt(6/fan_in)/w0, stored
    pre-scale. Biases start at zero.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    fan = spec.in_dim
    for layer, width in enumerate(spec.widths):
        if layer == 0:
            w = rng.uniform(-1.0 / fan, 1.0 / fan, size=(width, fan)) * spec.w0
        else:
            bound = np.sqrt(6.0 / fan) / spec.w0
            w = rng.uniform(-bound, bound, size=(width, fan))
        weights.append(w)
        biases.append(np.zeros(width))
        fan = width
    return FunnelNetwork(weights, biases, spec.w0)
