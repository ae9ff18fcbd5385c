"""Per-block training: hand-rolled backprop through sine layers plus Adamax.

Training runs in double precision. Each block owns an RNG seeded from the
global seed and the block's region, so results do not depend on scheduling
or the size of a worker pool. Batches sample voxels without replacement
within each shuffled epoch.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace

import numpy as np

from .inr import ArchitectureSpec, FunnelNetwork, init
from .volume import BlockRegion

log = logging.getLogger(__name__)

_RETRY_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    iterations: int = 5000
    batch_size: int = 4096
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.iterations < 1 or self.batch_size < 1:
            raise ValueError(f"bad training config: {self}")


class AdamaxState:
    """First moment m and infinity-norm accumulator u, one array per parameter."""

    def __init__(self, params: list[np.ndarray]):
        self.m = [np.zeros_like(p) for p in params]
        self.u = [np.zeros_like(p) for p in params]
        self.t = 0


def adamax_step(
    state: AdamaxState,
    params: list[np.ndarray],
    grads: list[np.ndarray],
    config: TrainConfig,
) -> tuple[list[np.ndarray], AdamaxState]:
    """One update in place:

    m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g|);
    theta <- theta - (lr / (1 - b1^t)) * m / (u + eps)
    """
    state.t += 1
    step = config.lr / (1.0 - config.beta1**state.t)
    for p, g, m, u in zip(params, grads, state.m, state.u):
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        np.maximum(config.beta2 * u, np.abs(g), out=u)
        p -= step * m / (u + config.eps)
    return params, state


def forward_cached(net: FunnelNetwork, coords: np.ndarray):
    """Forward pass keeping the per-layer inputs and cos factors for backprop."""
    acts = [coords]
    cosines = []
    a = coords
    last = net.n_layers - 1
    for layer in range(last):
        u = a @ net.weights[layer].T + net.biases[layer]
        s = net.layer_scale(layer)
        su = u if s == 1.0 else s * u
        a = np.sin(su)
        cosines.append(np.cos(su))
        acts.append(a)
    y = a @ net.weights[last].T + net.biases[last]
    return y, acts, cosines


def backward(net: FunnelNetwork, coords: np.ndarray, targets: np.ndarray):
    """MSE loss and its gradient for every weight and bias.

    Returns (grads, loss) with grads ordered like net.param_arrays(). The
    chain rule through z = sin(s u) uses dz/du = s cos(s u).
    """
    y, acts, cosines = forward_cached(net, coords)
    resid = y - targets
    loss = float(np.mean(resid**2))
    g = resid * (2.0 / resid.size)

    last = net.n_layers - 1
    grads_w = [None] * net.n_layers
    grads_b = [None] * net.n_layers
    grads_w[last] = g.T @ acts[last]
    grads_b[last] = g.sum(axis=0)
    ga = g @ net.weights[last]
    for layer in range(last - 1, -1, -1):
        s = net.layer_scale(layer)
        gu = ga * cosines[layer]
        if s != 1.0:
            gu *= s
        grads_w[layer] = gu.T @ acts[layer]
        grads_b[layer] = gu.sum(axis=0)
        if layer:
            ga = gu @ net.weights[layer]

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.append(gw)
        grads.append(gb)
    return grads, loss


def block_seed(global_seed: int, region: BlockRegion) -> int:
    """Stable 64-bit per-block seed; independent of worker count or order."""
    key = "{}|{}|{}|{}".format(
        global_seed,
        region.level,
        ",".join(map(str, region.origin)),
        ",".join(map(str, region.extent)),
    )
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def block_coords(
    region: BlockRegion,
    coords_mode: str = "block",
    full_dims: tuple[int, ...] | None = None,
) -> np.ndarray:
    """Voxel-center coordinates for one block, row-major, shape (voxels, ndim).

    "block" maps each axis of the block to [-1, 1] on its own (center of
    voxel i at (2i+1)/extent - 1); "global" keeps the whole volume's frame.
    """
    axes = []
    for d in range(region.ndim):
        idx = np.arange(region.extent[d], dtype=np.float64)
        if coords_mode == "block":
            axes.append((2.0 * idx + 1.0) / region.extent[d] - 1.0)
        elif coords_mode == "global":
            if full_dims is None:
                raise ValueError("global coords need the full volume dims")
            axes.append((2.0 * (idx + region.origin[d]) + 1.0) / full_dims[d] - 1.0)
        else:
            raise ValueError(f"unknown coords mode {coords_mode!r}")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def mse_full(net: FunnelNetwork, coords: np.ndarray, targets: np.ndarray, chunk: int = 65536) -> float:
    total = 0.0
    for lo in range(0, len(coords), chunk):
        diff = net.forward(coords[lo : lo + chunk]) - targets[lo : lo + chunk]
        total += float(np.sum(diff**2))
    return total / targets.size


def fit_block(
    block: np.ndarray,
    arch: ArchitectureSpec,
    region: BlockRegion,
    config: TrainConfig,
    coords_mode: str = "block",
    full_dims: tuple[int, ...] | None = None,
    progress=None,
) -> tuple[FunnelNetwork, float]:
    """Fit one normalized block (shape (*extent, channels), float) and return
    the trained network plus its full-block MSE.

    A non-finite loss triggers one retry at lr/10 with a reseeded init; a
    second failure raises. Only the block's own voxels are ever read.
    """
    targets = block.reshape(-1, block.shape[-1]).astype(np.float64)
    coords = block_coords(region, coords_mode, full_dims)
    if len(coords) != len(targets):
        raise ValueError("block shape does not match its region")
    seed = block_seed(config.seed, region)

    attempts = [(config, seed), (replace(config, lr=config.lr / 10.0), seed ^ _RETRY_SALT)]
    for attempt, (cfg, sd) in enumerate(attempts):
        net = init(arch, sd)
        params = net.param_arrays()
        state = AdamaxState(params)
        shuffle_rng = np.random.Generator(np.random.PCG64(sd ^ 0x5DEECE66D))
        n = len(targets)
        bs = min(cfg.batch_size, n)
        perm = None
        pos = n
        diverged = False
        for it in range(cfg.iterations):
            if pos >= n:
                perm = shuffle_rng.permutation(n)
                pos = 0
            idx = perm[pos : pos + bs]
            pos += bs
            grads, loss = backward(net, coords[idx], targets[idx])
            if not np.isfinite(loss):
                diverged = True
                log.warning(
                    "non-finite loss at iteration %d for block %s (attempt %d)",
                    it, region, attempt + 1,
                )
                break
            adamax_step(state, params, grads, cfg)
            if progress is not None:
                progress(it, loss)
        if not diverged:
            return net, mse_full(net, coords, targets)
    raise RuntimeError(
        f"training diverged for block {region}: non-finite loss persists after "
        f"one retry at lr/10"
    )
