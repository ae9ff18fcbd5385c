"""Turning a bit budget into per-block parameter counts and architectures.

The global parameter budget is what remains of the target bit count after
the measured container overhead, divided by the bits per stored parameter.
Blocks receive integer shares proportional to a mode-dependent weight
(default: block size over concentration, so large broadband blocks get
more), rounded by largest remainder. Architectures then realize as many of
those parameters as the width grid allows, and a pooled upgrade pass spends
whatever rounding left over, so the realized size tracks the target from
below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .inr import ArchitectureSpec
from .partition import PartitionSolution
from .volume import BlockRegion

ALLOC_MODES = ("spectrum", "size", "inverse_d", "equal")

MIN_HIDDEN = 2


class BudgetError(ValueError):
    """The bit budget cannot cover the minimum viable network per block."""


@dataclass(frozen=True)
class BitBudget:
    """Bit accounting for one archive."""

    source_bits: int
    target_ratio: float
    overhead_bits: int
    param_bits: int

    def __post_init__(self):
        if self.param_bits not in (16, 32):
            raise ValueError(f"param_bits must be 16 or 32, got {self.param_bits}")
        if self.target_ratio <= 0:
            raise ValueError(f"target_ratio must be positive, got {self.target_ratio}")

    @property
    def target_bits(self) -> int:
        return int(self.source_bits / self.target_ratio)

    @property
    def param_budget_total(self) -> int:
        total = (self.target_bits - self.overhead_bits) // self.param_bits
        if total <= 0:
            raise BudgetError(
                f"target ratio {self.target_ratio:g} leaves no parameter budget: "
                f"{self.target_bits} target bits, {self.overhead_bits} overhead bits"
            )
        return int(total)


def budget_from_ratio(
    source_bits: int, ratio: float, overhead_bits: int, param_bits: int
) -> BitBudget:
    return BitBudget(source_bits, ratio, overhead_bits, param_bits)


def budget_from_bpv(
    source_bits: int, voxels: int, bpv: float, overhead_bits: int, param_bits: int
) -> BitBudget:
    if bpv <= 0:
        raise ValueError(f"bpv must be positive, got {bpv}")
    return BitBudget(source_bits, source_bits / (bpv * voxels), overhead_bits, param_bits)


@dataclass(frozen=True)
class BlockPlan:
    region: BlockRegion
    concentration: float
    param_count: int
    arch: ArchitectureSpec


def first_width(hidden: int, fr: float) -> int:
    """Funnel width: fr * hidden rounded half-up, never below 1."""
    return max(1, math.floor(fr * hidden + 0.5))


def widths_for(
    hidden: int, layers: int = 7, fr: float = 2.2, out_dim: int = 1, taper: bool = False
) -> tuple[int, ...]:
    """Per-layer output widths for a hidden size. layers counts affine maps."""
    if layers < 3:
        raise ValueError(f"need at least 3 affine layers, got {layers}")
    if hidden < MIN_HIDDEN:
        raise ValueError(f"hidden width must be >= {MIN_HIDDEN}, got {hidden}")
    if taper:
        body = tuple(max(MIN_HIDDEN, hidden - k) for k in range(layers - 2))
    else:
        body = (hidden,) * (layers - 2)
    return (first_width(hidden, fr), *body, out_dim)


def params_for_widths(widths: tuple[int, ...], in_dim: int) -> int:
    total = 0
    fan = in_dim
    for w in widths:
        total += (fan + 1) * w
        fan = w
    return total


def total_params(
    hidden: int,
    in_dim: int = 3,
    out_dim: int = 1,
    layers: int = 7,
    fr: float = 2.2,
    taper: bool = False,
) -> int:
    """Parameter count at a given hidden width; strictly increasing in hidden."""
    return params_for_widths(widths_for(hidden, layers, fr, out_dim, taper), in_dim)


def min_params(in_dim: int, out_dim: int, layers: int = 7, fr: float = 2.2) -> int:
    return total_params(MIN_HIDDEN, in_dim, out_dim, layers, fr)


def solve_architecture(
    param_count: int,
    in_dim: int = 3,
    out_dim: int = 1,
    layers: int = 7,
    fr: float = 2.2,
    w0: float = 20.0,
    taper: bool = False,
) -> ArchitectureSpec:
    """Largest architecture fitting the parameter count."""
    floor = total_params(MIN_HIDDEN, in_dim, out_dim, layers, fr, taper)
    if param_count < floor:
        raise BudgetError(
            f"{param_count} parameters cannot host the minimum network "
            f"({floor} parameters at hidden width {MIN_HIDDEN})"
        )
    hidden = MIN_HIDDEN
    while total_params(hidden + 1, in_dim, out_dim, layers, fr, taper) <= param_count:
        hidden += 1
    return ArchitectureSpec(widths_for(hidden, layers, fr, out_dim, taper), in_dim, w0, fr)


def _mode_weights(solution: PartitionSolution, mode: str, channels: int) -> list[float]:
    weights = []
    for region, score in zip(solution.regions, solution.scores):
        size = region.voxels * channels
        if mode == "spectrum":
            weights.append(size / score)
        elif mode == "size":
            weights.append(float(size))
        elif mode == "inverse_d":
            weights.append(1.0 / score)
        elif mode == "equal":
            weights.append(1.0)
        else:
            raise ValueError(f"unknown allocation mode {mode!r}; pick one of {ALLOC_MODES}")
    return weights


def allocate(
    solution: PartitionSolution,
    budget: BitBudget,
    mode: str = "spectrum",
    *,
    in_dim: int,
    out_dim: int,
    layers: int = 7,
    fr: float = 2.2,
    w0: float = 20.0,
    taper: bool = False,
) -> list[BlockPlan]:
    """Split the parameter budget across blocks and realize architectures.

    Shares are proportional to the mode weight, floored, bumped to the
    per-block minimum, with leftover parameters granted one by one to the
    largest fractional remainders. Architecture realization wastes the gap
    to the next representable width, so a final pooled pass upgrades the
    most under-served blocks while any width step still fits the global
    leftover; the realized total never exceeds the budget.
    """
    total = budget.param_budget_total
    n = solution.n_blocks
    floor_params = min_params(in_dim, out_dim, layers, fr)
    if n * floor_params > total:
        max_ratio = budget.source_bits / (
            n * floor_params * budget.param_bits + budget.overhead_bits
        )
        raise BudgetError(
            f"budget of {total} parameters cannot give {n} blocks the minimum "
            f"{floor_params} each; highest achievable ratio for this partition "
            f"is about {max_ratio:.2f}"
        )

    weights = _mode_weights(solution, mode, channels=out_dim)
    wsum = sum(weights)
    shares = [total * w / wsum for w in weights]
    counts = [max(floor_params, math.floor(s)) for s in shares]
    leftover = total - sum(counts)
    while leftover < 0:
        # minimum bumps overdrew the pool; claw back from the largest count.
        # n * floor_params <= total guarantees this terminates above the floor.
        i = max(range(n), key=lambda j: (counts[j], -j))
        if counts[i] <= floor_params:
            raise BudgetError("parameter budget infeasible after minimum bumps")
        counts[i] -= 1
        leftover += 1
    if leftover > 0:
        remainder_order = sorted(
            range(n), key=lambda i: (-(shares[i] - math.floor(shares[i])), i)
        )
        for i in remainder_order[: min(leftover, n)]:
            counts[i] += 1

    archs = [
        solve_architecture(c, in_dim, out_dim, layers, fr, w0, taper) for c in counts
    ]
    hidden = [a.widths[1] for a in archs]
    realized = [a.n_params for a in archs]
    pool = total - sum(realized)

    while True:
        best_i = -1
        best_deficit = None
        for i in range(n):
            step = total_params(hidden[i] + 1, in_dim, out_dim, layers, fr, taper) - realized[i]
            if step > pool:
                continue
            deficit = shares[i] - realized[i]
            if best_deficit is None or deficit > best_deficit:
                best_deficit = deficit
                best_i = i
        if best_i < 0:
            break
        hidden[best_i] += 1
        new_total = total_params(hidden[best_i], in_dim, out_dim, layers, fr, taper)
        pool -= new_total - realized[best_i]
        realized[best_i] = new_total
        archs[best_i] = ArchitectureSpec(
            widths_for(hidden[best_i], layers, fr, out_dim, taper), in_dim, w0, fr
        )

    assert sum(realized) <= total
    return [
        BlockPlan(region, score, count, arch)
        for region, score, count, arch in zip(
            solution.regions, solution.scores, counts, archs
        )
    ]
