"""Block-tree construction and exact leaf-set selection under a block budget.

Level 1 is the whole volume; each deeper level halves every axis, so level l
holds 2^(N(l-1)) congruent blocks. Nodes are indexed so the children of
(l, i) are (l+1, 2^N i + j) with j enumerating child octants row-major
(axis 0 in the high bit). Every node gets a concentration score.

Selecting a tiling means picking exactly one node on each root-to-leaf path.
A level-l node covers a 2^-(N(l-1)) fraction of the volume and enters the
objective with weight score / 2^(N l), so the objective is proportional to
the volume-weighted mean concentration of the tiling; the solver maximizes
it subject to a cap on the number of selected blocks.

The search is an exact bottom-up dynamic program over (node, leaf budget)
states. All arithmetic runs on exact rationals: scores convert from float
exactly and the 2^(N l) divisor is a power of two, so optima, tie-breaking
(fewer blocks, then lexicographically smallest node set), and the
brute-force cross-check are all order- and platform-independent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectrum import concentration, volume_spectrum
from .volume import BlockRegion, VolumeTensor, normalize

MIN_BLOCK_SIDE = 4

# a DP candidate is (value, block_count, selected) where selected is a sorted
# tuple of (level, index) pairs; _better defines the total order on candidates
Candidate = tuple[Fraction, int, tuple[tuple[int, int], ...]]


@dataclass(frozen=True)
class PartitionTree:
    """Per-level concentration scores for the complete block tree."""

    dims: tuple[int, ...]
    levels: int
    scores: tuple[np.ndarray, ...]  # scores[l-1] has 2^(N(l-1)) entries in (0, 1]
    m_top: int = 1

    def __post_init__(self):
        n = len(self.dims)
        if len(self.scores) != self.levels:
            raise ValueError("one score array per level required")
        for l, arr in enumerate(self.scores, start=1):
            if arr.shape != (node_count(l, n),):
                raise ValueError(f"level {l} must hold {node_count(l, n)} scores")
            if np.any(arr <= 0.0) or np.any(arr > 1.0):
                raise ValueError("scores must lie in (0, 1]")

    @property
    def n_dim(self) -> int:
        return len(self.dims)

    def score(self, level: int, index: int) -> float:
        return float(self.scores[level - 1][index])

    def region(self, level: int, index: int) -> BlockRegion:
        return node_region(self.dims, level, index)


@dataclass(frozen=True)
class PartitionSolution:
    """A tiling: selected (level, index) pairs plus their regions and scores."""

    selected: tuple[tuple[int, int], ...]
    objective_value: float
    objective_exact: Fraction
    dims: tuple[int, ...]
    regions: tuple[BlockRegion, ...]
    scores: tuple[float, ...]

    @property
    def n_blocks(self) -> int:
        return len(self.selected)


def node_count(level: int, n_dim: int) -> int:
    return 1 << (n_dim * (level - 1))


def node_region(dims: tuple[int, ...], level: int, index: int) -> BlockRegion:
    """Region of node (level, index); children split their parent in half per axis."""
    n = len(dims)
    if not 0 <= index < node_count(level, n):
        raise ValueError(f"index {index} out of range at level {level}")
    origin = [0] * n
    extent = list(dims)
    for step in range(1, level):
        digit = (index >> (n * (level - 1 - step))) & ((1 << n) - 1)
        for axis in range(n):
            extent_a = extent[axis] // 2
            if (digit >> (n - 1 - axis)) & 1:
                origin[axis] += extent_a
        extent = [e // 2 for e in extent]
    return BlockRegion(tuple(origin), tuple(extent), level)


def default_levels(dims: tuple[int, ...]) -> int:
    """Deepest level keeping the smallest block side at 16, capped at 4 levels."""
    side = min(dims)
    levels = 1
    while levels < 4 and side // 2 >= 16 and side % 2 == 0:
        side //= 2
        levels += 1
    return levels


def _check_partitionable(dims: tuple[int, ...], levels: int) -> None:
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    factor = 1 << (levels - 1)
    for d in dims:
        if d % factor != 0:
            raise ValueError(
                f"dims {dims} not divisible by 2^{levels - 1}; pad or crop the "
                f"volume, or lower the level count"
            )
        if d // factor < MIN_BLOCK_SIDE:
            raise ValueError(
                f"dims {dims} at {levels} levels give block side {d // factor}; "
                f"minimum is {MIN_BLOCK_SIDE}"
            )


def build_tree(
    v: VolumeTensor, levels: int, m_top: int = 1, power: float = 1.0
) -> PartitionTree:
    """Score every node of the complete tree on the normalized intensities."""
    _check_partitionable(v.dims, levels)
    x = normalize(v)
    n = v.ndim_spatial
    per_level = []
    for level in range(1, levels + 1):
        scores = np.empty(node_count(level, n))
        for i in range(scores.size):
            region = node_region(v.dims, level, i)
            block = x[region.slices()]
            spec = volume_spectrum(block, n)
            scores[i] = concentration(spec, m_top, power).value
        per_level.append(scores)
    return PartitionTree(v.dims, levels, tuple(per_level), m_top)


def _weight(tree: PartitionTree, level: int, index: int) -> Fraction:
    # Fraction(float) is exact and the divisor is a power of two, so the
    # node weight is the score's exact value scaled without rounding
    return Fraction(tree.score(level, index)) / (1 << (tree.n_dim * level))


def _better(a: Candidate, b: Candidate | None) -> bool:
    """Maximize value, then fewer blocks, then lexicographically smallest set."""
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2]


def _merge(a: Candidate, b: Candidate) -> Candidate:
    return (a[0] + b[0], a[1] + b[1], tuple(sorted(a[2] + b[2])))


def _fold(acc: list, child: list, max_blocks: int) -> list:
    """Combine two monotone budget tables: out[b] = best split b1 + b2 = b."""
    out: list[Candidate | None] = [None] * (max_blocks + 1)
    for b in range(2, max_blocks + 1):
        best = None
        for b1 in range(1, b):
            left = acc[b1]
            right = child[b - b1]
            if left is None or right is None:
                continue
            cand = _merge(left, right)
            if _better(cand, best):
                best = cand
        out[b] = best
    for b in range(1, max_blocks + 1):
        prev = out[b - 1]
        if prev is not None and (out[b] is None or _better(prev, out[b])):
            out[b] = prev
    return out


def solve_partition(tree: PartitionTree, max_blocks: int) -> PartitionSolution:
    """Exact optimum over all tilings with at most max_blocks selected nodes.

    Bottom-up DP; each node keeps, for every leaf budget b, the best candidate
    covering its region with at most b blocks. O(nodes * max_blocks^2).
    """
    if max_blocks < 1:
        raise ValueError(f"max_blocks must be >= 1, got {max_blocks}")
    n = tree.n_dim
    n_child = 1 << n
    below: list[list] = []
    for level in range(tree.levels, 0, -1):
        tables = []
        for i in range(node_count(level, n)):
            leaf: Candidate = (_weight(tree, level, i), 1, ((level, i),))
            if level == tree.levels:
                table: list[Candidate | None] = [None] + [leaf] * max_blocks
            else:
                acc = below[i * n_child]
                for j in range(1, n_child):
                    acc = _fold(acc, below[i * n_child + j], max_blocks)
                table = list(acc)
                for b in range(1, max_blocks + 1):
                    if _better(leaf, table[b]):
                        table[b] = leaf
                for b in range(2, max_blocks + 1):
                    if _better(table[b - 1], table[b]):
                        table[b] = table[b - 1]
            tables.append(table)
        below = tables
    best = below[0][max_blocks]
    if best is None:
        # a single root block is always feasible at max_blocks >= 1
        raise RuntimeError("no feasible tiling found")
    return _solution(tree, best[2])


def all_tilings(
    tree: PartitionTree, max_blocks: int, limit: int = 10_000_000
) -> list[tuple[tuple[int, int], ...]]:
    """Every tiling with at most max_blocks nodes, by explicit enumeration."""
    n_child = 1 << tree.n_dim

    def count(level: int) -> int:
        return 1 if level == tree.levels else 1 + count(level + 1) ** n_child

    if count(1) > limit:
        raise ValueError(f"more than {limit} tilings; refusing to enumerate")

    def expand(level: int, index: int) -> list[tuple[tuple[int, int], ...]]:
        out = [((level, index),)]
        if level < tree.levels:
            child_sets = [expand(level + 1, index * n_child + j) for j in range(n_child)]
            for combo in itertools.product(*child_sets):
                merged = tuple(sorted(itertools.chain.from_iterable(combo)))
                if len(merged) <= max_blocks:
                    out.append(merged)
        return out

    return [t for t in expand(1, 0) if len(t) <= max_blocks]


def solve_partition_bruteforce(tree: PartitionTree, max_blocks: int) -> PartitionSolution:
    """Reference solver: enumerate every tiling and keep the best candidate."""
    best: Candidate | None = None
    for tiling in all_tilings(tree, max_blocks):
        value = sum((_weight(tree, l, i) for l, i in tiling), Fraction(0))
        cand: Candidate = (value, len(tiling), tiling)
        if _better(cand, best):
            best = cand
    return _solution(tree, best[2])


def equidistant_solution(tree: PartitionTree, level: int) -> PartitionSolution:
    """All blocks of one level; level 1 selects the root (no partitioning)."""
    if not 1 <= level <= tree.levels:
        raise ValueError(f"level {level} outside tree with {tree.levels} levels")
    selected = tuple((level, i) for i in range(node_count(level, tree.n_dim)))
    return _solution(tree, selected)


def equidistant_partition(
    v: VolumeTensor, level: int, m_top: int = 1, power: float = 1.0
) -> PartitionSolution:
    """Uniform tiling of a volume at one level, scoring only that level."""
    _check_partitionable(v.dims, level)
    x = normalize(v)
    n = v.ndim_spatial
    count = node_count(level, n)
    selected = []
    regions = []
    scores = []
    exact = Fraction(0)
    for i in range(count):
        region = node_region(v.dims, level, i)
        spec = volume_spectrum(x[region.slices()], n)
        d = concentration(spec, m_top, power).value
        selected.append((level, i))
        regions.append(region)
        scores.append(d)
        exact += Fraction(d) / (1 << (n * level))
    return PartitionSolution(
        tuple(selected), float(exact), exact, v.dims, tuple(regions), tuple(scores)
    )


def _solution(tree: PartitionTree, selected: tuple[tuple[int, int], ...]) -> PartitionSolution:
    selected = tuple(sorted(selected))
    exact = sum((_weight(tree, l, i) for l, i in selected), Fraction(0))
    regions = tuple(tree.region(l, i) for l, i in selected)
    scores = tuple(tree.score(l, i) for l, i in selected)
    return PartitionSolution(selected, float(exact), exact, tree.dims, regions, scores)


def coverage_exact(solution: PartitionSolution) -> bool:
    """True when the selected regions tile the volume with no gap or overlap."""
    hits = np.zeros(solution.dims, dtype=np.uint8)
    for region in solution.regions:
        hits[region.slices()] += 1
    return bool(np.all(hits == 1))
