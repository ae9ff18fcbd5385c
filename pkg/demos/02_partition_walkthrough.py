"""Watching the partitioner choose where to split.

A volume that is smooth everywhere except one busy octant should not be
tiled uniformly: the busy region wants small blocks, the smooth bulk wants
large ones. This script builds exactly that field, prints the concentration
score of every octree node, and compares the tree search's tiling against
the fixed grid.
"""

import numpy as np

from sincodec.codec import render_block_name
from sincodec.partition import (
    build_tree,
    equidistant_solution,
    node_count,
    node_region,
    solve_partition,
)
from sincodec.volume import VolumeTensor, default_norm

# smooth base tone, with a patchwork of short high tones in one octant
n = 32
idx = np.indices((n, n, n)).astype(np.float64)
field = 127.5 + 45 * np.sin(2 * np.pi * (idx[0] + idx[1] + idx[2]) / 16)
rng = np.random.default_rng(0)
loc = np.indices((8, 8, 8)).astype(np.float64)
for oz, oy, ox in np.ndindex(2, 2, 2):
    k = rng.integers(1, 4, size=3)
    cell = (
        slice(16 + oz * 8, 24 + oz * 8),
        slice(16 + oy * 8, 24 + oy * 8),
        slice(16 + ox * 8, 24 + ox * 8),
    )
    field[cell] = 127.5 + 85 * np.sin(
        2 * np.pi * (k[0] * loc[0] + k[1] * loc[1] + k[2] * loc[2]) / 8
        + rng.uniform(0, 2 * np.pi)
    )
v = VolumeTensor(
    np.clip(np.rint(field), 0, 255).astype(np.uint8)[..., None], default_norm("u8")
)

# score every node: D near 1 means one dominant frequency (easy block),
# D near 0 means the energy is spread out (hard block)
tree = build_tree(v, levels=3, m_top=1, power=1.0)
print("level 2 octants (origin -> D):")
for i in range(node_count(2, 3)):
    r = node_region(v.dims, 2, i)
    print(f"  {str(r.origin):>14s}  D={tree.score(2, i):.4f}")

# the busy octant scores far lower than its own children, so the search
# spends its block budget there and nowhere else
solution = solve_partition(tree, max_blocks=15)
print(f"\nadaptive tiling ({solution.n_blocks} blocks):")
for (level, _i), region in zip(solution.selected, solution.regions):
    print(f"  level {level}  {render_block_name(region)}")

fixed = equidistant_solution(tree, 2)
print(f"\nfixed level-2 grid would use {fixed.n_blocks} equal octants;")
print("the adaptive tiling keeps 7 of them and splits only the busy one.")
