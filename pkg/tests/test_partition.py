"""Octree partition search: exact DP against exhaustive enumeration."""

from fractions import Fraction

import numpy as np
import pytest

from sincodec.partition import (
    PartitionTree,
    all_tilings,
    build_tree,
    coverage_exact,
    default_levels,
    equidistant_partition,
    equidistant_solution,
    node_count,
    node_region,
    solve_partition,
    solve_partition_bruteforce,
)
from sincodec.volume import IntensityNorm, VolumeTensor, default_norm


def random_tree(rng, n_dim, levels, dims=None):
    if dims is None:
        side = 4 * 2 ** (levels - 1)
        dims = (side,) * n_dim
    scores = tuple(
        rng.uniform(0.05, 1.0, size=node_count(level, n_dim))
        for level in range(1, levels + 1)
    )
    return PartitionTree(dims, levels, scores)


def random_volume(dims, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, size=(*dims, 1)).astype(np.uint8)
    return VolumeTensor(data, default_norm("u8"))


class TestNodeGeometry:
    def test_node_counts(self):
        assert node_count(1, 3) == 1
        assert node_count(2, 3) == 8
        assert node_count(3, 3) == 64
        assert node_count(2, 2) == 4
        assert node_count(3, 2) == 16

    def test_root_region(self):
        r = node_region((16, 32, 8), 1, 0)
        assert r.origin == (0, 0, 0)
        assert r.extent == (16, 32, 8)

    def test_level2_children_order(self):
        """Child index bits name axes with axis 0 in the highest bit."""
        dims = (8, 8, 8)
        expected = [
            ((0, 0, 0)),
            ((0, 0, 4)),
            ((0, 4, 0)),
            ((0, 4, 4)),
            ((4, 0, 0)),
            ((4, 0, 4)),
            ((4, 4, 0)),
            ((4, 4, 4)),
        ]
        for i, origin in enumerate(expected):
            r = node_region(dims, 2, i)
            assert r.origin == origin
            assert r.extent == (4, 4, 4)

    def test_level3_nested_halving(self):
        r = node_region((16, 16), 3, 0b1101)
        # digits: level-2 step 11 -> origin (8, 8); level-3 step 01 -> +(0, 4)
        assert r.origin == (8, 12)
        assert r.extent == (4, 4)

    def test_children_tile_their_parent(self):
        dims = (16, 16, 16)
        for parent in range(node_count(2, 3)):
            pr = node_region(dims, 2, parent)
            child_cells = 0
            for j in range(8):
                cr = node_region(dims, 3, 8 * parent + j)
                for o, e, po, pe in zip(cr.origin, cr.extent, pr.origin, pr.extent):
                    assert po <= o and o + e <= po + pe
                child_cells += int(np.prod(cr.extent))
            assert child_cells == int(np.prod(pr.extent))

    def test_default_levels_min_side_policy(self):
        assert default_levels((16, 16, 16)) == 1
        assert default_levels((32, 32, 32)) == 2
        assert default_levels((64, 64, 64)) == 3
        assert default_levels((256, 256, 256)) == 4  # capped
        assert default_levels((64, 16, 64)) == 1


class TestTreeConstruction:
    def test_scores_cover_all_levels(self):
        v = random_volume((16, 16), seed=1)
        tree = build_tree(v, levels=3)
        assert len(tree.scores) == 3
        assert tree.scores[2].shape == (16,)
        for arr in tree.scores:
            assert np.all(arr > 0) and np.all(arr <= 1.0)

    def test_indivisible_dims_rejected(self):
        v = random_volume((12, 16), seed=2)
        with pytest.raises(ValueError):
            build_tree(v, levels=3)  # 12 / 4 = 3 < minimum side 4

    def test_min_side_enforced(self):
        v = random_volume((8, 8), seed=3)
        with pytest.raises(ValueError):
            build_tree(v, levels=3)  # level-3 blocks would have side 2

    def test_smooth_region_scores_higher(self):
        """A half-smooth half-noisy image: the smooth child concentrates more."""
        rng = np.random.default_rng(4)
        data = np.empty((16, 16, 1))
        g = np.linspace(0, 1, 8)
        data[:8] = np.broadcast_to(g[:, None], (8, 16))[..., None] * 255
        data[8:] = rng.integers(0, 256, size=(8, 16, 1))
        v = VolumeTensor(data.astype(np.uint8), default_norm("u8"))
        tree = build_tree(v, levels=2, m_top=2)
        smooth = min(tree.score(2, 0), tree.score(2, 1))
        noisy = max(tree.score(2, 2), tree.score(2, 3))
        assert smooth > noisy


class TestExactDP:
    def test_matches_bruteforce_on_random_trees(self):
        """Fifty random trees: identical objective (exact rational arithmetic)
        and identical selected node sets, for every block budget."""
        rng = np.random.default_rng(5)
        for trial in range(50):
            n_dim = int(rng.integers(2, 4))
            levels = int(rng.integers(2, 4))
            a_max = int(rng.integers(1, 17))
            tree = random_tree(rng, n_dim, levels)
            dp = solve_partition(tree, a_max)
            bf = solve_partition_bruteforce(tree, a_max)
            assert dp.objective_exact == bf.objective_exact, f"trial {trial}"
            assert dp.selected == bf.selected, f"trial {trial}"

    def test_objective_monotone_in_budget(self):
        rng = np.random.default_rng(6)
        tree = random_tree(rng, 3, 3)
        values = [
            solve_partition(tree, a).objective_exact for a in range(1, 66)
        ]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_single_block_budget_selects_root(self):
        rng = np.random.default_rng(7)
        tree = random_tree(rng, 2, 3)
        sol = solve_partition(tree, 1)
        assert sol.selected == ((1, 0),)
        assert sol.objective_exact == Fraction(float(tree.score(1, 0))) / 4

    def test_block_count_respects_budget(self):
        rng = np.random.default_rng(8)
        for a_max in (1, 2, 3, 5, 9, 16):
            tree = random_tree(rng, 2, 3)
            assert solve_partition(tree, a_max).n_blocks <= a_max

    def test_uniform_scores_prefer_fewer_blocks(self):
        """Splitting a node into 2^N children with the same score leaves the
        objective unchanged, so the tie-break keeps the coarser tiling."""
        scores = (np.ones(1), np.ones(4), np.ones(16))
        tree = PartitionTree((16, 16), 3, scores)
        sol = solve_partition(tree, 16)
        assert sol.selected == ((1, 0),)

    def test_equidistant_never_beats_dp(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            tree = random_tree(rng, 2, 3)
            for level in (1, 2, 3):
                ep = equidistant_solution(tree, level)
                dp = solve_partition(tree, max(1, ep.n_blocks))
                assert dp.objective_exact >= ep.objective_exact

    def test_deep_concentration_pulls_refinement(self):
        """One grandchild far above its parent drags the DP to split there
        while keeping coarse blocks elsewhere."""
        l1 = np.array([0.3])
        l2 = np.full(4, 0.3)
        l3 = np.full(16, 0.3)
        l3[0:4] = 0.95  # children of node (2, 0)
        tree = PartitionTree((16, 16), 3, (l1, l2, l3))
        sol = solve_partition(tree, 7)
        assert (3, 0) in sol.selected and (3, 3) in sol.selected
        assert (2, 1) in sol.selected and (2, 3) in sol.selected

    def test_coverage_of_all_solutions(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            tree = random_tree(rng, 2, 3)
            sol = solve_partition(tree, int(rng.integers(1, 17)))
            assert coverage_exact(sol)


class TestEnumeration:
    def test_tiling_count_two_level_quadtree(self):
        """A 2-level quadtree has exactly 2 tilings: root, or the 4 leaves."""
        rng = np.random.default_rng(11)
        tree = random_tree(rng, 2, 2)
        assert len(all_tilings(tree, 4)) == 2
        assert len(all_tilings(tree, 3)) == 1  # leaves need budget 4

    def test_tiling_count_three_level_quadtree(self):
        """L=3, N=2: each level-2 node is kept or split, so 1 + 2^4 tilings."""
        rng = np.random.default_rng(12)
        tree = random_tree(rng, 2, 3)
        assert len(all_tilings(tree, 64)) == 17

    def test_every_tiling_covers_exactly(self):
        rng = np.random.default_rng(13)
        tree = random_tree(rng, 2, 3)
        dims = tree.dims
        for tiling in all_tilings(tree, 64):
            hits = np.zeros(dims, dtype=np.uint8)
            for level, index in tiling:
                r = node_region(dims, level, index)
                hits[r.slices()] += 1
            assert np.all(hits == 1)


class TestEquidistant:
    def test_level_one_is_whole_volume(self):
        v = random_volume((16, 16, 16), seed=14)
        sol = equidistant_partition(v, 1)
        assert sol.n_blocks == 1
        assert sol.regions[0].extent == (16, 16, 16)

    def test_uniform_grid_at_level(self):
        v = random_volume((16, 16, 16), seed=15)
        sol = equidistant_partition(v, 2)
        assert sol.n_blocks == 8
        assert all(r.extent == (8, 8, 8) for r in sol.regions)
        assert coverage_exact(sol)

    def test_matches_tree_scores(self):
        v = random_volume((16, 16), seed=16)
        tree = build_tree(v, levels=2, m_top=3)
        ep = equidistant_partition(v, 2, m_top=3)
        np.testing.assert_allclose(ep.scores, tree.scores[1])
