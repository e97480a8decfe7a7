import math
from collections import deque

import numpy as np
import pytest

from porelab.errors import ParameterError
from porelab.geometry import (
    StructureGrid,
    WaveSpec,
    add_pipe_walls,
    gen_shapes,
    gen_trig_field,
    percolates,
    sample_wave_spec,
    threshold_to_porosity,
    _draw_obstacle,
    _rasterize_obstacle,
)


def percolation_oracle(grid: StructureGrid, axis: str) -> bool:
    """Independent flood-fill check on the domain unwrapped into enough copies.

    A wrapping pore channel exists iff some pixel and its one-period image
    along the axis land in the same flood component of the tiled strip. Using
    ceil(#pore / L) + 2 copies makes the check exact: a simple wrapping cycle
    cannot span more columns than it has pixels.
    """
    pore = grid.pore_mask
    if axis == "y":
        pore = pore.T
    size = pore.shape[0]
    n_pore = int(pore.sum())
    if n_pore == 0:
        return False
    copies = math.ceil(n_pore / size) + 2
    width = copies * size
    strip = np.tile(pore, (1, copies))
    comp = -np.ones((size, width), dtype=int)
    current = 0
    for sy, sx in zip(*np.nonzero(strip)):
        if comp[sy, sx] >= 0:
            continue
        queue = deque([(sy, sx)])
        comp[sy, sx] = current
        while queue:
            y, x = queue.popleft()
            for ny, nx in (
                ((y + 1) % size, x),
                ((y - 1) % size, x),
                (y, x + 1),
                (y, x - 1),
            ):
                if 0 <= nx < width and strip[ny, nx] and comp[ny, nx] < 0:
                    comp[ny, nx] = current
                    queue.append((ny, nx))
        current += 1
    left = comp[:, : width - size]
    right = comp[:, size:]
    return bool(np.any((left >= 0) & (left == right)))


class TestTrigField:
    def test_single_zero_frequency_wave_is_constant(self):
        spec = WaveSpec(indices=[[0, 0]], phases=[0.0])
        field = gen_trig_field(seed=0, spec=spec, size=16)
        assert np.allclose(field, math.sqrt(2.0), atol=1e-15)

    def test_full_period_wave_sums_to_zero(self):
        # brute-force pixel sum of one cosine over complete periods
        spec = WaveSpec(indices=[[1, 0]], phases=[0.0])
        field = gen_trig_field(seed=0, spec=spec, size=256)
        oracle = sum(
            math.sqrt(2.0) * math.cos(2.0 * math.pi * (ix + 0.5) / 256)
            for ix in range(256)
        ) * 256
        assert abs(field.sum() - oracle) < 1e-9
        assert abs(field.sum()) < 1e-9

    def test_sampled_spec_honours_ranges(self):
        for seed in range(30):
            spec = sample_wave_spec(np.random.default_rng(seed))
            assert 10 <= spec.count <= 100
            assert spec.indices.min() >= -12 and spec.indices.max() <= 12
            assert spec.phases.min() >= 0.0 and spec.phases.max() <= math.pi

    def test_deterministic_given_seed(self):
        a = gen_trig_field(seed=1234, size=64)
        b = gen_trig_field(seed=1234, size=64)
        assert np.array_equal(a, b)
        c = gen_trig_field(seed=1235, size=64)
        assert not np.array_equal(a, c)

    def test_out_of_range_wave_index_rejected(self):
        with pytest.raises(ParameterError):
            WaveSpec(indices=[[13, 0]], phases=[0.0])

    def test_small_size_rejected(self):
        with pytest.raises(ParameterError):
            gen_trig_field(seed=0, size=4)


class TestThreshold:
    def test_target_one_gives_all_pore(self):
        field = gen_trig_field(seed=5, size=32)
        grid = threshold_to_porosity(field, 1.0)
        assert grid.porosity == 1.0
        assert not grid.occupancy.any()

    @pytest.mark.parametrize("phi_target", [0.3, 0.7, 0.8, 0.95])
    def test_achieved_porosity_within_one_pixel(self, phi_target):
        field = gen_trig_field(seed=17, size=64)
        grid = threshold_to_porosity(field, phi_target)
        assert abs(grid.porosity - phi_target) <= 1.0 / 64**2

    def test_matches_sort_and_count_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            values = rng.normal(size=(16, 16))
            phi_target = rng.uniform(0.05, 1.0)
            grid = threshold_to_porosity(values, phi_target)
            # oracle: the n_solid smallest values (stable order) are solid
            n_solid = round((1.0 - phi_target) * values.size)
            flat = values.reshape(-1)
            order = sorted(range(flat.size), key=lambda i: (flat[i], i))
            expected = np.zeros(flat.size, dtype=bool)
            expected[order[:n_solid]] = True
            assert np.array_equal(grid.occupancy.reshape(-1), expected)

    def test_solid_below_threshold_pore_above(self):
        field = gen_trig_field(seed=23, size=32)
        grid = threshold_to_porosity(field, 0.8)
        eps = field[grid.occupancy].max()
        assert field[grid.pore_mask].min() > eps

    def test_invalid_target_rejected(self):
        with pytest.raises(ParameterError):
            threshold_to_porosity(np.zeros((8, 8)), 0.0)


class TestShapes:
    def test_target_one_gives_empty_grid(self):
        grid = gen_shapes(seed=1, phi_target=1.0, p_circle=0.5, size=32)
        assert grid.porosity == 1.0

    def test_deterministic(self):
        a = gen_shapes(seed=7, phi_target=0.8, p_circle=0.5, size=64)
        b = gen_shapes(seed=7, phi_target=0.8, p_circle=0.5, size=64)
        assert np.array_equal(a.occupancy, b.occupancy)

    @pytest.mark.parametrize("p_circle", [0.0, 0.5, 1.0])
    def test_shape_dataset_targets(self, p_circle):
        grid = gen_shapes(seed=11, phi_target=0.85, p_circle=p_circle, size=64)
        assert 0.0 < grid.porosity < 1.0
        # porosity should land near the target (within one obstacle's area)
        assert abs(grid.porosity - 0.85) < 8**2 / 64**2

    def test_obstacle_sizes_uniform_in_range(self):
        rng = np.random.default_rng(0)
        extents = [
            _draw_obstacle(rng, 0.5, (3.0, 8.0), 64)[3] for _ in range(500)
        ]
        assert min(extents) >= 3.0 and max(extents) <= 8.0
        assert np.mean(extents) == pytest.approx(5.5, abs=0.3)

    def test_circle_only_uses_circle_stencils(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            kind, cx, cy, extent = _draw_obstacle(rng, 1.0, (3.0, 8.0), 32)
            assert kind == "circle"
            mask = _rasterize_obstacle(kind, cx, cy, extent, 32)
            dx = (np.arange(32) - cx + 16) % 32 - 16
            dy = (np.arange(32) - cy + 16) % 32 - 16
            inside = dx[np.newaxis, :] ** 2 + dy[:, np.newaxis] ** 2 <= (extent / 2) ** 2
            assert np.array_equal(mask, inside)

    def test_invalid_target_rejected(self):
        with pytest.raises(ParameterError):
            gen_shapes(seed=0, phi_target=0.0, size=32)


class TestPipeWalls:
    def test_edge_wall_porosity_by_area_count(self):
        empty = StructureGrid(np.zeros((64, 64), dtype=bool))
        piped = add_pipe_walls(empty, thickness=2, central=False)
        assert piped.porosity == (64 - 4) / 64
        assert piped.occupancy[:2, :].all() and piped.occupancy[-2:, :].all()

    def test_central_is_rolled_edge_variant(self):
        grid = gen_shapes(seed=3, phi_target=0.9, size=64)
        edge = add_pipe_walls(grid, thickness=3, central=False)
        central = add_pipe_walls(
            StructureGrid(np.roll(grid.occupancy, 32, axis=0)), thickness=3, central=True
        )
        assert np.array_equal(np.roll(edge.occupancy, 32, axis=0), central.occupancy)

    def test_thickness_out_of_range_rejected(self):
        grid = StructureGrid(np.zeros((32, 32), dtype=bool))
        for thickness in (0, 8, 20):
            with pytest.raises(ParameterError):
                add_pipe_walls(grid, thickness=thickness)


class TestPercolates:
    def test_all_pore_percolates(self):
        grid = StructureGrid(np.zeros((16, 16), dtype=bool))
        assert percolates(grid, "x") and percolates(grid, "y")

    def test_full_solid_column_blocks_x(self):
        occ = np.zeros((16, 16), dtype=bool)
        occ[:, 5] = True
        grid = StructureGrid(occ)
        assert not percolates(grid, "x")
        assert percolates(grid, "y")

    def test_matches_flood_fill_oracle_on_random_grids(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            size = int(rng.integers(4, 13))
            occ = rng.uniform(size=(size, size)) < rng.uniform(0.2, 0.7)
            grid = StructureGrid(occ)
            for axis in ("x", "y"):
                assert percolates(grid, axis) == percolation_oracle(grid, axis), (
                    occ.astype(int),
                    axis,
                )

    def test_invariant_under_periodic_roll(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            occ = rng.uniform(size=(10, 10)) < 0.45
            grid = StructureGrid(occ)
            base = (percolates(grid, "x"), percolates(grid, "y"))
            for shift in ((0, 3), (4, 0), (5, 7)):
                rolled = StructureGrid(np.roll(occ, shift, axis=(0, 1)))
                assert (percolates(rolled, "x"), percolates(rolled, "y")) == base

    def test_dead_end_pocket_does_not_percolate(self):
        # a channel spanning the width but sealed at the wrap is not a flow path
        occ = np.ones((6, 6), dtype=bool)
        occ[2, :] = False
        occ[2, 0] = True
        grid = StructureGrid(occ)
        assert not percolates(grid, "x")
        assert not percolation_oracle(grid, "x")
