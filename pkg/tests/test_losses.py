import numpy as np
import pytest

from porelab.errors import ParameterError
from porelab.geometry import StructureGrid, gen_trig_field, threshold_to_porosity
from porelab.lbm import VelocityField
from porelab.losses import (
    LossWeights,
    default_translation,
    divergence_loss,
    obstacle_loss,
    periodicity_loss,
    tortuosity_loss,
    total_loss,
    velocity_loss,
)
from porelab.properties import tortuosity

from oracles import (
    divergence_loss_oracle,
    obstacle_loss_oracle,
    periodicity_loss_oracle,
    velocity_loss_oracle,
)


def random_field(rng, size):
    return VelocityField(rng.normal(size=(size, size)), rng.normal(size=(size, size)))


def random_case(rng, size=8):
    grid = threshold_to_porosity(rng.normal(size=(size, size)), rng.uniform(0.3, 0.9))
    return grid, random_field(rng, size), random_field(rng, size)


class TestVelocityLoss:
    def test_identical_fields_score_zero(self):
        rng = np.random.default_rng(0)
        f = random_field(rng, 8)
        assert velocity_loss(f, f) == 0.0

    def test_constant_offset_in_both_components(self):
        rng = np.random.default_rng(1)
        f = random_field(rng, 8)
        shifted = VelocityField(f.ux + 0.3, f.uy + 0.3)
        assert velocity_loss(shifted, f) == pytest.approx(0.09, rel=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            _, pred, ref = random_case(rng, 4)
            assert velocity_loss(pred, ref) == pytest.approx(
                velocity_loss_oracle(pred, ref), rel=1e-14
            )

    def test_size_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ParameterError):
            velocity_loss(random_field(rng, 8), random_field(rng, 16))


class TestObstacleLoss:
    def test_zero_velocity_in_solids_scores_zero(self):
        grid = threshold_to_porosity(np.random.default_rng(4).normal(size=(8, 8)), 0.6)
        field = VelocityField(np.where(grid.solid_mask, 0.0, 1.0),
                              np.where(grid.solid_mask, 0.0, -1.0))
        assert obstacle_loss(field, grid) == 0.0

    def test_normalization_with_constant_magnitude(self):
        grid = threshold_to_porosity(np.random.default_rng(5).normal(size=(8, 8)), 0.7)
        c = 0.37
        field = VelocityField(np.full((8, 8), c), np.full((8, 8), -c))
        assert obstacle_loss(field, grid) == pytest.approx(c, rel=1e-13)

    def test_all_pore_grid_returns_zero(self):
        field = VelocityField(np.ones((8, 8)), np.ones((8, 8)))
        assert obstacle_loss(field, StructureGrid(np.zeros((8, 8), bool))) == 0.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            grid, pred, _ = random_case(rng)
            assert obstacle_loss(pred, grid) == pytest.approx(
                obstacle_loss_oracle(pred, grid), rel=1e-14
            )


class TestDivergenceLoss:
    def test_uniform_field_is_divergence_free(self):
        grid = threshold_to_porosity(np.random.default_rng(7).normal(size=(8, 8)), 0.8)
        assert divergence_loss(VelocityField(np.ones((8, 8)), np.ones((8, 8))), grid) == 0.0

    def test_shear_field_has_zero_streamwise_derivative(self):
        # u_x depends only on y, so its forward x-difference vanishes everywhere
        size = 8
        y = np.arange(size, dtype=float)[:, np.newaxis]
        field = VelocityField(np.broadcast_to(0.2 * y, (size, size)).copy(),
                              np.zeros((size, size)))
        grid = StructureGrid(np.zeros((size, size), bool))
        assert divergence_loss(field, grid) == 0.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            grid, pred, _ = random_case(rng)
            assert divergence_loss(pred, grid) == pytest.approx(
                divergence_loss_oracle(pred, grid), rel=1e-14
            )


class TestPeriodicityLoss:
    def test_exact_equivariance_scores_zero(self):
        rng = np.random.default_rng(9)
        f = random_field(rng, 8)
        shift = (4, 4)
        translated = VelocityField(
            np.roll(f.ux, (shift[1], shift[0]), axis=(0, 1)),
            np.roll(f.uy, (shift[1], shift[0]), axis=(0, 1)),
        )
        assert periodicity_loss(f, translated, shift) == 0.0

    def test_round_trip_identity_for_all_shifts(self):
        rng = np.random.default_rng(10)
        f = random_field(rng, 6)
        for tx in range(6):
            for ty in range(6):
                translated = VelocityField(
                    np.roll(f.ux, (ty, tx), axis=(0, 1)),
                    np.roll(f.uy, (ty, tx), axis=(0, 1)),
                )
                assert periodicity_loss(f, translated, (tx, ty)) == 0.0

    def test_constant_offset_after_translation(self):
        rng = np.random.default_rng(11)
        f = random_field(rng, 8)
        shift = (3, 5)
        translated = VelocityField(
            np.roll(f.ux, (shift[1], shift[0]), axis=(0, 1)) + 0.25,
            np.roll(f.uy, (shift[1], shift[0]), axis=(0, 1)) + 0.25,
        )
        assert periodicity_loss(f, translated, shift) == pytest.approx(0.0625, rel=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            pred_s = random_field(rng, 8)
            pred_ts = random_field(rng, 8)
            shift = (int(rng.integers(0, 8)), int(rng.integers(0, 8)))
            assert periodicity_loss(pred_s, pred_ts, shift) == pytest.approx(
                periodicity_loss_oracle(pred_s, pred_ts, shift), rel=1e-14
            )


class TestTortuosityLoss:
    def test_matching_tortuosity_scores_zero(self):
        rng = np.random.default_rng(13)
        grid, pred, _ = random_case(rng)
        pred = VelocityField(np.abs(pred.ux) + 0.1, pred.uy)
        assert tortuosity_loss(pred, grid, tortuosity(pred, grid)) == 0.0

    def test_known_gap(self):
        assert (1.2 - 1.1) ** 2 == pytest.approx(0.01)
        grid = StructureGrid(np.zeros((8, 8), bool))
        pred = VelocityField(np.ones((8, 8)), np.zeros((8, 8)))  # tau = 1
        assert tortuosity_loss(pred, grid, 1.1) == pytest.approx(0.01, rel=1e-10)


class TestTotalLoss:
    def test_weights_default_to_paper_configuration(self):
        w = LossWeights()
        assert (w.alpha, w.beta, w.gamma, w.delta) == (5.0, 1.0, 0.1, 0.01)

    def test_negative_weights_rejected(self):
        with pytest.raises(ParameterError):
            LossWeights(alpha=-1.0)

    def test_perfect_equivariant_prediction_scores_zero(self):
        grid = threshold_to_porosity(gen_trig_field(seed=20, size=16), 0.8)
        rng = np.random.default_rng(14)
        ref = VelocityField(
            np.where(grid.pore_mask, rng.uniform(0.1, 1.0, (16, 16)), 0.0),
            np.where(grid.pore_mask, rng.normal(size=(16, 16)), 0.0),
        )
        shift = default_translation(16)
        translated = VelocityField(
            np.roll(ref.ux, (shift[1], shift[0]), axis=(0, 1)),
            np.roll(ref.uy, (shift[1], shift[0]), axis=(0, 1)),
        )
        report = total_loss(ref, translated, ref, grid)
        assert report.velocity == report.obstacle == report.periodicity == 0.0
        assert report.tortuosity == 0.0
        assert report.total == report.weights.beta * report.divergence

    def test_total_is_exact_weighted_sum(self):
        rng = np.random.default_rng(15)
        grid, pred, ref = random_case(rng)
        pred = VelocityField(np.abs(pred.ux) + 0.1, pred.uy)
        ref = VelocityField(np.abs(ref.ux) + 0.1, ref.uy)
        pred_ts = random_field(rng, 8)
        w = LossWeights(alpha=2.0, beta=0.5, gamma=3.0, delta=0.25)
        report = total_loss(pred, pred_ts, ref, grid, (2, 3), w)
        expected = (
            report.velocity + w.alpha * report.obstacle + w.beta * report.divergence
            + w.gamma * report.periodicity + w.delta * report.tortuosity
        )
        assert report.total == expected

    def test_components_invariant_under_simultaneous_roll(self):
        rng = np.random.default_rng(16)
        grid, pred, ref = random_case(rng, 8)
        pred = VelocityField(np.abs(pred.ux) + 0.1, pred.uy)
        ref = VelocityField(np.abs(ref.ux) + 0.1, ref.uy)
        pred_ts = random_field(rng, 8)
        base = total_loss(pred, pred_ts, ref, grid, (4, 4))
        shift = (3, 6)

        def roll_field(f):
            return VelocityField(
                np.roll(f.ux, (shift[1], shift[0]), axis=(0, 1)),
                np.roll(f.uy, (shift[1], shift[0]), axis=(0, 1)),
            )

        rolled = total_loss(
            roll_field(pred), roll_field(pred_ts), roll_field(ref),
            StructureGrid(np.roll(grid.occupancy, (shift[1], shift[0]), axis=(0, 1))),
            (4, 4),
        )
        for name in ("velocity", "obstacle", "divergence", "periodicity", "tortuosity"):
            assert getattr(rolled, name) == pytest.approx(getattr(base, name), rel=1e-12)

    def test_all_components_non_negative(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            grid, pred, ref = random_case(rng)
            pred = VelocityField(np.abs(pred.ux) + 0.1, pred.uy)
            ref = VelocityField(np.abs(ref.ux) + 0.1, ref.uy)
            report = total_loss(pred, random_field(rng, 8), ref, grid, (1, 2))
            assert min(report.velocity, report.obstacle, report.divergence,
                       report.periodicity, report.tortuosity) >= 0.0
