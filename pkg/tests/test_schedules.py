import math

import pytest

from dpglm.losses import absolute_loss, scaled_squared_loss, squared_loss
from dpglm.mechanisms import NON_PRIVATE, PrivacyBudget
from dpglm.schedules import (
    OptimizerSchedule,
    flagship_grid_size,
    jl_embedding_dim,
    jl_lipschitz_schedule,
    jl_smooth_schedule,
    output_perturbation_lambda,
    schedule_noisy_gd,
)

E_INV = math.exp(-1)
LOSS_H1_Y1 = scaled_squared_loss(1.0, 1.0 / math.sqrt(2.0))  # H=1, Y=1


class TestNoisyGdSchedule:
    def test_non_private_step(self):
        s = schedule_noisy_gd(1.0, 1.0, 1.0, 100, 5, NON_PRIVATE)
        assert s.steps == 100
        assert s.eta == pytest.approx(0.1)  # min(1/10, 1/4)
        assert s.sigma2 == 0.0

    def test_private_noise(self):
        s = schedule_noisy_gd(1.0, 1.0, 1.0, 100, 5, PrivacyBudget(1.0, E_INV))
        assert s.lipschitz == pytest.approx(4.0)
        assert s.sigma2 == pytest.approx(1.28)

    def test_private_step_uses_noise_dimension(self):
        s = schedule_noisy_gd(1.0, 1.0, 1.0, 100, 400, PrivacyBudget(1.0, E_INV))
        sigma = math.sqrt(s.sigma2)
        expected = min(1.0 / (10.0 * max(1.0, sigma * 20.0)), 0.25)
        assert s.eta == pytest.approx(expected)

    def test_zero_ball_flagged(self):
        s = schedule_noisy_gd(1.0, 1.0, 0.0, 50, 3, NON_PRIVATE)
        assert s.eta == 0.0
        assert "degenerate-zero-ball" in s.notes

    def test_small_n_warning(self):
        s = schedule_noisy_gd(4.0, 1.0, 10.0, 5, 3, NON_PRIVATE)
        assert "n-below-theory-threshold" in s.notes
        s_ok = schedule_noisy_gd(4.0, 1.0, 1.0, 50, 3, NON_PRIVATE)
        assert "n-below-theory-threshold" not in s_ok.notes

    def test_recomputation_bit_identical(self):
        args = (2.0, 1.3, 1.7, 333, 12, PrivacyBudget(0.7, 1e-5))
        assert schedule_noisy_gd(*args) == schedule_noisy_gd(*args)

    def test_validation(self):
        with pytest.raises(ValueError):
            schedule_noisy_gd(0.0, 1.0, 1.0, 10, 2, NON_PRIVATE)
        with pytest.raises(ValueError):
            schedule_noisy_gd(1.0, 1.0, 1.0, 0, 2, NON_PRIVATE)


class TestOutputPerturbationLambda:
    def test_lipschitz_value(self):
        lam = output_perturbation_lambda(absolute_loss(1.0), 1.0, 1.0, 100, PrivacyBudget(1.0, E_INV), "lipschitz")
        assert lam == pytest.approx(0.1)

    def test_smooth_value(self):
        lam = output_perturbation_lambda(LOSS_H1_Y1, 1.0, 1.0, 1000, PrivacyBudget(1.0, E_INV), "smooth")
        assert lam == pytest.approx((2.0 / 1000.0) ** (2.0 / 3.0))

    def test_variant_loss_compatibility(self):
        with pytest.raises(ValueError):
            output_perturbation_lambda(absolute_loss(), 1.0, 1.0, 10, PrivacyBudget(1.0, 0.1), "smooth")
        with pytest.raises(ValueError):
            output_perturbation_lambda(squared_loss(), 1.0, 1.0, 10, PrivacyBudget(1.0, 0.1), "lipschitz")

    def test_zero_ball_rejected(self):
        with pytest.raises(ValueError):
            output_perturbation_lambda(squared_loss(), 1.0, 0.0, 10, PrivacyBudget(1.0, 0.1), "smooth")


class TestJlSizing:
    def test_smooth_dim(self):
        k = jl_embedding_dim(LOSS_H1_Y1, 1.0, 1.0, 1000, PrivacyBudget(1.0, E_INV), "smooth")
        assert k == math.floor((1000 * math.log(2000 * math.e) / 2) ** (2.0 / 3.0))

    def test_lipschitz_dim(self):
        k = jl_embedding_dim(absolute_loss(), 1.0, 1.0, 100, PrivacyBudget(0.5, E_INV), "lipschitz")
        assert k == math.ceil(math.log(200 * math.e) * 50)

    def test_requires_private_budget(self):
        with pytest.raises(ValueError):
            jl_embedding_dim(squared_loss(), 1.0, 1.0, 100, NON_PRIVATE, "smooth")

    def test_lipschitz_schedule_fields(self):
        budget = PrivacyBudget(0.5, E_INV)
        s = jl_lipschitz_schedule(absolute_loss(), 2.0, 1.0, 100, 40, budget)
        assert s.steps == 100**2
        log2d = math.log(2.0 / budget.delta)
        assert s.sigma2 == pytest.approx(8 * 100**2 * 4.0 * log2d / 50.0**2)
        expected_eta = 1.0 / (2.0 * (1 + math.sqrt(40 * log2d) / 50.0) * 100**1.5)
        assert s.eta == pytest.approx(expected_eta)
        assert s.ball_radius == 2.0

    def test_smooth_schedule_fields(self):
        budget = PrivacyBudget(1.0, E_INV)
        s = jl_smooth_schedule(LOSS_H1_Y1, 1.0, 1.0, 100, 30, budget)
        assert s.steps == 100
        assert s.ball_radius == 2.0
        assert s.lipschitz == pytest.approx(4.0)
        assert s.sigma2 == pytest.approx(1.28)
        sigma = math.sqrt(1.28)
        assert s.eta == pytest.approx(min(1.0 / (10.0 * sigma * math.sqrt(30)), 0.25))


class TestGridSizing:
    def test_example_value(self):
        assert flagship_grid_size(LOSS_H1_Y1, 1.0, 256, 1.0) == 4

    def test_floor_at_one(self):
        tiny = scaled_squared_loss(100.0, 1e-3)
        assert flagship_grid_size(tiny, 10.0, 2, 0.01) == 1


class TestScheduleSerialization:
    def test_json_round_trip(self):
        s = OptimizerSchedule(steps=7, eta=0.25, sigma2=1.5, ball_radius=2.0,
                              lipschitz=3.0, lam=0.1, embed_dim=4, notes=("x",))
        again = OptimizerSchedule.from_json(s.to_json())
        assert again == s
        assert again.to_json() == s.to_json()

    def test_invariants(self):
        with pytest.raises(ValueError):
            OptimizerSchedule(steps=0, eta=0.1, sigma2=0.0, ball_radius=1.0, lipschitz=1.0)
        with pytest.raises(ValueError):
            OptimizerSchedule(steps=1, eta=-0.1, sigma2=0.0, ball_radius=1.0, lipschitz=1.0)
