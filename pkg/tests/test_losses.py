import math

import numpy as np
import pytest

from dpglm.losses import (
    absolute_loss,
    check_self_bounding,
    empirical_grad,
    empirical_risk,
    lipschitz_on_ball,
    loss_bound_on_ball,
    loss_grad,
    loss_value,
    scaled_squared_loss,
    squared_loss,
)
from dpglm.rng import RngHandle

ALL_LOSSES = [squared_loss(1.5), scaled_squared_loss(4.0, 1.0), absolute_loss(2.0)]


class TestValues:
    def test_squared_exact_fit(self):
        assert loss_value(squared_loss(), np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.0) == 0.0

    def test_squared_at_zero(self):
        assert loss_value(squared_loss(3.0), np.zeros(4), np.ones(4) / 2, 3.0) == 9.0

    def test_absolute(self):
        assert loss_value(absolute_loss(), np.array([2.0]), np.array([1.0]), 5.0) == 3.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            loss_value(squared_loss(), np.zeros(2), np.zeros(3), 0.0)
        with pytest.raises(ValueError):
            loss_grad(squared_loss(), np.zeros(2), np.zeros(3), 0.0)

    def test_scaled_squared_curvature(self):
        loss = scaled_squared_loss(4.0, 1.0)
        # phi_y(z) = 2 (z - y)^2; at z=0, y=1: 2 * (0 - 1)^2 = 2 = bound_at_zero.
        assert loss_value(loss, np.zeros(1), np.ones(1), 1.0) == pytest.approx(2.0)
        assert loss.bound_at_zero == pytest.approx(2.0)


class TestGradients:
    def test_squared_at_minimizer(self):
        g = loss_grad(squared_loss(), np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.0)
        assert np.allclose(g, [0.0, 0.0])

    def test_squared_at_zero(self):
        g = loss_grad(squared_loss(), np.zeros(2), np.array([1.0, 0.0]), 1.0)
        assert np.allclose(g, [-2.0, 0.0])

    def test_absolute_kink_is_zero(self):
        g = loss_grad(absolute_loss(), np.array([1.0]), np.array([1.0]), 1.0)
        assert np.allclose(g, [0.0])

    @pytest.mark.parametrize("loss", ALL_LOSSES, ids=lambda l: l.name)
    def test_matches_finite_differences(self, loss):
        r = RngHandle(42)
        eps = 1e-6
        checked = 0
        for _ in range(1000):
            d = int(r.integers(1, 5))
            w = r.uniform(-2, 2, size=d)
            x = r.uniform(-1, 1, size=d)
            y = float(r.uniform(-2, 2))
            z = float(w @ x)
            if loss.name == "absolute" and abs(z - y) < 1e-3:
                continue  # the kink has no classical derivative
            grad = loss_grad(loss, w, x, y)
            for j in range(d):
                bump = np.zeros(d)
                bump[j] = eps
                fd = (loss_value(loss, w + bump, x, y) - loss_value(loss, w - bump, x, y)) / (2 * eps)
                assert abs(fd - grad[j]) <= 1e-6 * (1 + abs(grad[j]))
            checked += 1
        assert checked > 900

    @pytest.mark.parametrize("loss", ALL_LOSSES, ids=lambda l: l.name)
    def test_midpoint_convexity(self, loss):
        r = RngHandle(43)
        for _ in range(500):
            y = float(r.uniform(-2, 2))
            z1, z2 = (float(v) for v in r.uniform(-5, 5, size=2))
            mid = loss.link_value(np.array((z1 + z2) / 2), np.array(y))
            avg = (loss.link_value(np.array(z1), np.array(y)) + loss.link_value(np.array(z2), np.array(y))) / 2
            assert mid <= avg + 1e-12

    def test_declared_smoothness_matches_grad_increments(self):
        for loss in [squared_loss(1.0), scaled_squared_loss(4.0)]:
            r = RngHandle(44)
            for _ in range(500):
                y = float(r.uniform(-2, 2))
                z1, z2 = (float(v) for v in r.uniform(-5, 5, size=2))
                lhs = abs(float(loss.link_grad(np.array(z1), np.array(y)))
                          - float(loss.link_grad(np.array(z2), np.array(y))))
                assert lhs <= loss.smoothness * abs(z1 - z2) * (1 + 1e-12)

    def test_declared_link_lipschitz(self):
        loss = absolute_loss()
        r = RngHandle(45)
        z = r.uniform(-10, 10, size=1000)
        y = r.uniform(-2, 2, size=1000)
        assert np.all(np.abs(loss.link_grad(z, y)) <= loss.link_lipschitz)


class TestBallConstants:
    def test_smooth_constant(self):
        loss = scaled_squared_loss(1.0, 1.0 / math.sqrt(2.0))  # H=1, Y=1
        assert lipschitz_on_ball(loss, 1.0, 1.0) == pytest.approx(4.0)

    def test_smooth_constant_other_values(self):
        loss = scaled_squared_loss(4.0, 0.0)  # H=4, Y=0
        assert lipschitz_on_ball(loss, 1.0, 3.0) == pytest.approx(24.0)

    def test_lipschitz_constant(self):
        assert lipschitz_on_ball(absolute_loss(), 2.0, 7.0) == pytest.approx(2.0)

    def test_no_constants_rejected(self):
        from dpglm.losses import GlmLoss

        bare = GlmLoss("bare", lambda z, y: z, lambda z, y: np.ones_like(z))
        with pytest.raises(ValueError):
            lipschitz_on_ball(bare, 1.0, 1.0)

    def test_loss_bound_values(self):
        loss = scaled_squared_loss(1.0, 1.0 / math.sqrt(2.0))  # H=1, Y^2=1
        assert loss_bound_on_ball(loss, 1.0, 1.0) == pytest.approx(6.0)
        assert loss_bound_on_ball(loss, 1.0, 0.0) == pytest.approx(3.0)
        loss2 = scaled_squared_loss(2.0, 0.0)  # H=2, Y^2=0
        assert loss_bound_on_ball(loss2, 1.0, 1.0) == pytest.approx(6.0)

    def test_loss_bound_requires_smoothness(self):
        with pytest.raises(ValueError):
            loss_bound_on_ball(absolute_loss(), 1.0, 1.0)

    def test_gradient_norm_bound_holds_on_samples(self):
        # The ball-restricted gradient bound should never be violated.
        loss = squared_loss(2.0)
        r = RngHandle(46)
        x_bound, radius = 1.5, 2.0
        g_max = lipschitz_on_ball(loss, x_bound, radius)
        for _ in range(2000):
            d = int(r.integers(1, 6))
            w = r.standard_normal(d)
            w *= radius * r.uniform() / np.linalg.norm(w)
            x = r.standard_normal(d)
            x *= x_bound * r.uniform() / np.linalg.norm(x)
            y = float(r.uniform(-2.0, 2.0))
            assert np.linalg.norm(loss_grad(loss, w, x, y)) <= g_max * (1 + 1e-12)

    def test_loss_bound_holds_on_samples(self):
        loss = squared_loss(2.0)
        r = RngHandle(47)
        x_bound, radius = 1.5, 2.0
        cap = loss_bound_on_ball(loss, x_bound, radius)
        for _ in range(2000):
            d = int(r.integers(1, 6))
            w = r.standard_normal(d)
            w *= radius * r.uniform() / np.linalg.norm(w)
            x = r.standard_normal(d)
            x *= x_bound * r.uniform() / np.linalg.norm(x)
            y = float(r.uniform(-2.0, 2.0))
            assert loss_value(loss, w, x, y) <= cap * (1 + 1e-12)


class TestSelfBounding:
    def test_squared_no_violations(self):
        report = check_self_bounding(squared_loss(1.0), 10_000, RngHandle(48))
        assert report.ok
        assert report.max_ratio <= 1.0 + 1e-9

    def test_zero_loss_zero_gradient(self):
        g = loss_grad(squared_loss(), np.array([1.0]), np.array([1.0]), 1.0)
        assert np.linalg.norm(g) == 0.0

    def test_non_smooth_rejected(self):
        with pytest.raises(ValueError):
            check_self_bounding(absolute_loss(), 10, RngHandle(49))


class TestEmpirical:
    def test_risk_and_grad_match_pointwise(self):
        r = RngHandle(50)
        loss = squared_loss(2.0)
        feats = r.standard_normal((40, 3))
        labels = r.uniform(-2, 2, size=40)
        w = r.standard_normal(3)
        by_hand = np.mean([loss_value(loss, w, x, y) for x, y in zip(feats, labels)])
        assert empirical_risk(loss, w, feats, labels) == pytest.approx(by_hand)
        grads = np.mean([loss_grad(loss, w, x, y) for x, y in zip(feats, labels)], axis=0)
        assert np.allclose(empirical_grad(loss, w, feats, labels), grads)
