"""Derived run parameters (T, eta, sigma^2, lambda, k) for each training rule.

Each builder is a pure function of the loss constants, data size, ball
radius, and privacy budget, so recomputing a schedule is bit-identical. All
constants hidden behind O(.) in the source analyses are set to 1 except where
an explicit value exists (8 in the noisy-GD variance, 4 in the
output-perturbation variance, and the closed-form step/regularization
expressions); the adopted values live here and nowhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

from .losses import GlmLoss, lipschitz_on_ball
from .mechanisms import PrivacyBudget, gaussian_sigma2_noisy_gd

__all__ = [
    "OptimizerSchedule",
    "schedule_noisy_gd",
    "output_perturbation_lambda",
    "jl_embedding_dim",
    "jl_smooth_schedule",
    "jl_lipschitz_schedule",
    "flagship_grid_size",
]


@dataclass(frozen=True)
class OptimizerSchedule:
    """Everything an optimizer run needs beyond the data and the RNG."""

    steps: int
    eta: float
    sigma2: float
    ball_radius: float
    lipschitz: float
    lam: float = 0.0
    embed_dim: int = 0
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.eta < 0 or self.sigma2 < 0 or self.ball_radius < 0 or self.lam < 0:
            raise ValueError("schedule parameters must be non-negative")

    def to_json(self) -> str:
        payload = asdict(self)
        payload["notes"] = list(self.notes)
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OptimizerSchedule":
        payload = json.loads(text)
        payload["notes"] = tuple(payload.get("notes", ()))
        return cls(**payload)


def schedule_noisy_gd(
    h_eff: float,
    y_norm: float,
    ball_radius: float,
    n: int,
    d: int,
    budget: PrivacyBudget,
) -> OptimizerSchedule:
    """Schedule for projected noisy gradient descent on an h_eff-smooth loss.

    T = n; the gradient bound over the ball is G = 2 Y sqrt(h) + 2 h B;
    sigma^2 = 8 G^2 T log(1/delta) / (n eps)^2 (zero when non-private); and
    eta = min(B / (sqrt(T) max(sqrt(h) Y, sigma sqrt(d))), 1/(4 h)). For GLMs
    pass h_eff = H X^2 and the noise dimension d of the space being optimized.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if h_eff <= 0:
        raise ValueError("effective smoothness must be positive")
    notes = []
    steps = n
    lipschitz = 2.0 * y_norm * math.sqrt(h_eff) + 2.0 * h_eff * ball_radius
    sigma2 = gaussian_sigma2_noisy_gd(lipschitz, steps, n, budget)
    noise_term = math.sqrt(sigma2 * d) if sigma2 > 0 else 0.0
    denom = math.sqrt(steps) * max(math.sqrt(h_eff) * y_norm, noise_term)
    cap = 1.0 / (4.0 * h_eff)
    eta = min(ball_radius / denom, cap) if denom > 0 else cap
    if ball_radius == 0.0:
        eta = 0.0
        notes.append("degenerate-zero-ball")
    if y_norm > 0 and n < h_eff * ball_radius**2 / y_norm**2:
        notes.append("n-below-theory-threshold")
    return OptimizerSchedule(
        steps=steps,
        eta=eta,
        sigma2=sigma2,
        ball_radius=ball_radius,
        lipschitz=lipschitz,
        notes=tuple(notes),
    )


def output_perturbation_lambda(
    loss: GlmLoss,
    x_bound: float,
    ball_radius: float,
    n: int,
    budget: PrivacyBudget,
    variant: str,
) -> float:
    """Regularization weight for constrained regularized ERM + output noise.

    Smooth: lambda = ((Y + H B X^2) sqrt(H) X / (B n eps))^(2/3) (log 1/delta)^(1/3).
    Lipschitz: lambda = G X (log 1/delta)^(1/4) / (B sqrt(n eps)).
    """
    if ball_radius <= 0:
        raise ValueError("ball radius must be positive")
    log_inv_delta = budget.log_inv_delta() if budget.is_private else 1.0
    n_eps = n * (budget.epsilon if budget.is_private else n)
    if variant == "smooth":
        if loss.smoothness is None:
            raise ValueError("smooth variant requires a smoothness constant")
        h = loss.smoothness
        base = (loss.y_norm + h * ball_radius * x_bound**2) * math.sqrt(h) * x_bound
        return (base / (ball_radius * n_eps)) ** (2.0 / 3.0) * log_inv_delta ** (1.0 / 3.0)
    if variant == "lipschitz":
        if loss.link_lipschitz is None:
            raise ValueError("lipschitz variant requires a link Lipschitz bound")
        return (
            loss.link_lipschitz
            * x_bound
            * log_inv_delta**0.25
            / (ball_radius * math.sqrt(n_eps))
        )
    raise ValueError(f"unknown variant {variant!r}")


def jl_embedding_dim(
    loss: GlmLoss,
    x_bound: float,
    ball_radius: float,
    n: int,
    budget: PrivacyBudget,
    variant: str,
) -> int:
    """Embedding dimension before clamping, with all hidden constants set to 1.

    Smooth: floor((B sqrt(H) X log(2n/delta) n eps / (Y X + sqrt(H) B X^2))^(2/3)).
    Lipschitz: ceil(log(2n/delta) n eps).
    """
    if ball_radius <= 0:
        raise ValueError("ball radius must be positive")
    if not budget.is_private:
        raise ValueError("the projection method is only defined for private runs")
    log_term = math.log(2.0 * n / budget.delta)
    n_eps = n * budget.epsilon
    if variant == "smooth":
        if loss.smoothness is None:
            raise ValueError("smooth variant requires a smoothness constant")
        h = loss.smoothness
        denom = loss.y_norm * x_bound + math.sqrt(h) * ball_radius * x_bound**2
        raw = (ball_radius * math.sqrt(h) * x_bound * log_term * n_eps / denom) ** (2.0 / 3.0)
        return max(int(math.floor(raw)), 1)
    if variant == "lipschitz":
        return max(int(math.ceil(log_term * n_eps)), 1)
    raise ValueError(f"unknown variant {variant!r}")


def jl_smooth_schedule(
    loss: GlmLoss,
    x_bound: float,
    ball_radius: float,
    n: int,
    k: int,
    budget: PrivacyBudget,
) -> OptimizerSchedule:
    """Schedule for full-batch noisy GD in the embedded space.

    T = n and sigma^2 keep the original-space gradient bound
    G = 2 Y sqrt(H) X + 2 H B X^2; the step uses the embedded noise dimension
    k and the doubled ball radius that accounts for the projection distortion.
    """
    if loss.smoothness is None:
        raise ValueError("smooth variant requires a smoothness constant")
    if not budget.is_private:
        raise ValueError("only defined for private runs")
    steps = n
    lipschitz = lipschitz_on_ball(loss, x_bound, ball_radius)
    sigma2 = gaussian_sigma2_noisy_gd(lipschitz, steps, n, budget)
    h_eff = loss.effective_smoothness(x_bound)
    noise_term = math.sqrt(sigma2 * k) if sigma2 > 0 else 0.0
    denom = math.sqrt(steps) * max(math.sqrt(h_eff) * loss.y_norm, noise_term)
    cap = 1.0 / (4.0 * h_eff)
    eta = min(ball_radius / denom, cap) if denom > 0 else cap
    return OptimizerSchedule(
        steps=steps,
        eta=eta,
        sigma2=sigma2,
        ball_radius=2.0 * ball_radius,
        lipschitz=lipschitz,
        embed_dim=k,
    )


def jl_lipschitz_schedule(
    loss: GlmLoss,
    x_bound: float,
    ball_radius: float,
    n: int,
    k: int,
    budget: PrivacyBudget,
) -> OptimizerSchedule:
    """Schedule for the projected single-sample method in the embedded space.

    T = n^2, sigma^2 = 8 T G^2 X^2 log(2/delta) / (n eps)^2, and
    eta = B / (G X (1 + sqrt(k log(2/delta)) / (n eps)) T^(3/4)).
    """
    if loss.link_lipschitz is None:
        raise ValueError("requires a link Lipschitz bound")
    if not budget.is_private:
        raise ValueError("only defined for private runs")
    g = loss.link_lipschitz
    steps = n * n
    log2d = math.log(2.0 / budget.delta)
    n_eps = n * budget.epsilon
    sigma2 = 8.0 * steps * g**2 * x_bound**2 * log2d / (n_eps**2)
    eta = ball_radius / (
        g * x_bound * (1.0 + math.sqrt(k * log2d) / n_eps) * steps**0.75
    )
    return OptimizerSchedule(
        steps=steps,
        eta=eta,
        sigma2=sigma2,
        ball_radius=2.0 * ball_radius,
        lipschitz=g * x_bound,
        embed_dim=k,
    )


def flagship_grid_size(loss: GlmLoss, x_bound: float, n: int, epsilon: float) -> int:
    """Grid size K = ceil(log max(Y sqrt(n)/(X sqrt(H)), Y^2 (n eps)^(2/3)/(sqrt(H) X^2))).

    Constant 1, clamped below at 1.
    """
    if loss.smoothness is None:
        raise ValueError("grid sizing requires a smoothness constant")
    h = loss.smoothness
    y = loss.y_norm
    first = y * math.sqrt(n) / (x_bound * math.sqrt(h))
    second = loss.bound_at_zero * (n * epsilon) ** (2.0 / 3.0) / (math.sqrt(h) * x_bound**2)
    arg = max(first, second)
    if arg <= 1.0:
        return 1
    return max(int(math.ceil(math.log(arg))), 1)
