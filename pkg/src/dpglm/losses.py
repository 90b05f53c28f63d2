"""GLM losses phi_y(<w, x>) with their regularity constants.

A :class:`GlmLoss` bundles the per-link value and derivative callables with
the constants the optimizers calibrate against: a smoothness bound ``H`` on
the second derivative of the link, a Lipschitz bound on the first derivative,
and a bound ``Y^2`` on ``|phi_y(0)|`` over admissible labels. Concrete
instances cover squared loss, a rescaled squared loss with tunable curvature,
and absolute loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rng import RngHandle

__all__ = [
    "GlmLoss",
    "squared_loss",
    "scaled_squared_loss",
    "absolute_loss",
    "loss_value",
    "loss_grad",
    "empirical_risk",
    "empirical_grad",
    "lipschitz_on_ball",
    "loss_bound_on_ball",
    "check_self_bounding",
    "SelfBoundingReport",
]


@dataclass(frozen=True)
class GlmLoss:
    """A loss of the form phi(z, y) applied at z = <w, x>.

    ``link_value`` and ``link_grad`` must accept numpy arrays for ``z`` and
    ``y`` and evaluate elementwise. ``smoothness`` bounds phi_y'' when set;
    ``link_lipschitz`` bounds |phi_y'| when set; ``bound_at_zero`` bounds
    |phi_y(0)| (the quantity written Y^2 in the schedules).
    """

    name: str
    link_value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    link_grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    smoothness: float | None = None
    link_lipschitz: float | None = None
    bound_at_zero: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def is_smooth(self) -> bool:
        return self.smoothness is not None

    @property
    def y_norm(self) -> float:
        """The value Y with Y^2 = bound_at_zero."""
        return math.sqrt(self.bound_at_zero)

    def effective_smoothness(self, x_bound: float) -> float:
        """Smoothness of w -> phi_y(<w, x>) over feature norms <= x_bound."""
        if self.smoothness is None:
            raise ValueError(f"{self.name} has no smoothness constant")
        return self.smoothness * x_bound**2


def squared_loss(y_bound: float = 1.0) -> GlmLoss:
    """phi_y(z) = (z - y)^2; smoothness 2, bound at zero y_bound^2."""
    return GlmLoss(
        name="squared",
        link_value=lambda z, y: (z - y) ** 2,
        link_grad=lambda z, y: 2.0 * (z - y),
        smoothness=2.0,
        bound_at_zero=float(y_bound) ** 2,
    )


def scaled_squared_loss(h: float, y_bound: float = 1.0) -> GlmLoss:
    """phi_y(z) = (h/2) (z - 2y/sqrt(h))^2; smoothness h, bound at zero 2 y_bound^2."""
    if h <= 0:
        raise ValueError("curvature must be positive")
    shift = 2.0 / math.sqrt(h)
    return GlmLoss(
        name=f"scaled-squared[{h:g}]",
        link_value=lambda z, y: 0.5 * h * (z - shift * y) ** 2,
        link_grad=lambda z, y: h * (z - shift * y),
        smoothness=float(h),
        bound_at_zero=2.0 * float(y_bound) ** 2,
        extra={"h": float(h)},
    )


def absolute_loss(y_bound: float = 1.0) -> GlmLoss:
    """phi_y(z) = |z - y|; 1-Lipschitz link, subgradient 0 at the kink."""
    return GlmLoss(
        name="absolute",
        link_value=lambda z, y: np.abs(z - y),
        link_grad=lambda z, y: np.sign(z - y),
        link_lipschitz=1.0,
        bound_at_zero=float(y_bound) ** 2,
        extra={"conic_link": "abs"},
    )


def loss_value(loss: GlmLoss, w: np.ndarray, x: np.ndarray, y: float) -> float:
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise ValueError(f"dimension mismatch: w has {w.shape}, x has {x.shape}")
    return float(loss.link_value(float(w @ x), y))


def loss_grad(loss: GlmLoss, w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise ValueError(f"dimension mismatch: w has {w.shape}, x has {x.shape}")
    return float(loss.link_grad(float(w @ x), y)) * x


def empirical_risk(loss: GlmLoss, w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean loss over a dataset given as (n, d) features and (n,) labels."""
    z = features @ w
    return float(np.mean(loss.link_value(z, labels)))


def empirical_grad(loss: GlmLoss, w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the empirical risk; fixed summation order for reproducibility."""
    z = features @ w
    return features.T @ loss.link_grad(z, labels) / features.shape[0]


def lipschitz_on_ball(loss: GlmLoss, x_bound: float, radius: float) -> float:
    """Gradient-norm bound over the ball of the given radius.

    Smooth instances use 2 Y sqrt(H) X + 2 H B X^2; Lipschitz instances use
    the link bound times the feature bound.
    """
    if loss.smoothness is not None:
        h = loss.smoothness
        return 2.0 * loss.y_norm * math.sqrt(h) * x_bound + 2.0 * h * radius * x_bound**2
    if loss.link_lipschitz is not None:
        return loss.link_lipschitz * x_bound
    raise ValueError(f"{loss.name} declares neither smoothness nor a Lipschitz bound")


def loss_bound_on_ball(loss: GlmLoss, x_bound: float, radius: float) -> float:
    """Upper bound 3 (Y^2 + H B^2 X^2) on the loss over the ball (smooth only)."""
    if loss.smoothness is None:
        raise ValueError(f"{loss.name} has no smoothness constant")
    return 3.0 * (loss.bound_at_zero + loss.smoothness * radius**2 * x_bound**2)


@dataclass
class SelfBoundingReport:
    samples: int
    max_ratio: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def check_self_bounding(
    loss: GlmLoss,
    samples: int,
    rng: RngHandle,
    x_bound: float = 1.0,
    y_bound: float = 1.0,
    w_bound: float = 1.0,
) -> SelfBoundingReport:
    """Check ||grad|| <= sqrt(4 H ||x||^2 loss) on random (w, x, y) triples.

    The per-sample smoothness H ||x||^2 is used, so the check is exact rather
    than worst-case over the feature bound. Violating triples are collected as
    witnesses; a non-empty list means the declared smoothness is wrong.
    """
    if loss.smoothness is None:
        raise ValueError(f"{loss.name} has no smoothness constant; self-bounding does not apply")
    slack = 1.0 + 1e-9
    max_ratio = 0.0
    violations = []
    for _ in range(samples):
        d = int(rng.integers(1, 6))
        w = rng.uniform(-1.0, 1.0, size=d)
        norm = np.linalg.norm(w)
        if norm > 0:
            w = w * (rng.uniform() * w_bound / norm)
        x = rng.uniform(-1.0, 1.0, size=d)
        norm = np.linalg.norm(x)
        if norm > 0:
            x = x * (rng.uniform() * x_bound / norm)
        y = float(rng.uniform(-y_bound, y_bound))
        g = float(np.linalg.norm(loss_grad(loss, w, x, y)))
        h_sample = loss.smoothness * float(x @ x)
        bound = math.sqrt(max(4.0 * h_sample * loss_value(loss, w, x, y), 0.0))
        if g > bound * slack:
            violations.append({"w": w, "x": x, "y": y, "grad_norm": g, "bound": bound})
        if bound > 0:
            max_ratio = max(max_ratio, g / bound)
        elif g > 0:
            violations.append({"w": w, "x": x, "y": y, "grad_norm": g, "bound": bound})
    return SelfBoundingReport(samples=samples, max_ratio=max_ratio, violations=violations)
