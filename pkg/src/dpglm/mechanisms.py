"""Privacy primitives: budgets, Gaussian calibration, noisy argmax, and GEM.

Calibration functions return variances as exact closed-form expressions in
the Lipschitz constant, iteration count, sample size, and budget; tests pin
them value-by-value. Selection mechanisms break ties toward the lowest index
so noiseless limits are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngHandle

__all__ = [
    "PrivacyBudget",
    "NON_PRIVATE",
    "gaussian_sigma2_noisy_gd",
    "gaussian_sigma2_output_perturbation",
    "report_noisy_max",
    "gem_select",
    "gem_guarantee_bound",
]


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair; epsilon may be inf for non-private runs."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")

    @property
    def is_private(self) -> bool:
        return math.isfinite(self.epsilon)

    def split(self, k: int) -> tuple["PrivacyBudget", ...]:
        """Basic composition: k parts of (epsilon/k, delta/k).

        The last component absorbs the accumulated rounding so that summing
        the parts left to right reconstructs the parent budget exactly in
        floating point.
        """
        if k < 1:
            raise ValueError("cannot split into fewer than one part")
        if not self.is_private:
            return tuple(PrivacyBudget(math.inf, 0.0) for _ in range(k))
        eps_part, delta_part = self.epsilon / k, self.delta / k
        eps_running = 0.0
        delta_running = 0.0
        for _ in range(k - 1):
            eps_running += eps_part
            delta_running += delta_part
        parts = [PrivacyBudget(eps_part, delta_part) for _ in range(k - 1)]
        parts.append(
            PrivacyBudget(
                self.epsilon - eps_running,
                max(self.delta - delta_running, 0.0),
            )
        )
        return tuple(parts)

    def scaled(self, factor: float) -> "PrivacyBudget":
        if not self.is_private:
            return self
        return PrivacyBudget(self.epsilon * factor, self.delta * factor)

    def log_inv_delta(self) -> float:
        if self.delta <= 0.0:
            raise ValueError("Gaussian mechanism requires delta > 0")
        return math.log(1.0 / self.delta)


NON_PRIVATE = PrivacyBudget(math.inf, 0.0)


def gaussian_sigma2_noisy_gd(lipschitz: float, steps: int, n: int, budget: PrivacyBudget) -> float:
    """Per-step noise variance 8 G^2 T log(1/delta) / (n eps)^2 for noisy GD."""
    if lipschitz < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    if steps < 1 or n < 1:
        raise ValueError("steps and n must be positive")
    if not budget.is_private:
        return 0.0
    if lipschitz == 0.0:
        return 0.0
    return 8.0 * lipschitz**2 * steps * budget.log_inv_delta() / (n**2 * budget.epsilon**2)


def gaussian_sigma2_output_perturbation(
    lipschitz: float,
    x_bound: float,
    lam: float,
    n: int,
    budget: PrivacyBudget,
    variant: str,
) -> float:
    """Output-perturbation noise variance.

    ``variant="lipschitz"`` takes the per-link constant G and returns
    4 G^2 X^2 log(1/delta) / (lambda n eps)^2. ``variant="smooth"`` takes the
    ball-restricted gradient bound (which already carries the feature bound)
    and returns 4 G^2 log(1/delta) / (lambda n eps)^2; the constant 4 mirrors
    the Lipschitz case and matches the 2G/(n lambda) sensitivity bound.
    """
    if lam <= 0:
        raise ValueError("regularization must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    if lipschitz < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    if not budget.is_private:
        return 0.0
    if lipschitz == 0.0:
        return 0.0
    if variant == "lipschitz":
        numerator = 4.0 * lipschitz**2 * x_bound**2
    elif variant == "smooth":
        numerator = 4.0 * lipschitz**2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return numerator * budget.log_inv_delta() / (lam**2 * n**2 * budget.epsilon**2)


def report_noisy_max(utilities, laplace_scale: float, rng: RngHandle) -> int:
    """Argmax of utility + Laplace(scale) noise; lowest index wins ties."""
    utilities = np.asarray(utilities, dtype=float)
    if utilities.size == 0:
        raise ValueError("empty candidate list")
    if laplace_scale < 0:
        raise ValueError("Laplace scale must be non-negative")
    noisy = utilities.astype(float)
    if laplace_scale > 0:
        noisy = noisy + rng.laplace(laplace_scale, size=utilities.size)
    return int(np.argmax(noisy))


def _normalized_advantages(sensitivities: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Utility u_j = min_{j' != j} (q_j' - q_j) / (gamma_j + gamma_j').

    Sensitivity of each u_j to a unit change in the scores is at most 1, which
    is what makes exponential sampling on u private. A zero denominator means
    both candidates have exact scores: the comparison degenerates to the sign
    (+inf when j is strictly better, -inf when strictly worse, 0 on a tie).
    """
    k = scores.size
    utilities = np.empty(k)
    for j in range(k):
        best = math.inf
        for jp in range(k):
            if jp == j:
                continue
            gap = scores[jp] - scores[j]
            denom = sensitivities[j] + sensitivities[jp]
            if denom > 0:
                val = gap / denom
            elif gap > 0:
                val = math.inf
            elif gap < 0:
                val = -math.inf
            else:
                val = 0.0
            best = min(best, val)
        utilities[j] = 0.0 if k == 1 else best
    return utilities


def gem_select(sensitivities, scores, epsilon: float, beta: float, rng: RngHandle) -> int:
    """Select a low-score candidate among (sensitivity, score) pairs.

    Runs an exponential mechanism over normalized advantages with weights
    exp(epsilon * u / 2); the mechanism is epsilon-DP with respect to the
    scores. ``beta`` is the confidence level at which the selection guarantee
    (see :func:`gem_guarantee_bound`) is quoted; it does not change sampling.
    """
    sensitivities = np.asarray(sensitivities, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("empty candidate list")
    if scores.shape != sensitivities.shape:
        raise ValueError("scores and sensitivities must align")
    if np.any(sensitivities < 0):
        raise ValueError("sensitivities must be non-negative")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not (0 < beta < 1):
        raise ValueError("beta must lie in (0, 1)")
    utilities = _normalized_advantages(sensitivities, scores)
    if np.any(np.isposinf(utilities)):
        return int(np.argmax(np.isposinf(utilities)))
    finite = np.isfinite(utilities)
    weights = np.zeros_like(utilities)
    shifted = utilities[finite] - utilities[finite].max()
    weights[finite] = np.exp(0.5 * epsilon * shifted)
    total = weights.sum()
    u = rng.uniform() * total
    return int(np.searchsorted(np.cumsum(weights), u, side="left").clip(0, scores.size - 1))


def gem_guarantee_bound(sensitivities, scores, epsilon: float, beta: float) -> float:
    """The score level min_j (q_j + 4 gamma_j log(K/beta) / epsilon).

    With probability at least 1 - beta over the mechanism's randomness the
    selected candidate's score does not exceed this level.
    """
    sensitivities = np.asarray(sensitivities, dtype=float)
    scores = np.asarray(scores, dtype=float)
    slack = 4.0 * sensitivities * math.log(scores.size / beta) / epsilon
    return float(np.min(scores + slack))
