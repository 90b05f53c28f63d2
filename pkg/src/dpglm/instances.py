"""Synthetic instance generators and their population-risk oracles.

Three families:

* ``regression`` -- well-specified linear model with spherical features,
  closed-form risk under squared loss. An optional ``signal_dim`` confines
  the signal (and the features) to a fixed low-dimensional subspace of the
  ambient space; this keeps the comparator's risk scale constant while the
  ambient dimension grows, which is what makes mechanism noise costs visible
  in dimension sweeps.
* ``smooth-hard`` -- a deterministic packing dataset for squared loss: a few
  active coordinates carry rescaled basis vectors with biased +-Y labels, so
  the least-squares minimizer is known per coordinate in closed form.
* ``lipschitz-hard`` -- a fingerprinting distribution for absolute loss with
  Beta-distributed coordinate means and a known comparator vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset
from .rng import RngHandle

__all__ = [
    "PopulationOracle",
    "gen_regression",
    "gen_smooth_hard",
    "smooth_hard_auto_params",
    "gen_lipschitz_hard",
    "lipschitz_hard_auto_params",
    "design_rank",
    "beta_mean_abs_deviation_mc",
    "beta_mean_abs_deviation_theory",
    "comparator_residual_mc",
    "comparator_residual_exact",
]


@dataclass
class PopulationOracle:
    """Closed-form or estimated population risk with a fixed comparator."""

    w_star: np.ndarray
    risk: Callable[[np.ndarray], float]
    base_risk: float
    standard_error: float = 0.0
    info: dict = field(default_factory=dict)

    def excess(self, w: np.ndarray) -> float:
        return self.risk(np.asarray(w, dtype=float)) - self.base_risk


def gen_regression(
    d: int,
    n: int,
    w_star_norm: float,
    noise_std: float,
    x_bound: float,
    rng: RngHandle,
    signal_dim: int | None = None,
) -> tuple[Dataset, PopulationOracle]:
    """Labels y = <w*, x> + N(0, noise_std^2) with x uniform on a sphere.

    The sphere has radius ``x_bound`` and lives in the first ``signal_dim``
    coordinates (all of them by default); ``w*`` is a random direction in the
    same subspace scaled to ``w_star_norm``. Under squared loss the population
    risk is ||w_sub - w*||^2 x_bound^2 / signal_dim + noise_std^2, where w_sub
    is the signal-subspace part of w, so excess risk is exact.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    d_sig = d if signal_dim is None else signal_dim
    if not (1 <= d_sig <= d):
        raise ValueError("signal_dim must lie in [1, d]")
    direction = rng.standard_normal(d_sig)
    norm = np.linalg.norm(direction)
    if norm == 0:
        direction = np.zeros(d_sig)
        direction[0] = 1.0
        norm = 1.0
    w_star = np.zeros(d)
    w_star[:d_sig] = w_star_norm * direction / norm

    raw = rng.standard_normal((n, d_sig))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    features = np.zeros((n, d))
    features[:, :d_sig] = x_bound * raw
    labels = features @ w_star + noise_std * rng.standard_normal(n)
    y_bound = float(np.abs(labels).max(initial=0.0))
    dataset = Dataset(features, labels, x_bound=x_bound, y_bound=max(y_bound, 1e-12))

    scale = x_bound**2 / d_sig
    noise_var = noise_std**2

    def risk(w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        diff = w[:d_sig] - w_star[:d_sig]
        return float(diff @ diff) * scale + noise_var

    oracle = PopulationOracle(
        w_star=w_star,
        risk=risk,
        base_risk=noise_var,
        info={"kind": "regression", "signal_dim": d_sig, "scale": scale},
    )
    return dataset, oracle


def smooth_hard_auto_params(
    n: int,
    epsilon: float,
    d: int,
    x_bound: float,
    minimizer_norm: float,
    y_bound: float,
) -> dict:
    """Adversarial preset: active dimension and label bias from the budget.

    Evaluates d' = (p X B n eps / Y)^(2/3) and b = (X B / (Y sqrt(p n eps)))^(2/3)
    with p = 1 when d' fits inside the ambient dimension, otherwise p shrinks
    to d^(3/2) Y / (X B n eps) and d' = d. Everything is clamped to valid
    ranges.
    """
    n_eps = n * epsilon
    d_auto = (x_bound * minimizer_norm * n_eps / y_bound) ** (2.0 / 3.0)
    if d_auto <= d:
        p = 1.0
        d_prime = max(int(math.floor(d_auto)), 1)
    else:
        p = min(d**1.5 * y_bound / (x_bound * minimizer_norm * n_eps), 1.0)
        d_prime = d
    b = (x_bound * minimizer_norm / (y_bound * math.sqrt(max(p * n_eps, 1e-300)))) ** (2.0 / 3.0)
    return {"d_prime": d_prime, "p_mass": p, "b_bias": min(b, 1.0)}


def gen_smooth_hard(
    d_prime: int,
    p_mass: float,
    b_bias: float,
    signs: np.ndarray,
    n: int,
    y_bound: float,
    x_bound: float,
    d: int | None = None,
    dummy_point: bool = False,
    dummy_scale: float = 1e-6,
) -> tuple[Dataset, PopulationOracle, dict]:
    """Deterministic packing dataset with a known least-squares minimizer.

    Each active coordinate j gets floor(p n / d') points with feature X e_j;
    ceil(count (1+b)/2) of them carry label sign_j Y and the rest -sign_j Y,
    so the per-coordinate minimizer is sign_j Y b_real / X with b_real the
    realized bias (n+ - n-)/count. Remaining points are zero-feature with
    label zero. The returned oracle measures empirical risk on this fixed
    dataset against the exact minimizer; realized parameters are reported.
    """
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (d_prime,) or not np.all(np.isin(signs, (-1.0, 1.0))):
        raise ValueError("signs must be a vector of +-1 of length d_prime")
    if not (0.0 <= p_mass <= 1.0 and 0.0 <= b_bias <= 1.0):
        raise ValueError("p_mass and b_bias must lie in [0, 1]")
    if x_bound <= 0 or y_bound <= 0:
        raise ValueError("bounds must be positive")
    count = int(math.floor(p_mass * n / d_prime))
    if count < 1:
        raise ValueError("infeasible counts: p n / d' is below one point per coordinate")
    if count * d_prime > n:
        raise ValueError("active points exceed n")
    ambient = d_prime if d is None else d
    extra_cols = 1 if dummy_point else 0
    if ambient < d_prime + extra_cols:
        raise ValueError("ambient dimension too small")

    n_plus = int(math.ceil(count * (1.0 + b_bias) / 2.0))
    n_minus = count - n_plus
    b_real = (n_plus - n_minus) / count

    total = n + (1 if dummy_point else 0)
    features = np.zeros((total, ambient))
    labels = np.zeros(total)
    row = 0
    for j in range(d_prime):
        features[row : row + count, j] = x_bound
        labels[row : row + n_plus] = signs[j] * y_bound
        labels[row + n_plus : row + count] = -signs[j] * y_bound
        row += count
    if dummy_point:
        features[-1, d_prime] = dummy_scale * x_bound
        labels[-1] = y_bound
    dataset = Dataset(features, labels, x_bound=x_bound, y_bound=y_bound)

    # The design is diagonal (each coordinate appears in its own block), so
    # the global least-squares minimizer is the per-coordinate one.
    w_star = np.zeros(ambient)
    w_star[:d_prime] = signs * y_bound * b_real / x_bound
    if dummy_point:
        w_star[d_prime] = y_bound / (dummy_scale * x_bound)

    def risk(w: np.ndarray) -> float:
        z = dataset.features @ np.asarray(w, dtype=float)
        return float(np.mean((z - dataset.labels) ** 2))

    base = risk(w_star)
    realized = {
        "count_per_coordinate": count,
        "b_realized": b_real,
        "p_realized": count * d_prime / n,
        "minimizer_norm": float(np.linalg.norm(w_star)),
    }
    oracle = PopulationOracle(
        w_star=w_star,
        risk=risk,
        base_risk=base,
        info={"kind": "smooth-hard", **realized},
    )
    return dataset, oracle, realized


def lipschitz_hard_auto_params(n: int, epsilon: float, d: int) -> dict:
    """Adversarial preset for the fingerprinting family.

    beta = 1/16; the active dimension is the rank budget floor(48 n eps)
    capped at the ambient dimension; the feature mass is
    alpha = min(d' / (48 (1 + 2 beta) n eps), 1).
    """
    beta_shape = 1.0 / 16.0
    n_eps = n * epsilon
    d_prime = max(min(d, int(math.floor(48.0 * n_eps))), 1)
    alpha = min(d_prime / (48.0 * (1.0 + 2.0 * beta_shape) * n_eps), 1.0)
    return {"d_prime": d_prime, "alpha_mass": alpha, "beta_shape": beta_shape}


def gen_lipschitz_hard(
    d_prime: int,
    alpha_mass: float,
    beta_shape: float,
    comparator_norm: float,
    p_norm: float,
    n: int,
    x_bound: float,
    rng: RngHandle,
    d: int | None = None,
) -> tuple[Dataset, np.ndarray, PopulationOracle]:
    """Fingerprinting distribution for absolute loss.

    Coordinate means mu_i ~ Beta(beta, beta) are drawn once; each point picks
    x = X e_i with probability alpha (zero otherwise), a code z ~ Bernoulli(mu)
    and label y = B / d'^(1/p) <x, z>. The comparator is
    w_tilde = B / d'^(1/p) mu with ||w_tilde||_p <= B. Given mu, the risk of w
    under absolute loss has the closed form
    alpha X / d' sum_i [mu_i |c - w_i| + (1 - mu_i) |w_i|] with c the label
    scale, which the oracle uses; a Monte-Carlo estimator is available
    separately as an independent check.
    """
    if not (0.0 <= alpha_mass <= 1.0):
        raise ValueError("alpha_mass must lie in [0, 1]")
    if beta_shape <= 0 or p_norm < 1:
        raise ValueError("beta_shape must be positive and p_norm >= 1")
    ambient = d_prime if d is None else d
    if ambient < d_prime:
        raise ValueError("ambient dimension too small")
    mu = rng.beta(beta_shape, beta_shape, size=d_prime)
    label_scale = comparator_norm / d_prime ** (1.0 / p_norm)

    active = rng.uniform(size=n) < alpha_mass
    coords = rng.integers(0, d_prime, size=n)
    codes = (rng.uniform(size=(n, d_prime)) < mu).astype(float)
    features = np.zeros((n, ambient))
    labels = np.zeros(n)
    idx = np.flatnonzero(active)
    features[idx, coords[idx]] = x_bound
    labels[idx] = label_scale * x_bound * codes[idx, coords[idx]]
    y_bound = float(np.abs(labels).max(initial=0.0))
    dataset = Dataset(features, labels, x_bound=x_bound, y_bound=max(y_bound, 1e-12))

    w_tilde = np.zeros(ambient)
    w_tilde[:d_prime] = label_scale * mu

    def risk(w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        active_part = w[:d_prime]
        c = label_scale * x_bound
        per_coord = mu * np.abs(c - x_bound * active_part) + (1.0 - mu) * np.abs(
            x_bound * active_part
        )
        return float(alpha_mass * np.mean(per_coord))

    oracle = PopulationOracle(
        w_star=w_tilde,
        risk=risk,
        base_risk=risk(w_tilde),
        info={"kind": "lipschitz-hard", "mu": mu, "label_scale": label_scale, "alpha": alpha_mass},
    )
    return dataset, w_tilde, oracle


def design_rank(dataset: Dataset, tol: float = 1e-8) -> int:
    """Numerical rank of the feature matrix by thresholding at tol * sigma_max."""
    if dataset.n == 0:
        return 0
    svals = np.linalg.svd(dataset.features, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > tol * svals[0]))


def beta_mean_abs_deviation_theory(beta_shape: float) -> float:
    """Exact E|z - mu| for z ~ Bernoulli(mu), mu ~ Beta(beta, beta).

    E_z|z - mu| = 2 mu (1 - mu), and E[mu(1 - mu)] = B(beta+1, beta+1)/B(beta, beta)
    = beta / (2 (1 + 2 beta)), giving beta / (1 + 2 beta) overall.
    """
    return beta_shape / (1.0 + 2.0 * beta_shape)


def beta_mean_abs_deviation_mc(beta_shape: float, samples: int, rng: RngHandle) -> tuple[float, float]:
    """Monte-Carlo estimate of E|z - mu| with its standard error."""
    mu = rng.beta(beta_shape, beta_shape, size=samples)
    z = (rng.uniform(size=samples) < mu).astype(float)
    dev = np.abs(z - mu)
    return float(dev.mean()), float(dev.std(ddof=1) / math.sqrt(samples))


def comparator_residual_exact(
    d_prime: int,
    alpha_mass: float,
    beta_shape: float,
    comparator_norm: float,
    p_norm: float,
    x_bound: float,
) -> float:
    """Exact E|y - <w_tilde, x>| over mu, x, z.

    A point is active with probability alpha, in which case the residual is
    (B / d'^(1/p)) X |z_i - mu_i| for the selected coordinate, so the mean is
    alpha B X E|z - mu| / d'^(1/p) = alpha beta B X / ((1 + 2 beta) d'^(1/p)).
    """
    return (
        alpha_mass
        * comparator_norm
        * x_bound
        * beta_mean_abs_deviation_theory(beta_shape)
        / d_prime ** (1.0 / p_norm)
    )


def comparator_residual_mc(
    d_prime: int,
    alpha_mass: float,
    beta_shape: float,
    comparator_norm: float,
    p_norm: float,
    x_bound: float,
    samples: int,
    rng: RngHandle,
) -> tuple[float, float]:
    """Monte-Carlo estimate of E|y - <w_tilde, x>| with fresh mu per draw."""
    label_scale = comparator_norm / d_prime ** (1.0 / p_norm)
    vals = np.zeros(samples)
    active = rng.uniform(size=samples) < alpha_mass
    # Conditioned on an active draw, y - <w_tilde, x> = scale * X * (z_i - mu_i)
    # for the selected coordinate i; the mu_i are exchangeable, so the selected
    # coordinate's mean can be drawn directly.
    mus = rng.beta(beta_shape, beta_shape, size=samples)
    zs = (rng.uniform(size=samples) < mus).astype(float)
    vals[active] = label_scale * x_bound * np.abs(zs[active] - mus[active])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))
