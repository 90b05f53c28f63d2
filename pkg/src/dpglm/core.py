"""Vector primitives: ball projection, noise sampling, and random projections.

These are the building blocks shared by every optimizer: Euclidean projection
onto a norm ball, Gaussian/Laplace noise draws routed through
:class:`~dpglm.rng.RngHandle`, and a dense Gaussian random-projection family
used for dimensionality reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngHandle

__all__ = [
    "project_ball",
    "sample_gaussian_vector",
    "sample_laplace",
    "JlMatrix",
    "jl_sample",
    "jl_apply",
    "jl_lift",
    "jl_dim_required",
]


def project_ball(w: np.ndarray, radius: float) -> np.ndarray:
    """Project ``w`` onto the Euclidean ball of the given radius.

    Returns ``w`` unchanged when it is already inside the ball, otherwise
    rescales it radially so the output norm equals ``radius``.
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("cannot project a vector with non-finite entries")
    if radius < 0:
        raise ValueError("ball radius must be non-negative")
    norm = float(np.linalg.norm(w))
    if norm <= radius:
        return w
    if norm == 0.0:
        return np.zeros_like(w)
    return w * (radius / norm)


def sample_gaussian_vector(rng: RngHandle, dim: int, sigma2: float) -> np.ndarray:
    """Draw an i.i.d. N(0, sigma2) vector; sigma2 == 0 yields the zero vector."""
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    if dim < 0:
        raise ValueError("dimension must be non-negative")
    if sigma2 == 0.0:
        return np.zeros(dim)
    return rng.normal(math.sqrt(sigma2), size=dim)


def sample_laplace(rng: RngHandle, scale: float) -> float:
    """Draw one Laplace(0, scale) variate; scale == 0 yields 0."""
    if scale < 0:
        raise ValueError("Laplace scale must be non-negative")
    if scale == 0.0:
        return 0.0
    return float(rng.laplace(scale))


@dataclass(frozen=True)
class JlMatrix:
    """A dense k x d random projection with i.i.d. N(0, 1/k) entries."""

    entries: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.entries.shape[0]

    @property
    def in_dim(self) -> int:
        return self.entries.shape[1]


def jl_sample(rng: RngHandle, k: int, d: int) -> JlMatrix:
    """Sample a k x d projection matrix with i.i.d. N(0, 1/k) entries.

    Each column has expected squared norm 1; a generation-time calibration
    check rejects matrices whose average column norm drifts far beyond
    statistical fluctuation (a symptom of a miscalibrated entry variance).
    """
    if k < 1 or d < 1:
        raise ValueError("projection dimensions must be at least 1")
    entries = rng.normal(1.0 / math.sqrt(k), size=(k, d))
    mean_col_sq = float(np.mean(np.sum(entries**2, axis=0)))
    # mean of d iid chi2_k/k variables: std sqrt(2/(k d)); 10 sigma tripwire
    if abs(mean_col_sq - 1.0) > 10.0 * math.sqrt(2.0 / (k * d)):
        raise RuntimeError(
            f"projection calibration check failed: mean squared column norm "
            f"{mean_col_sq:.4f} is implausibly far from 1"
        )
    return JlMatrix(entries=entries)


def jl_apply(m: JlMatrix, x: np.ndarray) -> np.ndarray:
    """Map a d-dimensional vector down to k dimensions."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.in_dim:
        raise ValueError(f"expected input dimension {m.in_dim}, got {x.shape[-1]}")
    return x @ m.entries.T


def jl_lift(m: JlMatrix, w: np.ndarray) -> np.ndarray:
    """Transpose action: map a k-dimensional vector back to d dimensions."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != m.out_dim:
        raise ValueError(f"expected input dimension {m.out_dim}, got {w.shape[-1]}")
    return w @ m.entries


def jl_dim_required(alpha: float, beta: float) -> int:
    """Embedding dimension at which the (alpha, beta) dot-product guarantee holds.

    Uses k = ceil(8 ln(2/beta) / alpha^2). The constant 8 is a safe choice for
    the dense Gaussian family and is validated empirically by the test suite;
    treat it as tunable rather than canonical.
    """
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    if not (0 < beta < 1):
        raise ValueError("beta must lie in (0, 1)")
    return math.ceil(8.0 * math.log(2.0 / beta) / alpha**2)
