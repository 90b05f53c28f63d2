"""Training procedures: noisy (S)GD, regularized ERM, output perturbation,
and the random-projection method, plus a replace-one-point stability probe.

All iterative methods start from the zero vector, keep every iterate inside
the declared ball, and return the average iterate. Noise is drawn through
:func:`dpglm.core.sample_gaussian_vector` so the injected variance is exactly
the schedule's ``sigma2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import jl_apply, jl_lift, jl_sample, project_ball, sample_gaussian_vector
from .data import Dataset
from .losses import (
    GlmLoss,
    empirical_grad,
    empirical_risk,
    lipschitz_on_ball,
)
from .mechanisms import (
    NON_PRIVATE,
    PrivacyBudget,
    gaussian_sigma2_output_perturbation,
)
from .rng import RngHandle
from .schedules import (
    OptimizerSchedule,
    jl_embedding_dim,
    jl_lipschitz_schedule,
    jl_smooth_schedule,
    output_perturbation_lambda,
    schedule_noisy_gd,
)

__all__ = [
    "TrainedModel",
    "ErmSolverError",
    "noisy_gd",
    "noisy_sgd",
    "regularized_erm_solve",
    "output_perturbation",
    "jl_method",
    "empirical_argument_stability",
    "StabilityReport",
    "model_to_json",
    "model_from_json",
]


@dataclass(frozen=True)
class TrainedModel:
    """A weight vector with the schedule and budget that produced it."""

    w: np.ndarray
    schedule: OptimizerSchedule
    budget: PrivacyBudget
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("trained weights contain non-finite entries")
        object.__setattr__(self, "w", w)


class ErmSolverError(RuntimeError):
    """Raised when the inner ERM solver fails to reach its tolerance."""


def noisy_gd(
    loss: GlmLoss,
    dataset: Dataset,
    schedule: OptimizerSchedule,
    rng: RngHandle,
    record_risk: bool = False,
    budget: PrivacyBudget = NON_PRIVATE,
) -> TrainedModel:
    """Projected full-batch gradient descent with fresh Gaussian noise per step.

    Returns the average of the post-step iterates w_1 .. w_T, all of which lie
    in the schedule's ball. ``budget`` is recorded on the model; calibration
    already happened when the schedule was built.
    """
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    d = dataset.d
    w = np.zeros(d)
    total = np.zeros(d)
    risk_sum = 0.0
    for _ in range(schedule.steps):
        grad = empirical_grad(loss, w, dataset.features, dataset.labels)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(
                "non-finite gradient; declared bounds do not match the data"
            )
        if schedule.sigma2 > 0:
            grad = grad + sample_gaussian_vector(rng, d, schedule.sigma2)
        w = project_ball(w - schedule.eta * grad, schedule.ball_radius)
        total += w
        if record_risk:
            risk_sum += empirical_risk(loss, w, dataset.features, dataset.labels)
    w_hat = total / schedule.steps
    diagnostics = {
        "empirical_risk": empirical_risk(loss, w_hat, dataset.features, dataset.labels),
        "average_iterate_norm": float(np.linalg.norm(w_hat)),
    }
    if record_risk:
        diagnostics["mean_iterate_risk"] = risk_sum / schedule.steps
    return TrainedModel(w=w_hat, schedule=schedule, budget=budget, diagnostics=diagnostics)


def noisy_sgd(
    loss: GlmLoss,
    dataset: Dataset,
    schedule: OptimizerSchedule,
    rng: RngHandle,
    budget: PrivacyBudget = NON_PRIVATE,
) -> TrainedModel:
    """Projected single-sample gradient method, sampling with replacement."""
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    d = dataset.d
    w = np.zeros(d)
    total = np.zeros(d)
    features, labels = dataset.features, dataset.labels
    for _ in range(schedule.steps):
        i = int(rng.integers(dataset.n))
        z = float(features[i] @ w)
        grad = float(loss.link_grad(z, labels[i])) * features[i]
        if schedule.sigma2 > 0:
            grad = grad + sample_gaussian_vector(rng, d, schedule.sigma2)
        w = project_ball(w - schedule.eta * grad, schedule.ball_radius)
        total += w
    w_hat = total / schedule.steps
    diagnostics = {
        "empirical_risk": empirical_risk(loss, w_hat, features, labels),
        "average_iterate_norm": float(np.linalg.norm(w_hat)),
    }
    return TrainedModel(w=w_hat, schedule=schedule, budget=budget, diagnostics=diagnostics)


def _erm_solve_smooth(loss, dataset, ball_radius, lam, tol, max_iter):
    h_eff = loss.effective_smoothness(dataset.x_bound)
    step = 1.0 / (h_eff + lam)
    w = np.zeros(dataset.d)
    for iteration in range(max_iter):
        grad = empirical_grad(loss, w, dataset.features, dataset.labels) + lam * w
        w_next = project_ball(w - step * grad, ball_radius)
        residual = float(np.linalg.norm(w - w_next)) / step
        w = w_next
        if residual <= tol:
            return w, {"iterations": iteration + 1, "residual": residual, "step": step}
    raise ErmSolverError(
        f"projected gradient did not reach tolerance {tol:g} in {max_iter} iterations "
        f"(last residual {residual:g})"
    )


_CONIC_LINKS = {
    "abs": lambda cp, z, y: cp.abs(z - y),
}


def _erm_solve_conic(loss, dataset, ball_radius, lam):
    import cvxpy as cp

    marker = loss.extra.get("conic_link")
    if marker not in _CONIC_LINKS:
        raise ErmSolverError(
            f"{loss.name} is not smooth and declares no conic form; cannot solve ERM"
        )
    w = cp.Variable(dataset.d)
    z = dataset.features @ w
    per_point = _CONIC_LINKS[marker](cp, z, dataset.labels)
    objective = cp.sum(per_point) / dataset.n + 0.5 * lam * cp.sum_squares(w)
    constraints = [cp.norm(w, 2) <= ball_radius] if math.isfinite(ball_radius) else []
    problem = cp.Problem(cp.Minimize(objective), constraints)
    problem.solve(
        solver=cp.CLARABEL,
        tol_gap_abs=1e-12,
        tol_gap_rel=1e-12,
        tol_feas=1e-12,
        max_iter=200,
    )
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise ErmSolverError(f"conic solver returned status {problem.status}")
    sol = np.asarray(w.value, dtype=float)
    # The interior-point solution can overshoot the ball by the feasibility
    # tolerance; pull it back so downstream invariants hold.
    sol = project_ball(sol, ball_radius)
    return sol, {"iterations": problem.solver_stats.num_iters, "residual": 0.0, "status": problem.status}


def regularized_erm_solve(
    loss: GlmLoss,
    dataset: Dataset,
    ball_radius: float,
    lam: float,
    tol: float | None = None,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, dict]:
    """Solve min over the ball of empirical risk + (lam/2) ||w||^2.

    Smooth losses run projected gradient descent with step 1/(H X^2 + lam)
    until the projected-gradient residual drops below ``tol`` (default
    1e-8 (1 + Y^2)); convergence is linear for lam > 0. Non-smooth losses
    with a declared conic form are handed to an interior-point solver.
    """
    if lam <= 0 and not math.isfinite(ball_radius):
        raise ValueError("need lam > 0 or a finite ball radius")
    if loss.is_smooth:
        if tol is None:
            tol = 1e-8 * (1.0 + loss.bound_at_zero)
        return _erm_solve_smooth(loss, dataset, ball_radius, lam, tol, max_iter)
    return _erm_solve_conic(loss, dataset, ball_radius, lam)


def output_perturbation(
    loss: GlmLoss,
    dataset: Dataset,
    ball_radius: float,
    budget: PrivacyBudget,
    variant: str,
    rng: RngHandle,
    sigma2_override: float | None = None,
    erm_tol: float | None = None,
) -> TrainedModel:
    """Constrained regularized ERM followed by Gaussian output noise.

    The released vector is w_tilde + xi and is deliberately not re-projected,
    so its norm may exceed the ball radius. ``sigma2_override`` exists for
    tests that need the noiseless minimizer through the same code path.
    """
    if ball_radius <= 0:
        raise ValueError("ball radius must be positive")
    lam = output_perturbation_lambda(loss, dataset.x_bound, ball_radius, dataset.n, budget, variant)
    if variant == "smooth":
        g_for_noise = lipschitz_on_ball(loss, dataset.x_bound, ball_radius)
    elif variant == "lipschitz":
        if loss.link_lipschitz is None:
            raise ValueError("lipschitz variant requires a link Lipschitz bound")
        g_for_noise = loss.link_lipschitz
    else:
        raise ValueError(f"unknown variant {variant!r}")
    sigma2 = gaussian_sigma2_output_perturbation(
        g_for_noise, dataset.x_bound, lam, dataset.n, budget, variant
    )
    if sigma2_override is not None:
        sigma2 = sigma2_override
    w_tilde, info = regularized_erm_solve(loss, dataset, ball_radius, lam, tol=erm_tol)
    w_hat = w_tilde + sample_gaussian_vector(rng, dataset.d, sigma2)
    schedule = OptimizerSchedule(
        steps=1,
        eta=info.get("step", 0.0),
        sigma2=sigma2,
        ball_radius=ball_radius,
        lipschitz=lipschitz_on_ball(loss, dataset.x_bound, ball_radius),
        lam=lam,
    )
    diagnostics = {
        "empirical_risk": empirical_risk(loss, w_hat, dataset.features, dataset.labels),
        "erm_risk": empirical_risk(loss, w_tilde, dataset.features, dataset.labels),
        "erm_iterations": float(info["iterations"]),
        "w_tilde_norm": float(np.linalg.norm(w_tilde)),
    }
    return TrainedModel(w=w_hat, schedule=schedule, budget=budget, diagnostics=diagnostics)


def jl_method(
    loss: GlmLoss,
    dataset: Dataset,
    ball_radius: float,
    budget: PrivacyBudget,
    variant: str,
    rng: RngHandle,
    full_batch: bool = False,
) -> TrainedModel:
    """Random projection to k dimensions, private training there, then lift.

    The embedding dimension comes from the variant's sizing rule and is
    clamped to [1, d]; when it reaches d the projection is skipped entirely
    and the smooth variant degenerates to plain noisy gradient descent. The
    inner optimizer runs on a ball of twice the radius (the projection can
    inflate norms), and the lifted output is not projected back.
    """
    if ball_radius <= 0:
        raise ValueError("ball radius must be positive")
    d = dataset.d
    k = min(jl_embedding_dim(loss, dataset.x_bound, ball_radius, dataset.n, budget, variant), d)
    if variant == "smooth":
        if k >= d:
            schedule = schedule_noisy_gd(
                loss.effective_smoothness(dataset.x_bound),
                loss.y_norm,
                ball_radius,
                dataset.n,
                d,
                budget,
            )
            model = noisy_gd(loss, dataset, schedule, rng.child(1), budget=budget)
            diagnostics = dict(model.diagnostics)
            diagnostics["embed_dim"] = float(d)
            diagnostics["identity_embedding"] = 1.0
            return TrainedModel(model.w, model.schedule, budget, diagnostics)
        phi = jl_sample(rng.child(0), k, d)
        embedded = jl_apply(phi, dataset.features)
        emb_bound = float(np.linalg.norm(embedded, axis=1).max(initial=0.0))
        emb_ds = Dataset(embedded, dataset.labels, max(emb_bound, 1e-300), dataset.y_bound)
        schedule = jl_smooth_schedule(loss, dataset.x_bound, ball_radius, dataset.n, k, budget)
        inner = noisy_gd(loss, emb_ds, schedule, rng.child(1))
        w_hat = jl_lift(phi, inner.w)
    elif variant == "lipschitz":
        schedule = jl_lipschitz_schedule(loss, dataset.x_bound, ball_radius, dataset.n, k, budget)
        if k >= d:
            phi = None
            emb_ds = dataset
        else:
            phi = jl_sample(rng.child(0), k, d)
            embedded = jl_apply(phi, dataset.features)
            emb_bound = float(np.linalg.norm(embedded, axis=1).max(initial=0.0))
            emb_ds = Dataset(embedded, dataset.labels, max(emb_bound, 1e-300), dataset.y_bound)
        runner = noisy_gd if full_batch else noisy_sgd
        inner = runner(loss, emb_ds, schedule, rng.child(1))
        w_hat = inner.w if phi is None else jl_lift(phi, inner.w)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    diagnostics = {
        "empirical_risk": empirical_risk(loss, w_hat, dataset.features, dataset.labels),
        "embed_dim": float(k),
        "identity_embedding": float(k >= d),
        "inner_risk": inner.diagnostics["empirical_risk"],
    }
    return TrainedModel(w=w_hat, schedule=schedule, budget=budget, diagnostics=diagnostics)


@dataclass
class StabilityReport:
    mean_square_distance: float
    bound: float | None
    average_regret: float | None
    distances: np.ndarray

    @property
    def within_bound(self) -> bool | None:
        if self.bound is None:
            return None
        return self.mean_square_distance <= self.bound


def empirical_argument_stability(
    loss: GlmLoss,
    dataset: Dataset,
    schedule: OptimizerSchedule,
    trials: int,
    rng: RngHandle,
    resample: Callable[[RngHandle], tuple[np.ndarray, float]],
    w_star: np.ndarray | None = None,
) -> StabilityReport:
    """Average squared output displacement under one resampled point.

    Each trial replaces a uniformly chosen point with a fresh draw from
    ``resample`` and reruns training with the noise stream coupled to the base
    run. When ``w_star`` is supplied, the report also evaluates the average
    stability bound 8 h eta^2 T / n * (average regret) + 8 h eta^2 T Y^2 / n
    using the observed average regret of the base run.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    # rng.child(0) reproduces the same stream on every call: the noise in the
    # swapped rerun is coupled draw-for-draw to the base run.
    base = noisy_gd(loss, dataset, schedule, rng.child(0), record_risk=w_star is not None)
    pick_stream = rng.child(1)
    sq = np.empty(trials)
    for t in range(trials):
        idx = int(pick_stream.integers(dataset.n))
        x_new, y_new = resample(pick_stream)
        swapped = dataset.replace_point(idx, x_new, y_new)
        other = noisy_gd(loss, swapped, schedule, rng.child(0))
        sq[t] = float(np.sum((base.w - other.w) ** 2))
    bound = None
    avg_regret = None
    if w_star is not None:
        star_risk = empirical_risk(loss, np.asarray(w_star, float), dataset.features, dataset.labels)
        avg_regret = base.diagnostics["mean_iterate_risk"] - star_risk
        h_eff = loss.effective_smoothness(dataset.x_bound)
        lead = 8.0 * h_eff * schedule.eta**2 * schedule.steps / dataset.n
        bound = lead * max(avg_regret, 0.0) + lead * loss.bound_at_zero
    return StabilityReport(
        mean_square_distance=float(sq.mean()),
        bound=bound,
        average_regret=avg_regret,
        distances=sq,
    )


def model_to_json(model: TrainedModel) -> str:
    payload = {
        "w": [float(v) for v in model.w],
        "schedule": json.loads(model.schedule.to_json()),
        "budget": {"epsilon": model.budget.epsilon, "delta": model.budget.delta},
        "diagnostics": model.diagnostics,
    }
    return json.dumps(payload, sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    payload = json.loads(text)
    schedule = OptimizerSchedule.from_json(json.dumps(payload["schedule"]))
    budget = PrivacyBudget(payload["budget"]["epsilon"], payload["budget"]["delta"])
    return TrainedModel(
        w=np.asarray(payload["w"], dtype=float),
        schedule=schedule,
        budget=budget,
        diagnostics=payload["diagnostics"],
    )
