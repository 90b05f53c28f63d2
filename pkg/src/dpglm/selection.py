"""Confidence boosting and private grid search over the ball radius.

``boost`` trains several models on disjoint chunks and privately picks the
one with the best validation risk. ``private_grid_search`` trains candidates
at doubling radii, scores them on a held-out half with a penalty that
reflects how unreliable each candidate's loss estimate is, and selects with
the generalized exponential mechanism; a zero-vector candidate guarantees the
output never does worse than predicting nothing. ``flagship_pipeline`` wires
grid search around boosted output perturbation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset
from .losses import GlmLoss, empirical_risk, lipschitz_on_ball
from .mechanisms import (
    NON_PRIVATE,
    PrivacyBudget,
    gaussian_sigma2_output_perturbation,
    gem_select,
    report_noisy_max,
)
from .optim import TrainedModel, jl_method, noisy_gd, output_perturbation
from .rng import RngHandle
from .schedules import (
    OptimizerSchedule,
    flagship_grid_size,
    output_perturbation_lambda,
    schedule_noisy_gd,
)

__all__ = [
    "BaseAlgorithm",
    "delta_noisy_gd",
    "delta_output_perturbation",
    "validation_penalty",
    "boost",
    "boosting_chunks",
    "private_grid_search",
    "flagship_pipeline",
    "make_base_algorithm",
    "grid_report_csv",
]


@dataclass
class BaseAlgorithm:
    """A trainable procedure plus the bounds grid search and boosting need.

    ``train`` maps (dataset, ball radius, budget, rng) to a model.
    ``delta_fn`` bounds the per-point loss of a trained model at a given
    radius (used both for score penalties and GEM sensitivities); it may be
    None for algorithms that are only boosted, never grid-searched.
    ``gamma_fn`` gives the sub-Gaussian scale of the output at a given radius.
    ``err_fn`` is an optional theoretical risk curve, kept for diagnostics
    only; nothing branches on it.
    """

    name: str
    train: Callable[[Dataset, float, PrivacyBudget, RngHandle], TrainedModel]
    delta_fn: Callable[[float], float] | None = None
    gamma_fn: Callable[[float], float] | None = None
    err_fn: Callable[[float], float] | None = None


def delta_noisy_gd(ball_radius: float, loss: GlmLoss, x_bound: float) -> float:
    """Per-point loss bound Y^2 + H B^2 X^2 for in-ball outputs."""
    if loss.smoothness is None:
        raise ValueError("loss-range bound requires a smoothness constant")
    return loss.bound_at_zero + loss.smoothness * ball_radius**2 * x_bound**2


def delta_output_perturbation(
    ball_radius: float,
    loss: GlmLoss,
    x_bound: float,
    sigma2: float,
    grid_size: int,
    delta: float,
) -> float:
    """Loss bound Y^2 + H X^2 sigma^2 log(K/delta) + H B^2 X^2 for noised outputs."""
    if loss.smoothness is None:
        raise ValueError("loss-range bound requires a smoothness constant")
    h = loss.smoothness
    noise_term = h * x_bound**2 * sigma2 * math.log(grid_size / delta) if sigma2 > 0 else 0.0
    return loss.bound_at_zero + noise_term + h * ball_radius**2 * x_bound**2


def validation_penalty(delta_b: float, grid_size: int, beta: float, n_val: int, y_sq: float) -> float:
    """Penalty tau = Delta(B) log(4K/beta)/n + sqrt(4 Y^2 log(4K/beta)/n).

    ``n_val`` is the number of validation points the empirical score is
    averaged over. The log argument uses 4K/beta, the constant under which
    the estimate-vs-population bound is actually proved.
    """
    log_term = math.log(4.0 * grid_size / beta)
    return delta_b * log_term / n_val + math.sqrt(4.0 * y_sq * log_term / n_val)


def boosting_chunks(n: int, beta: float, m_override: int | None = None) -> tuple[int, int]:
    """Number of training chunks m = ceil(4 ln(4/beta)) and the chunk length."""
    m = int(math.ceil(4.0 * math.log(4.0 / beta))) if m_override is None else m_override
    m = max(m, 1)
    if n < m + 1:
        raise ValueError(f"need at least m+1 = {m + 1} points, got {n}")
    return m, n // (m + 1)


def boost(
    base: BaseAlgorithm,
    loss: GlmLoss,
    dataset: Dataset,
    ball_radius: float,
    budget: PrivacyBudget,
    beta: float,
    rng: RngHandle,
    m_override: int | None = None,
    selection_scale: float | None = None,
) -> TrainedModel:
    """Train on disjoint chunks, then privately select by validation risk.

    Each of the m models is trained at (eps/2, delta) -- parallel composition
    over disjoint chunks -- and selection runs report-noisy-max with Laplace
    scale sigma~ where sigma~^2 = 4 (Y^2 + h gamma^2 X^2) / (n eps). The
    remainder of the points beyond m equal chunks goes to the validation
    chunk. ``selection_scale`` overrides the Laplace scale (tests use 0).
    """
    m, chunk = boosting_chunks(dataset.n, beta, m_override)
    model_budget = budget.scaled(0.5) if budget.is_private else NON_PRIVATE
    models = []
    for i in range(m):
        part = dataset.subset(slice(i * chunk, (i + 1) * chunk))
        models.append(base.train(part, ball_radius, model_budget, rng.child(i)))
    validation = dataset.subset(slice(m * chunk, dataset.n))

    if selection_scale is None:
        if budget.is_private:
            gamma = base.gamma_fn(ball_radius) if base.gamma_fn else ball_radius
            h_eff = loss.effective_smoothness(dataset.x_bound)
            scale_sq = (
                4.0
                * (loss.bound_at_zero + h_eff * gamma**2 * dataset.x_bound**2)
                / (dataset.n * budget.epsilon)
            )
            selection_scale = math.sqrt(scale_sq)
        else:
            selection_scale = 0.0
    utilities = [
        -empirical_risk(loss, model.w, validation.features, validation.labels)
        for model in models
    ]
    winner = report_noisy_max(utilities, selection_scale, rng.child(m))
    chosen = models[winner]
    diagnostics = dict(chosen.diagnostics)
    diagnostics.update(
        {
            "boost_chunks": float(m),
            "boost_selected": float(winner),
            "boost_selection_scale": selection_scale,
        }
    )
    return TrainedModel(chosen.w, chosen.schedule, budget, diagnostics)


def _zero_schedule(ball_radius: float = 0.0) -> OptimizerSchedule:
    return OptimizerSchedule(steps=1, eta=0.0, sigma2=0.0, ball_radius=ball_radius, lipschitz=0.0)


def private_grid_search(
    base: BaseAlgorithm,
    loss: GlmLoss,
    dataset: Dataset,
    grid_size: int,
    budget: PrivacyBudget,
    beta: float,
    rng: RngHandle,
) -> tuple[TrainedModel, dict]:
    """Train candidates at radii 2^j on one half, privately select on the other.

    Candidates are trained at (eps/2K, delta/2K) each; selection spends the
    remaining eps/2 through the generalized exponential mechanism at
    confidence beta/4. Scores are validation risks plus
    :func:`validation_penalty`; GEM sensitivities are Delta(B_j) / n_val, the
    worst-case movement of a mean over the validation half. The pair
    (0, Y^2) for the zero vector is always in the running.
    """
    if base.delta_fn is None:
        raise ValueError(f"{base.name} declares no loss-range bound; cannot grid search")
    if grid_size < 1:
        raise ValueError("grid must have at least one radius")
    if dataset.n % 2 != 0:
        raise ValueError("grid search needs an even number of points")
    half = dataset.n // 2
    train_half = dataset.subset(slice(0, half))
    val_half = dataset.subset(slice(half, dataset.n))

    if budget.is_private:
        train_total, select_total = budget.split(2)
        per_candidate = train_total.split(grid_size)
    else:
        train_total = select_total = NON_PRIVATE
        per_candidate = tuple(NON_PRIVATE for _ in range(grid_size))

    y_sq = loss.bound_at_zero
    models: list[TrainedModel | None] = [None]
    sensitivities = [0.0]
    scores = [y_sq]
    rows = [
        {
            "j": 0,
            "ball": 0.0,
            "risk": empirical_risk(loss, np.zeros(dataset.d), val_half.features, val_half.labels),
            "tau": 0.0,
            "delta_b": 0.0,
            "score": y_sq,
        }
    ]
    for j in range(1, grid_size + 1):
        radius = 2.0**j
        model = base.train(train_half, radius, per_candidate[j - 1], rng.child(j))
        risk = empirical_risk(loss, model.w, val_half.features, val_half.labels)
        delta_b = base.delta_fn(radius)
        tau = validation_penalty(delta_b, grid_size, beta, val_half.n, y_sq)
        models.append(model)
        sensitivities.append(delta_b / val_half.n)
        scores.append(risk + tau)
        rows.append(
            {
                "j": j,
                "ball": radius,
                "risk": risk,
                "tau": tau,
                "delta_b": delta_b,
                "score": risk + tau,
            }
        )

    if budget.is_private:
        winner = gem_select(
            sensitivities, scores, select_total.epsilon, beta / 4.0, rng.child(0)
        )
    else:
        winner = int(np.argmin(scores))
    for row in rows:
        row["selected"] = row["j"] == winner

    if winner == 0:
        chosen = TrainedModel(
            np.zeros(dataset.d),
            _zero_schedule(),
            budget,
            {"empirical_risk": rows[0]["risk"]},
        )
    else:
        prior = models[winner]
        chosen = TrainedModel(prior.w, prior.schedule, budget, dict(prior.diagnostics))
    diagnostics = dict(chosen.diagnostics)
    diagnostics.update({"selected_index": float(winner), "selected_ball": rows[winner]["ball"]})
    chosen = TrainedModel(chosen.w, chosen.schedule, budget, diagnostics)

    accounting = {
        "epsilon_training": sum(b.epsilon for b in per_candidate) if budget.is_private else math.inf,
        "epsilon_selection": select_total.epsilon if budget.is_private else math.inf,
        "delta_training": sum(b.delta for b in per_candidate) if budget.is_private else 0.0,
        "delta_allowance": budget.delta - sum(b.delta for b in per_candidate)
        if budget.is_private
        else 0.0,
    }
    report = {
        "rows": rows,
        "selected": winner,
        "grid_size": grid_size,
        "budget_accounting": accounting,
    }
    return chosen, report


def make_base_algorithm(
    kind: str,
    loss: GlmLoss,
    x_bound: float,
    sigma2_for_bound: Callable[[float], float] | None = None,
    grid_size: int = 1,
    bound_delta: float = 1e-6,
    boost_beta: float | None = None,
) -> BaseAlgorithm:
    """Build a :class:`BaseAlgorithm` for a named training rule.

    ``sigma2_for_bound`` supplies the output-noise variance used in the
    loss-range bound for perturbed outputs, as a function of the radius; it
    must reflect the (n, budget) the algorithm will actually be trained at.
    ``boost_beta`` wraps the rule in confidence boosting at that level.
    """

    if kind == "noisy-gd":
        def train(ds, radius, budget, rng):
            schedule = schedule_noisy_gd(
                loss.effective_smoothness(ds.x_bound), loss.y_norm, radius, ds.n, ds.d, budget
            )
            return noisy_gd(loss, ds, schedule, rng, budget=budget)

        delta_fn = lambda b: delta_noisy_gd(b, loss, x_bound)
        gamma_fn = lambda b: b
    elif kind in ("output-pert-smooth", "output-pert-lipschitz"):
        variant = kind.rsplit("-", 1)[1]

        def train(ds, radius, budget, rng):
            return output_perturbation(loss, ds, radius, budget, variant, rng)

        if variant == "smooth":
            sigma2_fn = sigma2_for_bound or (lambda b: 0.0)
            delta_fn = lambda b: delta_output_perturbation(
                b, loss, x_bound, sigma2_fn(b), grid_size, bound_delta
            )
            gamma_fn = lambda b: math.sqrt(b**2 + sigma2_fn(b))
        else:
            delta_fn = None
            gamma_fn = lambda b: b
    elif kind in ("jl-smooth", "jl-lipschitz"):
        variant = kind.rsplit("-", 1)[1]

        def train(ds, radius, budget, rng):
            return jl_method(loss, ds, radius, budget, variant, rng)

        delta_fn = None
        gamma_fn = lambda b: 2.0 * b
    else:
        raise ValueError(f"unknown base algorithm {kind!r}")

    algo = BaseAlgorithm(name=kind, train=train, delta_fn=delta_fn, gamma_fn=gamma_fn)
    if boost_beta is not None:
        inner = algo

        def boosted_train(ds, radius, budget, rng):
            return boost(inner, loss, ds, radius, budget, boost_beta, rng)

        algo = BaseAlgorithm(
            name=f"boost({kind})",
            train=boosted_train,
            delta_fn=inner.delta_fn,
            gamma_fn=inner.gamma_fn,
        )
    return algo


def flagship_pipeline(
    loss: GlmLoss,
    dataset: Dataset,
    budget: PrivacyBudget,
    beta: float,
    rng: RngHandle,
) -> tuple[TrainedModel, dict]:
    """Grid search wrapped around boosted output perturbation.

    The grid size follows the closed-form sizing rule; the loss-range bound
    for each radius uses the output-noise level the inner models are actually
    trained with (chunk size and split budget included).
    """
    if loss.smoothness is None:
        raise ValueError("the pipeline requires a smooth loss")
    grid_size = flagship_grid_size(loss, dataset.x_bound, dataset.n, budget.epsilon)
    half = dataset.n // 2
    per_candidate = (
        budget.split(2)[0].split(grid_size)[0] if budget.is_private else NON_PRIVATE
    )
    m, chunk = boosting_chunks(half, beta)
    inner_budget = per_candidate.scaled(0.5) if budget.is_private else NON_PRIVATE

    def sigma2_for_bound(radius: float) -> float:
        if not inner_budget.is_private or chunk < 1:
            return 0.0
        lam = output_perturbation_lambda(loss, dataset.x_bound, radius, chunk, inner_budget, "smooth")
        g = lipschitz_on_ball(loss, dataset.x_bound, radius)
        return gaussian_sigma2_output_perturbation(
            g, dataset.x_bound, lam, chunk, inner_budget, "smooth"
        )

    bound_delta = budget.delta if budget.delta > 0 else beta
    base = make_base_algorithm(
        "output-pert-smooth",
        loss,
        dataset.x_bound,
        sigma2_for_bound=sigma2_for_bound,
        grid_size=grid_size,
        bound_delta=min(bound_delta, beta),
        boost_beta=beta,
    )
    return private_grid_search(base, loss, dataset, grid_size, budget, beta, rng)


def grid_report_csv(report: dict) -> str:
    """Render the per-candidate table as CSV text."""
    lines = ["j,ball,risk,tau,delta_b,score,selected"]
    for row in report["rows"]:
        lines.append(
            f"{row['j']},{row['ball']!r},{row['risk']!r},{row['tau']!r},"
            f"{row['delta_b']!r},{row['score']!r},{int(row['selected'])}"
        )
    return "\n".join(lines) + "\n"
