"""Scikit-learn style estimators wrapping the private training procedures.

These follow the usual conventions: constructor arguments are stored
verbatim (so ``get_params`` / ``set_params`` / ``clone`` work), all work
happens in ``fit``, and fitted state carries a trailing underscore. Inputs
pass through sklearn's validation helpers, and ``predict`` is the linear
predictor ``X @ coef_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import jl_apply, jl_dim_required, jl_lift, jl_sample
from .data import Dataset
from .losses import GlmLoss, absolute_loss, scaled_squared_loss, squared_loss
from .mechanisms import NON_PRIVATE, PrivacyBudget
from .optim import jl_method, noisy_gd, output_perturbation
from .rng import RngHandle
from .schedules import schedule_noisy_gd
from .selection import flagship_pipeline

__all__ = [
    "NoisyGradientDescentGLM",
    "OutputPerturbationGLM",
    "JohnsonLindenstraussGLM",
    "AdaptiveGridSearchGLM",
    "JLProjection",
]


def _resolve_loss(loss, loss_h, y_bound) -> GlmLoss:
    if isinstance(loss, GlmLoss):
        return loss
    if loss == "squared":
        return squared_loss(y_bound)
    if loss == "scaled-squared":
        return scaled_squared_loss(loss_h, y_bound)
    if loss == "absolute":
        return absolute_loss(y_bound)
    raise ValueError(f"unknown loss {loss!r}")


class _PrivateGlmBase(BaseEstimator, RegressorMixin):
    """Shared fit plumbing: validation, bound certification, budget assembly."""

    def _prepare(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        x_bound = self.x_bound
        if x_bound is None:
            x_bound = float(np.linalg.norm(X, axis=1).max(initial=0.0)) or 1.0
        y_bound = self.y_bound
        if y_bound is None:
            y_bound = float(np.abs(y).max(initial=0.0)) or 1.0
        dataset = Dataset(X, y, x_bound=x_bound, y_bound=y_bound)
        loss = _resolve_loss(self.loss, getattr(self, "loss_h", 2.0), y_bound)
        if self.epsilon is None:
            budget = NON_PRIVATE
        else:
            budget = PrivacyBudget(self.epsilon, self.delta)
        rng = RngHandle(self.seed, self.stream)
        return dataset, loss, budget, rng

    def _finish(self, model):
        self.coef_ = model.w
        self.schedule_ = model.schedule
        self.budget_spent_ = model.budget
        self.diagnostics_ = dict(model.diagnostics)
        self.n_features_in_ = model.w.shape[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


class NoisyGradientDescentGLM(_PrivateGlmBase):
    """Projected noisy gradient descent over a norm ball.

    ``epsilon=None`` runs the non-private schedule (no gradient noise).
    """

    def __init__(
        self,
        ball_radius=1.0,
        epsilon=None,
        delta=1e-6,
        loss="squared",
        loss_h=2.0,
        x_bound=None,
        y_bound=None,
        seed=0,
        stream=0,
    ):
        self.ball_radius = ball_radius
        self.epsilon = epsilon
        self.delta = delta
        self.loss = loss
        self.loss_h = loss_h
        self.x_bound = x_bound
        self.y_bound = y_bound
        self.seed = seed
        self.stream = stream

    def fit(self, X, y):
        dataset, loss, budget, rng = self._prepare(X, y)
        schedule = schedule_noisy_gd(
            loss.effective_smoothness(dataset.x_bound),
            loss.y_norm,
            self.ball_radius,
            dataset.n,
            dataset.d,
            budget,
        )
        return self._finish(noisy_gd(loss, dataset, schedule, rng, budget=budget))


class OutputPerturbationGLM(_PrivateGlmBase):
    """Constrained regularized ERM with Gaussian output noise."""

    def __init__(
        self,
        ball_radius=1.0,
        epsilon=1.0,
        delta=1e-6,
        variant="smooth",
        loss="squared",
        loss_h=2.0,
        x_bound=None,
        y_bound=None,
        seed=0,
        stream=0,
    ):
        self.ball_radius = ball_radius
        self.epsilon = epsilon
        self.delta = delta
        self.variant = variant
        self.loss = loss
        self.loss_h = loss_h
        self.x_bound = x_bound
        self.y_bound = y_bound
        self.seed = seed
        self.stream = stream

    def fit(self, X, y):
        dataset, loss, budget, rng = self._prepare(X, y)
        model = output_perturbation(loss, dataset, self.ball_radius, budget, self.variant, rng)
        return self._finish(model)


class JohnsonLindenstraussGLM(_PrivateGlmBase):
    """Random projection to low dimension, private training there, lift back."""

    def __init__(
        self,
        ball_radius=1.0,
        epsilon=1.0,
        delta=1e-6,
        variant="smooth",
        loss="squared",
        loss_h=2.0,
        x_bound=None,
        y_bound=None,
        seed=0,
        stream=0,
    ):
        self.ball_radius = ball_radius
        self.epsilon = epsilon
        self.delta = delta
        self.variant = variant
        self.loss = loss
        self.loss_h = loss_h
        self.x_bound = x_bound
        self.y_bound = y_bound
        self.seed = seed
        self.stream = stream

    def fit(self, X, y):
        dataset, loss, budget, rng = self._prepare(X, y)
        model = jl_method(loss, dataset, self.ball_radius, budget, self.variant, rng)
        return self._finish(model)


class AdaptiveGridSearchGLM(_PrivateGlmBase):
    """Private grid search over the radius around boosted output perturbation."""

    def __init__(
        self,
        epsilon=1.0,
        delta=1e-6,
        beta=0.1,
        loss="squared",
        loss_h=2.0,
        x_bound=None,
        y_bound=None,
        seed=0,
        stream=0,
    ):
        self.epsilon = epsilon
        self.delta = delta
        self.beta = beta
        self.loss = loss
        self.loss_h = loss_h
        self.x_bound = x_bound
        self.y_bound = y_bound
        self.seed = seed
        self.stream = stream

    def fit(self, X, y):
        dataset, loss, budget, rng = self._prepare(X, y)
        model, report = flagship_pipeline(loss, dataset, budget, self.beta, rng)
        self.report_ = report
        self.selected_radius_ = model.diagnostics["selected_ball"]
        return self._finish(model)


class JLProjection(TransformerMixin, BaseEstimator):
    """Dense Gaussian random projection with a norm-preservation guarantee.

    The output dimension is ``k`` when given, otherwise the smallest dimension
    at which inner products survive to tolerance ``alpha`` with failure
    probability ``beta``.
    """

    def __init__(self, k=None, alpha=0.25, beta=0.01, seed=0, stream=0):
        self.k = k
        self.alpha = alpha
        self.beta = beta
        self.seed = seed
        self.stream = stream

    def fit(self, X, y=None):
        X = check_array(X)
        k = self.k if self.k is not None else jl_dim_required(self.alpha, self.beta)
        self.matrix_ = jl_sample(RngHandle(self.seed, self.stream), k, X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "matrix_")
        X = check_array(X)
        return jl_apply(self.matrix_, X)

    def inverse_transform(self, X):
        check_is_fitted(self, "matrix_")
        X = check_array(X)
        return jl_lift(self.matrix_, X)
