"""Gradient-free baselines over the controller parameters.

SPSA estimates a descent direction from paired two-sided Rademacher
perturbations; CEM maintains a diagonal Gaussian over parameters, refit to
the elite fraction with smoothing.  Both consume the shared rollout-based
objective evaluator and the same Adam settings as the adjoint methods, and
their evaluation counts are ledger-audited (2m and P per update).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .controller import AdamState, ControllerParams, adam_step
from .errors import InvalidInputError, StripctlError
from .ledger import BudgetLedger


@dataclass
class SpsaSettings:
    learning_rate: float = 1e-2
    perturbation: float = 5e-3
    pairs_per_update: int = 2

    def __post_init__(self):
        if self.perturbation <= 0 or self.pairs_per_update < 1:
            raise InvalidInputError("SPSA needs perturbation > 0 and m >= 1")


@dataclass
class CemSettings:
    population: int = 10
    elite_fraction: float = 0.3
    smoothing: float = 0.25
    sigma_floor: float = 1e-2

    def __post_init__(self):
        if not (1 <= self.elite_count <= self.population):
            raise InvalidInputError("elite count must be within the population")
        if self.sigma_floor <= 0:
            raise InvalidInputError("sigma floor must be positive")

    @property
    def elite_count(self) -> int:
        return math.ceil(self.elite_fraction * self.population)


_log = logging.getLogger(__name__)


def spsa_update(params: ControllerParams, objective, settings: SpsaSettings,
                rng: np.random.Generator, adam: AdamState,
                ledger: BudgetLedger | None = None) -> ControllerParams:
    """One SPSA step: m paired evaluations, averaged estimate, Adam update.

    Consumes exactly 2m objective evaluations.  A non-finite loss in any
    pair skips the parameter update (logged); the update still counts.
    """
    n = params.theta.size
    estimate = np.zeros(n)
    finite = True
    for _ in range(settings.pairs_per_update):
        delta = rng.integers(0, 2, size=n) * 2.0 - 1.0
        loss_plus = objective(params.with_theta(params.theta + settings.perturbation * delta))
        loss_minus = objective(params.with_theta(params.theta - settings.perturbation * delta))
        if ledger is not None:
            ledger.objective_evaluations += 2
        if np.isfinite(loss_plus) and np.isfinite(loss_minus):
            estimate += (loss_plus - loss_minus) / (2.0 * settings.perturbation * delta)
        else:
            finite = False
    if ledger is not None:
        ledger.optimizer_updates += 1
    if not finite:
        _log.warning("SPSA update skipped: non-finite loss in a perturbation pair")
        return params
    estimate /= settings.pairs_per_update
    return adam_step(adam, params, estimate)


@dataclass
class CemState:
    mu: np.ndarray
    sigma: np.ndarray
    best_theta: np.ndarray = None  # type: ignore[assignment]
    best_loss: float = np.inf

    @classmethod
    def from_params(cls, params: ControllerParams, sigma0: float) -> "CemState":
        return cls(mu=params.theta.copy(), sigma=np.full(params.theta.size, sigma0))


def cem_update(state: CemState, objective, settings: CemSettings,
               rng: np.random.Generator, params_template: ControllerParams,
               ledger: BudgetLedger | None = None) -> CemState:
    """One CEM generation: sample P, refit (mu, sigma) to the elites.

    Elite statistics use the Bessel-corrected standard deviation; sigma is
    floored.  All-non-finite populations abort.
    """
    pop = settings.population
    samples = state.mu[None, :] + state.sigma[None, :] * rng.standard_normal(
        (pop, state.mu.size))
    losses = np.empty(pop)
    for i in range(pop):
        losses[i] = objective(params_template.with_theta(samples[i]))
    if ledger is not None:
        ledger.objective_evaluations += pop
    finite = np.isfinite(losses)
    if not np.any(finite):
        raise StripctlError("all CEM candidates produced non-finite losses")
    losses = np.where(finite, losses, np.inf)

    order = np.argsort(losses, kind="stable")
    elites = samples[order[: settings.elite_count]]
    mu_elite = elites.mean(axis=0)
    sigma_elite = elites.std(axis=0, ddof=1) if settings.elite_count > 1 else np.zeros_like(state.mu)
    alpha = settings.smoothing
    mu = alpha * mu_elite + (1.0 - alpha) * state.mu
    sigma = np.maximum(alpha * sigma_elite + (1.0 - alpha) * state.sigma,
                       settings.sigma_floor)

    best_idx = int(order[0])
    best_theta, best_loss = state.best_theta, state.best_loss
    if losses[best_idx] < best_loss:
        best_loss = float(losses[best_idx])
        best_theta = samples[best_idx].copy()
    if ledger is not None:
        ledger.optimizer_updates += 1
    return CemState(mu=mu, sigma=sigma, best_theta=best_theta, best_loss=best_loss)
