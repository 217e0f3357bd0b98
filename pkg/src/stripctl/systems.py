"""Equilibrium systems the rollout engine can drive.

A system solves for its implicit state given boundary values and hands out
sensitivity contexts at converged points.  The strip system wraps the
trust-region solver; the linear system is a closed-form testbed whose
sensitivity is exactly constant, which makes the frozen-tangent backward
pass exact there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sensitivity
from .errors import EquilibriumSolveError
from .ledger import BudgetLedger
from .strip import StripModel
from .trust_region import EquilibriumResult, SolveStatus, TrustRegionSettings, solve_equilibrium


class StripSystem:
    """Discrete elastic strip under clamped boundary control."""

    def __init__(self, model: StripModel, settings: TrustRegionSettings | None = None):
        self.model = model
        self.settings = settings or TrustRegionSettings()

    @property
    def free_dim(self) -> int:
        return self.model.free_dof_count

    @property
    def boundary_dim(self) -> int:
        return self.model.boundary_dof_count

    def solve(self, z: np.ndarray, init: np.ndarray,
              ledger: BudgetLedger | None = None) -> EquilibriumResult:
        result = solve_equilibrium(self.model, z, init, self.settings, ledger)
        if not result.converged:
            raise EquilibriumSolveError(
                f"equilibrium solve ended with {result.status.value} "
                f"(residual {result.residual_norm:.3e})")
        return result

    def sensitivity_context(self, eq: EquilibriumResult, z: np.ndarray):
        return sensitivity.build_context(self.model, z, eq,
                                         shift=self.settings.jacobi_shift)


@dataclass
class _LinearContext:
    m: np.ndarray

    def st_product(self, v, ledger: BudgetLedger | None = None):
        v = np.asarray(v, float)
        if ledger is not None:
            ledger.linear_solves += 1 if v.ndim == 1 else v.shape[1]
        return self.m.T @ v

    def tangent_product(self, u, ledger: BudgetLedger | None = None):
        u = np.asarray(u, float)
        if ledger is not None:
            ledger.linear_solves += 1 if u.ndim == 1 else u.shape[1]
        return self.m @ u


class LinearEquilibriumSystem:
    """Closed-form equilibrium ``x*(z) = M z + c`` (residual x - Mz - c).

    The sensitivity is the constant matrix ``M``, so proxy-adjoint gradients
    through rollouts on this system must match finite differences exactly
    (up to rounding) for any horizon.
    """

    def __init__(self, m: np.ndarray, offset: np.ndarray | None = None):
        self.m = np.asarray(m, dtype=float)
        self.offset = np.zeros(self.m.shape[0]) if offset is None else np.asarray(offset, float)

    @property
    def free_dim(self) -> int:
        return self.m.shape[0]

    @property
    def boundary_dim(self) -> int:
        return self.m.shape[1]

    def solve(self, z: np.ndarray, init: np.ndarray | None = None,
              ledger: BudgetLedger | None = None) -> EquilibriumResult:
        if ledger is not None:
            ledger.equilibrium_solves += 1
        x = self.m @ np.asarray(z, float) + self.offset
        return EquilibriumResult(
            q_f_star=x, residual_norm=0.0, outer_iterations=0,
            status=SolveStatus.CONVERGED_GRADIENT)

    def sensitivity_context(self, eq: EquilibriumResult, z: np.ndarray) -> _LinearContext:
        return _LinearContext(self.m)
