"""Matrix-free equilibrium sensitivity products.

At a converged equilibrium the free-DOF response to boundary motion is
``S = -G_x^{-1} G_z`` with ``G_x`` the (symmetric) free-DOF Hessian and
``G_z`` the mixed Jacobian.  ``S`` is never formed: transpose products come
from one adjoint banded solve each, ``S^T v = -G_z^T (G_x^{-1} v)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import strip
from .banded import BandedCholesky, NotPositiveDefiniteError
from .errors import InvalidInputError, SensitivityUnavailableError
from .ledger import BudgetLedger
from .strip import Configuration, StripModel
from .trust_region import EquilibriumResult


@dataclass
class SensitivityContext:
    """Reusable factorization of G_x plus G_z at one converged equilibrium."""

    chol: BandedCholesky
    g_z: sp.csr_matrix
    q_f: np.ndarray
    q_b: np.ndarray

    @property
    def boundary_dim(self) -> int:
        return self.g_z.shape[1]

    @property
    def free_dim(self) -> int:
        return self.g_z.shape[0]

    def st_product(self, v: np.ndarray, ledger: BudgetLedger | None = None) -> np.ndarray:
        """S^T v via one adjoint solve; accepts a vector or a column stack."""
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("non-finite cotangent in sensitivity product")
        if ledger is not None:
            ledger.linear_solves += 1 if v.ndim == 1 else v.shape[1]
        p = self.chol.solve(v)
        return -(self.g_z.T @ p)

    def tangent_product(self, u: np.ndarray, ledger: BudgetLedger | None = None) -> np.ndarray:
        """Forward tangent S u: solve G_x s = -G_z u."""
        u = np.asarray(u, dtype=float)
        if ledger is not None:
            ledger.linear_solves += 1 if u.ndim == 1 else u.shape[1]
        return self.chol.solve(-(self.g_z @ u))


def build_context(model: StripModel, q_b: np.ndarray, eq: EquilibriumResult,
                  shift: float = 1e-12) -> SensitivityContext:
    """Factorize G_x at a converged equilibrium and cache G_z.

    A failed factorization is retried once with a ``shift * I`` diagonal
    shift (rescues numerically semidefinite cases); a second failure raises
    :class:`SensitivityUnavailableError`, signalling stability loss.
    """
    if not eq.converged:
        raise InvalidInputError(
            f"sensitivity context requires a converged equilibrium, got {eq.status}")
    cfg = Configuration(np.asarray(q_b, float), eq.q_f_star).validate(model)
    h = strip.hessian_xx(model, cfg)
    try:
        chol = h.cholesky()
    except NotPositiveDefiniteError:
        try:
            chol = h.shifted(shift).cholesky()
        except NotPositiveDefiniteError as exc:
            raise SensitivityUnavailableError(
                "equilibrium Hessian is not positive definite "
                "(realized equilibrium near stability loss)") from exc
    g_z = strip.jacobian_xz(model, cfg)
    return SensitivityContext(chol=chol, g_z=g_z, q_f=eq.q_f_star.copy(), q_b=cfg.q_b.copy())


def s_transpose_product(ctx: SensitivityContext, v: np.ndarray,
                        ledger: BudgetLedger | None = None) -> np.ndarray:
    return ctx.st_product(v, ledger=ledger)
