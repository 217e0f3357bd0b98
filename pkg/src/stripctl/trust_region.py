"""Trust-region Newton-CG minimization of the strip energy over free DOFs.

One solve returns a stationary point of the total energy at fixed boundary
coordinates.  Steps come from three routes: exact Newton when the banded
Hessian is SPD and the step fits the radius, a dogleg boundary step when it
does not, and Steihaug PCG (Jacobi preconditioner) when the factorization
fails.  Warm starts make consecutive solves follow one equilibrium branch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import strip
from .banded import BandedSymmetricMatrix, NotPositiveDefiniteError
from .errors import DegenerateGeometryError, EquilibriumSolveError, InvalidInputError
from .ledger import BudgetLedger
from .strip import Configuration, StripModel

RHO_FLOOR = 1e-16  # absolute floor in the ratio denominator
BOUNDARY_FRACTION = 0.999  # ||p|| above this fraction of the radius counts as boundary


@dataclass
class TrustRegionSettings:
    initial_radius: float = 1e-3
    acceptance_threshold: float = 0.1
    shrink_factor: float = 0.5
    expand_factor: float = 2.0
    max_outer_iterations: int = 200
    gradient_tolerance: float = 1e-9
    radius_floor: float = 1e-8
    pcg_max_iterations: int = 200
    jacobi_shift: float = 1e-12
    # Endgame guards. Once the predicted reduction falls below
    # small_reduction_rel of the current energy, the quadratic model is at the
    # cubic-remainder scale and the ratio test stalls on steps that still
    # strictly descend; such steps are accepted so the gradient test can finish
    # the solve. Below polish_rel the energy difference itself is under the
    # evaluation noise floor (sub-ULP ared), so SPD Newton steps are instead
    # accepted on a strict residual-norm decrease.
    small_reduction_rel: float = 1e-7
    polish_rel: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.acceptance_threshold < 1.0):
            raise InvalidInputError("acceptance_threshold must be in (0, 1)")
        if not (self.shrink_factor < 1.0 < self.expand_factor):
            raise InvalidInputError("need shrink_factor < 1 < expand_factor")
        for name in ("initial_radius", "gradient_tolerance", "radius_floor", "jacobi_shift"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")


class SolveStatus(enum.Enum):
    CONVERGED_GRADIENT = "converged_gradient"
    CONVERGED_RADIUS = "converged_radius"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class EquilibriumResult:
    q_f_star: np.ndarray
    residual_norm: float
    outer_iterations: int
    status: SolveStatus
    step_trace: list = field(default_factory=list)  # (rho, radius, step_kind)
    accepted_energies: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED_GRADIENT


def _boundary_tau(p: np.ndarray, d: np.ndarray, radius: float) -> float:
    """Positive root of ||p + tau d|| = radius."""
    dd = float(d @ d)
    pd = float(p @ d)
    pp = float(p @ p)
    disc = pd * pd - dd * (pp - radius * radius)
    return (-pd + np.sqrt(max(disc, 0.0))) / dd


def _steihaug(h: BandedSymmetricMatrix, grad: np.ndarray, radius: float,
              settings: TrustRegionSettings) -> np.ndarray:
    precond = np.abs(h.diagonal()) + settings.jacobi_shift
    gnorm = float(np.linalg.norm(grad))
    forcing = min(0.5, np.sqrt(gnorm)) * gnorm
    p = np.zeros_like(grad)
    r = grad.copy()
    z = r / precond
    d = -z
    rz = float(r @ z)
    for _ in range(settings.pcg_max_iterations):
        hd = h.matvec(d)
        dhd = float(d @ hd)
        if dhd <= 0.0:
            return p + _boundary_tau(p, d, radius) * d
        alpha = rz / dhd
        p_next = p + alpha * d
        if np.linalg.norm(p_next) >= radius:
            return p + _boundary_tau(p, d, radius) * d
        r = r + alpha * hd
        if np.linalg.norm(r) <= forcing:
            return p_next
        z = r / precond
        rz_next = float(r @ z)
        d = -z + (rz_next / rz) * d
        rz = rz_next
        p = p_next
    return p


def trust_region_step(h: BandedSymmetricMatrix, grad: np.ndarray, radius: float,
                      settings: TrustRegionSettings):
    """Approximate minimizer of the local quadratic model within the radius.

    Returns ``(step, step_kind, predicted_reduction)`` with step_kind in
    {"newton", "dogleg", "steihaug"} and predicted_reduction >= 0.
    """
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        return np.zeros_like(grad), "newton", 0.0

    try:
        chol = h.cholesky()
    except NotPositiveDefiniteError:
        chol = None

    if chol is not None:
        p_newton = -chol.solve(grad)
        if np.linalg.norm(p_newton) <= radius:
            p, kind = p_newton, "newton"
        else:
            kind = "dogleg"
            ghg = float(grad @ h.matvec(grad))
            p_cauchy = -(gnorm * gnorm / ghg) * grad
            if np.linalg.norm(p_cauchy) >= radius:
                p = -(radius / gnorm) * grad
            else:
                tau = _boundary_tau(p_cauchy, p_newton - p_cauchy, radius)
                p = p_cauchy + tau * (p_newton - p_cauchy)
    else:
        p, kind = _steihaug(h, grad, radius, settings), "steihaug"

    pred = -(float(grad @ p) + 0.5 * float(p @ h.matvec(p)))
    return p, kind, max(pred, 0.0)


def accept_and_update(energy_old: float, energy_new: float, predicted_reduction: float,
                      radius: float, settings: TrustRegionSettings,
                      step_on_boundary: bool):
    """Step acceptance ratio test and standard radius shrink/expand rules."""
    rho = (energy_old - energy_new) / max(predicted_reduction, RHO_FLOOR)
    accepted = rho >= settings.acceptance_threshold
    if rho < 0.25:
        radius = radius * settings.shrink_factor
    elif rho > 0.75 and step_on_boundary:
        radius = radius * settings.expand_factor
    return accepted, radius, rho


def solve_equilibrium(model: StripModel, q_b: np.ndarray, init: np.ndarray,
                      settings: TrustRegionSettings | None = None,
                      ledger: BudgetLedger | None = None) -> EquilibriumResult:
    """Minimize the total energy over free DOFs at fixed boundary DOFs.

    The first iterate is ``init`` (warm start); every accepted iterate
    strictly decreases the energy.  Non-convergence within the iteration
    budget is reported in ``status``, not raised; degenerate geometry during
    a trial evaluation raises :class:`EquilibriumSolveError`.
    """
    if settings is None:
        settings = TrustRegionSettings()
    cfg = Configuration(np.asarray(q_b, float), np.asarray(init, float)).validate(model)
    if ledger is not None:
        ledger.equilibrium_solves += 1

    q = strip.assemble_positions(model, cfg)
    qflat = q.reshape(-1)
    lo, hi = 4, 2 * model.node_count - 4
    x = cfg.q_f.copy()

    def energy_at(vec):
        qflat[lo:hi] = vec
        return sum(strip.kernels.energy_terms(
            q, model.rest_edge_length, model.stretch_stiffness,
            model.bend_stiffness, model.node_masses, model.gravity))

    def gradient_at(vec):
        qflat[lo:hi] = vec
        return strip.kernels.gradient(
            q, model.rest_edge_length, model.stretch_stiffness,
            model.bend_stiffness, model.node_masses, model.gravity)[lo:hi]

    try:
        energy = energy_at(x)
        grad = gradient_at(x)
    except DegenerateGeometryError as exc:
        raise EquilibriumSolveError(f"degenerate geometry at warm start: {exc}") from exc

    radius = settings.initial_radius
    step_trace: list = []
    accepted_energies: list = []
    it = 0
    while True:
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= settings.gradient_tolerance:
            status = SolveStatus.CONVERGED_GRADIENT
            break
        if radius <= settings.radius_floor:
            status = SolveStatus.CONVERGED_RADIUS
            break
        if it >= settings.max_outer_iterations:
            status = SolveStatus.MAX_ITERATIONS
            break

        qflat[lo:hi] = x
        h = strip.hessian_xx_from_positions(model, q)
        step, kind, pred = trust_region_step(h, grad, radius, settings)
        on_boundary = np.linalg.norm(step) >= BOUNDARY_FRACTION * radius
        try:
            energy_trial = energy_at(x + step)
        except DegenerateGeometryError as exc:
            raise EquilibriumSolveError(
                f"degenerate geometry at trial point (iteration {it}): {exc}") from exc

        if np.isfinite(energy_trial):
            accepted, radius, rho = accept_and_update(
                energy, energy_trial, pred, radius, settings, on_boundary)
            if (not accepted and energy_trial < energy
                    and pred <= settings.small_reduction_rel * abs(energy)):
                accepted = True
        else:
            accepted, radius, rho = False, radius * settings.shrink_factor, -np.inf

        polish = False
        if (not accepted and kind == "newton" and np.isfinite(energy_trial)
                and pred <= settings.polish_rel * abs(energy)):
            # ared is below the energy evaluation noise here; judge the Newton
            # step by the convergence measure itself
            grad_trial = gradient_at(x + step)
            if np.linalg.norm(grad_trial) <= 0.9 * gnorm:
                accepted = polish = True
        step_trace.append((rho, radius, "polish" if polish else kind))
        if accepted:
            x = x + step
            energy = energy_trial
            grad = grad_trial if polish else gradient_at(x)
            if not polish:
                accepted_energies.append(energy)
        it += 1

    return EquilibriumResult(
        q_f_star=x.copy(),
        residual_norm=gnorm,
        outer_iterations=it,
        status=status,
        step_trace=step_trace,
        accepted_energies=accepted_energies,
    )
