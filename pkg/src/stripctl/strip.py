"""Discrete elastic strip model: energies, residual, and Jacobians.

The strip centerline is discretized into ``node_count`` nodes.  The two nodes
at each end are clamped (boundary DOFs ``q_b``, ordered ``[q_0, q_1,
q_{n-2}, q_{n-1}]``); interior nodes are free DOFs ``q_f``.  The residual is
the gradient of the total energy with respect to the free DOFs; its
derivatives w.r.t. free and boundary coordinates feed the equilibrium solver
and the implicit sensitivities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .banded import BandedSymmetricMatrix
from .errors import DegenerateGeometryError, InvalidInputError

BOUNDARY_NODE_COUNT = 4  # two clamped nodes per end


@dataclass(frozen=True)
class StripModel:
    """Geometry, material, and DOF partition of the discretized strip."""

    node_count: int
    rest_edge_length: float  # [m]
    stretch_stiffness: float  # [N]
    bend_stiffness: float  # [N m^2]
    node_masses: np.ndarray  # [kg], one per node
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(2))  # [m/s^2]
    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise InvalidInputError("only planar strips are supported")
        if self.node_count < 5:
            raise InvalidInputError("node_count must be >= 5 (one free interior node)")
        if not (self.rest_edge_length > 0):
            raise InvalidInputError("rest_edge_length must be positive")
        if not (self.stretch_stiffness > 0 and self.bend_stiffness > 0):
            raise InvalidInputError("stiffnesses must be positive")
        masses = np.asarray(self.node_masses, dtype=float)
        if masses.shape != (self.node_count,) or np.any(masses < 0):
            raise InvalidInputError("node_masses must be nonnegative, one per node")
        object.__setattr__(self, "node_masses", masses)
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))

    @property
    def boundary_nodes(self) -> tuple[int, int, int, int]:
        n = self.node_count
        return (0, 1, n - 2, n - 1)

    @property
    def free_nodes(self) -> range:
        return range(2, self.node_count - 2)

    @property
    def free_dof_count(self) -> int:
        return 2 * (self.node_count - 4)

    @property
    def boundary_dof_count(self) -> int:
        return 2 * BOUNDARY_NODE_COUNT

    @property
    def half_bandwidth(self) -> int:
        # bending couples nodes two apart; flattened offset 2*dim + (dim-1)
        return 2 * self.dim + (self.dim - 1)

    @property
    def total_length(self) -> float:
        return (self.node_count - 1) * self.rest_edge_length

    @classmethod
    def uniform(
        cls,
        node_count: int,
        length: float,
        stretch_stiffness: float,
        bend_stiffness: float,
        linear_density: float = 0.0,
        gravity=(0.0, 0.0),
    ) -> "StripModel":
        """Uniformly lumped masses: interior nodes full, end nodes half."""
        dl = length / (node_count - 1)
        masses = np.full(node_count, linear_density * dl)
        masses[0] *= 0.5
        masses[-1] *= 0.5
        return cls(node_count, dl, stretch_stiffness, bend_stiffness, masses,
                   np.asarray(gravity, dtype=float))


@dataclass
class Configuration:
    """Boundary and free coordinates, flat and in canonical node order."""

    q_b: np.ndarray  # (8,) = [q_0, q_1, q_{n-2}, q_{n-1}]
    q_f: np.ndarray  # (2 * (node_count - 4),) = [q_2 .. q_{n-3}]

    def validate(self, model: StripModel) -> "Configuration":
        q_b = np.asarray(self.q_b, dtype=float).ravel()
        q_f = np.asarray(self.q_f, dtype=float).ravel()
        if q_b.shape != (model.boundary_dof_count,):
            raise InvalidInputError(f"q_b has length {q_b.size}, expected {model.boundary_dof_count}")
        if q_f.shape != (model.free_dof_count,):
            raise InvalidInputError(f"q_f has length {q_f.size}, expected {model.free_dof_count}")
        if not (np.all(np.isfinite(q_b)) and np.all(np.isfinite(q_f))):
            raise InvalidInputError("non-finite coordinates")
        return Configuration(q_b, q_f)


def assemble_positions(model: StripModel, cfg: Configuration) -> np.ndarray:
    """Full (node_count, 2) position array from the DOF partition."""
    n = model.node_count
    q = np.empty((n, 2))
    q[0] = cfg.q_b[0:2]
    q[1] = cfg.q_b[2:4]
    q[2 : n - 2] = cfg.q_f.reshape(-1, 2)
    q[n - 2] = cfg.q_b[4:6]
    q[n - 1] = cfg.q_b[6:8]
    return q


def split_positions(model: StripModel, q: np.ndarray) -> Configuration:
    """Inverse of :func:`assemble_positions`."""
    n = model.node_count
    q_b = np.concatenate([q[0], q[1], q[n - 2], q[n - 1]])
    return Configuration(q_b=q_b, q_f=q[2 : n - 2].ravel().copy())


def _free_slot_range(model: StripModel) -> tuple[int, int]:
    return 4, 2 * model.node_count - 4


def energy_terms(model: StripModel, cfg: Configuration) -> tuple[float, float, float]:
    """(stretching, bending, gravity) energies [J]."""
    q = assemble_positions(model, cfg.validate(model))
    return kernels.energy_terms(
        q, model.rest_edge_length, model.stretch_stiffness, model.bend_stiffness,
        model.node_masses, model.gravity,
    )


def total_energy(model: StripModel, cfg: Configuration) -> float:
    return sum(energy_terms(model, cfg))


def gravity_energy(model: StripModel, cfg: Configuration) -> float:
    return energy_terms(model, cfg)[2]


def turning_angle(e_prev, e_next) -> float:
    """Signed angle in (-pi, pi) between consecutive edges; CCW positive."""
    e_prev = np.asarray(e_prev, dtype=float)
    e_next = np.asarray(e_next, dtype=float)
    if np.hypot(*e_prev) == 0.0 or np.hypot(*e_next) == 0.0:
        raise DegenerateGeometryError("zero-length edge in turning angle")
    cross = e_prev[0] * e_next[1] - e_prev[1] * e_next[0]
    dot = float(e_prev @ e_next)
    return math.atan2(cross, dot)


def residual(model: StripModel, cfg: Configuration) -> np.ndarray:
    """Gradient of the total energy w.r.t. the free DOFs [N], analytic."""
    q = assemble_positions(model, cfg.validate(model))
    g = kernels.gradient(
        q, model.rest_edge_length, model.stretch_stiffness, model.bend_stiffness,
        model.node_masses, model.gravity,
    )
    lo, hi = _free_slot_range(model)
    return g[lo:hi]


def _full_hessian_band(model: StripModel, cfg: Configuration) -> np.ndarray:
    q = assemble_positions(model, cfg.validate(model))
    return kernels.hessian_band(
        q, model.rest_edge_length, model.stretch_stiffness, model.bend_stiffness
    )


def hessian_xx_from_positions(model: StripModel, q: np.ndarray) -> BandedSymmetricMatrix:
    """Free-DOF Hessian from a full position array (no validation; hot path)."""
    ab_full = kernels.hessian_band(
        q, model.rest_edge_length, model.stretch_stiffness, model.bend_stiffness
    )
    lo, hi = _free_slot_range(model)
    n_f = hi - lo
    hb = model.half_bandwidth
    ab = ab_full[:, lo:hi].copy()
    for i in range(1, hb + 1):
        # rows spilling past the free block belong to the right clamp
        ab[i, n_f - i :] = 0.0
    return BandedSymmetricMatrix(order=n_f, half_bandwidth=hb, ab=ab)


def hessian_xx(model: StripModel, cfg: Configuration) -> BandedSymmetricMatrix:
    """Banded second derivative of the energy w.r.t. free DOFs."""
    q = assemble_positions(model, cfg.validate(model))
    return hessian_xx_from_positions(model, q)


def jacobian_xz(model: StripModel, cfg: Configuration) -> sp.csr_matrix:
    """Mixed derivative d(residual)/d(q_b), sparse (free-DOF x boundary-DOF).

    Extracted from the full banded Hessian using symmetry; only free nodes
    within stencil distance 2 of a clamp produce nonzero rows.
    """
    ab_full = _full_hessian_band(model, cfg)
    lo, hi = _free_slot_range(model)
    hb = model.half_bandwidth
    n2 = 2 * model.node_count
    rows, cols, vals = [], [], []
    for c in range(4):  # left clamp slots; free rows r > c within the band
        for r in range(lo, min(c + hb, hi - 1) + 1):
            rows.append(r - lo)
            cols.append(c)
            vals.append(ab_full[r - c, c])
    for j, c in enumerate(range(n2 - 4, n2)):  # right clamp slots; r < c
        for r in range(max(c - hb, lo), hi):
            rows.append(r - lo)
            cols.append(4 + j)
            vals.append(ab_full[c - r, r])
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(model.free_dof_count, model.boundary_dof_count)
    )


def curvature_profile(model: StripModel, cfg: Configuration) -> np.ndarray:
    """Signed discrete curvature 2 tan(phi_i/2) / dl at interior nodes [1/m]."""
    q = assemble_positions(model, cfg.validate(model))
    return kernels.curvature_measures(q, model.rest_edge_length) / model.rest_edge_length


def curvature_profile_with_gradients(model: StripModel, cfg: Configuration):
    """Curvature profile plus d(kappa_i)/d(q_{i-1}, q_i, q_{i+1}), shape (n-2, 6)."""
    q = assemble_positions(model, cfg.validate(model))
    kh, grad6 = kernels.curvature_measures_with_gradients(q, model.rest_edge_length)
    dl = model.rest_edge_length
    return kh / dl, grad6 / dl
