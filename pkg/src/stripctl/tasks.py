"""Task definitions: losses, reference trajectories, and initial states.

Three task families drive the benchmarks: steering a chosen node to a point
(terminal loss), tracking a reference path with the middle node (running
loss), and forming a target curvature profile in a multistable regime
(terminal loss on the signed curvature).  The strip axis is the y-axis;
transverse actuation is the global x-axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import strip
from .adjoint import ObjectiveSpec
from .errors import InvalidInputError
from .strip import Configuration, StripModel
from .trust_region import EquilibriumResult, SolveStatus, TrustRegionSettings, solve_equilibrium

POINT_TOLERANCE = 1e-6  # [m^2]
TRACKING_TOLERANCE = 1e-6  # [m^2]
CURVATURE_TOLERANCE = 1e-4  # [1/m], integrated
PREDEFORM_COMPRESSION = 0.1  # end-to-end compression fraction for Tasks 1-2


@dataclass
class PointTargetTask:
    kind = "point_target"
    node: int
    target: np.ndarray  # (2,)
    tolerance: float = POINT_TOLERANCE


@dataclass
class TrackingTask:
    kind = "trajectory_tracking"
    node: int
    curve_id: str
    curve_params: dict
    tolerance: float = TRACKING_TOLERANCE


@dataclass
class ShapeTask:
    kind = "shape_formation"
    kappa_star: np.ndarray  # one value per interior node
    tolerance: float = CURVATURE_TOLERANCE


# --------------------------------------------------------------------------
# reference curves

def reference_point(curve_id: str, lam: float, params: dict) -> np.ndarray:
    """Planar reference point at progress ``lam``.

    All curves pass through ``params["anchor"]`` at ``lam = 0``; waveforms
    are right-continuous at their jumps.
    """
    anchor = np.asarray(params["anchor"], dtype=float)
    if curve_id == "sinusoid":
        off = params["amplitude"] * math.sin(2.0 * math.pi * params.get("cycles", 1) * lam)
        return anchor + np.array([off, 0.0])
    if curve_id == "circle":
        r = params["radius"]
        frac = params.get("arc_fraction", 1.0)
        sign = 1.0 if params.get("ccw", True) else -1.0
        theta = sign * 2.0 * math.pi * frac * lam
        center = anchor + np.array([r, 0.0])
        return center + r * np.array([-math.cos(theta), -math.sin(theta)])
    if curve_id == "square":
        a = params["amplitude"]
        period = params.get("period", 0.5)
        if lam == 0.0:
            off = 0.0
        else:
            phase = (lam / period) % 1.0
            off = a if phase < 0.5 else -a
        return anchor + np.array([off, 0.0])
    if curve_id == "triangle":
        a = params["amplitude"]
        period = params.get("period", 0.5)
        phase = (lam / period) % 1.0
        if phase < 0.25:
            off = 4.0 * phase
        elif phase < 0.75:
            off = 2.0 - 4.0 * phase
        else:
            off = 4.0 * phase - 4.0
        return anchor + np.array([a * off, 0.0])
    raise InvalidInputError(f"unknown reference curve: {curve_id}")


def reference_curve_samples(curve_id: str, params: dict, count: int = 101) -> np.ndarray:
    """Dense samples for plotting/CSV export, shape (count, 3): lam, x, y."""
    out = np.empty((count, 3))
    for i, lam in enumerate(np.linspace(0.0, 1.0, count)):
        p = reference_point(curve_id, lam, params)
        out[i] = (lam, p[0], p[1])
    return out


# --------------------------------------------------------------------------
# losses on (x, z) arrays

def _free_slot(model: StripModel, node: int) -> int:
    if node not in model.free_nodes:
        raise InvalidInputError(f"node {node} is not a free node")
    return 2 * (node - 2)


def point_loss(model: StripModel, node: int, target: np.ndarray, x: np.ndarray,
               z: np.ndarray):
    """Half squared distance of a free node to a fixed target."""
    s = _free_slot(model, node)
    d = x[s : s + 2] - target
    dx = np.zeros_like(x)
    dx[s : s + 2] = d
    return 0.5 * float(d @ d), dx, np.zeros(8)


def tracking_loss(model: StripModel, node: int, curve_id: str, curve_params: dict,
                  x: np.ndarray, z: np.ndarray, lam: float):
    """Half squared distance of the tracked node to the reference at ``lam``."""
    s = _free_slot(model, node)
    d = x[s : s + 2] - reference_point(curve_id, lam, curve_params)
    dx = np.zeros_like(x)
    dx[s : s + 2] = d
    return 0.5 * float(d @ d), dx, np.zeros(8)


def curvature_loss(model: StripModel, kappa_star: np.ndarray, x: np.ndarray,
                   z: np.ndarray):
    """Integrated squared curvature mismatch, with analytic gradients.

    Value is ``sum_i (kappa_i - kappa*_i)^2 * dl`` over interior nodes; the
    gradient chains through the tan-half-angle curvature and lands on both
    free and boundary coordinates (angles at nodes 1, n-2 touch the clamps).
    """
    n = model.node_count
    q = np.empty((n, 2))
    q[0], q[1] = z[0:2], z[2:4]
    q[2 : n - 2] = x.reshape(-1, 2)
    q[n - 2], q[n - 1] = z[4:6], z[6:8]
    dl = model.rest_edge_length
    kh, grad6 = strip.kernels.curvature_measures_with_gradients(q, dl)
    kappa = kh / dl
    diff = kappa - kappa_star
    value = float(diff @ diff) * dl

    full = np.zeros((n, 2))
    coeff = 2.0 * diff  # d(value)/d(kh_i): the dl weight cancels kappa = kh/dl
    contrib = coeff[:, None] * grad6
    nodes = np.arange(1, n - 1)
    np.add.at(full, nodes - 1, contrib[:, 0:2])
    np.add.at(full, nodes, contrib[:, 2:4])
    np.add.at(full, nodes + 1, contrib[:, 4:6])
    flat = full.ravel()
    dx = flat[4 : 2 * n - 4].copy()
    dz = np.concatenate([flat[0:4], flat[2 * n - 4 :]])
    return value, dx, dz


def make_objective(model: StripModel, task) -> ObjectiveSpec:
    """Objective callables for the rollout optimizer."""
    if task.kind == "point_target":
        target = np.asarray(task.target, float)

        def terminal(x, z):
            return point_loss(model, task.node, target, x, z)

        return ObjectiveSpec(terminal=terminal)
    if task.kind == "trajectory_tracking":

        def running(x, z, lam):
            return tracking_loss(model, task.node, task.curve_id, task.curve_params,
                                 x, z, lam)

        return ObjectiveSpec(running=running)
    if task.kind == "shape_formation":
        kappa_star = np.asarray(task.kappa_star, float)

        def terminal(x, z):
            return curvature_loss(model, kappa_star, x, z)

        return ObjectiveSpec(terminal=terminal)
    raise InvalidInputError(f"unknown task kind: {task.kind}")


def success_threshold(task) -> float:
    return task.tolerance


# --------------------------------------------------------------------------
# initial states

def straight_state(model: StripModel):
    """Straight strip at rest along +y; exact equilibrium when gravity is off."""
    n = model.node_count
    dl = model.rest_edge_length
    q = np.stack([np.zeros(n), np.arange(n) * dl], axis=1)
    cfg = strip.split_positions(model, q)
    result = EquilibriumResult(
        q_f_star=cfg.q_f.copy(), residual_norm=0.0, outer_iterations=0,
        status=SolveStatus.CONVERGED_GRADIENT)
    return cfg.q_f, cfg.q_b, result


def buckled_state(model: StripModel, compression: float = PREDEFORM_COMPRESSION,
                  branch: int = +1, settings: TrustRegionSettings | None = None):
    """Pre-deformed state for Tasks 1-2: compressed clamps, buckled branch.

    Both clamps move inward along the strip axis by ``compression * L / 2``;
    the equilibrium is solved from a transverse half-sine seed whose sign
    selects the branch.  Deterministic: no randomness enters.
    """
    n = model.node_count
    dl = model.rest_edge_length
    length = model.total_length
    shift = compression * length / 2.0
    q_b = np.array([
        0.0, shift,
        0.0, shift + dl,
        0.0, length - dl - shift,
        0.0, length - shift,
    ])
    y_bot, y_top = shift + dl, length - dl - shift
    t = np.linspace(0.0, 1.0, n - 2)[1:-1]
    amp = branch * (2.0 / math.pi) * math.sqrt(compression) * length * 0.5
    seed = np.stack([amp * np.sin(math.pi * t), y_bot + t * (y_top - y_bot)], axis=1)
    result = solve_equilibrium(model, q_b, seed.ravel(), settings)
    if not result.converged:
        raise InvalidInputError(f"pre-deformed state failed to converge: {result.status}")
    return result.q_f_star, q_b, result


def make_initial_state(task_kind: str, model: StripModel,
                       settings: TrustRegionSettings | None = None):
    """(x0, z0, solver result) for a task family."""
    if task_kind == "shape_formation":
        return straight_state(model)
    return buckled_state(model, settings=settings)


def middle_node(model: StripModel) -> int:
    return (model.node_count - 1) // 2


def node_position(model: StripModel, x: np.ndarray, node: int) -> np.ndarray:
    s = _free_slot(model, node)
    return x[s : s + 2].copy()
