"""Forward rollout, continuation dynamics, and receding-horizon training.

A rollout integrates the boundary update ``z_{k+1} = z_k + dlam f(z_k, u_k)``
explicitly while each state ``x_{k+1}`` comes from a warm-started equilibrium
solve, so the whole trajectory sits on one realized branch.  Receding-horizon
training splits the continuation into segments, reinitializes and optimizes
the controller per segment with proxy-adjoint gradients, executes the
segment, and re-anchors at the executed end state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctrl
from .adjoint import ObjectiveSpec, backward_pass, objective_value, parameter_gradient
from .errors import EquilibriumSolveError, InvalidInputError, RolloutError
from .ledger import BudgetLedger


def _rot90(p):
    return np.array([-p[1], p[0]])


class TranslationDynamics:
    """Transverse (global x-axis) displacement rates of both clamped ends.

    ``u = (left_rate, right_rate)``; z-independent, so A vanishes.
    """

    mode = "translation"
    control_dim = 2

    def __init__(self):
        b = np.zeros((8, 2))
        b[0, 0] = b[2, 0] = 1.0  # x slots of nodes 0, 1
        b[4, 1] = b[6, 1] = 1.0  # x slots of nodes n-2, n-1
        self._b = b

    def rates(self, z, u):
        return self._b @ u

    def jacobians(self, z, u):
        return None, self._b


class PlanarPoseDynamics:
    """Planar rates (vx, vy, omega) of the actuated end clamp.

    The rotation rate spins the clamp about the midpoint of its two nodes,
    so A couples the actuated coordinates among themselves.  The other end
    stays passively clamped (zero rates).
    """

    mode = "planar_pose"
    control_dim = 3

    def rates(self, z, u):
        out = np.zeros(8)
        p1, p2 = z[4:6], z[6:8]
        pivot = 0.5 * (p1 + p2)
        v, omega = u[:2], u[2]
        out[4:6] = v + omega * _rot90(p1 - pivot)
        out[6:8] = v + omega * _rot90(p2 - pivot)
        return out

    def jacobians(self, z, u):
        omega = u[2]
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        a = np.zeros((8, 8))
        a[4:6, 4:6] = 0.5 * omega * rot
        a[4:6, 6:8] = -0.5 * omega * rot
        a[6:8, 4:6] = -0.5 * omega * rot
        a[6:8, 6:8] = 0.5 * omega * rot
        b = np.zeros((8, 3))
        p1, p2 = z[4:6], z[6:8]
        pivot = 0.5 * (p1 + p2)
        b[4:6, 0:2] = np.eye(2)
        b[6:8, 0:2] = np.eye(2)
        b[4:6, 2] = _rot90(p1 - pivot)
        b[6:8, 2] = _rot90(p2 - pivot)
        return a, b


def make_dynamics(mode: str):
    if mode == "translation":
        return TranslationDynamics()
    if mode == "planar_pose":
        return PlanarPoseDynamics()
    raise InvalidInputError(f"unknown continuation dynamics mode: {mode}")


@dataclass
class RolloutTrace:
    """Per-step record of a forward rollout plus lazy sensitivity handles."""

    system: object
    dlam: float
    lambdas: np.ndarray  # (K+1,) local controller inputs
    global_lambdas: np.ndarray  # (K+1,) progress used by reference losses
    z: np.ndarray  # (K+1, n_z)
    x: np.ndarray  # (K+1, n_x)
    u: np.ndarray  # (K, d_u)
    a_jac: list  # K entries, (n_z, n_z) or None
    b_jac: list  # K entries, (n_z, d_u)
    results: list  # K+1 solver results (entry 0 may be None: inherited state)
    _contexts: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.u.shape[0]

    def context(self, k: int):
        if k not in self._contexts:
            self._contexts[k] = self.system.sensitivity_context(self.results[k], self.z[k])
        return self._contexts[k]


def rollout(system, dynamics, params: ctrl.ControllerParams, x0, z0, steps: int,
            dlam: float, global_lambdas=None, start_result=None,
            ledger: BudgetLedger | None = None) -> RolloutTrace:
    """Roll the continuation forward on exact warm-started equilibria.

    ``x0`` must already be the converged equilibrium at ``z0``; pass its
    solver result as ``start_result`` to reuse it for step-0 sensitivities.
    Solver failure at step k raises :class:`RolloutError` with that index.
    """
    if ledger is not None:
        ledger.rollouts += 1
    lambdas = np.arange(steps + 1) * dlam
    if global_lambdas is None:
        global_lambdas = lambdas
    global_lambdas = np.asarray(global_lambdas, float)
    if global_lambdas.shape != (steps + 1,):
        raise InvalidInputError("global_lambdas must have steps+1 entries")

    n_z, n_x = np.size(z0), np.size(x0)
    z = np.empty((steps + 1, n_z))
    x = np.empty((steps + 1, n_x))
    u = np.empty((steps, dynamics.control_dim))
    a_jac, b_jac = [], []
    results: list = [start_result]
    z[0] = z0
    x[0] = x0
    for k in range(steps):
        u[k] = ctrl.forward(params, lambdas[k])
        a_k, b_k = dynamics.jacobians(z[k], u[k])
        a_jac.append(a_k)
        b_jac.append(b_k)
        z[k + 1] = z[k] + dlam * dynamics.rates(z[k], u[k])
        try:
            res = system.solve(z[k + 1], x[k], ledger=ledger)
        except EquilibriumSolveError as exc:
            raise RolloutError(f"equilibrium solve failed at step {k + 1}: {exc}",
                               step=k + 1) from exc
        x[k + 1] = res.q_f_star
        results.append(res)

    if results[0] is None and steps > 0:
        results[0] = results[1].__class__(
            q_f_star=x[0].copy(), residual_norm=0.0, outer_iterations=0,
            status=results[1].status)
    return RolloutTrace(system=system, dlam=dlam, lambdas=lambdas,
                        global_lambdas=global_lambdas, z=z, x=x, u=u,
                        a_jac=a_jac, b_jac=b_jac, results=results)


@dataclass
class SegmentPlan:
    """Receding-horizon layout: M segments of H continuation steps each."""

    segment_horizon: int = 10
    segment_count: int = 1
    updates_total: int = 200
    early_stop_patience: int = 10
    early_stop_rel: float = 1e-4
    # no early stop before this many updates: a reinitialized controller needs
    # the Adam warmup before its loss curve is informative
    early_stop_min_updates: int = 25

    def __post_init__(self):
        if self.segment_horizon < 1 or self.segment_count < 1:
            raise InvalidInputError("segment layout must be positive")
        if self.updates_total < 0:
            raise InvalidInputError("update budget must be nonnegative")

    @property
    def dlam(self) -> float:
        return 1.0 / self.segment_horizon

    @property
    def total_steps(self) -> int:
        return self.segment_horizon * self.segment_count

    def updates_for(self, segment_index: int) -> int:
        base = self.updates_total // self.segment_count
        if segment_index == self.segment_count - 1:
            return self.updates_total - base * (self.segment_count - 1)
        return base


@dataclass
class ControllerSpec:
    """Architecture + optimizer settings shared by every method."""

    layer_sizes: tuple
    u_max: np.ndarray
    learning_rate: float = 1e-2

    @property
    def parameter_count(self) -> int:
        return ctrl.parameter_count(self.layer_sizes)


@dataclass
class SegmentOutcome:
    params: ctrl.ControllerParams
    executed: RolloutTrace
    losses: list


def train_segment(system, dynamics, x0, z0, horizon: int, obj: ObjectiveSpec,
                  spec: ControllerSpec, seed: int, segment_index: int = 0,
                  updates: int = 0, plan: SegmentPlan | None = None,
                  global_lambdas=None, start_result=None,
                  ledger: BudgetLedger | None = None,
                  on_update=None) -> SegmentOutcome:
    """Optimize a freshly initialized controller on one continuation segment.

    Runs up to ``updates`` iterations of rollout / backward pass / Adam,
    early-stopping when the segment loss stalls, then executes the segment
    once with the optimized parameters.
    """
    plan = plan or SegmentPlan(segment_horizon=horizon, segment_count=1,
                               updates_total=updates)
    dlam = 1.0 / horizon
    params = ctrl.init_params(spec.layer_sizes, spec.u_max,
                              ctrl.segment_seed(seed, segment_index))
    adam = ctrl.AdamState(dim=params.theta.size, learning_rate=spec.learning_rate)

    losses: list = []
    best = np.inf
    stall = 0
    for step_index in range(updates):
        trace = rollout(system, dynamics, params, x0, z0, horizon, dlam,
                        global_lambdas=global_lambdas, start_result=start_result,
                        ledger=ledger)
        loss = objective_value(trace, obj)
        if ledger is not None:
            ledger.objective_evaluations += 1
        du = backward_pass(trace, obj, ledger=ledger)
        grad = parameter_gradient(
            du, lambda lam, v: ctrl.pullback(params, lam, v), trace.lambdas)
        params = ctrl.adam_step(adam, params, grad)
        if ledger is not None:
            ledger.optimizer_updates += 1
        losses.append(loss)
        if on_update is not None:
            on_update(segment_index, loss)
        if loss < best * (1.0 - plan.early_stop_rel):
            best, stall = loss, 0
        else:
            stall += 1
            if (stall >= plan.early_stop_patience
                    and step_index + 1 >= plan.early_stop_min_updates):
                break

    executed = rollout(system, dynamics, params, x0, z0, horizon, dlam,
                       global_lambdas=global_lambdas, start_result=start_result,
                       ledger=ledger)
    if ledger is not None:
        ledger.execution_rollouts += 1
    return SegmentOutcome(params=params, executed=executed, losses=losses)


@dataclass
class ExecutedRollout:
    """Concatenated executed trajectory across segments."""

    x: np.ndarray  # (total+1, n_x)
    z: np.ndarray  # (total+1, n_z)
    u: np.ndarray  # (total, d_u)
    global_lambdas: np.ndarray  # (total+1,)


def executed_loss(executed: ExecutedRollout, obj: ObjectiveSpec) -> float:
    """Task loss on the concatenated executed rollout (global Riemann weights)."""
    total = 0.0
    if obj.terminal is not None:
        total += obj.terminal(executed.x[-1], executed.z[-1])[0]
    if obj.running is not None:
        k_total = executed.u.shape[0]
        w = 1.0 / k_total
        for k in range(k_total):
            total += w * obj.running(executed.x[k], executed.z[k],
                                     executed.global_lambdas[k])[0]
    return float(total)


@dataclass
class RhcResult:
    executed: ExecutedRollout
    segment_losses: list  # per-segment loss histories
    final_params: ctrl.ControllerParams


def run_rhc(system, dynamics, x0, z0, plan: SegmentPlan, obj: ObjectiveSpec,
            spec: ControllerSpec, seed: int, ledger: BudgetLedger | None = None,
            on_update=None) -> RhcResult:
    """Receding-horizon continuation: train, execute, and shift per segment.

    The controller is reinitialized (deterministically from ``seed`` and the
    segment index) at the start of every segment; the executed end state is
    reused bitwise as the next segment's start.
    """
    h = plan.segment_horizon
    total = plan.total_steps
    x_cur = np.array(x0, dtype=float)
    z_cur = np.array(z0, dtype=float)
    start_result = None

    xs = [x_cur.copy()]
    zs = [z_cur.copy()]
    us = []
    segment_losses = []
    params = None
    carry = 0  # updates saved by early stopping roll forward to later segments
    for m in range(plan.segment_count):
        glam = (m * h + np.arange(h + 1)) / total
        allowance = plan.updates_for(m) + carry
        outcome = train_segment(
            system, dynamics, x_cur, z_cur, h, obj, spec, seed,
            segment_index=m, updates=allowance, plan=plan,
            global_lambdas=glam, start_result=start_result, ledger=ledger,
            on_update=on_update)
        carry = allowance - len(outcome.losses)
        segment_losses.append(outcome.losses)
        params = outcome.params
        trace = outcome.executed
        xs.append(trace.x[1:].copy())
        zs.append(trace.z[1:].copy())
        us.append(trace.u.copy())
        x_cur = trace.x[-1]
        z_cur = trace.z[-1]
        start_result = trace.results[-1]

    executed = ExecutedRollout(
        x=np.vstack([xs[0][None, :], *xs[1:]]),
        z=np.vstack([zs[0][None, :], *zs[1:]]),
        u=np.vstack(us),
        global_lambdas=np.arange(total + 1) / total,
    )
    return RhcResult(executed=executed, segment_losses=segment_losses,
                     final_params=params)
