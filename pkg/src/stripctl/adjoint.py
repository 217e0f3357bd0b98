"""Frozen-tangent proxy-adjoint backward pass.

Given a rollout of exact equilibria, the backward recursion produces per-step
control gradients using only transpose sensitivity products at the realized
states; the sensitivity is treated as locally constant (no second-order
equilibrium derivatives).  The recursion is the exact discrete adjoint of the
proxy transition

    x_{k+1} = x_k + dlam * S_k f(z_k, u_k),
    z_{k+1} = z_k + dlam * f(z_k, u_k),

so on systems with genuinely constant sensitivity the gradient is exact.
With costates ``a_k = dL/dx_k`` and ``g_k = dL/dz_k``:

    a_K = d(phi)/dx,   g_K = d(phi)/dz
    d_k   = g_{k+1} + S_k^T a_{k+1}
    dL/du_k = dlam * B_k^T d_k
    a_k   = a_{k+1} + w_k * dl/dx_k
    g_k   = g_{k+1} + dlam * A_k^T d_k + w_k * dl/dz_k

with per-step weights ``w_k = dlam`` implementing the running integral as a
left Riemann sum over realized steps (terminal step excluded).  One transpose
product per step, against the accumulated x-costate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SensitivityUnavailableError
from .ledger import BudgetLedger

# Loss callables return (value, d/dx, d/dz); running losses also take the
# global continuation progress for reference-curve lookups.
TerminalLoss = Callable[[np.ndarray, np.ndarray], tuple]
RunningLoss = Callable[[np.ndarray, np.ndarray, float], tuple]


@dataclass
class ObjectiveSpec:
    """Terminal and/or running objective over a rollout."""

    terminal: Optional[TerminalLoss] = None
    running: Optional[RunningLoss] = None


def objective_value(trace, obj: ObjectiveSpec) -> float:
    """Loss on a rollout: phi at the end plus the weighted running sum."""
    total = 0.0
    if obj.terminal is not None:
        total += obj.terminal(trace.x[-1], trace.z[-1])[0]
    if obj.running is not None:
        for k in range(trace.steps):
            total += trace.dlam * obj.running(trace.x[k], trace.z[k], trace.global_lambdas[k])[0]
    return float(total)


def backward_pass(trace, obj: ObjectiveSpec, ledger: BudgetLedger | None = None) -> np.ndarray:
    """Per-step control gradients dL/du_k, shape (steps, control_dim).

    A sensitivity failure aborts with the offending step index attached, so
    a receding-horizon caller can shorten the segment.
    """
    k_steps = trace.steps
    dlam = trace.dlam

    if obj.terminal is not None:
        _, a, g = obj.terminal(trace.x[-1], trace.z[-1])
        a = np.asarray(a, dtype=float).copy()
        g = np.asarray(g, dtype=float).copy()
    else:
        a = np.zeros(trace.x.shape[1])
        g = np.zeros(trace.z.shape[1])

    du = np.zeros((k_steps, trace.u.shape[1]))
    for k in range(k_steps - 1, -1, -1):
        if np.any(a):
            s_a = _context(trace, k).st_product(a, ledger=ledger)
        else:
            s_a = np.zeros(trace.z.shape[1])
        d = g + s_a
        du[k] = dlam * (trace.b_jac[k].T @ d)
        a_jac = trace.a_jac[k]
        if a_jac is not None:
            g = g + dlam * (a_jac.T @ d)
        if obj.running is not None:
            _, lx, lz = obj.running(trace.x[k], trace.z[k], trace.global_lambdas[k])
            a = a + dlam * np.asarray(lx, float)
            g = g + dlam * np.asarray(lz, float)
    return du


def _context(trace, k: int):
    try:
        return trace.context(k)
    except SensitivityUnavailableError as exc:
        raise SensitivityUnavailableError(str(exc), step=k) from exc


def parameter_gradient(du: np.ndarray, pullback: Callable[[float, np.ndarray], np.ndarray],
                       lambdas: np.ndarray) -> np.ndarray:
    """Chain rule through the controller: sum of pullbacks of dL/du_k.

    ``pullback(lam, v)`` must return the parameter cotangent of ``<v, u(lam)>``.
    """
    total = None
    for k in range(du.shape[0]):
        g = pullback(float(lambdas[k]), du[k])
        total = g if total is None else total + g
    return total
