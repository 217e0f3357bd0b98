"""Audited counters for the efficiency comparisons.

Every experiment threads one ledger through the solver, the sensitivity
products, and the optimizers, so evaluation-count contracts (rollouts per
update, linear solves per gradient) can be asserted rather than assumed.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field


@dataclass
class BudgetLedger:
    equilibrium_solves: int = 0
    linear_solves: int = 0
    objective_evaluations: int = 0
    optimizer_updates: int = 0
    rollouts: int = 0
    execution_rollouts: int = 0
    phase_seconds: dict = field(default_factory=dict)

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phase_seconds[name] = (
                self.phase_seconds.get(name, 0.0) + time.perf_counter() - start
            )

    def counts(self) -> dict:
        return {
            "equilibrium_solves": self.equilibrium_solves,
            "linear_solves": self.linear_solves,
            "objective_evaluations": self.objective_evaluations,
            "optimizer_updates": self.optimizer_updates,
            "rollouts": self.rollouts,
            "execution_rollouts": self.execution_rollouts,
        }
