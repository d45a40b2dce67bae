"""Cost measures for a finished (or truncated) run."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from stepcert.bounds import horizon
from stepcert.iterators import Termination, Trajectory, pad_iterate


class Measure(str, enum.Enum):
    ITERATION_COUNT = "IterationCount"
    PRIMAL_INTEGRAL = "PrimalIntegral"

    @classmethod
    def parse(cls, value) -> "Measure":
        if isinstance(value, cls):
            return value
        aliases = {"iterations": cls.ITERATION_COUNT, "iteration_count": cls.ITERATION_COUNT,
                   "primal_integral": cls.PRIMAL_INTEGRAL}
        return aliases.get(value) or cls(value)


@dataclass(frozen=True)
class CostValue:
    measure: Measure
    value: float
    horizon_used: int


def iteration_count_cost(traj: Trajectory) -> CostValue:
    if traj.termination is not Termination.GRADIENT_BELOW_NU:
        raise ValueError(
            "iteration count is undefined for a run stopped by max_iters; "
            "use primal_integral_cost for truncated runs"
        )
    return CostValue(Measure.ITERATION_COUNT, float(traj.M), traj.M)


def primal_integral_cost(traj: Trajectory) -> CostValue:
    """Sum of distances to the optimum over the iterates after ``z0``.

    GD sums ``|g^j(z0)|`` for ``j = 1..M``.  CG sums ``|g^i(z1, z0)|`` for
    ``i = 0..M`` where ``g^0 = z1``, so entry ``i`` is iterate ``i + 1`` and
    the last term is already padded to zero: both cover ``z1 .. zM``.
    """
    M = traj.M
    if traj.config.method == "GD":
        terms = [np.linalg.norm(pad_iterate(traj, j)) for j in range(1, M + 1)]
    else:
        terms = [np.linalg.norm(pad_iterate(traj, i + 1)) for i in range(0, M + 1)]
    return CostValue(Measure.PRIMAL_INTEGRAL, float(sum(terms)), M)


def evaluate(traj: Trajectory, measure) -> CostValue:
    if Measure.parse(measure) is Measure.ITERATION_COUNT:
        return iteration_count_cost(traj)
    return primal_integral_cost(traj)


def cost_upper_bound(ctx, measure) -> float:
    """A-priori range of the measure: ``H`` for counts, ``Z * H`` for the integral."""
    H = horizon(ctx)
    if Measure.parse(measure) is Measure.ITERATION_COUNT:
        return H
    return ctx.Z * H
