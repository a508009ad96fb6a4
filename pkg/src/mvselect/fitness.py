"""Weighted multi-objective fitness with per-objective shaping.

fitness = w1 * f1(response_time) + w2 * f2(maintenance_cost) + w3 * f3(memory_usage)

with f1, f2 linear normalizations and f3 a logistic curve centred at ``x0``.
Lower fitness is better. Configurations that break a constraint keep their
shaped score plus ``penalty_coefficient`` times the summed fractional
overruns.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .encoding import Chromosome
from .workload import Constraints, Objectives, Workload


@dataclass(frozen=True)
class FitnessParams:
    """Weights and shaping constants.

    Normalizers, ``x0`` and ``sigmoid_scale`` left as ``None`` are filled in
    from the workload by :meth:`resolve`: the normalizers from
    :func:`default_normalizers`, ``x0`` as the storage budget and the scale
    as a tenth of it.

    ``literal_memory_sign`` flips f3 so it decreases with memory. That form
    rewards larger configurations and exists only for comparison runs.
    """

    w1: float = 0.5
    w2: float = 0.2
    w3: float = 0.3
    max_response_time_norm: float | None = None
    max_maintenance_cost_norm: float | None = None
    x0: float | None = None
    sigmoid_scale: float | None = None
    penalty_coefficient: float = 10.0
    literal_memory_sign: bool = False

    def __post_init__(self) -> None:
        for name in ("w1", "w2", "w3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.w1 + self.w2 + self.w3 <= 0:
            raise ValueError("at least one objective weight must be positive")
        for name in ("max_response_time_norm", "max_maintenance_cost_norm", "sigmoid_scale"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not self.penalty_coefficient > 0:
            raise ValueError(f"penalty_coefficient must be positive, got {self.penalty_coefficient}")

    @property
    def is_resolved(self) -> bool:
        return None not in (self.max_response_time_norm, self.max_maintenance_cost_norm,
                            self.x0, self.sigmoid_scale)

    def resolve(self, workload: Workload) -> FitnessParams:
        rt_norm, mc_norm = default_normalizers(workload)
        budget = workload.constraints.storage_budget
        return replace(
            self,
            max_response_time_norm=self.max_response_time_norm or rt_norm,
            max_maintenance_cost_norm=self.max_maintenance_cost_norm or mc_norm,
            x0=budget if self.x0 is None else self.x0,
            sigmoid_scale=self.sigmoid_scale or budget / 10.0,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class EvaluatedIndividual:
    chromosome: Chromosome
    objectives: Objectives
    per_query_costs: np.ndarray
    fitness: float
    feasible: bool

    @property
    def total_cost(self) -> float:
        return self.objectives.response_time + self.objectives.maintenance_cost


def default_normalizers(workload: Workload) -> tuple[float, float]:
    """Response time of the empty configuration and maintenance of the full one.

    By monotonicity these are the largest values either objective takes over
    all configurations. A zero normalizer is clamped to 1.0.
    """
    rt = float(workload.base_costs @ workload.weights)
    mc = float(workload.maintenance_costs.sum())
    return (rt if rt > 0 else 1.0, mc if mc > 0 else 1.0)


def _require_resolved(params: FitnessParams) -> None:
    if not params.is_resolved:
        raise ValueError("FitnessParams must be resolved against a workload first")


def shape_response(rt, params: FitnessParams):
    _require_resolved(params)
    return rt / params.max_response_time_norm


def shape_maintenance(mc, params: FitnessParams):
    _require_resolved(params)
    return mc / params.max_maintenance_cost_norm


def _logistic(z):
    # never exponentiates a positive argument
    z = np.asarray(z, dtype=float)
    with np.errstate(under="ignore"):
        e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def shape_memory(mem, params: FitnessParams):
    """Logistic memory pressure: 0.5 at ``x0``, increasing in ``mem``."""
    _require_resolved(params)
    z = (np.asarray(mem, dtype=float) - params.x0) / params.sigmoid_scale
    return _logistic(-z if params.literal_memory_sign else z)


def _violation(rt, mem, constraints: Constraints):
    over = np.maximum(np.asarray(mem, dtype=float) - constraints.storage_budget, 0.0) / constraints.storage_budget
    feasible = np.asarray(mem) <= constraints.storage_budget
    cap = constraints.max_response_time
    if cap is not None:
        over = over + np.maximum(np.asarray(rt, dtype=float) - cap, 0.0) / cap
        feasible = feasible & (np.asarray(rt) <= cap)
    return over, feasible


def fitness_arrays(rt, mc, mem, params: FitnessParams, constraints: Constraints):
    """Vectorized fitness; returns ``(fitness, feasible)`` arrays."""
    base = (params.w1 * shape_response(np.asarray(rt, dtype=float), params)
            + params.w2 * shape_maintenance(np.asarray(mc, dtype=float), params)
            + params.w3 * shape_memory(mem, params))
    over, feasible = _violation(rt, mem, constraints)
    return np.where(feasible, base, base + params.penalty_coefficient * over), feasible


def fitness(objectives: Objectives, params: FitnessParams, constraints: Constraints) -> tuple[float, bool]:
    """Scalar fitness (lower is better) and feasibility of one configuration."""
    f, ok = fitness_arrays(objectives.response_time, objectives.maintenance_cost,
                           objectives.memory_usage, params, constraints)
    return float(f), bool(ok)


def evaluate_bits(workload: Workload, bits: np.ndarray, params: FitnessParams):
    """Evaluate an (N, V) 0/1 matrix.

    Returns ``(per_query, rt, mc, mem, fitness, feasible)`` arrays.
    """
    per_query, rt, mc, mem = workload.objective_arrays(bits)
    fit, feasible = fitness_arrays(rt, mc, mem, params, workload.constraints)
    return per_query, rt, mc, mem, fit, feasible


def case_scores(workload: Workload, per_query: np.ndarray, rt: np.ndarray, fit: np.ndarray,
                params: FitnessParams) -> np.ndarray:
    """Split each individual's fitness into one score per query.

    A query's score is its share of the response-time term plus an equal
    share of everything else (maintenance, memory and penalty terms), so a
    row sums to the individual's fitness. Used as lexicase test cases.
    """
    rt_share = params.w1 * per_query * workload.weights[None, :] / params.max_response_time_norm
    rest = fit - params.w1 * rt / params.max_response_time_norm
    return rt_share + rest[:, None] / per_query.shape[1]


def evaluate_population(workload: Workload, population: Sequence[Chromosome],
                        params: FitnessParams) -> list[EvaluatedIndividual]:
    if not population:
        return []
    bits = np.stack([c.bits for c in population])
    per_query, rt, mc, mem, fit, feasible = evaluate_bits(workload, bits, params)
    per_query.flags.writeable = False
    return [
        EvaluatedIndividual(
            chromosome=c,
            objectives=Objectives(float(rt[i]), float(mc[i]), float(mem[i])),
            per_query_costs=per_query[i],
            fitness=float(fit[i]),
            feasible=bool(feasible[i]),
        )
        for i, c in enumerate(population)
    ]


def evaluate(workload: Workload, chromosome: Chromosome, params: FitnessParams) -> EvaluatedIndividual:
    return evaluate_population(workload, [chromosome], params)[0]
