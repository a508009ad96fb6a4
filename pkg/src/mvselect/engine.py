"""Genetic search over view configurations, plus baseline searches."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np

from .encoding import Chromosome
from .fitness import EvaluatedIndividual, FitnessParams, case_scores, evaluate_bits, evaluate_population
from .operators import (
    CrossoverConfig,
    LexicaseConfig,
    MutationConfig,
    blend_bits,
    lexicase_indices,
    mean_pairwise_similarity,
    mutate_bits,
    rate_from_similarity,
)
from .workload import Workload

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_VIEWS = 24


class InfeasibleError(RuntimeError):
    """No configuration satisfies the workload constraints."""


@dataclass(frozen=True)
class RunConfig:
    population_size: int = 50
    generations: int = 200
    pilot_samples: int = 500
    pilot_view_min: int = 5
    pilot_view_max: int = 10
    seed_fraction: float = 0.05
    elitism_count: int = 2
    rng_seed: int = 0
    record_all_fitness: bool = False
    fitness: FitnessParams = field(default_factory=FitnessParams)
    lexicase: LexicaseConfig = field(default_factory=LexicaseConfig)
    crossover: CrossoverConfig = field(default_factory=CrossoverConfig)
    mutation: MutationConfig = field(default_factory=MutationConfig)

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if self.generations < 1:
            raise ValueError(f"generations must be >= 1, got {self.generations}")
        if self.pilot_samples < 0:
            raise ValueError(f"pilot_samples must be >= 0, got {self.pilot_samples}")
        if not 0 <= self.pilot_view_min <= self.pilot_view_max:
            raise ValueError("pilot view counts must satisfy 0 <= pilot_view_min <= pilot_view_max")
        if not 0.0 < self.seed_fraction <= 1.0:
            raise ValueError(f"seed_fraction must be in (0, 1], got {self.seed_fraction}")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> RunConfig:
        nested = {"fitness": FitnessParams, "lexicase": LexicaseConfig,
                  "crossover": CrossoverConfig, "mutation": MutationConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown run-config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in doc.items():
            if key in nested:
                sub = nested[key]
                sub_known = {f.name for f in fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise ValueError(f"unknown {key} keys: {sorted(bad)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    population_similarity: float
    mutation_rate_used: float
    all_fitness: tuple[float, ...] | None = None


@dataclass(frozen=True, eq=False)
class RunReport:
    best: EvaluatedIndividual
    trajectory: list[GenerationRecord]
    wall_time_seconds: float
    evaluations: int
    config: RunConfig
    workload_name: str
    repaired: bool = False


# ---------------------------------------------------------------------------
# helpers


def _individual(workload: Workload, bits: np.ndarray, params: FitnessParams) -> EvaluatedIndividual:
    return evaluate_population(workload, [Chromosome(bits)], params)[0]


def _pilot_bits(rng: np.random.Generator, count: int, length: int, lo: int, hi: int) -> np.ndarray:
    """``count`` rows, each with a uniform number of set bits in [lo, hi]."""
    hi = min(hi, length)
    lo = min(lo, hi)
    out = np.zeros((count, length), dtype=np.uint8)
    for row in out:
        k = int(rng.integers(lo, hi + 1))
        row[rng.choice(length, size=k, replace=False)] = 1
    return out


def resolve_params(workload: Workload, params: FitnessParams) -> FitnessParams:
    return params if params.is_resolved else params.resolve(workload)


# ---------------------------------------------------------------------------
# seeding


@dataclass(frozen=True, eq=False)
class PilotResult:
    population: list[Chromosome]
    elites: list[Chromosome]
    pilot_fitness: np.ndarray


def pilot_study(workload: Workload, cfg: RunConfig, rng: np.random.Generator,
                params: FitnessParams | None = None) -> PilotResult:
    """Seed an initial population from the best of a random pilot sample.

    ``ceil(seed_fraction * pilot_samples)`` elites (at most the population
    size) head the population; the rest are fresh draws with the same
    set-bit distribution.
    """
    v = workload.num_views
    if v == 0:
        raise ValueError("workload has no candidate views")
    params = resolve_params(workload, params or cfg.fitness)
    lo, hi = cfg.pilot_view_min, cfg.pilot_view_max
    pilot = _pilot_bits(rng, cfg.pilot_samples, v, lo, hi)
    if cfg.pilot_samples:
        *_, fit, _ = evaluate_bits(workload, pilot, params)
    else:
        fit = np.empty(0)
    n_elite = min(math.ceil(cfg.seed_fraction * cfg.pilot_samples), cfg.population_size)
    elite_rows = np.argsort(fit, kind="stable")[:n_elite]
    elites = [Chromosome(pilot[i]) for i in elite_rows]
    fresh = _pilot_bits(rng, cfg.population_size - n_elite, v, lo, hi)
    population = elites + [Chromosome(row) for row in fresh]
    return PilotResult(population=population, elites=elites, pilot_fitness=fit)


def pilot_seed(workload: Workload, cfg: RunConfig, rng: np.random.Generator) -> list[Chromosome]:
    return pilot_study(workload, cfg, rng).population


# ---------------------------------------------------------------------------
# repair


def repair(workload: Workload, bits: np.ndarray) -> np.ndarray:
    """Drop views until the configuration fits the storage budget.

    Each step removes the materialized view whose removal costs the least
    response time per byte freed; ties go to the lowest view id.
    """
    bits = np.asarray(bits, dtype=np.uint8).copy()
    budget = workload.constraints.storage_budget
    sizes = workload.storage_sizes
    while float(bits @ sizes) > budget:
        on = np.flatnonzero(bits)
        trial = np.repeat(bits[None, :], on.size, axis=0)
        trial[np.arange(on.size), on] = 0
        _, rt_without, _, _ = workload.objective_arrays(trial)
        _, rt_now, _, _ = workload.objective_arrays(bits[None, :])
        ratio = (rt_without - rt_now[0]) / sizes[on]
        bits[on[int(np.argmin(ratio))]] = 0
    return bits


# ---------------------------------------------------------------------------
# main loop


def evolve(workload: Workload, cfg: RunConfig) -> RunReport:
    """Run the genetic search and return the best feasible configuration found.

    Each generation evaluates the whole population, records its statistics,
    keeps the ``elitism_count`` fittest unchanged and fills the remaining
    slots with lexicase-selected, blended and mutated offspring. The mutation
    rate is set once per generation from the population's mean pairwise
    similarity.

    Raises:
        InfeasibleError: nothing evaluated is feasible and dropping views
            cannot meet the response-time cap.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    params = resolve_params(workload, cfg.fitness)
    population = np.stack([c.bits for c in pilot_study(workload, cfg, rng, params).population])
    evaluations = cfg.pilot_samples

    n = cfg.population_size
    n_children = n - cfg.elitism_count
    k = cfg.crossover.num_parents
    best_fit = math.inf
    best_bits: np.ndarray | None = None
    fallback_fit, fallback_bits = math.inf, population[0]
    trajectory: list[GenerationRecord] = []

    for gen in range(cfg.generations):
        per_query, rt, _, _, fit, feasible = evaluate_bits(workload, population, params)
        evaluations += n
        if cfg.lexicase.case_scores == "fitness_share":
            cases = case_scores(workload, per_query, rt, fit, params)
        else:
            cases = per_query

        i_min = int(np.argmin(fit))
        if fit[i_min] < fallback_fit:
            fallback_fit, fallback_bits = float(fit[i_min]), population[i_min].copy()
        if feasible.any():
            feas_idx = np.flatnonzero(feasible)
            j = int(feas_idx[np.argmin(fit[feas_idx])])
            if fit[j] < best_fit:
                best_fit, best_bits = float(fit[j]), population[j].copy()

        similarity = mean_pairwise_similarity(population)
        rate = rate_from_similarity(similarity, cfg.mutation)
        trajectory.append(GenerationRecord(
            generation=gen,
            best_fitness=float(fit[i_min]),
            mean_fitness=float(fit.mean()),
            population_similarity=similarity,
            mutation_rate_used=rate,
            all_fitness=tuple(float(x) for x in fit) if cfg.record_all_fitness else None,
        ))
        if gen == cfg.generations - 1:
            break

        order = np.argsort(fit, kind="stable")
        nxt = np.empty_like(population)
        nxt[: cfg.elitism_count] = population[order[: cfg.elitism_count]]
        for c in range(n_children):
            parents = list(lexicase_indices(cases, cfg.lexicase, rng))
            while len(parents) < k:
                parents.extend(lexicase_indices(cases, cfg.lexicase, rng))
            child = blend_bits(population[parents[:k]], cfg.crossover.alpha, rng)
            nxt[cfg.elitism_count + c] = mutate_bits(child, rate, rng)
        population = nxt

    repaired = False
    if best_bits is None:
        candidate = repair(workload, fallback_bits)
        best = _individual(workload, candidate, params)
        if not best.feasible:
            raise InfeasibleError("no feasible configuration found; the response-time cap cannot be met "
                                  "within the storage budget")
        repaired = True
        logger.info("no feasible individual evaluated; repaired best candidate")
    else:
        best = _individual(workload, best_bits, params)

    return RunReport(
        best=best,
        trajectory=trajectory,
        wall_time_seconds=time.perf_counter() - start,
        evaluations=evaluations,
        config=replace(cfg, fitness=params),
        workload_name=workload.name,
        repaired=repaired,
    )


# ---------------------------------------------------------------------------
# baselines


def exhaustive_oracle(workload: Workload, params: FitnessParams, chunk: int = 1 << 16) -> EvaluatedIndividual:
    """Minimum-fitness feasible configuration over all 2^V candidates.

    Ties go to the lexicographically smallest bitstring.
    """
    v = workload.num_views
    if v > EXHAUSTIVE_MAX_VIEWS:
        raise ValueError(f"exhaustive search limited to {EXHAUSTIVE_MAX_VIEWS} views, workload has {v}")
    params = resolve_params(workload, params)
    # bit 0 is the most significant so integer order equals bitstring order
    shifts = np.arange(v - 1, -1, -1, dtype=np.int64)
    best_fit, best_code = math.inf, -1
    for lo in range(0, 1 << v, chunk):
        codes = np.arange(lo, min(lo + chunk, 1 << v), dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        *_, fit, feasible = evaluate_bits(workload, bits, params)
        fit = np.where(feasible, fit, np.inf)
        i = int(np.argmin(fit))
        if fit[i] < best_fit:
            best_fit, best_code = float(fit[i]), int(codes[i])
    if best_code < 0:
        raise InfeasibleError("no configuration satisfies the workload constraints")
    bits = ((best_code >> shifts) & 1).astype(np.uint8)
    return _individual(workload, bits, params)


def greedy_baseline(workload: Workload, params: FitnessParams) -> EvaluatedIndividual:
    """Add the single most fitness-reducing storage-feasible view until none helps."""
    params = resolve_params(workload, params)
    v = workload.num_views
    budget = workload.constraints.storage_budget
    bits = np.zeros(v, dtype=np.uint8)
    *_, fit, _ = evaluate_bits(workload, bits[None, :], params)
    current = float(fit[0])
    while True:
        off = np.flatnonzero(bits == 0)
        if off.size == 0:
            break
        trial = np.repeat(bits[None, :], off.size, axis=0)
        trial[np.arange(off.size), off] = 1
        _, _, _, mem, fit, _ = evaluate_bits(workload, trial, params)
        fit = np.where(mem <= budget, fit, np.inf)
        i = int(np.argmin(fit))
        if not fit[i] < current:
            break
        bits, current = trial[i], float(fit[i])
    return _individual(workload, bits, params)


def random_baseline(workload: Workload, params: FitnessParams, samples: int,
                    rng: np.random.Generator) -> EvaluatedIndividual:
    """Best of ``samples`` uniform random configurations.

    Feasible samples are preferred; if none is feasible the lowest
    (penalized) fitness sample is returned with ``feasible`` false.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    params = resolve_params(workload, params)
    bits = (rng.random((samples, workload.num_views)) < 0.5).astype(np.uint8)
    *_, fit, feasible = evaluate_bits(workload, bits, params)
    ranked = np.where(feasible, fit, np.inf)
    i = int(np.argmin(ranked)) if feasible.any() else int(np.argmin(fit))
    return _individual(workload, bits[i], params)

