"""Materialized view selection with a lexicase-driven genetic algorithm."""

from .encoding import Chromosome, decode, encode, hamming_similarity, random_chromosome
from .engine import (
    GenerationRecord,
    InfeasibleError,
    RunConfig,
    RunReport,
    evolve,
    exhaustive_oracle,
    greedy_baseline,
    pilot_seed,
    pilot_study,
    random_baseline,
    repair,
)
from .fitness import (
    EvaluatedIndividual,
    FitnessParams,
    default_normalizers,
    evaluate,
    evaluate_population,
    fitness,
    shape_maintenance,
    shape_memory,
    shape_response,
)
from .operators import (
    CrossoverConfig,
    LexicaseConfig,
    MutationConfig,
    adaptive_mutation_rate,
    blend_crossover,
    lexicase_select,
    mutate,
)
from .workload import (
    CandidateView,
    Constraints,
    GeneratorSpec,
    Objectives,
    Query,
    Workload,
    WorkloadError,
    compute_objectives,
    generate_workload,
    load_workload,
    save_workload,
)

__version__ = "0.1.0"
