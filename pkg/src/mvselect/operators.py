"""Parent selection, crossover and mutation for binary chromosomes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

from .encoding import Chromosome

T = TypeVar("T")

EPSILON_MODES = ("exact", "mad")
CASE_SCORES = ("fitness_share", "query_cost")


@dataclass(frozen=True)
class LexicaseConfig:
    epsilon_mode: str = "mad"
    target_survivors: int = 2
    # what the engine feeds in as per-query cases; see fitness.case_scores
    case_scores: str = "fitness_share"

    def __post_init__(self) -> None:
        if self.case_scores not in CASE_SCORES:
            raise ValueError(f"case_scores must be one of {CASE_SCORES}, got {self.case_scores!r}")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValueError(f"epsilon_mode must be one of {EPSILON_MODES}, got {self.epsilon_mode!r}")
        if self.target_survivors < 2:
            raise ValueError(f"target_survivors must be >= 2, got {self.target_survivors}")


@dataclass(frozen=True)
class CrossoverConfig:
    alpha: float = 0.5
    num_parents: int = 2

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.num_parents < 2:
            raise ValueError(f"num_parents must be >= 2, got {self.num_parents}")


@dataclass(frozen=True)
class MutationConfig:
    rate_min: float = 0.01
    rate_max: float = 0.05

    def __post_init__(self) -> None:
        if not (0.0 <= self.rate_min <= self.rate_max <= 1.0):
            raise ValueError(
                f"mutation bounds must satisfy 0 <= rate_min <= rate_max <= 1, "
                f"got ({self.rate_min}, {self.rate_max})"
            )


# ---------------------------------------------------------------------------
# selection


def _median(x: np.ndarray) -> float:
    # np.median carries heavy per-call overhead on small pools
    s = np.sort(x)
    n = s.size
    return 0.5 * (s[(n - 1) // 2] + s[n // 2])


def _mad(x: np.ndarray) -> float:
    return _median(np.abs(x - _median(x)))


def lexicase_indices(scores: np.ndarray, cfg: LexicaseConfig, rng: np.random.Generator) -> np.ndarray:
    """Lexicase selection on an (N, Q) matrix of per-case costs (lower is better).

    Cases are visited in a uniformly shuffled order. On each case the pool
    keeps the members within epsilon of the pool's best cost, where epsilon
    is 0 in ``exact`` mode and the median absolute deviation of the pool's
    costs on that case in ``mad`` mode. Filtering stops once the pool holds
    at most ``target_survivors`` members or the cases run out. A larger
    pool is subsampled without replacement; a smaller one is padded by
    cycling its members in random order.

    Returns ``target_survivors`` row indices.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError("lexicase selection needs a nonempty (N, Q) score matrix")
    k = cfg.target_survivors
    pool = np.arange(scores.shape[0])
    for case in rng.permutation(scores.shape[1]):
        if pool.size <= k:
            break
        col = scores[pool, case]
        best = col.min()
        if cfg.epsilon_mode == "mad":
            pool = pool[col <= best + _mad(col)]
        else:
            pool = pool[col <= best]
    if pool.size > k:
        return rng.choice(pool, size=k, replace=False)
    order = rng.permutation(pool)
    return np.resize(order, k)


def lexicase_select(population: Sequence[T], cfg: LexicaseConfig, rng: np.random.Generator) -> list[T]:
    """Select ``cfg.target_survivors`` parents from evaluated individuals.

    Each individual must expose ``per_query_costs``; all vectors must share
    one length.
    """
    if not population:
        raise ValueError("cannot select from an empty population")
    lengths = {len(ind.per_query_costs) for ind in population}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent per-query score lengths: {sorted(lengths)}")
    scores = np.stack([np.asarray(ind.per_query_costs, dtype=float) for ind in population])
    return [population[i] for i in lexicase_indices(scores, cfg, rng)]


# ---------------------------------------------------------------------------
# crossover


def blend_bits(parents: np.ndarray, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Localized BLX-alpha on a (k, V) 0/1 parent matrix.

    Loci where every parent agrees are copied. At a differing locus the
    parent range is [0, 1]; a value is drawn from the range widened by
    ``alpha`` on both sides and the child bit is set when it exceeds 0.5.
    """
    parents = np.asarray(parents, dtype=np.uint8)
    child = parents[0].copy()
    differ = np.flatnonzero(parents.min(axis=0) != parents.max(axis=0))
    if differ.size:
        u = rng.uniform(-alpha, 1.0 + alpha, size=differ.size)
        child[differ] = u > 0.5
    return child


def blend_crossover(parents: Sequence[Chromosome], cfg: CrossoverConfig, rng: np.random.Generator) -> Chromosome:
    if len(parents) < 2:
        raise ValueError(f"crossover needs at least 2 parents, got {len(parents)}")
    lengths = {len(p) for p in parents}
    if len(lengths) != 1:
        raise ValueError(f"parent length mismatch: {sorted(lengths)}")
    return Chromosome(blend_bits(np.stack([p.bits for p in parents]), cfg.alpha, rng))


# ---------------------------------------------------------------------------
# mutation


def mean_pairwise_similarity(bits: np.ndarray) -> float:
    """Mean Hamming agreement over all unordered pairs of rows of a 0/1 matrix.

    Counts agreeing pairs column by column, so cost is O(N * V). A single
    row has similarity 1.
    """
    bits = np.asarray(bits, dtype=np.int64)
    n, length = bits.shape
    if n < 2 or length == 0:
        return 1.0
    ones = bits.sum(axis=0)
    zeros = n - ones
    agreeing = (ones * (ones - 1) + zeros * (zeros - 1)) // 2
    return float(agreeing.sum()) / (n * (n - 1) // 2 * length)


def rate_from_similarity(similarity: float, cfg: MutationConfig) -> float:
    rate = cfg.rate_min + (cfg.rate_max - cfg.rate_min) * similarity
    return min(max(rate, cfg.rate_min), cfg.rate_max)


def adaptive_mutation_rate(population: Sequence[Chromosome], cfg: MutationConfig) -> float:
    """Mutation rate rising linearly with mean pairwise similarity."""
    if not population:
        raise ValueError("cannot compute a mutation rate for an empty population")
    return rate_from_similarity(mean_pairwise_similarity(np.stack([c.bits for c in population])), cfg)


def mutate_bits(bits: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    flips = rng.random(bits.shape) < rate
    return np.asarray(bits, dtype=np.uint8) ^ flips.astype(np.uint8)


def mutate(c: Chromosome, rate: float, rng: np.random.Generator) -> Chromosome:
    """Flip each bit independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must be in [0, 1], got {rate}")
    return Chromosome(mutate_bits(c.bits, rate, rng))
