"""Optimization instance: queries, candidate views, constraints.

Workloads are stored as JSON documents::

    {
      "format_version": 1,
      "name": "tpch-like-7",
      "queries": [{"id": 0, "weight": 1.0, "base_cost": 1250.0}, ...],
      "views": [{"id": 0, "storage_size": 3.1e8, "maintenance_cost": 420.0,
                 "answer_costs": [[0, 180.5], [3, 77.0]]}, ...],
      "constraints": {"storage_budget": 4.2e9, "max_response_time": null}
    }

``weight`` defaults to 1.0 when omitted and ``max_response_time`` may be
omitted or null.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

FORMAT_VERSION = 1


class WorkloadError(ValueError):
    """Raised when a workload document is malformed or violates an invariant."""


@dataclass(frozen=True)
class Query:
    id: int
    base_cost: float
    weight: float = 1.0


@dataclass(frozen=True)
class CandidateView:
    id: int
    storage_size: float
    maintenance_cost: float
    # query id -> cost of answering that query from this view
    answer_costs: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Constraints:
    storage_budget: float
    max_response_time: float | None = None


@dataclass(frozen=True)
class Objectives:
    """Raw objective triple of one configuration."""

    response_time: float
    maintenance_cost: float
    memory_usage: float


@dataclass(frozen=True, eq=False)
class Workload:
    """An immutable view-selection instance.

    Construction validates every invariant and raises :class:`WorkloadError`
    naming the first one that fails. Dense numpy views of the cost
    parameters are built lazily and shared by all evaluations.
    """

    queries: tuple[Query, ...]
    views: tuple[CandidateView, ...]
    constraints: Constraints
    name: str = "workload"

    def __post_init__(self) -> None:
        object.__setattr__(self, "queries", tuple(self.queries))
        object.__setattr__(self, "views", tuple(self.views))
        _validate(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Workload):
            return NotImplemented
        return (
            self.name == other.name
            and self.queries == other.queries
            and self.constraints == other.constraints
            and len(self.views) == len(other.views)
            and all(
                a.id == b.id
                and a.storage_size == b.storage_size
                and a.maintenance_cost == b.maintenance_cost
                and dict(a.answer_costs) == dict(b.answer_costs)
                for a, b in zip(self.views, other.views)
            )
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def num_queries(self) -> int:
        return len(self.queries)

    @property
    def num_views(self) -> int:
        return len(self.views)

    @cached_property
    def base_costs(self) -> np.ndarray:
        return _readonly(np.array([q.base_cost for q in self.queries], dtype=float))

    @cached_property
    def weights(self) -> np.ndarray:
        return _readonly(np.array([q.weight for q in self.queries], dtype=float))

    @cached_property
    def storage_sizes(self) -> np.ndarray:
        return _readonly(np.array([v.storage_size for v in self.views], dtype=float))

    @cached_property
    def maintenance_costs(self) -> np.ndarray:
        return _readonly(np.array([v.maintenance_cost for v in self.views], dtype=float))

    @cached_property
    def answer_matrix(self) -> np.ndarray:
        """(V, Q) answer costs; ``inf`` where a view cannot answer a query."""
        mat = np.full((self.num_views, self.num_queries), np.inf)
        for v in self.views:
            for q, c in v.answer_costs.items():
                mat[v.id, q] = c
        return _readonly(mat)

    def per_query_costs(self, bits: np.ndarray) -> np.ndarray:
        """Unweighted cost of each query under one or many configurations.

        ``bits`` is a length-V vector or an (N, V) matrix of 0/1 values; the
        result has shape (Q,) or (N, Q) accordingly.
        """
        bits = np.asarray(bits, dtype=bool)
        single = bits.ndim == 1
        if single:
            bits = bits[None, :]
        if bits.shape[1] != self.num_views:
            raise ValueError(
                f"configuration length {bits.shape[1]} does not match view count {self.num_views}"
            )
        masked = np.where(bits[:, :, None], self.answer_matrix[None, :, :], np.inf)
        costs = np.minimum(masked.min(axis=1), self.base_costs[None, :])
        return costs[0] if single else costs

    def objective_arrays(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized objectives for an (N, V) population.

        Returns ``(per_query, response_time, maintenance, memory)``.
        """
        bits = np.atleast_2d(np.asarray(bits, dtype=bool))
        per_query = self.per_query_costs(bits)
        # row-wise sums rather than matmul: BLAS may round a row differently
        # depending on its position in the batch, which breaks elitism
        response = (per_query * self.weights).sum(axis=1)
        maintenance = np.where(bits, self.maintenance_costs, 0.0).sum(axis=1)
        memory = np.where(bits, self.storage_sizes, 0.0).sum(axis=1)
        return per_query, response, maintenance, memory


def compute_objectives(workload: Workload, config: Any) -> Objectives:
    """Response time, maintenance cost and memory use of one configuration."""
    bits = np.asarray(getattr(config, "bits", config), dtype=bool)
    if bits.ndim != 1 or bits.shape[0] != workload.num_views:
        raise ValueError(
            f"configuration length {bits.shape[-1] if bits.ndim else 0} "
            f"does not match view count {workload.num_views}"
        )
    _, rt, mc, mem = workload.objective_arrays(bits[None, :])
    return Objectives(float(rt[0]), float(mc[0]), float(mem[0]))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _validate(w: Workload) -> None:
    if not w.queries:
        raise WorkloadError("workload must contain at least one query")
    if not w.views:
        raise WorkloadError("workload must contain at least one candidate view")
    for i, q in enumerate(w.queries):
        if q.id != i:
            raise WorkloadError(f"query ids must be contiguous from 0; position {i} has id {q.id}")
        if not _finite(q.base_cost) or q.base_cost <= 0:
            raise WorkloadError(f"query {q.id}: base_cost must be positive, got {q.base_cost!r}")
        if not _finite(q.weight) or q.weight < 0:
            raise WorkloadError(f"query {q.id}: weight must be non-negative, got {q.weight!r}")
    nq = len(w.queries)
    for i, v in enumerate(w.views):
        if v.id != i:
            raise WorkloadError(f"view ids must be contiguous from 0; position {i} has id {v.id}")
        if not _finite(v.storage_size) or v.storage_size <= 0:
            raise WorkloadError(f"view {v.id}: storage_size must be positive, got {v.storage_size!r}")
        if not _finite(v.maintenance_cost) or v.maintenance_cost < 0:
            raise WorkloadError(
                f"view {v.id}: maintenance_cost must be non-negative, got {v.maintenance_cost!r}"
            )
        for q, c in v.answer_costs.items():
            if not isinstance(q, int) or not 0 <= q < nq:
                raise WorkloadError(f"view {v.id}: answer_costs references unknown query {q!r}")
            if not _finite(c) or c <= 0:
                raise WorkloadError(f"view {v.id}: answer cost for query {q} must be positive, got {c!r}")
            if c > w.queries[q].base_cost:
                raise WorkloadError(
                    f"view {v.id}: answer cost {c!r} for query {q} exceeds its base cost "
                    f"{w.queries[q].base_cost!r}"
                )
    c = w.constraints
    if not _finite(c.storage_budget) or c.storage_budget <= 0:
        raise WorkloadError(f"storage_budget must be positive, got {c.storage_budget!r}")
    if c.max_response_time is not None and (not _finite(c.max_response_time) or c.max_response_time <= 0):
        raise WorkloadError(f"max_response_time must be positive when set, got {c.max_response_time!r}")


# ---------------------------------------------------------------------------
# serialization


def workload_to_dict(w: Workload) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "name": w.name,
        "queries": [{"id": q.id, "weight": q.weight, "base_cost": q.base_cost} for q in w.queries],
        "views": [
            {
                "id": v.id,
                "storage_size": v.storage_size,
                "maintenance_cost": v.maintenance_cost,
                "answer_costs": [[q, c] for q, c in sorted(v.answer_costs.items())],
            }
            for v in w.views
        ],
        "constraints": {
            "storage_budget": w.constraints.storage_budget,
            "max_response_time": w.constraints.max_response_time,
        },
    }


def workload_from_dict(doc: Mapping[str, Any]) -> Workload:
    if not isinstance(doc, Mapping):
        raise WorkloadError("workload document must be an object")
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise WorkloadError(f"unsupported workload format_version {version!r}")
    try:
        queries = [
            Query(id=int(q["id"]), base_cost=float(q["base_cost"]), weight=float(q.get("weight", 1.0)))
            for q in doc["queries"]
        ]
        views = []
        for v in doc["views"]:
            pairs = v.get("answer_costs", [])
            if isinstance(pairs, Mapping):
                pairs = pairs.items()
            answer: dict[int, float] = {}
            for q, c in pairs:
                qid = int(q)
                if qid in answer:
                    raise WorkloadError(f"view {v['id']}: duplicate answer cost for query {qid}")
                answer[qid] = float(c)
            views.append(
                CandidateView(
                    id=int(v["id"]),
                    storage_size=float(v["storage_size"]),
                    maintenance_cost=float(v["maintenance_cost"]),
                    answer_costs=answer,
                )
            )
        cons = doc["constraints"]
        mrt = cons.get("max_response_time")
        constraints = Constraints(
            storage_budget=float(cons["storage_budget"]),
            max_response_time=None if mrt is None else float(mrt),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WorkloadError):
            raise
        raise WorkloadError(f"malformed workload document: {exc!r}") from exc
    return Workload(queries=tuple(queries), views=tuple(views), constraints=constraints,
                    name=str(doc.get("name", "workload")))


def load_workload(path: str | Path) -> Workload:
    """Read and validate a workload document.

    Raises:
        OSError: the file cannot be read.
        WorkloadError: the document does not parse or violates an invariant.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkloadError(f"{path}: not valid JSON ({exc})") from exc
    return workload_from_dict(doc)


def save_workload(w: Workload, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(workload_to_dict(w), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of the synthetic TPC-H-like workload generator.

    Each view covers a Bernoulli(coverage_density) subset of the queries,
    re-drawn until nonempty. Answer costs are a uniform fraction of the
    query's base cost and the storage budget is a fraction of the total
    candidate storage.
    """

    num_queries: int = 22
    num_views: int = 40
    coverage_density: float = 0.3
    rng_seed: int = 0
    base_cost_range: tuple[float, float] = (1.0e3, 1.0e6)
    weight_range: tuple[float, float] = (1.0, 1.0)
    storage_range: tuple[float, float] = (1.0e7, 1.0e9)
    maintenance_range: tuple[float, float] = (1.0e5, 1.0e6)
    answer_fraction_range: tuple[float, float] = (0.05, 0.5)
    budget_fraction: float = 0.4

    def validate(self) -> None:
        if self.num_queries < 1:
            raise WorkloadError(f"num_queries must be >= 1, got {self.num_queries}")
        if self.num_views < 1:
            raise WorkloadError(f"num_views must be >= 1, got {self.num_views}")
        if not 0.0 < self.coverage_density <= 1.0:
            raise WorkloadError(f"coverage_density must be in (0, 1], got {self.coverage_density}")
        for label, (lo, hi), floor in (
            ("base_cost_range", self.base_cost_range, 0.0),
            ("storage_range", self.storage_range, 0.0),
        ):
            if not floor < lo <= hi:
                raise WorkloadError(f"{label} must satisfy 0 < lo <= hi, got {(lo, hi)}")
        for label, (lo, hi) in (("weight_range", self.weight_range),
                                ("maintenance_range", self.maintenance_range)):
            if not 0.0 <= lo <= hi:
                raise WorkloadError(f"{label} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        lo, hi = self.answer_fraction_range
        if not 0.0 < lo <= hi <= 1.0:
            raise WorkloadError(f"answer_fraction_range must satisfy 0 < lo <= hi <= 1, got {(lo, hi)}")
        if not 0.0 < self.budget_fraction:
            raise WorkloadError(f"budget_fraction must be positive, got {self.budget_fraction}")


def generate_workload(spec: GeneratorSpec) -> Workload:
    """Draw a random workload; identical specs give identical workloads."""
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    nq, nv = spec.num_queries, spec.num_views
    base = rng.uniform(*spec.base_cost_range, size=nq)
    weight = rng.uniform(*spec.weight_range, size=nq)
    queries = tuple(Query(id=i, base_cost=float(base[i]), weight=float(weight[i])) for i in range(nq))

    views = []
    for v in range(nv):
        covered = rng.random(nq) < spec.coverage_density
        while not covered.any():
            covered = rng.random(nq) < spec.coverage_density
        frac = rng.uniform(*spec.answer_fraction_range, size=nq)
        answer = {int(q): float(min(base[q], frac[q] * base[q])) for q in np.flatnonzero(covered)}
        views.append(
            CandidateView(
                id=v,
                storage_size=float(rng.uniform(*spec.storage_range)),
                maintenance_cost=float(rng.uniform(*spec.maintenance_range)),
                answer_costs=answer,
            )
        )
    total_storage = math.fsum(v.storage_size for v in views)
    return Workload(
        queries=queries,
        views=tuple(views),
        constraints=Constraints(storage_budget=spec.budget_fraction * total_storage),
        name=f"synthetic-q{nq}-v{nv}-d{spec.coverage_density:g}-s{spec.rng_seed}",
    )


def dense_workload(rows: Sequence[Sequence[float | None]], base_costs: Sequence[float],
                      storage_budget: float, name: str = "handmade") -> Workload:
    """Build a workload from dense rows of ``(storage, maintenance, *answer_costs)``.

    Answer costs are listed per query; ``None`` or ``inf`` marks a query the
    view cannot answer.
    """
    queries = tuple(Query(id=i, base_cost=float(b)) for i, b in enumerate(base_costs))
    views = []
    for vid, (storage, maint, *answers) in enumerate(rows):
        costs = {q: float(c) for q, c in enumerate(answers) if c is not None and math.isfinite(c)}
        views.append(CandidateView(id=vid, storage_size=float(storage), maintenance_cost=float(maint),
                                   answer_costs=costs))
    return Workload(queries=queries, views=tuple(views),
                    constraints=Constraints(storage_budget=float(storage_budget)), name=name)
