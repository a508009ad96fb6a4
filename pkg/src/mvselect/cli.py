"""Command-line front end.

Subcommands: ``generate``, ``run``, ``exhaustive``, ``greedy``, ``compare``
and ``explain``. Run settings come from built-in defaults, then the JSON
run-config file (``--config`` or ``$MVSELECT_CONFIG``), then ``--set`` and
the dedicated flags, each layer overriding the one before.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .encoding import Chromosome, decode
from .engine import (
    EXHAUSTIVE_MAX_VIEWS,
    InfeasibleError,
    RunConfig,
    RunReport,
    evolve,
    exhaustive_oracle,
    greedy_baseline,
    random_baseline,
    resolve_params,
)
from .fitness import EvaluatedIndividual, evaluate, shape_maintenance, shape_memory, shape_response
from .workload import GeneratorSpec, WorkloadError, generate_workload, load_workload, save_workload

log = logging.getLogger("mvselect")

FORMAT_VERSION = 1
CONFIG_ENV = "MVSELECT_CONFIG"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4

TRAJECTORY_COLUMNS = ("generation", "best_fitness", "mean_fitness", "similarity", "mutation_rate")
COMPARE_COLUMNS = ("method", "fitness", "response_time", "maintenance_cost", "memory_usage",
                   "total_cost", "wall_time_seconds")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION) -> None:
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# config handling


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Apply ``key=value`` / ``section.key=value`` overrides to a config dict."""
    doc = json.loads(json.dumps(doc))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise CliError(f"override must look like key=value, got {item!r}")
        target = doc
        *parents, leaf = key.split(".")
        for part in parents:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise CliError(f"cannot override {key!r}: {part!r} is not a section")
        target[leaf] = _parse_value(raw)
    return doc


def load_run_config(path: str | None, overrides: Sequence[str] = ()) -> RunConfig:
    path = path or os.environ.get(CONFIG_ENV) or None
    doc: dict[str, Any] = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: run config is not valid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise CliError(f"{path}: run config must be a JSON object")
        doc.pop("format_version", None)
    doc = apply_overrides(doc, overrides)
    try:
        return RunConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid run config: {exc}") from exc


def _flag_overrides(args: argparse.Namespace) -> list[str]:
    out = list(getattr(args, "set", None) or [])
    for flag, key in (("seed", "rng_seed"), ("generations", "generations"),
                      ("population_size", "population_size")):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"{key}={value}")
    return out


# ---------------------------------------------------------------------------
# rendering


def _individual_doc(ind: EvaluatedIndividual) -> dict[str, Any]:
    o = ind.objectives
    return {
        "bitstring": str(ind.chromosome),
        "view_ids": sorted(decode(ind.chromosome)),
        "objectives": {"response_time": o.response_time, "maintenance_cost": o.maintenance_cost,
                       "memory_usage": o.memory_usage},
        "total_cost": ind.total_cost,
        "fitness": ind.fitness,
        "feasible": ind.feasible,
    }


def report_to_dict(report: RunReport) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "trajectory_format_version": FORMAT_VERSION,
        "workload": report.workload_name,
        "best": _individual_doc(report.best),
        "repaired": report.repaired,
        "evaluations": report.evaluations,
        "generations": len(report.trajectory),
        "wall_time_seconds": report.wall_time_seconds,
        "config": report.config.to_dict(),
    }


def trajectory_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for rec in report.trajectory:
        writer.writerow([rec.generation, repr(rec.best_fitness), repr(rec.mean_fitness),
                         repr(rec.population_similarity), repr(rec.mutation_rate_used)])
    return buf.getvalue()


def all_fitness_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("generation", "individual", "fitness"))
    for rec in report.trajectory:
        for i, f in enumerate(rec.all_fitness or ()):
            writer.writerow([rec.generation, i, repr(f)])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    spec = GeneratorSpec(
        num_queries=args.queries,
        num_views=args.views,
        coverage_density=args.density,
        rng_seed=args.seed,
        budget_fraction=args.budget_fraction,
    )
    w = generate_workload(spec)
    save_workload(w, args.output)
    print(f"wrote {args.output}: Q={w.num_queries} V={w.num_views} "
          f"storage_budget={w.constraints.storage_budget!r}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    w = load_workload(args.workload)
    cfg = load_run_config(args.config, _flag_overrides(args))
    if args.all_fitness:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "record_all_fitness": True})
    report = evolve(w, cfg)
    _write(args.report, _dump_json(report_to_dict(report)))
    _write(args.trajectory, trajectory_csv(report))
    if args.all_fitness:
        _write(args.all_fitness, all_fitness_csv(report))
    best = report.best
    print(f"best {best.chromosome} fitness={best.fitness!r} total_cost={best.total_cost!r} "
          f"evaluations={report.evaluations} wall_time={report.wall_time_seconds:.3f}s")
    return EXIT_OK


def _single(args: argparse.Namespace, method: str) -> int:
    w = load_workload(args.workload)
    cfg = load_run_config(args.config, _flag_overrides(args))
    params = resolve_params(w, cfg.fitness)
    start = time.perf_counter()
    if method == "exhaustive":
        ind = exhaustive_oracle(w, params)
    else:
        ind = greedy_baseline(w, params)
    doc = {"format_version": FORMAT_VERSION, "method": method, "workload": w.name,
           "best": _individual_doc(ind), "wall_time_seconds": time.perf_counter() - start,
           "fitness_params": params.to_dict()}
    text = _dump_json(doc)
    if args.output:
        _write(args.output, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_exhaustive(args: argparse.Namespace) -> int:
    return _single(args, "exhaustive")


def cmd_greedy(args: argparse.Namespace) -> int:
    return _single(args, "greedy")


def compare_rows(workload_path: str, cfg: RunConfig, random_samples: int) -> list[dict[str, Any]]:
    w = load_workload(workload_path)
    params = resolve_params(w, cfg.fitness)
    rows = []

    def row(method: str, ind: EvaluatedIndividual, seconds: float) -> None:
        o = ind.objectives
        rows.append({"method": method, "fitness": ind.fitness, "response_time": o.response_time,
                     "maintenance_cost": o.maintenance_cost, "memory_usage": o.memory_usage,
                     "total_cost": ind.total_cost, "wall_time_seconds": seconds})

    t = time.perf_counter()
    report = evolve(w, cfg)
    row("ga", report.best, time.perf_counter() - t)
    t = time.perf_counter()
    row("greedy", greedy_baseline(w, params), time.perf_counter() - t)
    t = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    row("random", random_baseline(w, params, random_samples, rng), time.perf_counter() - t)
    if w.num_views <= EXHAUSTIVE_MAX_VIEWS:
        t = time.perf_counter()
        row("exhaustive", exhaustive_oracle(w, params), time.perf_counter() - t)
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, _flag_overrides(args))
    rows = compare_rows(args.workload, cfg, args.random_samples)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    if args.output:
        _write(args.output, buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    w = load_workload(args.workload)
    cfg = load_run_config(args.config, _flag_overrides(args))
    params = resolve_params(w, cfg.fitness)
    text = args.bitstring.strip()
    if len(text) != w.num_views:
        raise CliError(f"bitstring has length {len(text)}; expected {w.num_views} (one bit per view)")
    try:
        chrom = Chromosome.from_string(text)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    ind = evaluate(w, chrom, params)
    o = ind.objectives
    doc = {
        "format_version": FORMAT_VERSION,
        **_individual_doc(ind),
        "per_query_costs": [float(c) for c in ind.per_query_costs],
        "shaped": {"f1": float(shape_response(o.response_time, params)),
                   "f2": float(shape_maintenance(o.maintenance_cost, params)),
                   "f3": float(shape_memory(o.memory_usage, params))},
        "storage_budget": w.constraints.storage_budget,
        "max_response_time": w.constraints.max_response_time,
    }
    if args.json:
        sys.stdout.write(_dump_json(doc))
        return EXIT_OK
    print(f"configuration   {doc['bitstring']}")
    print(f"views           {doc['view_ids']}")
    for q, c in enumerate(doc["per_query_costs"]):
        print(f"  query {q:<4d}    {c!r}")
    print(f"response_time   {o.response_time!r}")
    print(f"maintenance     {o.maintenance_cost!r}")
    print(f"memory_usage    {o.memory_usage!r}")
    print(f"total_cost      {ind.total_cost!r}")
    for k, v in doc["shaped"].items():
        print(f"{k:<16}{v!r}")
    print(f"fitness         {ind.fitness!r}")
    print(f"feasible        {'yes' if ind.feasible else 'no'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON run-config file (default: ${CONFIG_ENV})")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. fitness.w1=0.6 or mutation.rate_max=0.3")
    p.add_argument("--seed", type=int, help="rng seed (rng_seed)")
    p.add_argument("--generations", type=int)
    p.add_argument("--population-size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvselect", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic workload")
    p.add_argument("--queries", type=int, default=22)
    p.add_argument("--views", type=int, default=40)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--budget-fraction", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the genetic search")
    p.add_argument("workload")
    _add_config_flags(p)
    p.add_argument("--report", default="report.json")
    p.add_argument("--trajectory", default="trajectory.csv")
    p.add_argument("--all-fitness", metavar="PATH", help="also write every individual's fitness per generation")
    p.set_defaults(func=cmd_run)

    for name, func, text in (("exhaustive", cmd_exhaustive, "enumerate all configurations"),
                             ("greedy", cmd_greedy, "greedy forward selection")):
        p = sub.add_parser(name, help=text)
        p.add_argument("workload")
        _add_config_flags(p)
        p.add_argument("-o", "--output")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="GA vs greedy, random and (small V) exhaustive")
    p.add_argument("workload")
    _add_config_flags(p)
    p.add_argument("--random-samples", type=int, default=1000)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("explain", help="evaluate one configuration")
    p.add_argument("workload")
    p.add_argument("bitstring")
    _add_config_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (WorkloadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
