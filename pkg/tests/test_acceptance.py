"""Exit criteria. Each test prints one PASS/FAIL line (see the session summary)."""

import csv
import json
import time

import numpy as np
import pytest

from mvselect.cli import main
from mvselect.encoding import Chromosome
from mvselect.engine import RunConfig, evolve, exhaustive_oracle, greedy_baseline, pilot_study, random_baseline
from mvselect.fitness import FitnessParams, evaluate_bits, evaluate_population, shape_maintenance, shape_memory, shape_response
from mvselect.operators import (
    CrossoverConfig,
    LexicaseConfig,
    MutationConfig,
    adaptive_mutation_rate,
    blend_crossover,
    lexicase_select,
)
from mvselect.workload import Constraints, GeneratorSpec, Workload, dense_workload, generate_workload

from oracles import ACCEPTANCE_LINES, all_configs, brute_fitness, small_workloads

pytestmark = pytest.mark.acceptance

# every RunReport / trajectory produced in this module, for criteria 2 and 8
REPORTS = []
TRAJECTORIES = []


def record(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" -- {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def tracked(w, cfg):
    report = evolve(w, cfg)
    REPORTS.append((w, report))
    TRAJECTORIES.append([r.best_fitness for r in report.trajectory])
    return report


@pytest.fixture(scope="module")
def oracle_runs():
    start = time.perf_counter()
    rows = []
    for seed in range(20):
        w = generate_workload(GeneratorSpec(num_queries=10, num_views=12, coverage_density=0.3, rng_seed=seed))
        report = tracked(w, RunConfig(population_size=50, generations=200, rng_seed=seed))
        oracle = exhaustive_oracle(w, report.config.fitness)
        rows.append((seed, report.best.fitness, oracle.fitness))
    return rows, time.perf_counter() - start


def test_01_oracle_optimality(oracle_runs):
    rows, elapsed = oracle_runs
    rel = [(ga - opt) / abs(opt) for _, ga, opt in rows]
    hits = sum(r <= 0.01 for r in rel)
    for (seed, ga, opt), r in zip(rows, rel):
        print(f"  seed {seed:2d}: ga {ga:.9g} oracle {opt:.9g} rel {r:.3g}")
    record(1, "GA within 1% of exhaustive optimum on >= 19/20 seeds, < 60 s",
           hits >= 19 and elapsed < 60.0, f"{hits}/20 within 1%, max rel gap {max(rel):.3g}, {elapsed:.1f} s")


def test_03_fitness_matches_longhand():
    worst, count = 0.0, 0
    for w in small_workloads(max_views=10):
        params = FitnessParams().resolve(w)
        configs = all_configs(w.num_views)
        *_, fit, feasible = evaluate_bits(w, np.array(configs), params)
        for c, f, ok in zip(configs, fit, feasible):
            ref, ref_ok = brute_fitness(w, c)
            worst = max(worst, abs(f - ref) / abs(ref))
            count += 1
            assert ok == ref_ok
    record(3, "fitness of all 2^V configs matches longhand formula to rel 1e-12 (V <= 10)",
           worst <= 1e-12, f"{count} configurations, worst rel err {worst:.2e}")


def test_04_shaping_properties():
    params = FitnessParams(max_response_time_norm=1234.5, max_maintenance_cost_norm=67.25,
                           x0=5e14, sigmoid_scale=1e14)
    rts = np.array([0.0, 1.0, 617.25, 1234.5, 4000.0])
    exact_f1 = all(shape_response(x, params) == x / 1234.5 for x in rts)
    exact_f2 = all(shape_maintenance(x, params) == x / 67.25 for x in rts)
    center = abs(shape_memory(5e14, params) - 0.5) <= 1e-12
    mem = np.linspace(0.0, 1e15, 100_001)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        f3 = shape_memory(mem, params)
        # default-style scale (a tenth of a 1 GB budget) saturates but must stay finite and ordered
        tight = FitnessParams(max_response_time_norm=1.0, max_maintenance_cost_norm=1.0, x0=1e9, sigmoid_scale=1e8)
        f3_tight = shape_memory(mem, tight)
    strict = bool(np.all(np.diff(f3) > 0))
    finite = bool(np.all(np.isfinite(f3)) and np.all(np.isfinite(f3_tight)))
    ordered = bool(np.all(np.diff(f3_tight) >= 0))
    record(4, "f1/f2 closed forms exact, f3(x0) = 0.5 +- 1e-12, f3 strictly increasing and finite on [0, 1e15]",
           exact_f1 and exact_f2 and center and strict and finite and ordered,
           f"f1 {exact_f1}, f2 {exact_f2}, center {center}, strict {strict}, finite {finite}, "
           f"saturated-scale non-decreasing {ordered}")


class _Ind:
    def __init__(self, name, costs):
        self.name, self.per_query_costs = name, np.array(costs, dtype=float)


def test_05_lexicase_frequencies():
    pop = [_Ind("A", (1, 9)), _Ind("B", (9, 1)), _Ind("C", (5, 5))]
    rng = np.random.default_rng(2026)
    counts = dict.fromkeys("ABC", 0)
    members = True
    for _ in range(10_000):
        for p in lexicase_select(pop, LexicaseConfig(epsilon_mode="exact"), rng):
            members &= any(p is m for m in pop)
            counts[p.name] += 1
    total = sum(counts.values())
    freq = {k: v / total for k, v in counts.items()}
    ok = abs(freq["A"] - 0.5) <= 0.02 and abs(freq["B"] - 0.5) <= 0.02 and freq["C"] <= 0.02 and members
    record(5, "exact lexicase frequencies A 0.5, B 0.5, C 0 within 0.02; members only", ok,
           ", ".join(f"{k} {v:.4f}" for k, v in freq.items()))


def test_06_crossover_invariant():
    rng = np.random.default_rng(6)
    unanimous_total = unanimous_kept = differing = flipped_to_one = 0
    for _ in range(10_000):
        k = int(rng.integers(2, 5))
        length = int(rng.integers(1, 41))
        parents = [Chromosome(rng.integers(0, 2, length)) for _ in range(k)]
        child = blend_crossover(parents, CrossoverConfig(alpha=float(rng.uniform(0, 2)), num_parents=k), rng)
        stack = np.stack([p.bits for p in parents])
        same = stack.min(axis=0) == stack.max(axis=0)
        unanimous_total += int(same.sum())
        unanimous_kept += int((child.bits[same] == stack[0][same]).sum())
        differing += int((~same).sum())
        flipped_to_one += int(child.bits[~same].sum())
    freq = flipped_to_one / differing
    record(6, "child keeps 100% of unanimous loci; differing-locus frequency 0.50 +- 0.02",
           unanimous_kept == unanimous_total and abs(freq - 0.5) <= 0.02,
           f"unanimous kept {unanimous_kept}/{unanimous_total}, differing-locus ones frequency {freq:.4f}")


def test_07_mutation_bounds():
    cfg = MutationConfig()
    rng = np.random.default_rng(7)
    in_bounds = True
    for _ in range(1000):
        n, length = int(rng.integers(1, 30)), int(rng.integers(1, 50))
        pop = [Chromosome(rng.integers(0, 2, length)) for _ in range(n)]
        rate = adaptive_mutation_rate(pop, cfg)
        in_bounds &= cfg.rate_min <= rate <= cfg.rate_max
    same = adaptive_mutation_rate([Chromosome("011010")] * 7, cfg) == cfg.rate_max
    comp = adaptive_mutation_rate([Chromosome("011010"), Chromosome("100101")], cfg) == cfg.rate_min
    record(7, "adaptive rate within bounds on 1000 populations; identical -> max, complementary -> min",
           in_bounds and same and comp, f"bounds {in_bounds}, identical {same}, complementary {comp}")


def test_09_seeding_contract():
    w = generate_workload(GeneratorSpec(num_queries=22, num_views=40, rng_seed=9))
    cfg = RunConfig(pilot_samples=500, seed_fraction=0.05)
    result = pilot_study(w, cfg, np.random.default_rng(9))
    cutoff = float(np.sort(result.pilot_fitness)[24])
    elites = evaluate_population(w, result.elites, FitnessParams().resolve(w))
    in_pop = result.population[:len(result.elites)] == result.elites
    ok = len(result.elites) == 25 and in_pop and all(e.fitness <= cutoff for e in elites)
    record(9, "500 pilot samples, 5% -> exactly 25 elites, each <= 25th-best pilot fitness", ok,
           f"{len(result.elites)} elites, worst elite {max(e.fitness for e in elites):.9g} vs cutoff {cutoff:.9g}")


@pytest.fixture(scope="module")
def baseline_runs():
    rows = []
    for seed in range(10):
        w = generate_workload(GeneratorSpec(num_queries=22, num_views=40, coverage_density=0.3, rng_seed=seed))
        report = tracked(w, RunConfig(rng_seed=seed))
        params = report.config.fitness
        greedy = greedy_baseline(w, params)
        rand = random_baseline(w, params, 1000, np.random.default_rng(seed))
        rows.append((seed, report.best, greedy, rand))
    return rows


def test_10_baseline_dominance(baseline_runs):
    vs_greedy = vs_random = 0
    for seed, ga, greedy, rand in baseline_runs:
        g_ok = ga.total_cost <= greedy.total_cost
        r_ok = ga.total_cost <= rand.total_cost
        vs_greedy += g_ok
        vs_random += r_ok
        print(f"  seed {seed}: total_cost ga {ga.total_cost:.9g} greedy {greedy.total_cost:.9g} "
              f"random {rand.total_cost:.9g} | fitness ga {ga.fitness:.6g} greedy {greedy.fitness:.6g} "
              f"random {rand.fitness:.6g} | <=greedy {g_ok} <=random {r_ok}")
    record(10, "GA total_cost <= greedy on >= 8/10 and <= random(1000) on 10/10 seeds",
           vs_greedy >= 8 and vs_random == 10, f"greedy {vs_greedy}/10, random {vs_random}/10")


def _run_cli(tmp_path, tag, workload):
    report, traj = tmp_path / f"r{tag}.json", tmp_path / f"t{tag}.csv"
    code = main(["run", str(workload), "--seed", "11", "--generations", "60", "--report", str(report),
                 "--trajectory", str(traj)])
    assert code == 0
    return report, traj


def test_11_cli_determinism(tmp_path):
    workload = tmp_path / "w.json"
    assert main(["generate", "--queries", "22", "--views", "40", "--seed", "5", "-o", str(workload)]) == 0
    r1, t1 = _run_cli(tmp_path, 1, workload)
    r2, t2 = _run_cli(tmp_path, 2, workload)
    docs = []
    for path in (r1, r2):
        doc = json.loads(path.read_text())
        docs.append(doc)
        doc.pop("wall_time_seconds")
    strip = lambda p: "".join(l for l in p.read_text().splitlines(True) if '"wall_time_seconds"' not in l)  # noqa: E731
    for t in (t1, t2):
        with open(t, newline="") as fh:
            TRAJECTORIES.append([float(row["best_fitness"]) for row in csv.DictReader(fh)])
    ok = strip(r1) == strip(r2) and t1.read_bytes() == t2.read_bytes() and docs[0] == docs[1]
    record(11, "two identical cmd_run invocations give byte-identical report (minus wall time) and trajectory", ok)


def test_08_feasibility_guarantee(oracle_runs, baseline_runs):
    # hostile instances on top of every run above: a budget no single view fits and a response-time cap
    rows = [(500.0 + i, 1.0, 10.0 + i, 5.0) for i in range(12)]
    tiny = dense_workload(rows, base_costs=[100.0, 100.0], storage_budget=100.0)
    tracked(tiny, RunConfig(population_size=20, generations=20, pilot_samples=50))
    base = generate_workload(GeneratorSpec(num_queries=10, num_views=16, rng_seed=8))
    capped = Workload(base.queries, base.views,
                      Constraints(base.constraints.storage_budget, 0.45 * float(base.base_costs @ base.weights)))
    tracked(capped, RunConfig(population_size=30, generations=40, pilot_samples=100))
    violations = 0
    for w, report in REPORTS:
        o, cap = report.best.objectives, w.constraints.max_response_time
        if o.memory_usage > w.constraints.storage_budget or (cap is not None and o.response_time > cap):
            violations += 1
        if not report.best.feasible:
            violations += 1
    record(8, "every RunReport.best within storage budget and response-time cap", violations == 0,
           f"{len(REPORTS)} runs, {violations} violations")


def test_02_convergence_invariant(oracle_runs, baseline_runs):
    bad = sum(any(b > a for a, b in zip(t, t[1:])) for t in TRAJECTORIES)
    record(2, "best_fitness non-increasing in every trajectory", len(TRAJECTORIES) > 0 and bad == 0,
           f"{len(TRAJECTORIES)} trajectories, {bad} with an increase")
