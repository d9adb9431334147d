"""Three-strategy comparison: exploration, prediction error, primitives, planning.

Every cell (strategy x seed) persists its artifacts under
``<root>/<strategy>/seed<k>/``; the report is rebuilt from those files alone.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import ExperimentConfig
from .explorer import active_filter, head_for, run_exploration
from .model import Network, checkpoint
from .planner import PlanningProblem, bfs_plan, effect_table, execute_plan
from .symbols import DistilledPrimitive, build_library
from .world import WorldConfig, WorldState, ObjectSpec, execute, sample_actions, spawn_random, total_effect_magnitude

log = logging.getLogger(__name__)


class GenerationError(RuntimeError):
    pass


# Independent random streams per seed; exploration uses its own seed sequence.
_TEST_STREAM = 101
_TASK_STREAM = 202
_DISTILL_STREAM = 303
_EXEC_STREAM = 404


def stream(seed: int, which: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), which]))


def generate_test_set(
    world_config: WorldConfig,
    count: int,
    threshold: float,
    rng: np.random.Generator,
    max_attempts: int = 200000,
) -> io.Dataset:
    """Random single-object interactions whose total effect reaches ``threshold``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    O, A, E = [], [], []
    attempts = 0
    while len(O) < count:
        if attempts >= max_attempts:
            raise GenerationError(f"kept only {len(O)} of {count} test rows after {max_attempts} attempts")
        attempts += 1
        state = spawn_random(rng, 1, world_config)
        a = sample_actions(rng, 1)[0]
        e = execute(state, a, world_config, rng).effect
        if total_effect_magnitude(e) >= threshold:
            O.append(state.objects[0].features())
            A.append(a)
            E.append(e)
    return io.Dataset(np.array(O), np.array(A), np.array(E))


def evaluate_prediction_error(net: Network, test_set: io.Dataset) -> np.ndarray:
    """Per-axis mean absolute error; distribution heads are scored by their mean."""
    if len(test_set) == 0:
        return np.zeros(3)
    pred, _ = net.predict(test_set.objects, test_set.actions)
    return np.mean(np.abs(pred - test_set.effects), axis=0)


def _moved(initial: WorldState, goal: np.ndarray, threshold: float) -> bool:
    return bool(np.any(np.linalg.norm(goal - initial.positions, axis=1) > threshold))


def generate_planning_problems(
    world_config: WorldConfig,
    object_count: int,
    n: int,
    rng: np.random.Generator,
    threshold: float = 0.05,
    max_depth: int = 3,
    max_attempts: int = 100000,
) -> list[PlanningProblem]:
    """Feasible-by-construction tasks: the goal is where random actions left the objects.

    Single-object goals come from one action; double-object goals from one
    to ``max_depth`` actions on random targets. Tasks already satisfied at
    the start are redrawn.
    """
    problems = []
    attempts = 0
    while len(problems) < n:
        if attempts >= max_attempts:
            raise GenerationError(f"only {len(problems)} of {n} planning tasks after {max_attempts} attempts")
        attempts += 1
        initial = spawn_random(rng, object_count, world_config)
        state = initial
        k = 1 if object_count == 1 else int(rng.integers(1, max_depth + 1))
        for _ in range(k):
            target = int(rng.integers(0, object_count))
            state = execute(state.copy(target_index=target), sample_actions(rng, 1)[0], world_config, rng).state
        if _moved(initial, state.positions, threshold):
            problems.append(PlanningProblem(initial, state.positions.copy(), threshold, max_depth))
    return problems


def problem_record(problem: PlanningProblem) -> dict:
    return {
        "objects": [[o.s_x, o.s_y, o.d, o.t] for o in problem.initial.objects],
        "initial": problem.initial.positions.tolist(),
        "goal": problem.goal_positions.tolist(),
        "threshold": problem.threshold,
        "max_depth": problem.max_depth,
    }


def problem_from_record(rec: dict) -> PlanningProblem:
    objs = [ObjectSpec(float(a), float(b), float(c), int(t)) for a, b, c, t in rec["objects"]]
    return PlanningProblem(WorldState(objs, np.array(rec["initial"]), 0), np.array(rec["goal"]), rec["threshold"], rec["max_depth"])


def solve_and_execute(net, library, problems, world_config, rng, kind: str) -> list[dict]:
    records = []
    for i, problem in enumerate(problems):
        plan = bfs_plan(net, library, problem)
        rec = {"kind": kind, "task": i, "problem": problem_record(problem), "found": plan.found}
        rec["steps"] = [
            {"code": list(library[s.primitive_index].code), "primitive": s.primitive_index, "target": s.target_index}
            for s in plan.steps
        ]
        rec["predicted_final"] = plan.predicted_final.tolist()
        rec["expanded"] = plan.expanded
        if plan.found:
            table = effect_table(net, problem.initial, library)
            predicted = [table[s.primitive_index, s.target_index] for s in plan.steps]
            ex = execute_plan(plan, library, problem, world_config, predicted, rng)
            rec["executed_final"] = ex.final.positions.tolist()
            rec["success"] = ex.success
            rec["deviations"] = ex.deviations
        else:
            rec["executed_final"] = None
            rec["success"] = False
            rec["deviations"] = []
        records.append(rec)
    return records


@dataclass
class CellPaths:
    root: Path

    @property
    def dataset(self) -> Path:
        return self.root / "dataset.csv"

    @property
    def checkpoint(self) -> Path:
        return self.root / "checkpoint.ckpt"

    @property
    def metrics(self) -> Path:
        return self.root / "metrics.jsonl"

    @property
    def library(self) -> Path:
        return self.root / "library.json"

    @property
    def plans(self) -> Path:
        return self.root / "plans.jsonl"

    @property
    def timing(self) -> Path:
        return self.root / "timing.json"


def cell_paths(root: Path, strategy: str, seed: int) -> CellPaths:
    return CellPaths(Path(root) / strategy / f"seed{seed}")


def test_set_path(root: Path, seed: int) -> Path:
    return Path(root) / f"test_set_seed{seed}.csv"


def tasks_path(root: Path, seed: int) -> Path:
    return Path(root) / f"tasks_seed{seed}.jsonl"


def write_library(path, library: list[DistilledPrimitive], rejected: list[dict], config_hash: str, meta: dict | None = None):
    io.write_json(
        path,
        {
            "config_hash": config_hash,
            "primitives": [p.to_record() for p in library],
            "rejected": rejected,
            "meta": meta or {},
        },
    )


def read_library(path) -> tuple[list[DistilledPrimitive], dict]:
    doc = io.read_json(path)
    return [DistilledPrimitive.from_record(r) for r in doc["primitives"]], doc


def training_rows(dataset: io.Dataset, strategy: str, threshold: float) -> io.Dataset:
    if strategy != "active":
        return dataset
    keep = np.array([active_filter(e, threshold) for e in dataset.effects], dtype=bool)
    return dataset.subset(keep)


def prepare_seed(cfg: ExperimentConfig, root: Path, seed: int) -> tuple[io.Dataset, list, list]:
    """Shared per-seed artifacts: the test set and both planning task lists."""
    h = cfg.hash()
    ts_path = test_set_path(root, seed)
    if ts_path.exists():
        test_set, th = io.read_dataset(ts_path)
        io.check_same_config(h, th)
    else:
        test_set = generate_test_set(
            cfg.world, cfg.evaluation.test_set_size, cfg.world.effect_threshold, stream(seed, _TEST_STREAM),
            cfg.evaluation.max_test_attempts,
        )
        io.write_dataset(ts_path, test_set, h)
    tp = tasks_path(root, seed)
    if tp.exists():
        recs = io.read_jsonl(tp)
        io.check_same_config(h, *[r.get("config_hash", "") for r in recs])
    else:
        rng = stream(seed, _TASK_STREAM)
        p = cfg.planner
        single = generate_planning_problems(cfg.world, 1, p.single_tasks, rng, p.threshold, p.max_depth)
        double = generate_planning_problems(cfg.world, 2, p.double_tasks, rng, p.threshold, p.max_depth)
        recs = [{"config_hash": h, "kind": "single", **problem_record(q)} for q in single]
        recs += [{"config_hash": h, "kind": "double", **problem_record(q)} for q in double]
        io.write_jsonl(tp, recs)
    single = [problem_from_record(r) for r in recs if r["kind"] == "single"]
    double = [problem_from_record(r) for r in recs if r["kind"] == "double"]
    return test_set, single, double


def run_cell(cfg: ExperimentConfig, root: Path, strategy: str, seed: int, single, double) -> None:
    h = cfg.hash()
    paths = cell_paths(root, strategy, seed)
    started = time.perf_counter()
    result = run_exploration(
        cfg.exploration.for_strategy(strategy),
        cfg.world,
        cfg.model.encoder(head_for(strategy)),
        cfg.train.trainer(cfg.exploration.epochs_per_retrain),
        seed=seed,
        dataset_path=paths.dataset,
        config_hash=h,
    )
    meta = {"config_hash": h, "strategy": strategy, "seed": seed}
    checkpoint.save(result.net, paths.checkpoint, meta)
    io.write_jsonl(paths.metrics, result.metrics)

    library, rejected = build_library(
        result.net, result.training_set.actions, stream(seed, _DISTILL_STREAM), cfg.distill, cfg.world
    ) if len(result.training_set) else ([], [])
    write_library(paths.library, library, rejected, h, meta)

    records = plan_tasks(result.net, library, single, double, cfg.world, seed)
    io.write_jsonl(paths.plans, [{"config_hash": h, **r} for r in records])
    # Wall time is kept beside the cell, never in the report, so reports stay reproducible.
    io.write_json(paths.timing, {"config_hash": h, "seconds": time.perf_counter() - started})


def plan_tasks(net, library, single, double, world_config, seed: int) -> list[dict]:
    """Plan and execute both task lists; an empty library fails every task."""
    if not library:
        return [{"kind": k, "task": i, "found": False, "success": False}
                for k, ps in (("single", single), ("double", double)) for i in range(len(ps))]
    rng = stream(seed, _EXEC_STREAM)
    return (solve_and_execute(net, library, single, world_config, rng, "single")
            + solve_and_execute(net, library, double, world_config, rng, "double"))


def _rate(records, kind, key) -> float:
    sel = [r for r in records if r["kind"] == kind]
    return 100.0 * sum(bool(r[key]) for r in sel) / len(sel) if sel else 0.0


def build_report(cfg: ExperimentConfig, root: Path) -> dict:
    """Recompute every report figure from the persisted artifacts."""
    h = cfg.hash()
    rows = {"prediction_error": [], "primitives": [], "planning": []}
    for seed in cfg.seeds:
        test_set, th = io.read_dataset(test_set_path(root, seed))
        io.check_same_config(h, th)
        for strategy in cfg.strategies:
            paths = cell_paths(root, strategy, seed)
            net, meta = checkpoint.load(paths.checkpoint) if paths.checkpoint.exists() else (None, None)
            if net is None:
                raise io.ArtifactError(f"missing checkpoint {paths.checkpoint}")
            library, doc = read_library(paths.library)
            plans = io.read_jsonl(paths.plans)
            io.check_same_config(h, meta.get("config_hash", ""), doc.get("config_hash", ""), *[p.get("config_hash", "") for p in plans])
            mae = evaluate_prediction_error(net, test_set)
            rows["prediction_error"].append({"strategy": strategy, "seed": seed, "mae": [float(v) for v in mae]})
            labels = sorted({p.label for p in library if p.label and p.label != "null"})
            rows["primitives"].append(
                {
                    "strategy": strategy,
                    "seed": seed,
                    "labels": labels,
                    "distinct_non_null": len(labels),
                    "primitives": [
                        {"code": "".join(map(str, p.code)), "label": p.label, "residual": p.residual, "count": p.count}
                        for p in library
                    ],
                    "rejected_codes": len(doc.get("rejected", [])),
                }
            )
            rows["planning"].append(
                {
                    "strategy": strategy,
                    "seed": seed,
                    "single_found": _rate(plans, "single", "found"),
                    "single_success": _rate(plans, "single", "success"),
                    "double_found": _rate(plans, "double", "found"),
                    "double_success": _rate(plans, "double", "success"),
                }
            )
    return {
        "provenance": {"config_hash": h, "seeds": list(cfg.seeds), "strategies": list(cfg.strategies), "version": __version__},
        **rows,
    }


def format_report(report: dict) -> str:
    out = []
    prov = report["provenance"]
    out.append(f"curiosym report  version {prov['version']}  config {prov['config_hash']}  seeds {prov['seeds']}")
    out.append("")
    out.append("Prediction error (mean absolute error, meters)")
    out.append(f"{'strategy':<10} {'seed':>4} {'x':>9} {'y':>9} {'z':>9}")
    for r in report["prediction_error"]:
        x, y, z = r["mae"]
        out.append(f"{r['strategy']:<10} {r['seed']:>4} {x:9.5f} {y:9.5f} {z:9.5f}")
    out.append("")
    out.append("Discovered action primitives")
    for r in report["primitives"]:
        prims = ", ".join(f"{p['code']}:{p['label']}" for p in r["primitives"]) or "-"
        out.append(f"{r['strategy']:<10} {r['seed']:>4} distinct={r['distinct_non_null']}  [{prims}]")
    out.append("")
    out.append("Planning (percent of tasks)")
    out.append(f"{'strategy':<10} {'seed':>4} {'1-found':>8} {'1-exec':>7} {'2-found':>8} {'2-exec':>7}")
    for r in report["planning"]:
        out.append(
            f"{r['strategy']:<10} {r['seed']:>4} {r['single_found']:8.1f} {r['single_success']:7.1f} "
            f"{r['double_found']:8.1f} {r['double_success']:7.1f}"
        )
    return "\n".join(out) + "\n"


def report_records(report: dict) -> list[dict]:
    recs = [{"table": "provenance", **report["provenance"]}]
    for table in ("prediction_error", "primitives", "planning"):
        recs += [{"table": table, **r} for r in report[table]]
    return recs


def write_report(report: dict, root: Path) -> None:
    io.atomic_write_text(Path(root) / "report.txt", format_report(report))
    io.write_jsonl(Path(root) / "report.jsonl", report_records(report))


def cell_complete(cfg: ExperimentConfig, root: Path, strategy: str, seed: int) -> bool:
    """True when the cell's last artifacts exist and carry this config's hash."""
    paths = cell_paths(root, strategy, seed)
    if not (paths.plans.exists() and paths.timing.exists()):
        return False
    recs = io.read_jsonl(paths.plans)
    same = bool(recs) and all(r.get("config_hash") == cfg.hash() for r in recs)
    return same and io.read_json(paths.timing).get("config_hash") == cfg.hash()


def run_comparison(cfg: ExperimentConfig, root, resume: bool = False) -> dict:
    """Run every strategy x seed cell, then build and write the report.

    With ``resume`` set, cells whose artifacts are already complete for this
    config are kept as they are.
    """
    root = Path(root)
    for seed in cfg.seeds:
        test_set, single, double = prepare_seed(cfg, root, seed)
        for strategy in cfg.strategies:
            if resume and cell_complete(cfg, root, strategy, seed):
                log.info("cell %s seed %d already complete", strategy, seed)
                continue
            log.info("cell %s seed %d", strategy, seed)
            run_cell(cfg, root, strategy, seed, single, double)
    report = build_report(cfg, root)
    write_report(report, root)
    return report
